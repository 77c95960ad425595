#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "termnet/dictionary.hpp"
#include "termnet/graph.hpp"
#include "termnet/tagger.hpp"

namespace termnet {

struct LayerParams {
  UnitPolicy unit_policy;
  std::uint64_t min_count = 1;
  bool embed_text = false;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// One data source's proximity graph plus the units it was counted from.
struct Layer {
  ProximityGraph graph;
  std::vector<AnalysisUnit> units;
  // provenance[i] lists indices into `units` of every unit containing both
  // endpoints of graph.edges[i], ordered by unit_id.
  std::vector<std::vector<std::uint32_t>> provenance;
  LayerParams params;
  // doc_id -> raw text; empty unless the layer was built with embedded text.
  std::map<std::string, std::string> texts;

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct LayerBuildOptions {
  LayerParams params;
  unsigned threads = 1;
};

Layer build_layer(std::string name, std::vector<AnalysisUnit> units, std::size_t n_terms,
                  const LayerBuildOptions& options = {});

// Rebuilds provenance lists for `layer.graph` from `layer.units`.
std::vector<std::vector<std::uint32_t>> build_provenance(const ProximityGraph& graph,
                                                         const std::vector<AnalysisUnit>& units);

// Layers over one shared dictionary. Layer names are unique and usable as
// directory names.
class MultiLayerKG {
 public:
  explicit MultiLayerKG(std::shared_ptr<const Dictionary> dict) : dict_(std::move(dict)) {}

  const Dictionary& dictionary() const { return *dict_; }
  std::shared_ptr<const Dictionary> dictionary_ptr() const { return dict_; }

  // Replaces a same-named layer. Rejects nodes that are not non-blocked
  // dictionary roots.
  void add_layer(std::string name, Layer layer);

  // Throws NotFoundError with a nearest-name suggestion.
  const Layer& layer(std::string_view name) const;
  bool has_layer(std::string_view name) const { return layers_.count(std::string(name)) > 0; }
  std::vector<std::string> layer_names() const;
  const std::map<std::string, Layer, std::less<>>& layers() const { return layers_; }

 private:
  std::shared_ptr<const Dictionary> dict_;
  std::map<std::string, Layer, std::less<>> layers_;
};

void validate_layer_name(std::string_view name);

enum class MergeMode { mean_proximity, max_proximity };
std::string_view to_string(MergeMode mode);
MergeMode parse_merge_mode(std::string_view text);

struct MergePolicy {
  MergeMode mode = MergeMode::mean_proximity;
  std::optional<std::vector<std::string>> layer_subset;  // all layers when absent
  // Average over every selected layer, counting absent edges as p = 0.
  bool mean_absent_as_zero = false;
};

ProximityGraph merge(const MultiLayerKG& kg, const MergePolicy& policy);

// Unit ids (sorted) where x and y co-occur in `layer`.
std::vector<std::string> edge_documents(const MultiLayerKG& kg, std::string_view layer, TermId x,
                                        TermId y);

}  // namespace termnet
