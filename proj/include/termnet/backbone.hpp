#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "termnet/graph.hpp"
#include "termnet/types.hpp"

namespace termnet {

// How "d_xy equals its shortest-path distance" is decided.
//
// rational: near-ties (within kRelativeTolerance) are settled by summing the
//   exact edge ratios along the candidate shortest path, provided the path has
//   at most kMaxExactHops edges; longer paths fall back to the tolerance.
//   Requires every edge to carry an exact ratio; otherwise behaves as
//   floating.
// floating: d_xy is metric iff d_xy - d^C_xy <= kRelativeTolerance * d_xy.
enum class EqualityPolicy { rational, floating };

inline constexpr double kRelativeTolerance = 1e-9;
inline constexpr int kMaxExactHops = 32;

std::string_view to_string(EqualityPolicy policy);
EqualityPolicy parse_equality_policy(std::string_view text);

struct BackboneOptions {
  EqualityPolicy policy = EqualityPolicy::rational;
  unsigned threads = 1;
  // metric_closure refuses graphs with more nodes than this; use
  // metric_backbone, which streams per-source distances, instead.
  std::size_t dense_closure_limit = 20000;
};

enum class EdgeLabel { metric, semi_metric };
std::string_view to_string(EdgeLabel label);

// All-pairs shortest-path distances, stored densely per connected component
// together with the shortest-path trees that produced them.
class ClosureDistances {
 public:
  static constexpr double kInfinity = std::numeric_limits<double>::infinity();

  // Shortest-path length, or +inf when the terms are in different components
  // or not part of the graph.
  double distance(TermId a, TermId b) const;

  std::size_t node_count() const { return position_.size(); }
  std::size_t component_count() const { return components_.size(); }

 private:
  friend ClosureDistances metric_closure(const DistanceGraph&, const BackboneOptions&);
  friend class ClosureAccess;

  struct Component {
    std::vector<std::uint32_t> members;  // local node indices
    // Row-major |members|^2 arrays; row = source, column = target.
    std::vector<double> dist;
    std::vector<std::uint32_t> pred_edge;
    std::vector<std::uint16_t> hops;
  };

  std::vector<TermId> nodes_;
  std::vector<std::uint32_t> component_of_;  // per local node
  std::vector<std::uint32_t> position_;      // index within its component
  std::vector<Component> components_;
  std::size_t edge_count_ = 0;
};

ClosureDistances metric_closure(const DistanceGraph& g, const BackboneOptions& options = {});

struct BackboneResult {
  // Aligned with the source graph's edge list.
  std::vector<EdgeLabel> labels;
  // d_xy / d^C_xy for semi-metric edges (> 1, possibly +inf), nullopt for
  // metric edges.
  std::vector<std::optional<double>> distortion;
  // Metric edges with their original weights; node set equals the source's.
  DistanceGraph backbone;
  double fraction_metric = 1.0;
  EqualityPolicy policy = EqualityPolicy::rational;  // policy actually applied

  std::size_t metric_count() const { return backbone.edges.size(); }
};

BackboneResult extract_backbone(const DistanceGraph& g, const ClosureDistances& closure,
                                const BackboneOptions& options = {});

// Same result as extract_backbone(g, metric_closure(g)) without materializing
// the closure: each source runs a Dijkstra bounded by its longest incident
// edge and classifies its edges immediately.
BackboneResult metric_backbone(const DistanceGraph& g, const BackboneOptions& options = {});

// True iff the backbone's closure equals the closure of `g` on every pair.
bool verify_invariance(const DistanceGraph& g, const BackboneResult& b,
                       const BackboneOptions& options = {});

std::optional<EdgeLabel> edge_label(const DistanceGraph& g, const BackboneResult& b, TermId x,
                                    TermId y);

struct DistortionSummary {
  double min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
};

struct BackboneStats {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  std::size_t metric_edge_count = 0;
  std::size_t semi_metric_edge_count = 0;
  double fraction_metric = 1.0;
  std::size_t components_original = 0;
  std::size_t components_backbone = 0;
  std::optional<DistortionSummary> distortion;  // absent without semi-metric edges
};

BackboneStats backbone_stats(const DistanceGraph& g, const BackboneResult& b);

// Linear-interpolation quantile of sorted values, q in [0, 1].
double quantile(const std::vector<double>& sorted, double q);

}  // namespace termnet
