#include "termnet/multilayer.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include <boost/multiprecision/cpp_int.hpp>

#include "termnet/text.hpp"

namespace termnet {
namespace {

using Exact = boost::multiprecision::cpp_rational;

std::uint64_t pack(TermId a, TermId b) {
  return (static_cast<std::uint64_t>(a.value) << 32) | b.value;
}

std::optional<Ratio> to_ratio(const Exact& value) {
  const auto& num = boost::multiprecision::numerator(value);
  const auto& den = boost::multiprecision::denominator(value);
  if (num > std::numeric_limits<std::uint64_t>::max() ||
      den > std::numeric_limits<std::uint64_t>::max()) {
    return std::nullopt;
  }
  return Ratio{num.convert_to<std::uint64_t>(), den.convert_to<std::uint64_t>()};
}

struct Accumulator {
  double sum = 0.0;
  std::size_t layers = 0;
  std::uint64_t count = 0;
  bool exact = true;
  Exact exact_sum = 0;
  const Edge* best = nullptr;
  const Edge* only = nullptr;
};

}  // namespace

std::vector<std::vector<std::uint32_t>> build_provenance(const ProximityGraph& graph,
                                                         const std::vector<AnalysisUnit>& units) {
  std::unordered_map<std::uint64_t, std::uint32_t> edge_index;
  edge_index.reserve(graph.edges.size());
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    edge_index.emplace(pack(graph.edges[i].x, graph.edges[i].y), static_cast<std::uint32_t>(i));
  }
  std::vector<std::uint32_t> order(units.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return units[a].unit_id < units[b].unit_id;
  });
  std::vector<std::vector<std::uint32_t>> provenance(graph.edges.size());
  for (std::uint32_t u : order) {
    const auto& terms = units[u].terms;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      for (std::size_t j = i + 1; j < terms.size(); ++j) {
        auto it = edge_index.find(pack(terms[i], terms[j]));
        if (it != edge_index.end()) provenance[it->second].push_back(u);
      }
    }
  }
  return provenance;
}

Layer build_layer(std::string name, std::vector<AnalysisUnit> units, std::size_t n_terms,
                  const LayerBuildOptions& options) {
  validate_layer_name(name);
  Layer layer;
  layer.params = options.params;
  CountOptions count_options;
  count_options.min_count = options.params.min_count;
  count_options.threads = options.threads;
  const CooccurrenceMatrix m = count_cooccurrence(units, n_terms, count_options);
  layer.graph = proximity(m, std::move(name), units.size());
  layer.units = std::move(units);
  layer.provenance = build_provenance(layer.graph, layer.units);
  return layer;
}

void validate_layer_name(std::string_view name) {
  const bool ok = !name.empty() && name != "." && name != ".." &&
                  std::all_of(name.begin(), name.end(), [](char c) {
                    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                           (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
                  });
  if (!ok) {
    throw UsageError("invalid layer name '" + std::string(name) +
                     "' (allowed: letters, digits, '_', '-', '.')");
  }
}

void MultiLayerKG::add_layer(std::string name, Layer layer) {
  validate_layer_name(name);
  for (TermId t : layer.graph.nodes) {
    if (t.value >= dict_->size() || dict_->entry(t).parent || dict_->entry(t).blocked) {
      throw DataError("layer '" + name + "' contains node " + std::to_string(t.value) +
                      " that is not a non-blocked dictionary root");
    }
  }
  layer.graph.layer_name = name;
  layers_.insert_or_assign(std::move(name), std::move(layer));
}

const Layer& MultiLayerKG::layer(std::string_view name) const {
  auto it = layers_.find(name);
  if (it == layers_.end()) {
    const auto names = layer_names();
    throw NotFoundError("unknown layer '" + std::string(name) + "'" +
                        suggestion_suffix(name, names));
  }
  return it->second;
}

std::vector<std::string> MultiLayerKG::layer_names() const {
  std::vector<std::string> names;
  for (const auto& [name, layer] : layers_) names.push_back(name);
  return names;
}

std::string_view to_string(MergeMode mode) {
  return mode == MergeMode::mean_proximity ? "mean" : "max";
}

MergeMode parse_merge_mode(std::string_view text) {
  if (text == "mean" || text == "mean_proximity") return MergeMode::mean_proximity;
  if (text == "max" || text == "max_proximity") return MergeMode::max_proximity;
  throw UsageError("unknown merge mode '" + std::string(text) + "' (expected mean or max)");
}

ProximityGraph merge(const MultiLayerKG& kg, const MergePolicy& policy) {
  // Accumulate in name order so the result does not depend on subset order.
  std::map<std::string, const Layer*> chosen;
  if (policy.layer_subset) {
    for (const std::string& name : *policy.layer_subset) chosen.emplace(name, &kg.layer(name));
  } else {
    for (const auto& [name, layer] : kg.layers()) chosen.emplace(name, &layer);
  }
  if (chosen.empty()) throw UsageError("merge needs at least one layer");
  std::vector<const Layer*> selected;
  for (const auto& [name, layer] : chosen) selected.push_back(layer);

  std::unordered_map<std::uint64_t, Accumulator> acc;
  std::vector<TermId> nodes;
  std::uint64_t unit_count = 0;
  for (const Layer* layer : selected) {
    unit_count += layer->graph.unit_count;
    nodes.insert(nodes.end(), layer->graph.nodes.begin(), layer->graph.nodes.end());
    for (const Edge& e : layer->graph.edges) {
      Accumulator& a = acc[pack(e.x, e.y)];
      a.sum += e.weight;
      if (a.best == nullptr || e.weight > a.best->weight ||
          (e.weight == a.best->weight && e.exact && a.best->exact &&
           Exact(e.exact->num, e.exact->den) > Exact(a.best->exact->num, a.best->exact->den))) {
        a.best = &e;
      }
      a.count += e.count;
      a.only = a.layers == 0 ? &e : nullptr;
      ++a.layers;
      if (e.exact && a.exact) {
        a.exact_sum += Exact(e.exact->num, e.exact->den);
      } else {
        a.exact = false;
      }
    }
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  const std::size_t divisor_all = selected.size();
  ProximityGraph out;
  out.layer_name = std::string("merged:") + std::string(to_string(policy.mode));
  out.unit_count = unit_count;
  out.nodes = std::move(nodes);
  out.edges.reserve(acc.size());
  for (const auto& [key, a] : acc) {
    Edge e;
    e.x = TermId(static_cast<std::uint32_t>(key >> 32));
    e.y = TermId(static_cast<std::uint32_t>(key & 0xffffffffu));
    e.count = a.count;
    const std::size_t divisor = policy.mean_absent_as_zero ? divisor_all : a.layers;
    if (policy.mode == MergeMode::max_proximity) {
      e.weight = a.best->weight;
      if (a.exact) e.exact = a.best->exact;
    } else if (divisor == 1 && a.only != nullptr) {
      // Averaging a single value: keep it bit-identical.
      e.weight = a.only->weight;
      e.exact = a.only->exact;
    } else {
      e.weight = a.sum / static_cast<double>(divisor);
      if (a.exact) e.exact = to_ratio(a.exact_sum / Exact(divisor));
    }
    out.edges.push_back(e);
  }
  std::sort(out.edges.begin(), out.edges.end(), [](const Edge& a, const Edge& b) {
    return std::pair{a.x, a.y} < std::pair{b.x, b.y};
  });
  return out;
}

std::vector<std::string> edge_documents(const MultiLayerKG& kg, std::string_view layer_name,
                                        TermId x, TermId y) {
  const Layer& layer = kg.layer(layer_name);
  const Edge* e = layer.graph.find(x, y);
  if (e == nullptr) {
    const Dictionary& d = kg.dictionary();
    const auto label = [&](TermId t) {
      return t.value < d.size() ? d.name(t) : std::to_string(t.value);
    };
    throw NotFoundError("no edge " + label(x) + " -- " + label(y) + " in layer '" +
                        std::string(layer_name) + "'");
  }
  const auto& members = layer.provenance.at(static_cast<std::size_t>(e - layer.graph.edges.data()));
  std::vector<std::string> ids;
  ids.reserve(members.size());
  for (std::uint32_t u : members) ids.push_back(layer.units[u].unit_id);
  return ids;
}

}  // namespace termnet
