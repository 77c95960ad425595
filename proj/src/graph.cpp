#include "termnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "termnet/parallel.hpp"

namespace termnet {
namespace {

std::uint64_t pack(TermId a, TermId b) {
  return (static_cast<std::uint64_t>(a.value) << 32) | b.value;
}

template <typename Graph>
const Edge* find_edge(const Graph& g, TermId a, TermId b) {
  if (b < a) std::swap(a, b);
  auto it = std::lower_bound(g.edges.begin(), g.edges.end(), std::pair{a, b},
                             [](const Edge& e, const std::pair<TermId, TermId>& key) {
                               return std::pair{e.x, e.y} < key;
                             });
  if (it == g.edges.end() || it->x != a || it->y != b) return nullptr;
  return &*it;
}

void canonicalize(std::vector<Edge>& edges, std::span<const TermId> extra_nodes,
                  std::vector<TermId>& nodes) {
  for (Edge& e : edges) {
    if (e.x == e.y) throw DataError("self-loop on term " + std::to_string(e.x.value));
    if (e.y < e.x) std::swap(e.x, e.y);
    if (!std::isfinite(e.weight) || e.weight < 0) {
      throw DataError("edge weight must be finite and non-negative");
    }
  }
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return std::pair{a.x, a.y} < std::pair{b.x, b.y}; });
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i].x == edges[i - 1].x && edges[i].y == edges[i - 1].y) {
      throw DataError("duplicate edge " + std::to_string(edges[i].x.value) + "-" +
                      std::to_string(edges[i].y.value));
    }
  }
  nodes.assign(extra_nodes.begin(), extra_nodes.end());
  for (const Edge& e : edges) {
    nodes.push_back(e.x);
    nodes.push_back(e.y);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
}

}  // namespace

std::uint64_t CooccurrenceMatrix::pair(TermId a, TermId b) const {
  if (b < a) std::swap(a, b);
  auto it = std::lower_bound(pairs.begin(), pairs.end(), std::pair{a, b},
                             [](const PairCount& p, const std::pair<TermId, TermId>& key) {
                               return std::pair{p.x, p.y} < key;
                             });
  if (it == pairs.end() || it->x != a || it->y != b) return 0;
  return it->count;
}

CooccurrenceMatrix count_cooccurrence(std::span<const AnalysisUnit> units, std::size_t n_terms,
                                      const CountOptions& options) {
  const unsigned shards = std::max(1u, std::min<unsigned>(options.threads, 64));
  std::vector<std::unordered_map<std::uint64_t, std::uint64_t>> partial(shards);
  const std::size_t chunk = (units.size() + shards - 1) / std::max<std::size_t>(shards, 1);
  parallel_for(shards, shards, [&](unsigned, std::size_t shard) {
    auto& counts = partial[shard];
    const std::size_t begin = shard * chunk;
    const std::size_t end = std::min(units.size(), begin + chunk);
    for (std::size_t u = begin; u < end; ++u) {
      const auto& terms = units[u].terms;
      for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].value >= n_terms) throw DataError("term id out of range");
        for (std::size_t j = i + 1; j < terms.size(); ++j) {
          ++counts[pack(terms[i], terms[j])];
        }
      }
    }
  });
  // Integer merge is order independent.
  for (unsigned s = 1; s < shards; ++s) {
    for (const auto& [key, count] : partial[s]) partial[0][key] += count;
    partial[s].clear();
  }

  CooccurrenceMatrix m;
  m.n_terms = n_terms;
  m.pairs.reserve(partial[0].size());
  for (const auto& [key, count] : partial[0]) {
    m.pairs.push_back({TermId(static_cast<std::uint32_t>(key >> 32)),
                       TermId(static_cast<std::uint32_t>(key & 0xffffffffu)), count});
  }
  std::sort(m.pairs.begin(), m.pairs.end(), [](const PairCount& a, const PairCount& b) {
    return std::pair{a.x, a.y} < std::pair{b.x, b.y};
  });

  const auto sum_diagonal = [&] {
    m.diagonal.assign(n_terms, 0);
    for (const PairCount& p : m.pairs) {
      m.diagonal[p.x.value] += p.count;
      m.diagonal[p.y.value] += p.count;
    }
  };
  sum_diagonal();
  if (options.min_count > 1) {
    std::erase_if(m.pairs, [&](const PairCount& p) {
      return m.diagonal[p.x.value] < options.min_count ||
             m.diagonal[p.y.value] < options.min_count;
    });
    sum_diagonal();
  }
  return m;
}

const Edge* ProximityGraph::find(TermId a, TermId b) const { return find_edge(*this, a, b); }
const Edge* DistanceGraph::find(TermId a, TermId b) const { return find_edge(*this, a, b); }

bool DistanceGraph::all_exact() const {
  return std::all_of(edges.begin(), edges.end(), [](const Edge& e) { return e.exact.has_value(); });
}

DistanceGraph make_distance_graph(std::vector<Edge> edges, std::span<const TermId> extra_nodes) {
  DistanceGraph g;
  canonicalize(edges, extra_nodes, g.nodes);
  g.edges = std::move(edges);
  return g;
}

ProximityGraph make_proximity_graph(std::vector<Edge> edges, std::span<const TermId> extra_nodes) {
  for (const Edge& e : edges) {
    if (!(e.weight > 0.0 && e.weight <= 1.0)) throw DataError("proximity must lie in (0, 1]");
  }
  ProximityGraph g;
  canonicalize(edges, extra_nodes, g.nodes);
  g.edges = std::move(edges);
  return g;
}

ProximityGraph proximity(const CooccurrenceMatrix& m, std::string layer_name,
                         std::uint64_t unit_count) {
  ProximityGraph g;
  g.layer_name = std::move(layer_name);
  g.unit_count = unit_count;
  for (std::uint32_t t = 0; t < m.diagonal.size(); ++t) {
    if (m.diagonal[t] > 0) g.nodes.emplace_back(t);
  }
  g.edges.reserve(m.pairs.size());
  for (const PairCount& p : m.pairs) {
    const std::uint64_t either = m.diag(p.x) + m.diag(p.y) - p.count;
    Edge e;
    e.x = p.x;
    e.y = p.y;
    e.weight = static_cast<double>(p.count) / static_cast<double>(either);
    e.exact = Ratio{p.count, either};
    e.count = p.count;
    g.edges.push_back(e);
  }
  return g;
}

double proximity_to_distance(double p) { return 1.0 / p - 1.0; }
double distance_to_proximity(double d) { return 1.0 / (d + 1.0); }

DistanceGraph to_distance(const ProximityGraph& g) {
  DistanceGraph d;
  d.nodes = g.nodes;
  d.edges.reserve(g.edges.size());
  for (const Edge& e : g.edges) {
    Edge out = e;
    out.weight = proximity_to_distance(e.weight);
    if (e.exact) out.exact = Ratio{e.exact->den - e.exact->num, e.exact->num};
    d.edges.push_back(out);
  }
  return d;
}

Adjacency::Adjacency(const DistanceGraph& g) : nodes_(g.nodes) {
  std::vector<std::size_t> degree(nodes_.size(), 0);
  std::vector<std::uint32_t> ex(g.edges.size());
  std::vector<std::uint32_t> ey(g.edges.size());
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto lx = local(g.edges[i].x);
    const auto ly = local(g.edges[i].y);
    if (!lx || !ly) throw DataError("edge endpoint missing from node set");
    ex[i] = *lx;
    ey[i] = *ly;
    ++degree[*lx];
    ++degree[*ly];
  }
  offsets_.assign(nodes_.size() + 1, 0);
  for (std::size_t v = 0; v < nodes_.size(); ++v) offsets_[v + 1] = offsets_[v] + degree[v];
  arcs_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto edge = static_cast<std::uint32_t>(i);
    arcs_[fill[ex[i]]++] = {ey[i], edge, g.edges[i].weight};
    arcs_[fill[ey[i]]++] = {ex[i], edge, g.edges[i].weight};
  }
}

std::optional<std::uint32_t> Adjacency::local(TermId id) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id);
  if (it == nodes_.end() || *it != id) return std::nullopt;
  return static_cast<std::uint32_t>(it - nodes_.begin());
}

std::vector<std::uint32_t> component_labels(const DistanceGraph& g) {
  const Adjacency adj(g);
  const std::uint32_t unset = UINT32_MAX;
  std::vector<std::uint32_t> label(adj.node_count(), unset);
  std::uint32_t next = 0;
  std::vector<std::uint32_t> stack;
  for (std::uint32_t s = 0; s < adj.node_count(); ++s) {
    if (label[s] != unset) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::uint32_t v = stack.back();
      stack.pop_back();
      for (const auto& arc : adj.arcs(v)) {
        if (label[arc.to] == unset) {
          label[arc.to] = next;
          stack.push_back(arc.to);
        }
      }
    }
    ++next;
  }
  return label;
}

std::size_t component_count(const DistanceGraph& g) {
  const auto labels = component_labels(g);
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

}  // namespace termnet
