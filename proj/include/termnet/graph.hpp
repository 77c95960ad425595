#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "termnet/tagger.hpp"
#include "termnet/types.hpp"

namespace termnet {

// Undirected weighted edge, stored with x < y. `weight` is a proximity or a
// distance depending on the owning graph; `exact` is the same quantity as an
// integer ratio when it is known exactly. `count` is the co-occurrence count
// r_xy behind the edge (0 when the edge did not come from counting).
struct Edge {
  TermId x;
  TermId y;
  double weight = 0.0;
  std::optional<Ratio> exact;
  std::uint64_t count = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct PairCount {
  TermId x;
  TermId y;
  std::uint64_t count = 0;

  friend bool operator==(const PairCount&, const PairCount&) = default;
};

// Symmetric unit co-occurrence counts. Only x < y pairs with a positive count
// are stored; diagonal[x] is the sum of x's pair counts.
struct CooccurrenceMatrix {
  std::size_t n_terms = 0;
  std::vector<PairCount> pairs;  // sorted by (x, y)
  std::vector<std::uint64_t> diagonal;

  std::uint64_t pair(TermId a, TermId b) const;
  std::uint64_t diag(TermId a) const { return diagonal.at(a.value); }

  friend bool operator==(const CooccurrenceMatrix&, const CooccurrenceMatrix&) = default;
};

struct CountOptions {
  // Terms whose diagonal falls below min_count are dropped together with
  // their pairs, and the remaining diagonals are recomputed.
  std::uint64_t min_count = 1;
  unsigned threads = 1;
};

CooccurrenceMatrix count_cooccurrence(std::span<const AnalysisUnit> units, std::size_t n_terms,
                                      const CountOptions& options = {});

// Edge weights are Jaccard proximities p in (0, 1].
struct ProximityGraph {
  std::string layer_name;
  std::uint64_t unit_count = 0;
  std::vector<TermId> nodes;  // sorted
  std::vector<Edge> edges;    // sorted by (x, y)

  const Edge* find(TermId a, TermId b) const;
  friend bool operator==(const ProximityGraph&, const ProximityGraph&) = default;
};

// Edge weights are distances d in [0, inf); absent edges are infinitely far.
struct DistanceGraph {
  std::vector<TermId> nodes;  // sorted
  std::vector<Edge> edges;    // sorted by (x, y)

  const Edge* find(TermId a, TermId b) const;
  bool all_exact() const;
  friend bool operator==(const DistanceGraph&, const DistanceGraph&) = default;
};

// Canonicalizes endpoints (x < y), sorts, and adds `extra_nodes` to the node
// set. Rejects self-loops, duplicate pairs, and negative or non-finite
// weights.
DistanceGraph make_distance_graph(std::vector<Edge> edges,
                                  std::span<const TermId> extra_nodes = {});
ProximityGraph make_proximity_graph(std::vector<Edge> edges,
                                    std::span<const TermId> extra_nodes = {});

ProximityGraph proximity(const CooccurrenceMatrix& m, std::string layer_name = {},
                         std::uint64_t unit_count = 0);

DistanceGraph to_distance(const ProximityGraph& g);

// Distance of a proximity: 1/p - 1.
double proximity_to_distance(double p);
double distance_to_proximity(double d);

// Compressed adjacency over dense local node indices, used by every
// shortest-path routine.
class Adjacency {
 public:
  struct Arc {
    std::uint32_t to;
    std::uint32_t edge;  // index into DistanceGraph::edges
    double weight;
  };

  explicit Adjacency(const DistanceGraph& g);

  std::size_t node_count() const { return nodes_.size(); }
  std::span<const Arc> arcs(std::uint32_t local) const {
    return {arcs_.data() + offsets_[local], arcs_.data() + offsets_[local + 1]};
  }
  TermId term(std::uint32_t local) const { return nodes_[local]; }
  std::optional<std::uint32_t> local(TermId id) const;

 private:
  std::vector<TermId> nodes_;
  std::vector<std::size_t> offsets_;
  std::vector<Arc> arcs_;
};

// Connected-component label per node of `g`, in node order. Labels are
// numbered by first appearance.
std::vector<std::uint32_t> component_labels(const DistanceGraph& g);
std::size_t component_count(const DistanceGraph& g);

}  // namespace termnet
