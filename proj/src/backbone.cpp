#include "termnet/backbone.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>

#include "termnet/parallel.hpp"

namespace termnet {
namespace {

using Exact = boost::multiprecision::cpp_rational;

constexpr std::uint32_t kNoEdge = UINT32_MAX;
constexpr double kInf = std::numeric_limits<double>::infinity();

double upper(double w) { return w + kRelativeTolerance * w; }
double lower(double w) { return w - kRelativeTolerance * w; }

struct Topology {
  explicit Topology(const DistanceGraph& graph) : g(graph), adj(graph) {
    end_a.resize(g.edges.size());
    end_b.resize(g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
      end_a[i] = *adj.local(g.edges[i].x);
      end_b[i] = *adj.local(g.edges[i].y);
    }
  }

  std::uint32_t other(std::uint32_t edge, std::uint32_t v) const {
    return end_a[edge] == v ? end_b[edge] : end_a[edge];
  }

  Exact exact_weight(std::uint32_t edge) const {
    const Ratio& r = *g.edges[edge].exact;
    return Exact(r.num, r.den);
  }

  const DistanceGraph& g;
  Adjacency adj;
  std::vector<std::uint32_t> end_a;
  std::vector<std::uint32_t> end_b;
};

// Per-worker scratch space. Only touched entries are reset between sources.
struct Workspace {
  explicit Workspace(std::size_t n)
      : dist(n, kInf), pred(n, kNoEdge), hops(n, 0), memo_slot(n, -1) {}

  void reset() {
    for (std::uint32_t v : touched) {
      dist[v] = kInf;
      pred[v] = kNoEdge;
      hops[v] = 0;
    }
    touched.clear();
    heap.clear();
    reset_memo();
  }

  void reset_memo() {
    for (std::uint32_t v : memo_touched) memo_slot[v] = -1;
    memo_touched.clear();
    memo_value.clear();
  }

  std::vector<double> dist;
  std::vector<std::uint32_t> pred;
  std::vector<std::uint16_t> hops;
  std::vector<std::uint32_t> touched;
  std::vector<std::pair<double, std::uint32_t>> heap;

  std::vector<std::int32_t> memo_slot;
  std::vector<Exact> memo_value;
  std::vector<std::uint32_t> memo_touched;
  std::vector<std::uint32_t> chain;
};

// Binary-heap Dijkstra from `source`. Every node whose distance is <= bound is
// settled on return; farther nodes may hold tentative (over-)estimates.
void dijkstra(const Topology& t, std::uint32_t source, double bound, Workspace& ws) {
  ws.reset();
  const auto cmp = [](const auto& a, const auto& b) { return a.first > b.first; };
  ws.dist[source] = 0.0;
  ws.touched.push_back(source);
  ws.heap.emplace_back(0.0, source);
  while (!ws.heap.empty()) {
    std::pop_heap(ws.heap.begin(), ws.heap.end(), cmp);
    const auto [d, v] = ws.heap.back();
    ws.heap.pop_back();
    if (d > ws.dist[v]) continue;
    if (d > bound) break;
    for (const auto& arc : t.adj.arcs(v)) {
      const double nd = d + arc.weight;
      if (nd < ws.dist[arc.to]) {
        if (ws.dist[arc.to] == kInf) ws.touched.push_back(arc.to);
        ws.dist[arc.to] = nd;
        ws.pred[arc.to] = arc.edge;
        ws.hops[arc.to] = ws.hops[v] == UINT16_MAX ? UINT16_MAX : ws.hops[v] + 1;
        ws.heap.emplace_back(nd, arc.to);
        std::push_heap(ws.heap.begin(), ws.heap.end(), cmp);
      }
    }
  }
  ws.heap.clear();
}

// Shortest-path tree of the source held in a Workspace.
struct WorkspaceView {
  const Workspace& ws;
  double dist(std::uint32_t v) const { return ws.dist[v]; }
  std::uint32_t pred(std::uint32_t v) const { return ws.pred[v]; }
  int hops(std::uint32_t v) const { return ws.hops[v]; }
};

// Exact length of the tree path source -> v, memoized per source.
template <typename View>
const Exact& exact_distance(const Topology& t, const View& view, std::uint32_t source,
                            std::uint32_t v, Workspace& ws) {
  static const Exact kZero = 0;
  if (v == source) return kZero;
  ws.chain.clear();
  std::uint32_t u = v;
  while (u != source && ws.memo_slot[u] < 0) {
    ws.chain.push_back(u);
    u = t.other(view.pred(u), u);
  }
  Exact acc = u == source ? Exact(0) : ws.memo_value[ws.memo_slot[u]];
  for (auto it = ws.chain.rbegin(); it != ws.chain.rend(); ++it) {
    acc += t.exact_weight(view.pred(*it));
    ws.memo_slot[*it] = static_cast<std::int32_t>(ws.memo_value.size());
    ws.memo_touched.push_back(*it);
    ws.memo_value.push_back(acc);
  }
  return ws.memo_value[ws.memo_slot[v]];
}

double exact_ratio_as_distortion(const Exact& direct, const Exact& path) {
  if (path == 0) return kInf;
  const double r = static_cast<double>(Exact(direct / path));
  // The exact ratio is > 1; keep that true after rounding to double.
  return r > 1.0 ? r : std::nextafter(1.0, 2.0);
}

struct Classification {
  std::vector<EdgeLabel> labels;
  std::vector<std::optional<double>> distortion;
};

// Classifies every edge (s, y) with y > s using the shortest-path tree of s.
template <typename View>
void classify_source(const Topology& t, std::uint32_t s, const View& view, bool exact,
                     Workspace& ws, Classification& out) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> near;  // (z, edge z-y)
  for (const auto& arc : t.adj.arcs(s)) {
    const std::uint32_t y = arc.to;
    if (y < s) continue;
    const double w = arc.weight;
    if (view.dist(y) == kInf) {
      throw DataError("closure does not cover edge " + std::to_string(t.g.edges[arc.edge].x.value) +
                      "-" + std::to_string(t.g.edges[arc.edge].y.value));
    }
    // Any indirect s ~> y path ends with some arc z -> y, z != s.
    bool semi = false;
    near.clear();
    for (const auto& last : t.adj.arcs(y)) {
      if (last.to == s) continue;
      const double dz = view.dist(last.to);
      if (dz == kInf) continue;
      const double candidate = dz + last.weight;
      if (candidate < lower(w)) {
        semi = true;
        break;
      }
      if (candidate <= upper(w)) near.emplace_back(last.to, last.edge);
    }
    EdgeLabel label = EdgeLabel::metric;
    std::optional<double> distortion;
    if (semi) {
      label = EdgeLabel::semi_metric;
      const double closure = view.dist(y);
      distortion = closure == 0.0 ? kInf : w / closure;
    } else if (exact && !near.empty()) {
      const Exact direct = t.exact_weight(arc.edge);
      for (const auto& [z, edge] : near) {
        if (view.hops(z) + 1 > kMaxExactHops) continue;
        const Exact path = exact_distance(t, view, s, z, ws) + t.exact_weight(edge);
        if (path < direct) {
          label = EdgeLabel::semi_metric;
          distortion = exact_ratio_as_distortion(direct, path);
          break;
        }
      }
    }
    out.labels[arc.edge] = label;
    out.distortion[arc.edge] = distortion;
  }
}

bool use_exact(const DistanceGraph& g, const BackboneOptions& options) {
  return options.policy == EqualityPolicy::rational && g.all_exact();
}

BackboneResult assemble(const DistanceGraph& g, Classification&& c, bool exact) {
  BackboneResult result;
  result.labels = std::move(c.labels);
  result.distortion = std::move(c.distortion);
  result.policy = exact ? EqualityPolicy::rational : EqualityPolicy::floating;
  result.backbone.nodes = g.nodes;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (result.labels[i] == EdgeLabel::metric) result.backbone.edges.push_back(g.edges[i]);
  }
  result.fraction_metric =
      g.edges.empty() ? 1.0
                      : static_cast<double>(result.backbone.edges.size()) /
                            static_cast<double>(g.edges.size());
  return result;
}

}  // namespace

// Read access to closure internals for classification.
class ClosureAccess {
 public:
  struct RowView {
    const ClosureDistances& c;
    std::uint32_t component;
    std::size_t row;

    std::size_t column(std::uint32_t v) const {
      return row * c.components_[component].members.size() + c.position_[v];
    }
    double dist(std::uint32_t v) const {
      if (c.component_of_[v] != component) return kInf;
      return c.components_[component].dist[column(v)];
    }
    std::uint32_t pred(std::uint32_t v) const {
      return c.components_[component].pred_edge[column(v)];
    }
    int hops(std::uint32_t v) const { return c.components_[component].hops[column(v)]; }
  };

  static RowView row(const ClosureDistances& c, std::uint32_t source) {
    return {c, c.component_of_[source], c.position_[source]};
  }

  static bool matches(const ClosureDistances& c, const DistanceGraph& g) {
    return c.nodes_ == g.nodes && c.edge_count_ == g.edges.size();
  }
};

std::string_view to_string(EqualityPolicy policy) {
  return policy == EqualityPolicy::rational ? "rational" : "floating";
}

EqualityPolicy parse_equality_policy(std::string_view text) {
  if (text == "rational") return EqualityPolicy::rational;
  if (text == "floating" || text == "float") return EqualityPolicy::floating;
  throw UsageError("unknown equality policy '" + std::string(text) +
                   "' (expected rational or floating)");
}

std::string_view to_string(EdgeLabel label) {
  return label == EdgeLabel::metric ? "metric" : "semi_metric";
}

double ClosureDistances::distance(TermId a, TermId b) const {
  const auto la = std::lower_bound(nodes_.begin(), nodes_.end(), a);
  const auto lb = std::lower_bound(nodes_.begin(), nodes_.end(), b);
  if (la == nodes_.end() || *la != a || lb == nodes_.end() || *lb != b) return kInfinity;
  const auto ia = static_cast<std::uint32_t>(la - nodes_.begin());
  const auto ib = static_cast<std::uint32_t>(lb - nodes_.begin());
  if (component_of_[ia] != component_of_[ib]) return kInfinity;
  const Component& comp = components_[component_of_[ia]];
  return comp.dist[position_[ia] * comp.members.size() + position_[ib]];
}

ClosureDistances metric_closure(const DistanceGraph& g, const BackboneOptions& options) {
  if (g.nodes.size() > options.dense_closure_limit) {
    throw UsageError("graph has " + std::to_string(g.nodes.size()) +
                     " nodes, above the dense closure limit of " +
                     std::to_string(options.dense_closure_limit) +
                     "; use the streaming backbone instead");
  }
  const Topology t(g);
  ClosureDistances c;
  c.nodes_ = g.nodes;
  c.edge_count_ = g.edges.size();
  c.component_of_ = component_labels(g);
  c.position_.resize(g.nodes.size());
  const std::size_t n_components =
      c.component_of_.empty() ? 0 : *std::max_element(c.component_of_.begin(), c.component_of_.end()) + 1;
  c.components_.resize(n_components);
  for (std::uint32_t v = 0; v < g.nodes.size(); ++v) {
    auto& comp = c.components_[c.component_of_[v]];
    c.position_[v] = static_cast<std::uint32_t>(comp.members.size());
    comp.members.push_back(v);
  }
  for (auto& comp : c.components_) {
    const std::size_t m = comp.members.size();
    comp.dist.assign(m * m, kInf);
    comp.pred_edge.assign(m * m, kNoEdge);
    comp.hops.assign(m * m, 0);
  }

  const unsigned threads = std::max(1u, options.threads);
  std::vector<Workspace> spaces;
  spaces.reserve(threads);
  for (unsigned i = 0; i < threads; ++i) spaces.emplace_back(g.nodes.size());
  parallel_for(g.nodes.size(), threads, [&](unsigned worker, std::size_t src) {
    Workspace& ws = spaces[worker];
    const auto s = static_cast<std::uint32_t>(src);
    dijkstra(t, s, kInf, ws);
    auto& comp = c.components_[c.component_of_[s]];
    const std::size_t m = comp.members.size();
    const std::size_t base = c.position_[s] * m;
    for (std::size_t j = 0; j < m; ++j) {
      const std::uint32_t v = comp.members[j];
      comp.dist[base + j] = ws.dist[v];
      comp.pred_edge[base + j] = ws.pred[v];
      comp.hops[base + j] = ws.hops[v];
    }
  });
  return c;
}

BackboneResult extract_backbone(const DistanceGraph& g, const ClosureDistances& closure,
                                const BackboneOptions& options) {
  if (!ClosureAccess::matches(closure, g)) {
    throw DataError("closure was not computed from this graph");
  }
  const Topology t(g);
  const bool exact = use_exact(g, options);
  Classification c;
  c.labels.assign(g.edges.size(), EdgeLabel::metric);
  c.distortion.assign(g.edges.size(), std::nullopt);
  const unsigned threads = std::max(1u, options.threads);
  std::vector<Workspace> spaces;
  for (unsigned i = 0; i < threads; ++i) spaces.emplace_back(g.nodes.size());
  parallel_for(g.nodes.size(), threads, [&](unsigned worker, std::size_t src) {
    const auto s = static_cast<std::uint32_t>(src);
    Workspace& ws = spaces[worker];
    ws.reset_memo();
    classify_source(t, s, ClosureAccess::row(closure, s), exact, ws, c);
  });
  return assemble(g, std::move(c), exact);
}

BackboneResult metric_backbone(const DistanceGraph& g, const BackboneOptions& options) {
  const Topology t(g);
  const bool exact = use_exact(g, options);
  Classification c;
  c.labels.assign(g.edges.size(), EdgeLabel::metric);
  c.distortion.assign(g.edges.size(), std::nullopt);
  const unsigned threads = std::max(1u, options.threads);
  std::vector<Workspace> spaces;
  for (unsigned i = 0; i < threads; ++i) spaces.emplace_back(g.nodes.size());
  parallel_for(g.nodes.size(), threads, [&](unsigned worker, std::size_t src) {
    const auto s = static_cast<std::uint32_t>(src);
    double bound = -1.0;
    for (const auto& arc : t.adj.arcs(s)) {
      if (arc.to > s) bound = std::max(bound, upper(arc.weight));
    }
    if (bound < 0.0) return;  // no edges to classify from this source
    Workspace& ws = spaces[worker];
    dijkstra(t, s, bound, ws);
    classify_source(t, s, WorkspaceView{ws}, exact, ws, c);
  });
  return assemble(g, std::move(c), exact);
}

bool verify_invariance(const DistanceGraph& g, const BackboneResult& b,
                       const BackboneOptions& options) {
  if (b.backbone.nodes != g.nodes) return false;
  for (const Edge& e : b.backbone.edges) {
    const Edge* original = g.find(e.x, e.y);
    if (original == nullptr || !(*original == e)) return false;
  }
  const Topology full(g);
  const Topology sparse(b.backbone);
  const bool exact = use_exact(g, options);
  const unsigned threads = std::max(1u, options.threads);
  std::vector<Workspace> full_spaces;
  std::vector<Workspace> sparse_spaces;
  for (unsigned i = 0; i < threads; ++i) {
    full_spaces.emplace_back(g.nodes.size());
    sparse_spaces.emplace_back(g.nodes.size());
  }
  std::atomic<bool> ok{true};
  parallel_for(g.nodes.size(), threads, [&](unsigned worker, std::size_t src) {
    if (!ok) return;
    const auto s = static_cast<std::uint32_t>(src);
    Workspace& a = full_spaces[worker];
    Workspace& bb = sparse_spaces[worker];
    dijkstra(full, s, kInf, a);
    dijkstra(sparse, s, kInf, bb);
    for (std::uint32_t v = 0; v < g.nodes.size(); ++v) {
      const double da = a.dist[v];
      const double db = bb.dist[v];
      if ((da == kInf) != (db == kInf)) {
        ok = false;
        return;
      }
      if (da == kInf) continue;
      if (std::abs(da - db) > kRelativeTolerance * std::max(da, db)) {
        ok = false;
        return;
      }
      if (exact && a.hops[v] <= kMaxExactHops && bb.hops[v] <= kMaxExactHops) {
        const Exact& ea = exact_distance(full, WorkspaceView{a}, s, v, a);
        const Exact& eb = exact_distance(sparse, WorkspaceView{bb}, s, v, bb);
        if (ea != eb) {
          ok = false;
          return;
        }
      }
    }
  });
  return ok;
}

std::optional<EdgeLabel> edge_label(const DistanceGraph& g, const BackboneResult& b, TermId x,
                                    TermId y) {
  const Edge* e = g.find(x, y);
  if (e == nullptr) return std::nullopt;
  return b.labels.at(static_cast<std::size_t>(e - g.edges.data()));
}

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
  if (std::isinf(sorted[hi])) return sorted[hi];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BackboneStats backbone_stats(const DistanceGraph& g, const BackboneResult& b) {
  BackboneStats s;
  s.node_count = g.nodes.size();
  s.edge_count = g.edges.size();
  s.metric_edge_count = b.metric_count();
  s.semi_metric_edge_count = s.edge_count - s.metric_edge_count;
  s.fraction_metric = b.fraction_metric;
  s.components_original = component_count(g);
  s.components_backbone = component_count(b.backbone);
  std::vector<double> values;
  for (const auto& d : b.distortion) {
    if (d) values.push_back(*d);
  }
  if (!values.empty()) {
    std::sort(values.begin(), values.end());
    s.distortion = DistortionSummary{values.front(), quantile(values, 0.25),
                                     quantile(values, 0.5), quantile(values, 0.75),
                                     values.back()};
  }
  return s;
}

}  // namespace termnet
