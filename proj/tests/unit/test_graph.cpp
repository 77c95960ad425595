#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "termnet/graph.hpp"

using namespace termnet;
using testing::id;

namespace {

AnalysisUnit unit(std::string name, std::vector<int> terms) {
  AnalysisUnit u;
  u.unit_id = std::move(name);
  for (int t : terms) u.terms.push_back(id(t));
  std::sort(u.terms.begin(), u.terms.end());
  return u;
}

// {a,b}, {a,b,c}, {b,c} with a=0, b=1, c=2.
std::vector<AnalysisUnit> three_units() {
  return {unit("w1", {0, 1}), unit("w2", {0, 1, 2}), unit("w3", {1, 2})};
}

double ulps(double a, double b) {
  if (a == b) return 0;
  double steps = 0;
  double x = std::min(a, b);
  while (x < std::max(a, b) && steps < 10) {
    x = std::nextafter(x, INFINITY);
    ++steps;
  }
  return steps;
}

}  // namespace

TEST_CASE("counts: hand-counted fixture") {
  const auto m = count_cooccurrence(three_units(), 3);
  CHECK(m.pair(id(0), id(1)) == 2);
  CHECK(m.pair(id(1), id(0)) == 2);
  CHECK(m.pair(id(0), id(2)) == 1);
  CHECK(m.pair(id(1), id(2)) == 2);
  CHECK(m.diag(id(0)) == 3);
  CHECK(m.diag(id(1)) == 4);
  CHECK(m.diag(id(2)) == 3);
}

TEST_CASE("counts: a lone term has no partners") {
  const std::vector<AnalysisUnit> units{unit("w", {0})};
  const auto m = count_cooccurrence(units, 2);
  CHECK(m.pairs.empty());
  CHECK(m.diag(id(0)) == 0);
  CHECK(proximity(m).edges.empty());
  CHECK(proximity(m).nodes.empty());
}

TEST_CASE("counts: duplicated units double every count") {
  auto units = three_units();
  const auto once = count_cooccurrence(units, 3);
  const auto copy = units;
  units.insert(units.end(), copy.begin(), copy.end());
  const auto twice = count_cooccurrence(units, 3);
  REQUIRE(once.pairs.size() == twice.pairs.size());
  for (std::size_t i = 0; i < once.pairs.size(); ++i) {
    CHECK(twice.pairs[i].count == 2 * once.pairs[i].count);
  }
}

TEST_CASE("counts: match a brute-force count on random corpora") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_terms = 2 + static_cast<int>(rng() % 12);
    const int n_units = static_cast<int>(rng() % 40);
    std::vector<std::set<int>> sets;
    std::vector<AnalysisUnit> units;
    for (int u = 0; u < n_units; ++u) {
      std::set<int> s;
      const int k = static_cast<int>(rng() % 6);
      for (int j = 0; j < k; ++j) s.insert(static_cast<int>(rng() % n_terms));
      sets.push_back(s);
      units.push_back(unit("u" + std::to_string(u), std::vector<int>(s.begin(), s.end())));
    }
    const auto expected = oracle::count(sets, n_terms);
    CountOptions options;
    options.threads = 1 + trial % 3;
    const auto m = count_cooccurrence(units, n_terms, options);
    REQUIRE(m.pairs.size() == expected.pairs.size());
    for (const PairCount& p : m.pairs) {
      CHECK(static_cast<std::int64_t>(p.count) ==
            expected.pairs.at({static_cast<int>(p.x.value), static_cast<int>(p.y.value)}));
    }
    for (int x = 0; x < n_terms; ++x) {
      CHECK(static_cast<std::int64_t>(m.diag(id(x))) == expected.diagonal.at(x));
    }
    // permutation invariance
    std::shuffle(units.begin(), units.end(), rng);
    CHECK(count_cooccurrence(units, n_terms) == m);
  }
}

TEST_CASE("counts: min_count drops rare terms and recomputes the diagonal") {
  // a-b twice, c only with a once: r_cc = 1
  const std::vector<AnalysisUnit> units{unit("1", {0, 1}), unit("2", {0, 1}), unit("3", {0, 2})};
  CountOptions options;
  options.min_count = 2;
  const auto m = count_cooccurrence(units, 3, options);
  CHECK(m.pairs.size() == 1);
  CHECK(m.pair(id(0), id(2)) == 0);
  CHECK(m.diag(id(0)) == 2);
  CHECK(m.diag(id(2)) == 0);
}

TEST_CASE("proximity: jaccard values on the fixture") {
  const auto p = proximity(count_cooccurrence(three_units(), 3), "layer", 3);
  CHECK(p.layer_name == "layer");
  CHECK(p.unit_count == 3);
  REQUIRE(p.edges.size() == 3);
  const Edge* ab = p.find(id(0), id(1));
  const Edge* ac = p.find(id(2), id(0));
  const Edge* bc = p.find(id(1), id(2));
  REQUIRE((ab && ac && bc));
  CHECK(ab->weight == 0.4);
  CHECK(ac->weight == 0.2);
  CHECK(bc->weight == 0.4);
  CHECK(ab->exact == Ratio{2, 5});
  CHECK(ac->exact == Ratio{1, 5});
  CHECK(ab->count == 2);
}

TEST_CASE("proximity: terms always together have p = 1") {
  const std::vector<AnalysisUnit> units{unit("1", {0, 1}), unit("2", {0, 1})};
  const auto p = proximity(count_cooccurrence(units, 2));
  REQUIRE(p.edges.size() == 1);
  CHECK(p.edges[0].weight == 1.0);
  CHECK(to_distance(p).edges[0].weight == 0.0);
}

TEST_CASE("distance: 1/p - 1 with exact companion") {
  const auto d = to_distance(proximity(count_cooccurrence(three_units(), 3)));
  const Edge* ab = d.find(id(0), id(1));
  REQUIRE(ab);
  CHECK(ab->weight == 1.5);
  CHECK(ab->exact == Ratio{3, 2});
  CHECK(d.find(id(0), id(2))->weight == 4.0);
  CHECK(proximity_to_distance(1.0) == 0.0);
  CHECK(proximity_to_distance(0.5) == 1.0);
  CHECK(proximity_to_distance(0.4) == 1.5);
  CHECK(d.all_exact());
}

TEST_CASE("distance: round trip to proximity within one ulp and order reversal") {
  std::mt19937 rng(5);
  std::vector<double> ps;
  for (int i = 0; i < 2000; ++i) {
    const int r = 1 + static_cast<int>(rng() % 500);
    const int u = r + static_cast<int>(rng() % 5000);
    ps.push_back(static_cast<double>(r) / u);
  }
  for (double p : ps) CHECK(ulps(distance_to_proximity(proximity_to_distance(p)), p) <= 1);
  std::sort(ps.begin(), ps.end());
  for (std::size_t i = 1; i < ps.size(); ++i) {
    if (ps[i] > ps[i - 1]) CHECK(proximity_to_distance(ps[i]) < proximity_to_distance(ps[i - 1]));
  }
}

TEST_CASE("graphs: construction validates edges") {
  CHECK_THROWS(testing::weighted(2, {{0, 0, 1.0}}));
  CHECK_THROWS(testing::weighted(2, {{0, 1, 1.0}, {1, 0, 2.0}}));
  CHECK_THROWS(testing::weighted(2, {{0, 1, -1.0}}));
  CHECK_THROWS(testing::weighted(2, {{0, 1, INFINITY}}));
  const auto g = testing::weighted(4, {{3, 1, 1.0}, {0, 2, 2.0}});
  CHECK(g.edges[0].x == id(0));
  CHECK(g.edges[1].x == id(1));
  CHECK(g.edges[1].y == id(3));
  CHECK(g.nodes.size() == 4);
}

TEST_CASE("graphs: components") {
  const auto g = testing::weighted(5, {{0, 1, 1.0}, {3, 4, 1.0}});
  CHECK(component_count(g) == 3);
  const auto labels = component_labels(g);
  CHECK(labels[0] == labels[1]);
  CHECK(labels[3] == labels[4]);
  CHECK(labels[2] != labels[0]);
  const Adjacency adj(g);
  CHECK(adj.node_count() == 5);
  CHECK(adj.arcs(*adj.local(id(0))).size() == 1);
  CHECK_FALSE(adj.local(id(9)).has_value());
}
