#include "doctest.h"
#include "helpers.hpp"
#include "termnet/multilayer.hpp"

using namespace termnet;

namespace {

std::shared_ptr<const Dictionary> abc() { return load_dictionary(testing::data("triangle_dictionary.tsv")); }

AnalysisUnit unit(const Dictionary& d, std::string name, std::vector<std::string> terms,
                  std::optional<std::string> user = std::nullopt) {
  AnalysisUnit u;
  u.unit_id = std::move(name);
  u.member_doc_ids = {u.unit_id};
  for (const auto& t : terms) u.terms.push_back(*d.find(t));
  std::sort(u.terms.begin(), u.terms.end());
  u.user_id = std::move(user);
  return u;
}

std::vector<AnalysisUnit> repeat(const Dictionary& d, const std::string& prefix,
                                 std::vector<std::pair<std::vector<std::string>, int>> groups) {
  std::vector<AnalysisUnit> out;
  int k = 0;
  for (const auto& [terms, times] : groups) {
    for (int i = 0; i < times; ++i) out.push_back(unit(d, prefix + std::to_string(k++), terms));
  }
  return out;
}

// p_ab = 0.2 in layer A and 0.6 in layer B.
MultiLayerKG two_layers() {
  const auto d = abc();
  MultiLayerKG kg(d);
  kg.add_layer("A", build_layer("A", repeat(*d, "a", {{{"a", "b"}, 1}, {{"a", "c"}, 2}, {{"b", "c"}, 2}}),
                                d->size()));
  kg.add_layer("B", build_layer("B", repeat(*d, "b", {{{"a", "b"}, 3}, {{"a", "c"}, 1}, {{"b", "c"}, 1}}),
                                d->size()));
  return kg;
}

TermId t(const MultiLayerKG& kg, const char* name) { return *kg.dictionary().find(name); }

}  // namespace

TEST_CASE("merge: mean of present layers") {
  const auto kg = two_layers();
  CHECK(kg.layer("A").graph.find(t(kg, "a"), t(kg, "b"))->weight == 0.2);
  CHECK(kg.layer("B").graph.find(t(kg, "a"), t(kg, "b"))->weight == 0.6);
  const auto merged = merge(kg, {MergeMode::mean_proximity, std::nullopt, false});
  const Edge* ab = merged.find(t(kg, "a"), t(kg, "b"));
  REQUIRE(ab);
  CHECK(ab->weight == 0.4);
  CHECK(ab->exact == Ratio{2, 5});
  CHECK(merged.unit_count == 10);
}

TEST_CASE("merge: max of present layers") {
  const auto kg = two_layers();
  const auto merged = merge(kg, {MergeMode::max_proximity, std::nullopt, false});
  CHECK(merged.find(t(kg, "a"), t(kg, "b"))->weight == 0.6);
  CHECK(merged.find(t(kg, "a"), t(kg, "b"))->exact == Ratio{3, 5});
}

TEST_CASE("merge: single layer is the identity") {
  const auto kg = two_layers();
  for (MergeMode mode : {MergeMode::mean_proximity, MergeMode::max_proximity}) {
    const auto merged = merge(kg, {mode, std::vector<std::string>{"B"}, false});
    CHECK(merged.nodes == kg.layer("B").graph.nodes);
    CHECK(merged.edges == kg.layer("B").graph.edges);
  }
}

TEST_CASE("merge: absent edges are excluded from the mean unless configured") {
  const auto d = abc();
  MultiLayerKG kg(d);
  kg.add_layer("A", build_layer("A", repeat(*d, "a", {{{"a", "b"}, 1}}), d->size()));
  kg.add_layer("B", build_layer("B", repeat(*d, "b", {{{"b", "c"}, 1}}), d->size()));
  const auto present = merge(kg, {MergeMode::mean_proximity, std::nullopt, false});
  CHECK(present.find(*d->find("a"), *d->find("b"))->weight == 1.0);
  CHECK(present.nodes.size() == 3);
  const auto zero = merge(kg, {MergeMode::mean_proximity, std::nullopt, true});
  CHECK(zero.find(*d->find("a"), *d->find("b"))->weight == 0.5);
}

TEST_CASE("merge: permutation invariant over layers") {
  const auto kg = two_layers();
  for (MergeMode mode : {MergeMode::mean_proximity, MergeMode::max_proximity}) {
    const auto ab = merge(kg, {mode, std::vector<std::string>{"A", "B"}, false});
    const auto ba = merge(kg, {mode, std::vector<std::string>{"B", "A"}, false});
    CHECK(ab == ba);
  }
}

TEST_CASE("merge: errors") {
  const auto kg = two_layers();
  CHECK_THROWS_AS(merge(kg, {MergeMode::mean_proximity, std::vector<std::string>{}, false}),
                  UsageError);
  CHECK_THROWS_AS(merge(kg, {MergeMode::mean_proximity, std::vector<std::string>{"C"}, false}),
                  NotFoundError);
  MultiLayerKG empty(abc());
  CHECK_THROWS_AS(merge(empty, {}), UsageError);
  CHECK(parse_merge_mode("max") == MergeMode::max_proximity);
  CHECK(parse_merge_mode("mean_proximity") == MergeMode::mean_proximity);
  CHECK_THROWS_AS(parse_merge_mode("median"), UsageError);
}

TEST_CASE("layers: names and lookup") {
  auto kg = two_layers();
  CHECK(kg.layer_names() == std::vector<std::string>{"A", "B"});
  try {
    kg.layer("b");
    FAIL("expected not found");
  } catch (const NotFoundError& e) {
    CHECK(std::string(e.what()).find("did you mean") != std::string::npos);
  }
  CHECK_THROWS_AS(validate_layer_name("../x"), UsageError);
  CHECK_THROWS_AS(validate_layer_name(""), UsageError);
  CHECK_NOTHROW(validate_layer_name("reddit-2021_v1.0"));
  Layer bad = kg.layer("A");
  bad.graph.nodes.push_back(TermId(99));
  CHECK_THROWS_AS(kg.add_layer("bad", bad), DataError);
}

TEST_CASE("provenance: edge documents") {
  const auto d = abc();
  MultiLayerKG kg(d);
  const std::vector<AnalysisUnit> units{unit(*d, "u2", {"a", "b"}), unit(*d, "u1", {"a", "b", "c"}),
                                        unit(*d, "u3", {"b", "c"})};
  kg.add_layer("L", build_layer("L", units, d->size()));
  const TermId a = *d->find("a");
  const TermId b = *d->find("b");
  const TermId c = *d->find("c");
  CHECK(edge_documents(kg, "L", a, b) == std::vector<std::string>{"u1", "u2"});
  CHECK(edge_documents(kg, "L", b, a) == std::vector<std::string>{"u1", "u2"});
  CHECK(edge_documents(kg, "L", a, c) == std::vector<std::string>{"u1"});
  CHECK_THROWS_AS(edge_documents(kg, "M", a, b), NotFoundError);
  const Layer& layer = kg.layer("L");
  for (const Edge& e : layer.graph.edges) {
    CHECK(edge_documents(kg, "L", e.x, e.y).size() == e.count);
  }
}

TEST_CASE("provenance: absent edge and blocklisted rebuild are not found") {
  const char* tsv = "surface\tparent\ttype\na\t-\tdrug\nb\t-\tdrug\nc\t-\tdrug\nd\t-\tdrug\n";
  const auto full = std::make_shared<const Dictionary>(Dictionary::parse(tsv));
  const Tagger tagger(full);
  const std::vector<Document> docs{{"u1", "x", 0, "a b", "s"}, {"u2", "x", 1, "a b c", "s"}};
  MultiLayerKG kg(full);
  kg.add_layer("L", build_layer("L", build_units(docs, {}, tagger), full->size()));
  CHECK(edge_documents(kg, "L", *full->find("a"), *full->find("b")).size() == 2);
  CHECK_THROWS_AS(edge_documents(kg, "L", *full->find("a"), *full->find("d")), NotFoundError);

  const std::vector<std::string> block{"b"};
  const auto blocked = std::make_shared<const Dictionary>(Dictionary::parse(tsv, block));
  MultiLayerKG rebuilt(blocked);
  rebuilt.add_layer("L", build_layer("L", build_units(docs, {}, Tagger(blocked)), blocked->size()));
  CHECK_THROWS_AS(edge_documents(rebuilt, "L", *blocked->find("a"), *blocked->find("b")),
                  NotFoundError);
  CHECK(edge_documents(rebuilt, "L", *blocked->find("a"), *blocked->find("c")).size() == 1);
}
