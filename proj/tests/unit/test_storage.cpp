#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "termnet/storage.hpp"

using namespace termnet;
namespace fs = std::filesystem;

namespace {

struct Pipeline {
  MultiLayerKG kg;
  std::map<std::string, BackboneResult> backbones;
};

Pipeline pipeline(unsigned threads, bool embed = false) {
  const auto dict =
      load_dictionary(testing::data("dictionary.tsv"), testing::data("blocklist.txt"));
  const auto docs = read_corpus(testing::data("synthetic_corpus.jsonl"));
  const Tagger tagger(dict);
  Pipeline p{MultiLayerKG(dict), {}};
  LayerBuildOptions options;
  options.threads = threads;
  options.params.embed_text = embed;
  Layer posts = build_layer("posts", build_units(docs, {}, tagger, threads), dict->size(), options);
  if (embed) {
    for (const auto& d : docs) posts.texts.emplace(d.doc_id, d.text);
  }
  options.params.embed_text = false;
  options.params.unit_policy = {UnitMode::timeline_window, 7};
  options.params.min_count = 2;
  Layer weekly = build_layer("weekly", build_units(docs, options.params.unit_policy, tagger, threads),
                             dict->size(), options);
  BackboneOptions bo;
  bo.threads = threads;
  p.backbones.emplace("posts", metric_backbone(to_distance(posts.graph), bo));
  p.backbones.emplace("weekly", metric_backbone(to_distance(weekly.graph), bo));
  p.kg.add_layer("posts", std::move(posts));
  p.kg.add_layer("weekly", std::move(weekly));
  return p;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      files[fs::relative(entry.path(), dir).string()] = read_file(entry.path());
    }
  }
  return files;
}

BundleOptions pinned() {
  BundleOptions o;
  o.created = 1700000000;
  return o;
}

}  // namespace

TEST_CASE("bundle: write then read reproduces every structure") {
  const testing::TempDir tmp("roundtrip");
  const Pipeline p = pipeline(1, true);
  const Manifest m = write_bundle(p.kg, p.backbones, tmp / "b", pinned());
  CHECK(m.created == "2023-11-14T22:13:20Z");
  const Bundle back = read_bundle(tmp / "b");
  CHECK(back.kg.layer_names() == p.kg.layer_names());
  CHECK(back.kg.dictionary().names() == p.kg.dictionary().names());
  CHECK(back.kg.dictionary().surface_index() == p.kg.dictionary().surface_index());
  for (const auto& name : p.kg.layer_names()) {
    CHECK(back.kg.layer(name) == p.kg.layer(name));
    const auto& a = back.backbones.at(name);
    const auto& b = p.backbones.at(name);
    CHECK(a.labels == b.labels);
    CHECK(a.distortion == b.distortion);
    CHECK(a.backbone == b.backbone);
    CHECK(a.fraction_metric == b.fraction_metric);
    CHECK(a.policy == b.policy);
  }
  const auto& weekly = back.manifest.layer("weekly");
  CHECK(weekly.params.min_count == 2);
  CHECK(weekly.params.unit_policy.mode == UnitMode::timeline_window);
  CHECK(weekly.params.unit_policy.window_days == 7);
  CHECK(weekly.cohort_users.has_value());
  CHECK(back.manifest.layer("posts").params.embed_text);
  CHECK_THROWS_AS(back.manifest.layer("post"), NotFoundError);
}

TEST_CASE("bundle: identical inputs give byte-identical files") {
  const testing::TempDir tmp("determinism");
  const Pipeline a = pipeline(1);
  const Pipeline b = pipeline(4);
  write_bundle(a.kg, a.backbones, tmp / "one", pinned());
  write_bundle(b.kg, b.backbones, tmp / "four", pinned());
  const auto one = snapshot(tmp / "one");
  CHECK(one.size() > 10);
  CHECK(one == snapshot(tmp / "four"));
  // rewriting in place is stable as well
  write_bundle(a.kg, a.backbones, tmp / "one", pinned());
  CHECK(one == snapshot(tmp / "one"));
}

TEST_CASE("bundle: a tampered file is a load error") {
  const testing::TempDir tmp("tamper");
  const Pipeline p = pipeline(1);
  write_bundle(p.kg, p.backbones, tmp / "b", pinned());
  const fs::path edges = tmp / "b" / "layers" / "posts" / "edges.tsv";
  std::string content = read_file(edges);
  content[content.size() / 2] ^= 1;
  std::ofstream(edges, std::ios::binary | std::ios::trunc) << content;
  try {
    read_bundle(tmp / "b");
    FAIL("expected a load error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("edges.tsv") != std::string::npos);
  }
}

TEST_CASE("bundle: refuses to overwrite a directory that is not a bundle") {
  const testing::TempDir tmp("refuse");
  fs::create_directories(tmp / "other");
  std::ofstream(tmp / "other" / "keep.txt") << "x";
  const Pipeline p = pipeline(1);
  CHECK_THROWS_AS(write_bundle(p.kg, p.backbones, tmp / "other", pinned()), DataError);
  CHECK(fs::exists(tmp / "other" / "keep.txt"));
  CHECK_FALSE(fs::exists(tmp.path() / "other.partial"));
  CHECK_THROWS_AS(read_bundle(tmp / "missing"), DataError);
}

TEST_CASE("bundle: failed writes leave no staging directory") {
  const testing::TempDir tmp("partial");
  const Pipeline p = pipeline(1);
  auto backbones = p.backbones;
  backbones.at("posts").labels.pop_back();
  CHECK_THROWS(write_bundle(p.kg, backbones, tmp / "b", pinned()));
  CHECK_FALSE(fs::exists(tmp / "b"));
  CHECK_FALSE(fs::exists(tmp.path() / "b.partial"));
  std::map<std::string, BackboneResult> unknown{{"nope", p.backbones.at("posts")}};
  CHECK_THROWS_AS(write_bundle(p.kg, unknown, tmp / "b", pinned()), UsageError);
}

TEST_CASE("bundle: creation time comes from SOURCE_DATE_EPOCH when not pinned") {
  const testing::TempDir tmp("epoch");
  const Pipeline p = pipeline(1);
  ::setenv("SOURCE_DATE_EPOCH", "86400", 1);
  const Manifest m = write_bundle(p.kg, p.backbones, tmp / "b");
  ::unsetenv("SOURCE_DATE_EPOCH");
  CHECK(m.created == "1970-01-02T00:00:00Z");
}

TEST_CASE("edge tsv: header, ordering and formatting") {
  const char* tsv =
      "# comment\n"
      "term_x\tterm_y\tr_xy\tp_xy\td_xy\textra\n"
      "b\tc\t\t0.5\t1\tz\n"
      "a\tc\t\t0.25\t\tz\n"
      "a\tb\t2\t\t1.5\tz\n";
  const NamedDistanceGraph g = parse_edge_tsv(tsv);
  CHECK(g.names == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(g.graph.edges.size() == 3);
  CHECK(g.graph.edges[0].weight == 1.5);
  CHECK(g.graph.edges[0].exact == Ratio{3, 2});
  CHECK(g.graph.edges[0].count == 2);
  CHECK(g.graph.edges[1].weight == 3.0);
  CHECK(g.graph.edges[1].exact == Ratio{3, 1});
  const std::string out = write_edge_tsv(g.graph, g.names);
  CHECK(out ==
        "term_x\tterm_y\tr_xy\tp_xy\td_xy\n"
        "a\tb\t2\t0.4\t1.5\n"
        "a\tc\t\t0.25\t3\n"
        "b\tc\t\t0.5\t1\n");
  CHECK_THROWS_AS(parse_edge_tsv("x\ty\n"), DataError);
  CHECK_THROWS_AS(parse_edge_tsv("term_x\tterm_y\tr_xy\tp_xy\td_xy\na\tb\t\t\t\n"), DataError);
  CHECK_THROWS_AS(parse_edge_tsv("term_x\tterm_y\tr_xy\tp_xy\td_xy\na\tb\t\t\t-1\n"), DataError);
  CHECK_THROWS_AS(parse_edge_tsv("term_x\tterm_y\tr_xy\tp_xy\td_xy\na\tb\t\t1.5\t\n"), DataError);
}

TEST_CASE("edge tsv: twelve significant digits and labels") {
  CHECK(format_weight(1.0 / 3.0) == "0.333333333333");
  CHECK(format_weight(2.0) == "2");
  CHECK(format_weight(INFINITY) == "inf");
  CHECK(format_exact_double(0.1) == "0.1");
  CHECK(std::stod(format_exact_double(1.0 / 3.0)) == 1.0 / 3.0);
  const NamedDistanceGraph g = parse_edge_tsv(read_file(testing::data("triangle.tsv")));
  const auto b = metric_backbone(g.graph);
  const std::string out = write_edge_tsv(g.graph, g.names, &b, "triangle");
  CHECK(out.rfind("# triangle\nterm_x\tterm_y\tr_xy\tp_xy\td_xy\tlabel\tdistortion\n", 0) == 0);
  CHECK(out.find("a\tc\t\t0.25\t3\tsemi_metric\t1.5\n") != std::string::npos);
  CHECK(out.find("a\tb\t\t0.5\t1\tmetric\t\n") != std::string::npos);
}

TEST_CASE("decimal ratios") {
  CHECK(parse_decimal_ratio("3") == Ratio{3, 1});
  CHECK(parse_decimal_ratio("1.25") == Ratio{5, 4});
  CHECK(parse_decimal_ratio("0.0") == Ratio{0, 1});
  CHECK_FALSE(parse_decimal_ratio("1e3").has_value());
  CHECK_FALSE(parse_decimal_ratio("-1").has_value());
  CHECK_FALSE(parse_decimal_ratio("").has_value());
  CHECK_FALSE(parse_decimal_ratio("1.2.3").has_value());
  CHECK_FALSE(parse_decimal_ratio("1.0000000000000000000001").has_value());
}

TEST_CASE("ego and cohort exports") {
  const NamedDistanceGraph g = parse_edge_tsv(read_file(testing::data("triangle.tsv")));
  const auto b = metric_backbone(g.graph);
  const auto e = ego(g.graph, &b, TermId(0), true);
  const std::string out = write_ego_tsv(e, g.graph, g.names, &b);
  CHECK(out ==
        "# target: a (backbone)\n"
        "term_x\tterm_y\tr_xy\tp_xy\td_xy\tlabel\tdistortion\n"
        "a\tb\t\t0.5\t1\tmetric\t\n");
  CohortReport report;
  report.users = {{"u1", 2, 1, true}, {"u2", 1, 0, false}};
  CHECK(write_cohort_tsv(report) == "user_id\tn_units\tcontributes\nu1\t2\ttrue\nu2\t1\tfalse\n");
}

TEST_CASE("manifest: round trip and stats table") {
  Manifest m;
  m.created = "2021-01-01T00:00:00Z";
  m.dictionary_sha256 = sha256_hex("abc");
  LayerManifest a;
  a.name = "PubMed";
  a.node_count = 11422;
  a.edge_count = 590781;
  a.has_backbone = true;
  a.fraction_metric = 0.0504;
  LayerManifest c;
  c.name = "tiny";
  c.node_count = 3;
  c.edge_count = 3;
  m.layers = {a, c};
  m.file_sha256["x.tsv"] = sha256_hex("");
  const Manifest back = parse_manifest(write_manifest(m));
  CHECK(write_manifest(back) == write_manifest(m));
  CHECK(back.layer("PubMed").fraction_metric == 0.0504);
  CHECK_FALSE(back.layer("tiny").fraction_metric.has_value());
  CHECK(m.dictionary_sha256 == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(format_stats_table(m) ==
        "KG Network   Nodes    Edges  % metric\n"
        "PubMed      11,422  590,781     5.04%\n"
        "tiny             3        3         -\n");
  CHECK_THROWS_AS(parse_manifest("schema_version=99\n"), DataError);
  CHECK_THROWS_AS(parse_manifest("junk\n"), DataError);
}
