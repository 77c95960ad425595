#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "termnet/cli.hpp"

using namespace termnet;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string data(const char* name) { return testing::data(name).string(); }

std::string build_triangle(const testing::TempDir& tmp) {
  const std::string bundle = (tmp / "bundle").string();
  const Run r = run({"build", "--dictionary", data("triangle_dictionary.tsv"), "--units",
                     data("triangle_units.jsonl"), "--layer", "L", "--out", bundle});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out == "layer L: 5 units, 3 nodes, 3 edges, 66.67% metric\n");
  return bundle;
}

}  // namespace

TEST_CASE("cli: backbone of a standalone edge file") {
  const testing::TempDir tmp("cli_edges");
  const std::string out = (tmp / "labeled.tsv").string();
  const Run r = run({"backbone", "--edges", data("triangle.tsv"), "--out", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("nodes: 3\nedges: 3\nmetric_edges: 2\nsemi_metric_edges: 1\n") == 0);
  CHECK(r.out.find("fraction_metric: 0.667\n") != std::string::npos);
  CHECK(r.out.find("components: 1 (backbone 1)\n") != std::string::npos);
  CHECK(read_file(out).find("a\tc\t\t0.25\t3\tsemi_metric\t1.5\n") != std::string::npos);
}

TEST_CASE("cli: build, stats, ego, cohort and merge on a bundle") {
  const testing::TempDir tmp("cli_bundle");
  const std::string bundle = build_triangle(tmp);

  const Run stats = run({"stats", "--bundle", bundle});
  REQUIRE(stats.code == 0);
  CHECK(stats.out ==
        "KG Network  Nodes  Edges  % metric\n"
        "L               3      3    66.67%\n");

  const Run ego = run({"ego", "--bundle", bundle, "--layer", "L", "--target-term", "A"});
  REQUIRE(ego.code == 0);
  CHECK(ego.out ==
        "# target: a (backbone)\n"
        "term_x\tterm_y\tr_xy\tp_xy\td_xy\tlabel\tdistortion\n"
        "a\tb\t2\t0.4\t1.5\tmetric\t\n");
  const Run full =
      run({"ego", "--bundle", bundle, "--layer", "L", "--target-term", "a", "--no-backbone"});
  CHECK(full.out.find("# target: a (full)\n") == 0);
  CHECK(std::count(full.out.begin(), full.out.end(), '\n') == 5);

  const Run cohort = run({"cohort", "--bundle", bundle, "--layer", "L"});
  REQUIRE(cohort.code == 0);
  CHECK(cohort.out ==
        "user_id\tn_units\tcontributes\nalice\t1\ttrue\nbob\t1\ttrue\ncarol\t2\ttrue\ndave\t1\tfalse\n");
  CHECK(cohort.err.find("fraction_contributing: 0.7500\n") != std::string::npos);

  // a second layer from the same dictionary
  const Run second = run({"build", "--units", data("triangle_units.jsonl"), "--layer", "M",
                          "--min-count", "3", "--out", bundle});
  REQUIRE_MESSAGE(second.code == 0, second.err);
  const Run merged = run({"merge", "--bundle", bundle, "--merge-mode", "max"});
  REQUIRE(merged.code == 0);
  CHECK(merged.out.find("# merged:max\nterm_x\tterm_y\tr_xy\tp_xy\td_xy\n") == 0);
  CHECK(merged.err == "merged:max: 3 nodes, 3 edges\n");
  const Run labeled = run({"merge", "--bundle", bundle, "--backbone"});
  CHECK(labeled.err == "merged:mean: 3 nodes, 3 edges, 66.67% metric\n");
}

TEST_CASE("cli: thin wrapper output equals the library") {
  const testing::TempDir tmp("cli_wrapper");
  const std::string units = (tmp / "units.jsonl").string();
  const Run r = run({"tag", "--dictionary", data("dictionary.tsv"), "--blocklist",
                     data("blocklist.txt"), "--corpus", data("synthetic_corpus.jsonl"),
                     "--unit-mode", "timeline_window", "--window-days", "7", "--out", units});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto dict = load_dictionary(testing::data("dictionary.tsv"), testing::data("blocklist.txt"));
  const auto lib = build_units(read_corpus(testing::data("synthetic_corpus.jsonl")),
                               {UnitMode::timeline_window, 7}, Tagger(dict));
  CHECK(read_file(units) == write_units(lib, *dict));
}

TEST_CASE("cli: empty corpus warns and succeeds") {
  const testing::TempDir tmp("cli_empty");
  const fs::path corpus = tmp / "empty.jsonl";
  std::ofstream(corpus) << "";
  const Run r = run({"tag", "--dictionary", data("dictionary.tsv"), "--corpus", corpus.string()});
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  CHECK(r.err.find("warning:") == 0);
}

TEST_CASE("cli: exit codes and messages") {
  const testing::TempDir tmp("cli_errors");
  const std::string bundle = build_triangle(tmp);
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"--help"}).code == cli::kExitOk);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"stats"}).code == cli::kExitUsage);
  CHECK(run({"backbone", "--edges", data("triangle.tsv"), "--threads", "0"}).code == cli::kExitUsage);
  CHECK(run({"stats", "--bundle", (tmp / "missing").string()}).code == cli::kExitData);
  const Run layer = run({"ego", "--bundle", bundle, "--layer", "l", "--target-term", "a"});
  CHECK(layer.code == cli::kExitData);
  CHECK(layer.err.find("did you mean 'L'?") != std::string::npos);
  const Run term = run({"ego", "--bundle", bundle, "--layer", "L", "--target-term", "bb"});
  CHECK(term.code == cli::kExitData);
  CHECK(term.err.find("did you mean") != std::string::npos);
  const Run policy = run({"backbone", "--edges", data("triangle.tsv"), "--equality-policy", "fuzzy"});
  CHECK(policy.code == cli::kExitUsage);
  const Run mismatch = run({"build", "--dictionary", data("dictionary.tsv"), "--units",
                            data("triangle_units.jsonl"), "--layer", "N", "--out", bundle});
  CHECK(mismatch.code == cli::kExitData);
}

TEST_CASE("cli: config file fills options and flags override it") {
  const testing::TempDir tmp("cli_config");
  const std::string bundle = build_triangle(tmp);
  const fs::path config = tmp / "termnet.ini";
  std::ofstream(config) << "layer=L\ntarget-term=a\nbackbone=false\nunrelated=1\n";
  const Run full = run({"ego", "--bundle", bundle, "--config", config.string()});
  REQUIRE_MESSAGE(full.code == 0, full.err);
  CHECK(full.out.find("(full)") != std::string::npos);
  const Run bb = run({"ego", "--bundle", bundle, "--config", config.string(), "--backbone"});
  CHECK(bb.out.find("(backbone)") != std::string::npos);
  CHECK(run({"ego", "--bundle", bundle, "--config", (tmp / "none.ini").string()}).code ==
        cli::kExitUsage);
}
