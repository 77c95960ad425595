#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "termnet/analysis.hpp"
#include "termnet/backbone.hpp"
#include "termnet/multilayer.hpp"

namespace termnet {

inline constexpr int kSchemaVersion = 1;

// Canonical names indexed by TermId.
using NameTable = std::span<const std::string>;

std::string sha256_hex(std::string_view bytes);

// 12 significant digits; "inf" for infinity.
std::string format_weight(double value);
// Shortest text that parses back to the same double.
std::string format_exact_double(double value);

// Edge list with header term_x, term_y, r_xy, p_xy, d_xy, rows sorted by
// canonical names. With a backbone, columns label and distortion follow.
// Non-empty `comment` is emitted first as "# comment".
std::string write_edge_tsv(const DistanceGraph& g, NameTable names,
                           const BackboneResult* backbone = nullptr,
                           std::string_view comment = {});

// Parses an edge list without a dictionary: node names become TermIds in
// lexicographic order. d_xy (or p_xy when d_xy is blank) sets the weight; a
// plain decimal d_xy also yields the exact ratio.
struct NamedDistanceGraph {
  DistanceGraph graph;
  std::vector<std::string> names;
};
NamedDistanceGraph parse_edge_tsv(std::string_view tsv, std::string_view origin = "<edges>");

// Exact value of a plain decimal ("3", "1.25"); nothing for exponents,
// signs, or values that do not fit.
std::optional<Ratio> parse_decimal_ratio(std::string_view text);

std::string write_ego_tsv(const EgoNetwork& ego, const DistanceGraph& g, NameTable names,
                          const BackboneResult* backbone);

std::string write_cohort_tsv(const CohortReport& report);

// Single JSON record.
std::string write_stats_json(const BackboneStats& stats);

struct LayerManifest {
  std::string name;
  std::uint64_t unit_count = 0;
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  LayerParams params;
  bool has_backbone = false;
  std::optional<double> fraction_metric;
  EqualityPolicy equality_policy = EqualityPolicy::rational;
  std::optional<std::size_t> cohort_users;
  std::optional<double> cohort_fraction_contributing;
};

struct Manifest {
  int schema_version = kSchemaVersion;
  std::string created;  // ISO-8601 UTC
  std::string dictionary_sha256;
  std::vector<LayerManifest> layers;
  std::map<std::string, std::string> file_sha256;  // relative path -> digest

  const LayerManifest& layer(std::string_view name) const;
};

std::string write_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text);

struct BundleOptions {
  // Creation time recorded in the manifest. Defaults to SOURCE_DATE_EPOCH
  // when set, else the current time.
  std::optional<std::int64_t> created;
};

// Writes the whole bundle into a staging directory and swaps it into place;
// `dir` is untouched when anything fails. The manifest is written last.
Manifest write_bundle(const MultiLayerKG& kg, const std::map<std::string, BackboneResult>& backbones,
                      const std::filesystem::path& dir, const BundleOptions& options = {});

struct Bundle {
  Manifest manifest;
  MultiLayerKG kg;
  std::map<std::string, BackboneResult> backbones;
};

// Verifies every file digest against the manifest before parsing.
Bundle read_bundle(const std::filesystem::path& dir);

// Layer table: name, nodes, edges, % metric.
std::string format_stats_table(const Manifest& manifest);

}  // namespace termnet
