#include "termnet/storage.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "termnet/text.hpp"

namespace termnet {
namespace fs = std::filesystem;
namespace {

constexpr const char* kManifestFile = "manifest.txt";
constexpr const char* kDictionaryFile = "dictionary.tsv";
constexpr const char* kBlocklistFile = "blocklist.txt";
constexpr const char* kEdgeHeader = "term_x\tterm_y\tr_xy\tp_xy\td_xy";

std::string layer_file(std::string_view layer, std::string_view file) {
  return "layers/" + std::string(layer) + "/" + std::string(file);
}

void write_text(const fs::path& path, std::string_view content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw DataError("error writing " + path.string());
}

double proximity_of(const Edge& distance_edge) {
  if (distance_edge.exact) {
    const Ratio& d = *distance_edge.exact;
    return static_cast<double>(d.den) / static_cast<double>(d.num + d.den);
  }
  return distance_to_proximity(distance_edge.weight);
}

std::uint64_t parse_u64(std::string_view text, const std::string& where) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError(where + ": invalid integer '" + std::string(text) + "'");
  }
  return value;
}

double parse_double(std::string_view text, const std::string& where) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  double value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError(where + ": invalid number '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view text, const std::string& where) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw DataError(where + ": expected true or false, got '" + std::string(text) + "'");
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

struct EdgeRow {
  std::string x;
  std::string y;
  std::size_t index;
};

// Edge indices ordered by (name_x, name_y) with name_x < name_y.
std::vector<EdgeRow> rows_by_name(const std::vector<Edge>& edges, NameTable names) {
  std::vector<EdgeRow> rows;
  rows.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    std::string x = names[edges[i].x.value];
    std::string y = names[edges[i].y.value];
    if (y < x) std::swap(x, y);
    rows.push_back({std::move(x), std::move(y), i});
  }
  std::sort(rows.begin(), rows.end(), [](const EdgeRow& a, const EdgeRow& b) {
    return std::tie(a.x, a.y) < std::tie(b.x, b.y);
  });
  return rows;
}

std::string created_timestamp(const BundleOptions& options) {
  if (options.created) return format_iso8601(*options.created);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      return format_iso8601(std::stoll(epoch));
    } catch (const std::exception&) {
      throw UsageError("SOURCE_DATE_EPOCH is not an integer");
    }
  }
  const auto now = std::chrono::system_clock::now();
  return format_iso8601(
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());
}

std::string write_nodes_tsv(const ProximityGraph& g, const Dictionary& dict) {
  std::vector<std::uint64_t> diag(dict.size(), 0);
  for (const Edge& e : g.edges) {
    diag[e.x.value] += e.count;
    diag[e.y.value] += e.count;
  }
  std::string out = "term\ttype\tr_xx\n";
  for (TermId t : g.nodes) {
    out += dict.name(t);
    out += '\t';
    out += to_string(dict.entry(t).type);
    out += '\t';
    out += std::to_string(diag[t.value]);
    out += '\n';
  }
  return out;
}

std::string write_provenance(const Layer& layer, const Dictionary& dict) {
  std::string out;
  const auto names = dict.names();
  for (const EdgeRow& row : rows_by_name(layer.graph.edges, names)) {
    nlohmann::ordered_json record;
    record["term_x"] = row.x;
    record["term_y"] = row.y;
    std::vector<std::string> ids;
    for (std::uint32_t u : layer.provenance[row.index]) ids.push_back(layer.units[u].unit_id);
    record["unit_ids"] = ids;
    out += record.dump();
    out += '\n';
  }
  return out;
}

std::string write_texts(const Layer& layer) {
  std::string out;
  for (const auto& [doc_id, text] : layer.texts) {
    nlohmann::ordered_json record;
    record["doc_id"] = doc_id;
    record["text"] = text;
    out += record.dump();
    out += '\n';
  }
  return out;
}

TermId require_term(const Dictionary& dict, const std::string& name, const std::string& where) {
  const auto id = dict.find(name);
  if (!id) throw DataError(where + ": unknown term '" + name + "'");
  return *id;
}

Layer read_layer(const fs::path& dir, const LayerManifest& lm, const Dictionary& dict) {
  Layer layer;
  layer.params = lm.params;
  layer.graph.layer_name = lm.name;
  layer.graph.unit_count = lm.unit_count;

  const std::string nodes_path = layer_file(lm.name, "nodes.tsv");
  std::unordered_map<std::uint32_t, std::uint64_t> diag;
  {
    const auto lines = lines_of(read_file(dir / nodes_path));
    if (lines.empty() || lines[0] != "term\ttype\tr_xx") {
      throw DataError(nodes_path + ": bad header");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const std::string where = nodes_path + ":" + std::to_string(i + 1);
      const auto f = split(lines[i], '\t');
      if (f.size() != 3) throw DataError(where + ": expected 3 fields");
      const TermId t = require_term(dict, f[0], where);
      layer.graph.nodes.push_back(t);
      diag[t.value] = parse_u64(f[2], where);
    }
    std::sort(layer.graph.nodes.begin(), layer.graph.nodes.end());
  }

  const std::string edges_path = layer_file(lm.name, "edges.tsv");
  {
    const auto lines = lines_of(read_file(dir / edges_path));
    if (lines.empty() || lines[0] != kEdgeHeader) throw DataError(edges_path + ": bad header");
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const std::string where = edges_path + ":" + std::to_string(i + 1);
      const auto f = split(lines[i], '\t');
      if (f.size() != 5) throw DataError(where + ": expected 5 fields");
      Edge e;
      e.x = require_term(dict, f[0], where);
      e.y = require_term(dict, f[1], where);
      if (e.y < e.x) std::swap(e.x, e.y);
      e.count = parse_u64(f[2], where);
      const std::uint64_t either = diag.at(e.x.value) + diag.at(e.y.value) - e.count;
      if (e.count == 0 || either < e.count) throw DataError(where + ": inconsistent counts");
      e.weight = static_cast<double>(e.count) / static_cast<double>(either);
      e.exact = Ratio{e.count, either};
      const double stored = parse_double(f[3], where);
      if (std::abs(stored - e.weight) > 1e-11 * e.weight) {
        throw DataError(where + ": p_xy does not match the stored counts");
      }
      layer.graph.edges.push_back(e);
    }
    std::sort(layer.graph.edges.begin(), layer.graph.edges.end(),
              [](const Edge& a, const Edge& b) { return std::pair{a.x, a.y} < std::pair{b.x, b.y}; });
    std::vector<std::uint64_t> sums(dict.size(), 0);
    for (const Edge& e : layer.graph.edges) {
      sums[e.x.value] += e.count;
      sums[e.y.value] += e.count;
    }
    for (const auto& [t, r] : diag) {
      if (sums[t] != r) throw DataError(nodes_path + ": r_xx of '" + dict.name(TermId(t)) +
                                        "' does not equal the sum of its pair counts");
    }
  }

  const std::string units_path = layer_file(lm.name, "units.jsonl");
  layer.units = parse_units(read_file(dir / units_path), dict, units_path);
  if (layer.units.size() != lm.unit_count) {
    throw DataError(units_path + ": unit count does not match the manifest");
  }

  std::unordered_map<std::string, std::uint32_t> unit_index;
  for (std::uint32_t u = 0; u < layer.units.size(); ++u) {
    if (!unit_index.emplace(layer.units[u].unit_id, u).second) {
      throw DataError(units_path + ": duplicate unit_id '" + layer.units[u].unit_id + "'");
    }
  }
  const std::string prov_path = layer_file(lm.name, "provenance.jsonl");
  layer.provenance.assign(layer.graph.edges.size(), {});
  {
    const auto lines = lines_of(read_file(dir / prov_path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const std::string where = prov_path + ":" + std::to_string(i + 1);
      try {
        const auto record = nlohmann::json::parse(lines[i]);
        const TermId x = require_term(dict, record.at("term_x").get<std::string>(), where);
        const TermId y = require_term(dict, record.at("term_y").get<std::string>(), where);
        const Edge* e = layer.graph.find(x, y);
        if (e == nullptr) throw DataError(where + ": provenance for an absent edge");
        auto& list = layer.provenance[static_cast<std::size_t>(e - layer.graph.edges.data())];
        for (const auto& id : record.at("unit_ids")) {
          auto it = unit_index.find(id.get<std::string>());
          if (it == unit_index.end()) throw DataError(where + ": unknown unit id");
          list.push_back(it->second);
        }
        if (list.size() != e->count) {
          throw DataError(where + ": unit list length differs from r_xy");
        }
      } catch (const nlohmann::json::exception& ex) {
        throw DataError(where + ": " + ex.what());
      }
    }
  }

  if (lm.params.embed_text) {
    const std::string texts_path = layer_file(lm.name, "texts.jsonl");
    for (const auto& line : lines_of(read_file(dir / texts_path))) {
      if (line.empty()) continue;
      try {
        const auto record = nlohmann::json::parse(line);
        layer.texts.emplace(record.at("doc_id").get<std::string>(),
                            record.at("text").get<std::string>());
      } catch (const nlohmann::json::exception& ex) {
        throw DataError(texts_path + ": " + ex.what());
      }
    }
  }
  return layer;
}

BackboneResult read_backbone(const fs::path& dir, const LayerManifest& lm, const Dictionary& dict,
                             const DistanceGraph& g) {
  const std::string path = layer_file(lm.name, "backbone.tsv");
  const auto lines = lines_of(read_file(dir / path));
  if (lines.empty() || lines[0] != std::string(kEdgeHeader) + "\tlabel\tdistortion") {
    throw DataError(path + ": bad header");
  }
  BackboneResult b;
  b.labels.assign(g.edges.size(), EdgeLabel::metric);
  b.distortion.assign(g.edges.size(), std::nullopt);
  std::vector<bool> seen(g.edges.size(), false);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = path + ":" + std::to_string(i + 1);
    const auto f = split(lines[i], '\t');
    if (f.size() != 7) throw DataError(where + ": expected 7 fields");
    const Edge* e = g.find(require_term(dict, f[0], where), require_term(dict, f[1], where));
    if (e == nullptr) throw DataError(where + ": backbone row for an absent edge");
    const auto idx = static_cast<std::size_t>(e - g.edges.data());
    seen[idx] = true;
    if (f[5] == "metric") {
      if (!f[6].empty()) throw DataError(where + ": metric edge with a distortion");
    } else if (f[5] == "semi_metric") {
      b.labels[idx] = EdgeLabel::semi_metric;
      b.distortion[idx] = parse_double(f[6], where);
    } else {
      throw DataError(where + ": unknown label '" + f[5] + "'");
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw DataError(path + ": not every edge is labeled");
  }
  b.policy = lm.equality_policy;
  b.backbone.nodes = g.nodes;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (b.labels[i] == EdgeLabel::metric) b.backbone.edges.push_back(g.edges[i]);
  }
  b.fraction_metric = g.edges.empty() ? 1.0
                                      : static_cast<double>(b.backbone.edges.size()) /
                                            static_cast<double>(g.edges.size());
  return b;
}

std::string with_thousands(std::uint64_t value) {
  std::string digits = std::to_string(value);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string format_weight(double value) {
  if (std::isinf(value)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

std::string format_exact_double(double value) {
  if (std::isinf(value)) return "inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string write_edge_tsv(const DistanceGraph& g, NameTable names, const BackboneResult* backbone,
                           std::string_view comment) {
  std::string out;
  if (!comment.empty()) {
    out += "# ";
    out += comment;
    out += '\n';
  }
  out += kEdgeHeader;
  if (backbone != nullptr) out += "\tlabel\tdistortion";
  out += '\n';
  for (const EdgeRow& row : rows_by_name(g.edges, names)) {
    const Edge& e = g.edges[row.index];
    out += row.x;
    out += '\t';
    out += row.y;
    out += '\t';
    if (e.count > 0) out += std::to_string(e.count);
    out += '\t';
    out += format_weight(proximity_of(e));
    out += '\t';
    out += format_weight(e.weight);
    if (backbone != nullptr) {
      out += '\t';
      out += to_string(backbone->labels.at(row.index));
      out += '\t';
      if (const auto& d = backbone->distortion.at(row.index)) out += format_exact_double(*d);
    }
    out += '\n';
  }
  return out;
}

std::optional<Ratio> parse_decimal_ratio(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  bool seen_point = false;
  bool seen_digit = false;
  for (char c : text) {
    if (c == '.') {
      if (seen_point) return std::nullopt;
      seen_point = true;
      continue;
    }
    if (c < '0' || c > '9') return std::nullopt;
    seen_digit = true;
    if (num > (UINT64_MAX - 9) / 10) return std::nullopt;
    num = num * 10 + static_cast<std::uint64_t>(c - '0');
    if (seen_point) {
      if (den > UINT64_MAX / 10) return std::nullopt;
      den *= 10;
    }
  }
  if (!seen_digit) return std::nullopt;
  const std::uint64_t g = std::gcd(num, den);
  return Ratio{num / g, den / g};
}

NamedDistanceGraph parse_edge_tsv(std::string_view tsv, std::string_view origin) {
  struct Row {
    std::string x, y;
    double d;
    std::optional<Ratio> exact;
    std::uint64_t count;
  };
  std::vector<Row> rows;
  bool header = false;
  const auto lines = lines_of(tsv);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const std::string where = std::string(origin) + ":" + std::to_string(i + 1);
    if (trim(line).empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind(kEdgeHeader, 0) != 0) {
        throw DataError(where + ": expected header starting with term_x, term_y, r_xy, p_xy, d_xy");
      }
      header = true;
      continue;
    }
    const auto f = split(line, '\t');
    if (f.size() < 5) throw DataError(where + ": expected at least 5 fields");
    Row row;
    row.x = f[0];
    row.y = f[1];
    row.count = f[2].empty() ? 0 : parse_u64(f[2], where);
    if (!f[4].empty()) {
      row.d = parse_double(f[4], where);
      row.exact = parse_decimal_ratio(f[4]);
    } else if (!f[3].empty()) {
      const double p = parse_double(f[3], where);
      if (!(p > 0.0 && p <= 1.0)) throw DataError(where + ": p_xy must lie in (0, 1]");
      row.d = proximity_to_distance(p);
      if (const auto pr = parse_decimal_ratio(f[3])) {
        row.exact = Ratio{pr->den - pr->num, pr->num};
      }
    } else {
      throw DataError(where + ": neither d_xy nor p_xy given");
    }
    if (!std::isfinite(row.d) || row.d < 0) throw DataError(where + ": d_xy must be finite and >= 0");
    rows.push_back(std::move(row));
  }
  NamedDistanceGraph out;
  for (const Row& r : rows) {
    out.names.push_back(r.x);
    out.names.push_back(r.y);
  }
  std::sort(out.names.begin(), out.names.end());
  out.names.erase(std::unique(out.names.begin(), out.names.end()), out.names.end());
  const auto id_of = [&](const std::string& name) {
    return TermId(static_cast<std::uint32_t>(
        std::lower_bound(out.names.begin(), out.names.end(), name) - out.names.begin()));
  };
  std::vector<Edge> edges;
  for (const Row& r : rows) {
    Edge e;
    e.x = id_of(r.x);
    e.y = id_of(r.y);
    e.weight = r.d;
    e.exact = r.exact;
    e.count = r.count;
    edges.push_back(e);
  }
  out.graph = make_distance_graph(std::move(edges));
  return out;
}

std::string write_ego_tsv(const EgoNetwork& ego, const DistanceGraph& g, NameTable names,
                          const BackboneResult* backbone) {
  DistanceGraph sub;
  sub.nodes = ego.nodes;
  sub.edges = ego.edges;
  std::optional<BackboneResult> labels;
  if (backbone != nullptr) {
    labels.emplace();
    for (const Edge& e : ego.edges) {
      const Edge* original = g.find(e.x, e.y);
      const auto idx = static_cast<std::size_t>(original - g.edges.data());
      labels->labels.push_back(backbone->labels.at(idx));
      labels->distortion.push_back(backbone->distortion.at(idx));
    }
  }
  const std::string comment = std::string("target: ") + names[ego.target.value] +
                              (ego.is_backbone_ego ? " (backbone)" : " (full)");
  return write_edge_tsv(sub, names, labels ? &*labels : nullptr, comment);
}

std::string write_cohort_tsv(const CohortReport& report) {
  std::string out = "user_id\tn_units\tcontributes\n";
  for (const CohortUser& user : report.users) {
    out += user.user_id;
    out += '\t';
    out += std::to_string(user.n_units);
    out += '\t';
    out += user.contributes ? "true" : "false";
    out += '\n';
  }
  return out;
}

std::string write_stats_json(const BackboneStats& stats) {
  const auto number = [](double v) -> nlohmann::ordered_json {
    if (std::isinf(v)) return "inf";
    return v;
  };
  nlohmann::ordered_json j;
  j["node_count"] = stats.node_count;
  j["edge_count"] = stats.edge_count;
  j["metric_edge_count"] = stats.metric_edge_count;
  j["semi_metric_edge_count"] = stats.semi_metric_edge_count;
  j["fraction_metric"] = stats.fraction_metric;
  j["components_original"] = stats.components_original;
  j["components_backbone"] = stats.components_backbone;
  if (stats.distortion) {
    j["distortion"] = {{"min", number(stats.distortion->min)},
                       {"q25", number(stats.distortion->q25)},
                       {"median", number(stats.distortion->median)},
                       {"q75", number(stats.distortion->q75)},
                       {"max", number(stats.distortion->max)}};
  } else {
    j["distortion"] = nullptr;
  }
  return j.dump(2) + "\n";
}

const LayerManifest& Manifest::layer(std::string_view name) const {
  for (const LayerManifest& lm : layers) {
    if (lm.name == name) return lm;
  }
  std::vector<std::string> names;
  for (const LayerManifest& lm : layers) names.push_back(lm.name);
  throw NotFoundError("unknown layer '" + std::string(name) + "'" + suggestion_suffix(name, names));
}

std::string write_manifest(const Manifest& m) {
  std::string out;
  const auto put = [&](const std::string& key, const std::string& value) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  };
  put("schema_version", std::to_string(m.schema_version));
  put("created", m.created);
  put("dictionary_sha256", m.dictionary_sha256);
  std::string names;
  for (const LayerManifest& lm : m.layers) {
    if (!names.empty()) names += ',';
    names += lm.name;
  }
  put("layers", names);
  for (const LayerManifest& lm : m.layers) {
    const std::string p = "layer." + lm.name + ".";
    put(p + "unit_count", std::to_string(lm.unit_count));
    put(p + "node_count", std::to_string(lm.node_count));
    put(p + "edge_count", std::to_string(lm.edge_count));
    put(p + "unit_mode", std::string(to_string(lm.params.unit_policy.mode)));
    put(p + "window_days", std::to_string(lm.params.unit_policy.window_days));
    put(p + "min_count", std::to_string(lm.params.min_count));
    put(p + "embed_text", lm.params.embed_text ? "true" : "false");
    put(p + "equality_policy", std::string(to_string(lm.equality_policy)));
    put(p + "has_backbone", lm.has_backbone ? "true" : "false");
    put(p + "fraction_metric", lm.fraction_metric ? format_exact_double(*lm.fraction_metric) : "");
    put(p + "cohort_users", lm.cohort_users ? std::to_string(*lm.cohort_users) : "");
    put(p + "cohort_fraction_contributing",
        lm.cohort_fraction_contributing ? format_exact_double(*lm.cohort_fraction_contributing)
                                        : "");
  }
  for (const auto& [file, digest] : m.file_sha256) put("file." + file, digest);
  return out;
}

Manifest parse_manifest(std::string_view text) {
  std::map<std::string, std::string> kv;
  Manifest m;
  for (const std::string& line : lines_of(text)) {
    if (trim(line).empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("manifest: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key.rfind("file.", 0) == 0) {
      m.file_sha256[key.substr(5)] = value;
    } else {
      kv[key] = value;
    }
  }
  const auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError("manifest: missing key '" + key + "'");
    return it->second;
  };
  m.schema_version = static_cast<int>(parse_u64(get("schema_version"), "manifest"));
  if (m.schema_version != kSchemaVersion) {
    throw DataError("manifest: unsupported schema_version " + std::to_string(m.schema_version));
  }
  m.created = get("created");
  m.dictionary_sha256 = get("dictionary_sha256");
  const std::string& names = get("layers");
  if (!names.empty()) {
    for (const std::string& name : split(names, ',')) {
      const std::string p = "layer." + name + ".";
      const std::string where = "manifest " + p;
      LayerManifest lm;
      lm.name = name;
      lm.unit_count = parse_u64(get(p + "unit_count"), where);
      lm.node_count = parse_u64(get(p + "node_count"), where);
      lm.edge_count = parse_u64(get(p + "edge_count"), where);
      lm.params.unit_policy.mode = parse_unit_mode(get(p + "unit_mode"));
      lm.params.unit_policy.window_days =
          static_cast<int>(parse_u64(get(p + "window_days"), where));
      lm.params.min_count = parse_u64(get(p + "min_count"), where);
      lm.params.embed_text = parse_bool(get(p + "embed_text"), where);
      lm.equality_policy = parse_equality_policy(get(p + "equality_policy"));
      lm.has_backbone = parse_bool(get(p + "has_backbone"), where);
      if (const auto& f = get(p + "fraction_metric"); !f.empty()) {
        lm.fraction_metric = parse_double(f, where);
      }
      if (const auto& f = get(p + "cohort_users"); !f.empty()) {
        lm.cohort_users = parse_u64(f, where);
      }
      if (const auto& f = get(p + "cohort_fraction_contributing"); !f.empty()) {
        lm.cohort_fraction_contributing = parse_double(f, where);
      }
      m.layers.push_back(std::move(lm));
    }
  }
  return m;
}

Manifest write_bundle(const MultiLayerKG& kg, const std::map<std::string, BackboneResult>& backbones,
                      const fs::path& dir, const BundleOptions& options) {
  for (const auto& [name, b] : backbones) {
    if (!kg.has_layer(name)) throw UsageError("backbone given for unknown layer '" + name + "'");
  }
  if (fs::exists(dir) && !fs::is_empty(dir) && !fs::exists(dir / kManifestFile)) {
    throw DataError(dir.string() + " exists and is not a bundle; refusing to replace it");
  }

  const Dictionary& dict = kg.dictionary();
  const auto names = dict.names();
  fs::path target = dir;
  if (!target.has_filename()) target = target.parent_path();
  const fs::path staging = target.string() + ".partial";

  Manifest m;
  m.created = created_timestamp(options);
  // Files written relative to the bundle root, digests collected on the way.
  const auto emit = [&](const std::string& rel, const std::string& content) {
    write_text(staging / rel, content);
    m.file_sha256[rel] = sha256_hex(content);
  };

  try {
    fs::remove_all(staging);
    fs::create_directories(staging);
    const std::string dict_tsv = dict.to_tsv();
    emit(kDictionaryFile, dict_tsv);
    emit(kBlocklistFile, dict.blocklist_text());
    m.dictionary_sha256 = sha256_hex(dict_tsv);

    for (const auto& [name, layer] : kg.layers()) {
      LayerManifest lm;
      lm.name = name;
      lm.unit_count = layer.graph.unit_count;
      lm.node_count = layer.graph.nodes.size();
      lm.edge_count = layer.graph.edges.size();
      lm.params = layer.params;

      const DistanceGraph dg = to_distance(layer.graph);
      emit(layer_file(name, "edges.tsv"), write_edge_tsv(dg, names));
      emit(layer_file(name, "nodes.tsv"), write_nodes_tsv(layer.graph, dict));
      emit(layer_file(name, "units.jsonl"), write_units(layer.units, dict));
      emit(layer_file(name, "provenance.jsonl"), write_provenance(layer, dict));
      if (layer.params.embed_text) emit(layer_file(name, "texts.jsonl"), write_texts(layer));

      auto bit = backbones.find(name);
      if (bit != backbones.end()) {
        const BackboneResult& b = bit->second;
        if (b.labels.size() != dg.edges.size()) {
          throw DataError("backbone for layer '" + name + "' does not match its graph");
        }
        lm.has_backbone = true;
        lm.fraction_metric = b.fraction_metric;
        lm.equality_policy = b.policy;
        emit(layer_file(name, "backbone.tsv"), write_edge_tsv(dg, names, &b));
        emit(layer_file(name, "stats.json"), write_stats_json(backbone_stats(dg, b)));
        const CohortReport cohort = classify_cohort(layer.units, b);
        emit(layer_file(name, "cohort.tsv"), write_cohort_tsv(cohort));
        lm.cohort_users = cohort.n_users;
        lm.cohort_fraction_contributing = cohort.fraction_contributing;
      }
      m.layers.push_back(std::move(lm));
    }
    write_text(staging / kManifestFile, write_manifest(m));

    if (fs::exists(target)) fs::remove_all(target);
    fs::rename(staging, target);
  } catch (const fs::filesystem_error& e) {
    std::error_code ignored;
    fs::remove_all(staging, ignored);
    throw DataError(std::string("bundle write failed: ") + e.what());
  } catch (...) {
    std::error_code ignored;
    fs::remove_all(staging, ignored);
    throw;
  }
  return m;
}

Bundle read_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestFile;
  if (!fs::exists(manifest_path)) throw DataError(dir.string() + " is not a bundle (no manifest)");
  Manifest m = parse_manifest(read_file(manifest_path));

  std::map<std::string, std::string> contents;
  for (const auto& [rel, digest] : m.file_sha256) {
    std::string content = read_file(dir / rel);
    if (sha256_hex(content) != digest) {
      throw DataError((dir / rel).string() + ": content does not match the manifest digest");
    }
    contents.emplace(rel, std::move(content));
  }
  const auto need = [&](const std::string& rel) {
    if (!contents.count(rel)) throw DataError("manifest does not list " + rel);
  };
  need(kDictionaryFile);
  need(kBlocklistFile);
  if (sha256_hex(contents[kDictionaryFile]) != m.dictionary_sha256) {
    throw DataError("dictionary digest mismatch");
  }
  auto dict = std::make_shared<const Dictionary>(Dictionary::parse(
      contents[kDictionaryFile], parse_blocklist(contents[kBlocklistFile]),
      (dir / kDictionaryFile).string()));

  Bundle bundle{m, MultiLayerKG(dict), {}};
  for (const LayerManifest& lm : m.layers) {
    for (const char* f : {"edges.tsv", "nodes.tsv", "units.jsonl", "provenance.jsonl"}) {
      need(layer_file(lm.name, f));
    }
    Layer layer = read_layer(dir, lm, *dict);
    if (lm.has_backbone) {
      need(layer_file(lm.name, "backbone.tsv"));
      bundle.backbones.emplace(lm.name,
                               read_backbone(dir, lm, *dict, to_distance(layer.graph)));
    }
    bundle.kg.add_layer(lm.name, std::move(layer));
  }
  return bundle;
}

std::string format_stats_table(const Manifest& manifest) {
  std::vector<std::array<std::string, 4>> rows;
  rows.push_back({"KG Network", "Nodes", "Edges", "% metric"});
  for (const LayerManifest& lm : manifest.layers) {
    std::string pct = "-";
    if (lm.fraction_metric) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f%%", *lm.fraction_metric * 100.0);
      pct = buf;
    }
    rows.push_back({lm.name, with_thousands(lm.node_count), with_thousands(lm.edge_count), pct});
  }
  std::array<std::size_t, 4> width{};
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    out += row[0] + std::string(width[0] - row[0].size(), ' ');
    for (std::size_t c = 1; c < 4; ++c) {
      out += "  ";
      out += std::string(width[c] - row[c].size(), ' ') + row[c];
    }
    out += '\n';
  }
  return out;
}

}  // namespace termnet
