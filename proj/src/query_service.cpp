#include "termnet/query_service.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "httplib.h"
#include "json.hpp"
#include "termnet/analysis.hpp"
#include "termnet/text.hpp"

namespace termnet {
namespace {

using json = nlohmann::ordered_json;

constexpr std::size_t kDefaultTermLimit = 20;
constexpr std::size_t kDefaultPageSize = 100;
constexpr std::size_t kMaxPageSize = 1000;
constexpr std::size_t kDefaultTopK = 10;

// Thrown inside handlers and turned into an error body.
struct HttpError {
  int status;
  std::string code;
  std::string message;
  std::vector<std::string> suggestions;
};

Response reply(const json& body) { return {200, body.dump()}; }

Response error_reply(const HttpError& e) {
  json body;
  body["error"]["code"] = e.code;
  body["error"]["message"] = e.message;
  body["error"]["suggestions"] = e.suggestions;
  return {e.status, body.dump()};
}

HttpError not_found(std::string code, std::string message, std::string_view query,
                    std::span<const std::string> candidates) {
  std::vector<std::string> suggestions;
  if (auto m = nearest_match(query, candidates)) suggestions.push_back(*m);
  return {404, std::move(code), std::move(message), std::move(suggestions)};
}

const std::string& required(const QueryParams& params, std::string_view key) {
  auto it = params.find(key);
  if (it == params.end() || it->second.empty()) {
    throw HttpError{400, "missing_parameter", "missing parameter '" + std::string(key) + "'", {}};
  }
  return it->second;
}

bool flag(const QueryParams& params, std::string_view key, bool fallback) {
  auto it = params.find(key);
  if (it == params.end() || it->second.empty()) return fallback;
  const std::string v = fold_case(it->second);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw HttpError{400, "bad_parameter",
                  "parameter '" + std::string(key) + "' must be true or false", {}};
}

std::size_t count_param(const QueryParams& params, std::string_view key, std::size_t fallback,
                        std::size_t max) {
  auto it = params.find(key);
  if (it == params.end() || it->second.empty()) return fallback;
  std::size_t value = 0;
  const std::string& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || value > max) {
    throw HttpError{400, "bad_parameter",
                    "parameter '" + std::string(key) + "' must be an integer in [0, " +
                        std::to_string(max) + "]",
                    {}};
  }
  return value;
}

json number(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

double proximity_of(const Edge& d) {
  if (d.exact) {
    return static_cast<double>(d.exact->den) / static_cast<double>(d.exact->num + d.exact->den);
  }
  return distance_to_proximity(d.weight);
}

json edge_record(const Edge& e, const DistanceGraph& g, const BackboneResult* b,
                 const std::vector<std::string>& names) {
  json rec;
  std::string x = names[e.x.value];
  std::string y = names[e.y.value];
  if (y < x) std::swap(x, y);
  rec["x"] = x;
  rec["y"] = y;
  rec["r"] = e.count;
  rec["p"] = proximity_of(e);
  rec["d"] = e.weight;
  if (b != nullptr) {
    const auto idx = static_cast<std::size_t>(g.find(e.x, e.y) - g.edges.data());
    rec["label"] = to_string(b->labels[idx]);
    if (const auto& dist = b->distortion[idx]) {
      rec["distortion"] = number(*dist);
    } else {
      rec["distortion"] = nullptr;
    }
  } else {
    rec["label"] = nullptr;
    rec["distortion"] = nullptr;
  }
  return rec;
}

void sort_records(json& records) {
  std::sort(records.begin(), records.end(), [](const json& a, const json& b) {
    return std::tie(a["x"].get_ref<const std::string&>(), a["y"].get_ref<const std::string&>()) <
           std::tie(b["x"].get_ref<const std::string&>(), b["y"].get_ref<const std::string&>());
  });
}

}  // namespace

QueryService::QueryService(Bundle bundle, unsigned threads)
    : bundle_(std::move(bundle)), threads_(threads) {
  const Dictionary& dict = bundle_.kg.dictionary();
  names_ = dict.names();
  for (const auto& [surface, id] : dict.surface_index()) known_surfaces_.push_back(surface);
  std::sort(known_surfaces_.begin(), known_surfaces_.end());
  for (const auto& [name, layer] : bundle_.kg.layers()) {
    LayerState state;
    state.distance = to_distance(layer.graph);
    auto it = bundle_.backbones.find(name);
    if (it != bundle_.backbones.end()) {
      state.backbone = std::make_shared<const BackboneResult>(it->second);
    }
    layer_states_.emplace(name, std::move(state));
  }
}

std::unique_ptr<QueryService> QueryService::load(const std::filesystem::path& dir,
                                                 unsigned threads) {
  return std::make_unique<QueryService>(read_bundle(dir), threads);
}

const QueryService::LayerState& QueryService::layer_state(std::string_view name) const {
  auto it = layer_states_.find(name);
  if (it == layer_states_.end()) {
    const auto names = bundle_.kg.layer_names();
    throw not_found("unknown_layer", "unknown layer '" + std::string(name) + "'", name, names);
  }
  return it->second;
}

std::shared_ptr<const BackboneResult> QueryService::layer_backbone(std::string_view name) const {
  const LayerState& state = layer_state(name);
  if (state.backbone) return state.backbone;
  std::lock_guard lock(mutex_);
  auto it = computed_.find(name);
  if (it != computed_.end()) return it->second;
  BackboneOptions options;
  options.threads = threads_;
  auto b = std::make_shared<const BackboneResult>(metric_backbone(state.distance, options));
  computed_.emplace(std::string(name), b);
  return b;
}

std::shared_ptr<const QueryService::MergedState> QueryService::merged(MergeMode mode,
                                                                      bool with_backbone) const {
  std::lock_guard lock(mutex_);
  auto& slot = merged_[mode];
  if (!slot) {
    auto state = std::make_shared<MergedState>();
    MergePolicy policy;
    policy.mode = mode;
    state->proximity = merge(bundle_.kg, policy);
    state->distance = to_distance(state->proximity);
    slot = state;
  }
  if (with_backbone && !slot->backbone) {
    auto state = std::make_shared<MergedState>(*slot);
    BackboneOptions options;
    options.threads = threads_;
    state->backbone = std::make_shared<const BackboneResult>(metric_backbone(state->distance, options));
    slot = state;
  }
  return slot;
}

TermId QueryService::resolve_term(std::string_view name) const {
  const Dictionary& dict = bundle_.kg.dictionary();
  if (auto id = dict.find(name); id && !dict.entry(*id).blocked) return dict.root(*id);
  if (auto id = dict.resolve(name)) return *id;
  throw not_found("unknown_term", "unknown term '" + std::string(name) + "'", name, known_surfaces_);
}

Response QueryService::handle(std::string_view path, const QueryParams& params) const {
  try {
    if (path == "/layers") return layers();
    if (path == "/terms") return terms(params);
    if (path == "/ego") return ego_view(params);
    if (path == "/edge") return edge(params);
    if (path == "/merged") return merged_view(params);
    throw HttpError{404, "unknown_endpoint", "no endpoint " + std::string(path), {}};
  } catch (const HttpError& e) {
    return error_reply(e);
  } catch (const NotFoundError& e) {
    return error_reply({404, "not_found", e.what(), {}});
  } catch (const std::exception& e) {
    return error_reply({400, "bad_request", e.what(), {}});
  }
}

Response QueryService::layers() const {
  json list = json::array();
  for (const LayerManifest& lm : bundle_.manifest.layers) {
    json rec;
    rec["name"] = lm.name;
    rec["unit_count"] = lm.unit_count;
    rec["node_count"] = lm.node_count;
    rec["edge_count"] = lm.edge_count;
    rec["unit_mode"] = to_string(lm.params.unit_policy.mode);
    rec["window_days"] = lm.params.unit_policy.window_days;
    rec["min_count"] = lm.params.min_count;
    rec["embed_text"] = lm.params.embed_text;
    rec["has_backbone"] = lm.has_backbone;
    rec["equality_policy"] = to_string(lm.equality_policy);
    rec["fraction_metric"] = lm.fraction_metric ? json(*lm.fraction_metric) : json(nullptr);
    rec["cohort_users"] = lm.cohort_users ? json(*lm.cohort_users) : json(nullptr);
    rec["cohort_fraction_contributing"] =
        lm.cohort_fraction_contributing ? json(*lm.cohort_fraction_contributing) : json(nullptr);
    list.push_back(std::move(rec));
  }
  json body;
  body["layers"] = std::move(list);
  return reply(body);
}

Response QueryService::terms(const QueryParams& params) const {
  auto it = params.find("q");
  const std::string prefix = fold_case(it == params.end() ? "" : it->second);
  const std::size_t limit = count_param(params, "limit", kDefaultTermLimit, 10000);
  const Dictionary& dict = bundle_.kg.dictionary();
  json list = json::array();
  for (TermId t : dict.roots()) {
    if (list.size() >= limit) break;
    const std::string& name = dict.name(t);
    if (fold_case(name).rfind(prefix, 0) != 0) continue;
    list.push_back({{"term", name}, {"type", to_string(dict.entry(t).type)}});
  }
  json body;
  body["query"] = prefix;
  body["terms"] = std::move(list);
  return reply(body);
}

Response QueryService::ego_view(const QueryParams& params) const {
  const std::string& layer_name = required(params, "layer");
  const std::string& term = required(params, "term");
  const bool backbone = flag(params, "backbone", false);
  const LayerState& state = layer_state(layer_name);
  const TermId target = resolve_term(term);
  if (!std::binary_search(state.distance.nodes.begin(), state.distance.nodes.end(), target)) {
    throw HttpError{404, "term_not_in_layer",
                    "term '" + names_[target.value] + "' has no edges in layer '" + layer_name + "'",
                    {}};
  }
  std::shared_ptr<const BackboneResult> b;
  if (backbone || bundle_.backbones.count(layer_name)) b = layer_backbone(layer_name);
  const EgoNetwork e = ego(state.distance, b.get(), target, backbone);

  const DistanceGraph& source = backbone ? b->backbone : state.distance;
  std::vector<std::size_t> degree(names_.size(), 0);
  for (const Edge& edge : source.edges) {
    ++degree[edge.x.value];
    ++degree[edge.y.value];
  }
  const Dictionary& dict = bundle_.kg.dictionary();
  json nodes = json::array();
  std::vector<TermId> ordered = e.nodes;
  std::sort(ordered.begin(), ordered.end(),
            [&](TermId a, TermId c) { return names_[a.value] < names_[c.value]; });
  for (TermId t : ordered) {
    nodes.push_back({{"term", names_[t.value]},
                     {"type", to_string(dict.entry(t).type)},
                     {"degree", degree[t.value]}});
  }
  json edges = json::array();
  for (const Edge& edge : e.edges) edges.push_back(edge_record(edge, state.distance, b.get(), names_));
  sort_records(edges);

  json body;
  body["layer"] = layer_name;
  body["target"] = names_[target.value];
  body["backbone"] = backbone;
  body["nodes"] = std::move(nodes);
  body["edges"] = std::move(edges);
  return reply(body);
}

Response QueryService::edge(const QueryParams& params) const {
  const std::string& layer_name = required(params, "layer");
  const LayerState& state = layer_state(layer_name);
  const TermId x = resolve_term(required(params, "x"));
  const TermId y = resolve_term(required(params, "y"));
  const std::size_t page = count_param(params, "page", 0, SIZE_MAX);
  const std::size_t page_size = count_param(params, "page_size", kDefaultPageSize, kMaxPageSize);
  const Edge* e = state.distance.find(x, y);
  if (e == nullptr) {
    throw HttpError{404, "unknown_edge",
                    "no edge between '" + names_[x.value] + "' and '" + names_[y.value] +
                        "' in layer '" + layer_name + "'",
                    {}};
  }
  const auto idx = static_cast<std::size_t>(e - state.distance.edges.data());
  std::shared_ptr<const BackboneResult> b;
  if (bundle_.backbones.count(layer_name)) b = layer_backbone(layer_name);
  json body = edge_record(*e, state.distance, b.get(), names_);

  const Layer& layer = bundle_.kg.layer(layer_name);
  const auto& units = layer.provenance[idx];
  json list = json::array();
  const std::size_t begin = std::min(units.size(), page * page_size);
  const std::size_t end = std::min(units.size(), begin + page_size);
  for (std::size_t i = begin; i < end; ++i) {
    const AnalysisUnit& unit = layer.units[units[i]];
    json rec;
    rec["unit_id"] = unit.unit_id;
    rec["user_id"] = unit.user_id ? json(*unit.user_id) : json(nullptr);
    rec["doc_ids"] = unit.member_doc_ids;
    if (layer.params.embed_text) {
      json texts = json::array();
      for (const auto& doc : unit.member_doc_ids) {
        auto t = layer.texts.find(doc);
        texts.push_back(t == layer.texts.end() ? json(nullptr) : json(t->second));
      }
      rec["texts"] = std::move(texts);
    }
    list.push_back(std::move(rec));
  }
  body["layer"] = layer_name;
  body["units_total"] = units.size();
  body["page"] = page;
  body["page_size"] = page_size;
  body["units"] = std::move(list);
  return reply(body);
}

Response QueryService::merged_view(const QueryParams& params) const {
  MergeMode mode = MergeMode::mean_proximity;
  if (auto it = params.find("mode"); it != params.end() && !it->second.empty()) {
    try {
      mode = parse_merge_mode(it->second);
    } catch (const std::exception& ex) {
      throw HttpError{400, "bad_parameter", ex.what(), {}};
    }
  }
  const bool backbone = flag(params, "backbone", false);
  const std::size_t k = count_param(params, "k", kDefaultTopK, 10000);
  if (bundle_.kg.layers().empty()) {
    throw HttpError{404, "no_layers", "the bundle has no layers to merge", {}};
  }
  const auto state = merged(mode, backbone);
  const DistanceGraph& g = state->distance;
  const BackboneResult* b = state->backbone.get();

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (backbone && b->labels[i] != EdgeLabel::metric) continue;
    order.push_back(i);
  }
  const auto key = [&](std::size_t i) {
    const Edge& e = g.edges[i];
    return std::tuple(e.weight, names_[std::min(e.x, e.y).value], names_[std::max(e.x, e.y).value]);
  };
  const std::size_t top = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t a, std::size_t c) { return key(a) < key(c); });
  json edges = json::array();
  for (std::size_t i = 0; i < top; ++i) {
    edges.push_back(edge_record(g.edges[order[i]], g, b, names_));
  }

  json body;
  body["mode"] = to_string(mode);
  body["layers"] = bundle_.kg.layer_names();
  body["backbone"] = backbone;
  body["node_count"] = g.nodes.size();
  body["edge_count"] = g.edges.size();
  body["fraction_metric"] = b != nullptr ? json(b->fraction_metric) : json(nullptr);
  body["metric_edge_count"] = b != nullptr ? json(b->metric_count()) : json(nullptr);
  body["top_edges"] = std::move(edges);
  return reply(body);
}

HttpServer::HttpServer(const QueryService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  const auto route = [this](const httplib::Request& req, httplib::Response& res) {
    QueryParams params;
    for (const auto& [key, value] : req.params) params.emplace(key, value);
    const Response r = service_.handle(req.path, params);
    res.status = r.status;
    res.set_content(r.body, "application/json; charset=utf-8");
  };
  server_->Get(R"(/[a-z]*)", route);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw DataError("cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw DataError("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

}  // namespace termnet
