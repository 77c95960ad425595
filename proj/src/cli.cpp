#include "termnet/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "termnet/analysis.hpp"
#include "termnet/parallel.hpp"
#include "termnet/query_service.hpp"
#include "termnet/storage.hpp"
#include "termnet/text.hpp"

namespace termnet::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string dictionary;
  std::string blocklist;
  std::string corpus;
  std::string units;
  std::string edges;
  std::string bundle;
  std::string labels;
  std::string unit_mode = "per_document";
  int window_days = 0;
  std::uint64_t min_count = 1;
  std::vector<std::string> layers;
  std::string merge_mode = "mean";
  bool mean_absent_as_zero = false;
  std::string target_term;
  bool backbone = true;
  std::string equality_policy = "rational";
  std::string out;
  unsigned threads = default_threads();
  bool embed_text = false;
  int port = 8080;
  std::string bind = "127.0.0.1";
};

void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot write " + path);
  file << content;
  if (!file.flush()) throw DataError("error writing " + path);
}

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

UnitPolicy unit_policy(const Options& o) {
  UnitPolicy policy;
  policy.mode = parse_unit_mode(o.unit_mode);
  policy.window_days = o.window_days;
  if (policy.mode == UnitMode::timeline_window && policy.window_days < 1) {
    throw UsageError("--window-days must be >= 1 with --unit-mode timeline_window");
  }
  return policy;
}

BackboneOptions backbone_options(const Options& o) {
  BackboneOptions options;
  options.policy = parse_equality_policy(o.equality_policy);
  options.threads = o.threads;
  return options;
}

std::shared_ptr<const Dictionary> dictionary_from_flags(const Options& o) {
  if (o.dictionary.empty()) throw UsageError("--dictionary is required");
  std::optional<fs::path> blocklist;
  if (!o.blocklist.empty()) blocklist = o.blocklist;
  return load_dictionary(o.dictionary, blocklist);
}

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
  return value;
}

const std::string& single_layer(const Options& o) {
  if (o.layers.size() != 1) throw UsageError("exactly one --layer is required");
  return o.layers.front();
}

TermId lookup_term(const Dictionary& dict, const std::string& name) {
  if (auto id = dict.find(name); id && !dict.entry(*id).blocked) return dict.root(*id);
  if (auto id = dict.resolve(name)) return *id;
  std::vector<std::string> known;
  for (const auto& [surface, id] : dict.surface_index()) known.push_back(surface);
  std::sort(known.begin(), known.end());
  throw NotFoundError("unknown term '" + name + "'" + suggestion_suffix(name, known));
}

void print_stats(const BackboneStats& s, std::ostream& out) {
  out << "nodes: " << s.node_count << "\n";
  out << "edges: " << s.edge_count << "\n";
  out << "metric_edges: " << s.metric_edge_count << "\n";
  out << "semi_metric_edges: " << s.semi_metric_edge_count << "\n";
  out << "fraction_metric: " << fixed(s.fraction_metric, 3) << "\n";
  out << "components: " << s.components_original << " (backbone " << s.components_backbone
      << ")\n";
  if (s.distortion) {
    const auto& d = *s.distortion;
    out << "distortion: min " << format_weight(d.min) << " q25 " << format_weight(d.q25)
        << " median " << format_weight(d.median) << " q75 " << format_weight(d.q75) << " max "
        << format_weight(d.max) << "\n";
  }
}

// Fills options of `sub` that were not given on the command line. Keys the
// subcommand does not know are ignored so one file can serve every command.
void apply_config(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  CLI::ConfigBase format;
  std::vector<CLI::ConfigItem> items;
  try {
    items = format.from_config(in);
  } catch (const CLI::Error& e) {
    throw UsageError(path + ": " + e.what());
  }
  for (const CLI::ConfigItem& item : items) {
    if (!item.parents.empty() || item.name == "config") continue;
    CLI::Option* op = sub->get_option_no_throw("--" + item.name);
    if (op == nullptr || op->count() > 0) continue;
    try {
      op->add_result(item.inputs);
      op->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError(path + ": " + item.name + ": " + e.what());
    }
  }
}

int cmd_tag(const Options& o, std::ostream& out, std::ostream& err) {
  const auto dict = dictionary_from_flags(o);
  const auto docs = read_corpus(require(o.corpus, "--corpus"));
  const Tagger tagger(dict);
  const auto units = build_units(docs, unit_policy(o), tagger, o.threads);
  if (docs.empty()) err << "warning: corpus " << o.corpus << " has no documents\n";
  emit(o.out, write_units(units, *dict), out);
  err << "tagged " << docs.size() << " documents into " << units.size() << " units\n";
  return kExitOk;
}

int cmd_build(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path dir = require(o.out, "--out");
  const std::string& name = single_layer(o);
  validate_layer_name(name);

  std::optional<Bundle> existing;
  if (fs::exists(dir / "manifest.txt")) existing.emplace(read_bundle(dir));
  std::shared_ptr<const Dictionary> dict;
  if (!o.dictionary.empty()) {
    dict = dictionary_from_flags(o);
    if (existing && existing->manifest.dictionary_sha256 != sha256_hex(dict->to_tsv())) {
      throw DataError("dictionary differs from the one stored in " + dir.string());
    }
  }
  if (existing) dict = existing->kg.dictionary_ptr();
  if (!dict) throw UsageError("--dictionary is required for a new bundle");

  if (o.units.empty() == o.corpus.empty()) {
    throw UsageError("give exactly one of --units or --corpus");
  }
  LayerBuildOptions options;
  options.params.min_count = o.min_count;
  options.params.embed_text = o.embed_text;
  options.threads = o.threads;
  std::vector<AnalysisUnit> units;
  std::map<std::string, std::string> texts;
  if (!o.corpus.empty()) {
    options.params.unit_policy = unit_policy(o);
    const auto docs = read_corpus(o.corpus);
    if (docs.empty()) err << "warning: corpus " << o.corpus << " has no documents\n";
    units = build_units(docs, options.params.unit_policy, Tagger(dict), o.threads);
    if (o.embed_text) {
      for (const Document& d : docs) texts.emplace(d.doc_id, d.text);
    }
  } else {
    if (o.embed_text) throw UsageError("--embed-text needs --corpus");
    units = parse_units(read_file(o.units), *dict, o.units);
    options.params.unit_policy = unit_policy(o);
  }

  Layer layer = build_layer(name, std::move(units), dict->size(), options);
  layer.texts = std::move(texts);

  MultiLayerKG kg = existing ? std::move(existing->kg) : MultiLayerKG(dict);
  std::map<std::string, BackboneResult> backbones;
  if (existing) backbones = std::move(existing->backbones);
  backbones.erase(name);
  if (o.backbone) {
    backbones.emplace(name, metric_backbone(to_distance(layer.graph), backbone_options(o)));
  }
  kg.add_layer(name, std::move(layer));
  const Manifest m = write_bundle(kg, backbones, dir);
  const LayerManifest& lm = m.layer(name);
  out << "layer " << name << ": " << lm.unit_count << " units, " << lm.node_count << " nodes, "
      << lm.edge_count << " edges";
  if (lm.fraction_metric) out << ", " << fixed(*lm.fraction_metric * 100.0, 2) << "% metric";
  out << "\n";
  return kExitOk;
}

int cmd_backbone(const Options& o, std::ostream& out, std::ostream&) {
  const BackboneOptions options = backbone_options(o);
  if (!o.edges.empty()) {
    const NamedDistanceGraph g = parse_edge_tsv(read_file(o.edges), o.edges);
    const BackboneResult b = metric_backbone(g.graph, options);
    if (!o.out.empty()) emit(o.out, write_edge_tsv(g.graph, g.names, &b), out);
    print_stats(backbone_stats(g.graph, b), out);
    return kExitOk;
  }
  const fs::path dir = require(o.bundle, "--bundle (or --edges)");
  Bundle bundle = read_bundle(dir);
  std::vector<std::string> names = o.layers.empty() ? bundle.kg.layer_names() : o.layers;
  auto backbones = bundle.backbones;
  for (const std::string& name : names) {
    const DistanceGraph g = to_distance(bundle.kg.layer(name).graph);
    BackboneResult b = metric_backbone(g, options);
    out << "layer: " << name << "\n";
    print_stats(backbone_stats(g, b), out);
    backbones.insert_or_assign(name, std::move(b));
  }
  write_bundle(bundle.kg, backbones, dir);
  return kExitOk;
}

int cmd_merge(const Options& o, std::ostream& out, std::ostream& err) {
  const Bundle bundle = read_bundle(require(o.bundle, "--bundle"));
  MergePolicy policy;
  policy.mode = parse_merge_mode(o.merge_mode);
  policy.mean_absent_as_zero = o.mean_absent_as_zero;
  if (!o.layers.empty()) policy.layer_subset = o.layers;
  const ProximityGraph merged = merge(bundle.kg, policy);
  const DistanceGraph g = to_distance(merged);
  const auto names = bundle.kg.dictionary().names();
  std::optional<BackboneResult> b;
  if (o.backbone) b = metric_backbone(g, backbone_options(o));
  emit(o.out, write_edge_tsv(g, names, b ? &*b : nullptr, merged.layer_name), out);
  std::ostream& info = o.out.empty() ? err : out;
  info << merged.layer_name << ": " << merged.nodes.size() << " nodes, " << merged.edges.size()
       << " edges";
  if (b) info << ", " << fixed(b->fraction_metric * 100.0, 2) << "% metric";
  info << "\n";
  return kExitOk;
}

int cmd_ego(const Options& o, std::ostream& out, std::ostream&) {
  const Bundle bundle = read_bundle(require(o.bundle, "--bundle"));
  const std::string& name = single_layer(o);
  const Layer& layer = bundle.kg.layer(name);
  const Dictionary& dict = bundle.kg.dictionary();
  const TermId target = lookup_term(dict, require(o.target_term, "--target-term"));
  const DistanceGraph g = to_distance(layer.graph);
  std::optional<BackboneResult> computed;
  const BackboneResult* b = nullptr;
  if (auto it = bundle.backbones.find(name); it != bundle.backbones.end()) {
    b = &it->second;
  } else if (o.backbone) {
    computed = metric_backbone(g, backbone_options(o));
    b = &*computed;
  }
  if (!std::binary_search(g.nodes.begin(), g.nodes.end(), target)) {
    throw NotFoundError("term '" + dict.name(target) + "' has no edges in layer '" + name + "'");
  }
  const EgoNetwork e = ego(g, b, target, o.backbone);
  const auto names = dict.names();
  emit(o.out, write_ego_tsv(e, g, names, b), out);
  return kExitOk;
}

int cmd_cohort(const Options& o, std::ostream& out, std::ostream& err) {
  const Bundle bundle = read_bundle(require(o.bundle, "--bundle"));
  const std::string& name = single_layer(o);
  const Layer& layer = bundle.kg.layer(name);
  std::optional<BackboneResult> computed;
  const BackboneResult* b = nullptr;
  if (auto it = bundle.backbones.find(name); it != bundle.backbones.end()) {
    b = &it->second;
  } else {
    computed = metric_backbone(to_distance(layer.graph), backbone_options(o));
    b = &*computed;
  }
  std::vector<AnalysisUnit> units = layer.units;
  if (!o.units.empty()) units = parse_units(read_file(o.units), bundle.kg.dictionary(), o.units);
  const CohortReport report = classify_cohort(units, *b);
  emit(o.out, write_cohort_tsv(report), out);
  std::ostream& info = o.out.empty() ? err : out;
  info << "users: " << report.n_users << "\n";
  info << "contributing: " << report.n_contributing << "\n";
  info << "fraction_contributing: " << fixed(report.fraction_contributing, 4) << "\n";
  if (!o.labels.empty()) {
    const LabelRates rates = join_labels(report, parse_user_labels(read_file(o.labels)));
    info << "label_rate_contributing: " << fixed(rates.contributing_rate(), 4) << " ("
         << rates.contributing_positive << "/" << rates.contributing_labeled << ")\n";
    info << "label_rate_other: " << fixed(rates.other_rate(), 4) << " (" << rates.other_positive
         << "/" << rates.other_labeled << ")\n";
  }
  return kExitOk;
}

int cmd_stats(const Options& o, std::ostream& out, std::ostream&) {
  const fs::path dir = require(o.bundle, "--bundle");
  const Bundle bundle = read_bundle(dir);
  out << format_stats_table(bundle.manifest);
  return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream&) {
  const auto service = QueryService::load(require(o.bundle, "--bundle"), o.threads);
  HttpServer server(*service);
  const int port = server.bind(o.bind, o.port);
  out << "serving " << o.bundle << " on http://" << o.bind << ":" << port << "\n" << std::flush;
  server.listen();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Multi-layer term association graphs and their metric backbones", "termnet"};
  app.require_subcommand(1);

  std::string config;
  const auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", config, "flat key=value file; flags override it");
  };
  const auto dictionary = [&](CLI::App* sub) {
    sub->add_option("--dictionary", o.dictionary, "dictionary TSV (surface, parent, type)");
    sub->add_option("--blocklist", o.blocklist, "surface forms to drop, one per line");
  };
  const auto units_policy = [&](CLI::App* sub) {
    sub->add_option("--unit-mode", o.unit_mode, "per_document or timeline_window");
    sub->add_option("--window-days", o.window_days, "window length for timeline_window");
  };
  const auto threads = [&](CLI::App* sub) {
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  };
  const auto equality = [&](CLI::App* sub) {
    sub->add_option("--equality-policy", o.equality_policy, "rational or floating");
  };

  auto* tag = app.add_subcommand("tag", "tag a corpus into analysis units");
  dictionary(tag);
  tag->add_option("--corpus", o.corpus, "corpus JSONL");
  units_policy(tag);
  tag->add_option("--out", o.out, "units JSONL (default stdout)");
  threads(tag);

  auto* build = app.add_subcommand("build", "build a layer into a bundle");
  dictionary(build);
  build->add_option("--corpus", o.corpus, "corpus JSONL");
  build->add_option("--units", o.units, "tagged units JSONL");
  units_policy(build);
  build->add_option("--min-count", o.min_count, "drop terms with r_xx below this");
  build->add_option("--layer", o.layers, "layer name");
  build->add_flag("--embed-text", o.embed_text, "store raw document text in the bundle");
  build->add_option("--out", o.out, "bundle directory");
  equality(build);
  threads(build);

  auto* backbone = app.add_subcommand("backbone", "compute metric backbones");
  backbone->add_option("--bundle", o.bundle, "bundle directory");
  backbone->add_option("--layer", o.layers, "layers (default all)");
  backbone->add_option("--edges", o.edges, "standalone edge TSV instead of a bundle");
  backbone->add_option("--out", o.out, "labeled edge TSV for --edges");
  equality(backbone);
  threads(backbone);

  auto* merge_cmd = app.add_subcommand("merge", "merge layers into one graph");
  merge_cmd->add_option("--bundle", o.bundle, "bundle directory");
  merge_cmd->add_option("--layer", o.layers, "layers to merge (default all)");
  merge_cmd->add_option("--merge-mode", o.merge_mode, "mean or max");
  merge_cmd->add_flag("--mean-absent-as-zero", o.mean_absent_as_zero,
                      "average over all selected layers with absent edges as p = 0");
  merge_cmd->add_option("--out", o.out, "edge TSV (default stdout)");
  equality(merge_cmd);
  threads(merge_cmd);

  auto* ego_cmd = app.add_subcommand("ego", "export an ego network");
  ego_cmd->add_option("--bundle", o.bundle, "bundle directory");
  ego_cmd->add_option("--layer", o.layers, "layer name");
  ego_cmd->add_option("--target-term", o.target_term, "center term");
  ego_cmd->add_option("--out", o.out, "edge TSV (default stdout)");
  equality(ego_cmd);
  threads(ego_cmd);

  auto* cohort = app.add_subcommand("cohort", "report users contributing to the backbone");
  cohort->add_option("--bundle", o.bundle, "bundle directory");
  cohort->add_option("--layer", o.layers, "layer name");
  cohort->add_option("--units", o.units, "units JSONL (default: the layer's own units)");
  cohort->add_option("--labels", o.labels, "user_id<TAB>label file");
  cohort->add_option("--out", o.out, "cohort TSV (default stdout)");
  equality(cohort);
  threads(cohort);

  auto* stats = app.add_subcommand("stats", "summarize a bundle");
  stats->add_option("--bundle", o.bundle, "bundle directory");

  auto* serve = app.add_subcommand("serve", "serve a bundle over HTTP");
  serve->add_option("--bundle", o.bundle, "bundle directory");
  serve->add_option("--port", o.port, "TCP port (0 picks one)");
  serve->add_option("--bind", o.bind, "address to listen on");
  threads(serve);

  for (CLI::App* sub : {tag, build, backbone, merge_cmd, ego_cmd, cohort, stats, serve}) {
    with_config(sub);
  }
  build->add_flag("--backbone,!--no-backbone", o.backbone, "compute the layer's backbone");
  ego_cmd->add_flag("--backbone,!--no-backbone", o.backbone, "ego of the global backbone");
  merge_cmd->add_flag("--backbone,!--no-backbone", o.backbone, "label merged edges");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (CLI::App* sub : app.get_subcommands()) {
      if (!config.empty()) apply_config(sub, config);
    }
    if (merge_cmd->parsed() && merge_cmd->count("--backbone") == 0) o.backbone = false;
    if (tag->parsed()) return cmd_tag(o, out, err);
    if (build->parsed()) return cmd_build(o, out, err);
    if (backbone->parsed()) return cmd_backbone(o, out, err);
    if (merge_cmd->parsed()) return cmd_merge(o, out, err);
    if (ego_cmd->parsed()) return cmd_ego(o, out, err);
    if (cohort->parsed()) return cmd_cohort(o, out, err);
    if (stats->parsed()) return cmd_stats(o, out, err);
    if (serve->parsed()) return cmd_serve(o, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace termnet::cli
