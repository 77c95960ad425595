#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "termnet/analysis.hpp"
#include "termnet/cli.hpp"
#include "termnet/query_service.hpp"
#include "termnet/storage.hpp"

namespace py = pybind11;
using namespace termnet;

namespace {

using NamedEdge = std::tuple<std::string, std::string, double>;

struct NamedGraph {
  std::vector<std::string> names;
  DistanceGraph graph;
};

NamedGraph from_named_edges(const std::vector<NamedEdge>& edges) {
  NamedGraph out;
  for (const auto& [x, y, d] : edges) {
    out.names.push_back(x);
    out.names.push_back(y);
  }
  std::sort(out.names.begin(), out.names.end());
  out.names.erase(std::unique(out.names.begin(), out.names.end()), out.names.end());
  const auto id = [&](const std::string& name) {
    return TermId(static_cast<std::uint32_t>(
        std::lower_bound(out.names.begin(), out.names.end(), name) - out.names.begin()));
  };
  std::vector<Edge> list;
  for (const auto& [x, y, d] : edges) {
    Edge e;
    e.x = id(x);
    e.y = id(y);
    e.weight = d;
    list.push_back(e);
  }
  out.graph = make_distance_graph(std::move(list));
  return out;
}

py::dict edge_dict(const Edge& e, const std::vector<std::string>& names) {
  py::dict d;
  d["x"] = names[e.x.value];
  d["y"] = names[e.y.value];
  d["r"] = e.count;
  d["weight"] = e.weight;
  return d;
}

py::dict backbone_dict(const DistanceGraph& g, const BackboneResult& b,
                       const std::vector<std::string>& names) {
  py::list edges;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    py::dict d = edge_dict(g.edges[i], names);
    d["label"] = std::string(to_string(b.labels[i]));
    d["distortion"] = b.distortion[i] ? py::cast(*b.distortion[i]) : py::none();
    edges.append(d);
  }
  py::dict out;
  out["edges"] = edges;
  out["fraction_metric"] = b.fraction_metric;
  out["metric_count"] = b.metric_count();
  out["policy"] = std::string(to_string(b.policy));
  return out;
}

}  // namespace

PYBIND11_MODULE(_termnet, m) {
  m.doc() = "Term association graphs and metric backbones";

  const auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NotFoundError>(m, "NotFoundError", data_error.ptr());
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

  py::class_<Dictionary, std::shared_ptr<Dictionary>>(m, "Dictionary")
      .def_static(
          "parse",
          [](const std::string& tsv, const std::vector<std::string>& blocklist) {
            return std::make_shared<Dictionary>(Dictionary::parse(tsv, blocklist));
          },
          py::arg("tsv"), py::arg("blocklist") = std::vector<std::string>{})
      .def_static(
          "load",
          [](const std::filesystem::path& path, std::optional<std::filesystem::path> blocklist) {
            return std::const_pointer_cast<Dictionary>(load_dictionary(path, blocklist));
          },
          py::arg("path"), py::arg("blocklist") = py::none())
      .def("__len__", &Dictionary::size)
      .def("resolve",
           [](const Dictionary& d, const std::string& surface) -> std::optional<std::string> {
             if (auto id = d.resolve(surface)) return d.name(*id);
             return std::nullopt;
           })
      .def("roots", [](const Dictionary& d) {
        std::vector<std::string> out;
        for (TermId t : d.roots()) out.push_back(d.name(t));
        return out;
      });

  m.def(
      "tag",
      [](std::shared_ptr<Dictionary> dict, const std::string& text) {
        const Tagger tagger(dict);
        std::vector<std::string> out;
        for (TermId t : tagger.tag(text)) out.push_back(dict->name(t));
        return out;
      },
      py::arg("dictionary"), py::arg("text"));

  m.def(
      "cooccurrence",
      [](std::shared_ptr<Dictionary> dict, const std::vector<std::vector<std::string>>& units) {
        std::vector<AnalysisUnit> list;
        for (std::size_t i = 0; i < units.size(); ++i) {
          AnalysisUnit u;
          u.unit_id = std::to_string(i);
          for (const auto& name : units[i]) {
            auto id = dict->find(name);
            if (!id) throw NotFoundError("unknown term '" + name + "'");
            u.terms.push_back(*id);
          }
          std::sort(u.terms.begin(), u.terms.end());
          u.terms.erase(std::unique(u.terms.begin(), u.terms.end()), u.terms.end());
          list.push_back(std::move(u));
        }
        const CooccurrenceMatrix c = count_cooccurrence(list, dict->size());
        const ProximityGraph p = proximity(c, "", list.size());
        const auto names = dict->names();
        py::dict diag;
        for (std::size_t t = 0; t < c.diagonal.size(); ++t) {
          if (c.diagonal[t] > 0) diag[py::str(names[t])] = c.diagonal[t];
        }
        py::list edges;
        for (const Edge& e : p.edges) {
          py::dict d = edge_dict(e, names);
          d["p"] = e.weight;
          d["d"] = proximity_to_distance(e.weight);
          edges.append(d);
        }
        py::dict out;
        out["diagonal"] = diag;
        out["edges"] = edges;
        return out;
      },
      py::arg("dictionary"), py::arg("units"),
      "Pair counts, diagonal and Jaccard proximities for units given as lists of canonical names.");

  m.def(
      "metric_backbone",
      [](const std::vector<NamedEdge>& edges, const std::string& policy, unsigned threads) {
        const NamedGraph g = from_named_edges(edges);
        BackboneOptions options;
        options.policy = parse_equality_policy(policy);
        options.threads = threads;
        const BackboneResult b = metric_backbone(g.graph, options);
        return backbone_dict(g.graph, b, g.names);
      },
      py::arg("edges"), py::arg("policy") = "floating", py::arg("threads") = 1,
      "Backbone of an edge list of (x, y, distance) tuples.");

  m.def(
      "backbone_from_tsv",
      [](const std::string& tsv, const std::string& policy) {
        const NamedDistanceGraph g = parse_edge_tsv(tsv);
        BackboneOptions options;
        options.policy = parse_equality_policy(policy);
        const BackboneResult b = metric_backbone(g.graph, options);
        return backbone_dict(g.graph, b, g.names);
      },
      py::arg("tsv"), py::arg("policy") = "rational");

  py::class_<QueryService>(m, "Bundle")
      .def(py::init([](const std::filesystem::path& dir) {
             return QueryService::load(dir).release();
           }),
           py::arg("path"))
      .def_property_readonly("layers", [](const QueryService& q) {
        return q.bundle().kg.layer_names();
      })
      .def("stats_table",
           [](const QueryService& q) { return format_stats_table(q.bundle().manifest); })
      .def(
          "query",
          [](const QueryService& q, const std::string& path,
             const std::map<std::string, std::string>& params) {
            QueryParams p(params.begin(), params.end());
            const Response r = q.handle(path, p);
            return py::make_tuple(r.status, r.body);
          },
          py::arg("path"), py::arg("params") = std::map<std::string, std::string>{},
          "Runs one service request; returns (status, json_body).");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a termnet subcommand; returns (exit_code, stdout, stderr).");
}
