#include "termnet/analysis.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "termnet/text.hpp"

namespace termnet {
namespace {

std::uint64_t pack(TermId a, TermId b) {
  return (static_cast<std::uint64_t>(a.value) << 32) | b.value;
}

}  // namespace

CohortReport classify_cohort(std::span<const AnalysisUnit> units, const BackboneResult& b) {
  std::unordered_set<std::uint64_t> backbone_pairs;
  backbone_pairs.reserve(b.backbone.edges.size());
  for (const Edge& e : b.backbone.edges) backbone_pairs.insert(pack(e.x, e.y));

  std::map<std::string, CohortUser> by_user;
  for (const AnalysisUnit& unit : units) {
    if (!unit.user_id) continue;
    CohortUser& user = by_user[*unit.user_id];
    user.user_id = *unit.user_id;
    ++user.n_units;
    const std::size_t k = unit.terms.size();
    user.n_term_pairs_posted += k * (k - (k > 0 ? 1 : 0)) / 2;
    if (user.contributes) continue;
    for (std::size_t i = 0; i < k && !user.contributes; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        if (backbone_pairs.count(pack(unit.terms[i], unit.terms[j]))) {
          user.contributes = true;
          break;
        }
      }
    }
  }

  CohortReport report;
  for (auto& [id, user] : by_user) {
    if (user.contributes) ++report.n_contributing;
    report.users.push_back(std::move(user));
  }
  report.n_users = report.users.size();
  report.fraction_contributing =
      report.n_users == 0 ? 0.0
                          : static_cast<double>(report.n_contributing) /
                                static_cast<double>(report.n_users);
  return report;
}

double LabelRates::contributing_rate() const {
  return contributing_labeled == 0 ? 0.0
                                   : static_cast<double>(contributing_positive) /
                                         static_cast<double>(contributing_labeled);
}

double LabelRates::other_rate() const {
  return other_labeled == 0 ? 0.0
                            : static_cast<double>(other_positive) /
                                  static_cast<double>(other_labeled);
}

std::map<std::string, bool> parse_user_labels(std::string_view tsv) {
  std::map<std::string, bool> labels;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line_no == 1 && line.rfind("user_id", 0) == 0) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2) {
      throw DataError("labels:" + std::to_string(line_no) + ": expected user_id<TAB>label");
    }
    const auto value = trim(fields[1]);
    bool label;
    if (value == "1" || value == "true") {
      label = true;
    } else if (value == "0" || value == "false") {
      label = false;
    } else {
      throw DataError("labels:" + std::to_string(line_no) + ": label must be 0/1/true/false");
    }
    labels[fields[0]] = label;
  }
  return labels;
}

LabelRates join_labels(const CohortReport& report, const std::map<std::string, bool>& labels) {
  LabelRates rates;
  for (const CohortUser& user : report.users) {
    auto it = labels.find(user.user_id);
    if (it == labels.end()) continue;
    if (user.contributes) {
      ++rates.contributing_labeled;
      rates.contributing_positive += it->second ? 1 : 0;
    } else {
      ++rates.other_labeled;
      rates.other_positive += it->second ? 1 : 0;
    }
  }
  return rates;
}

EgoNetwork ego(const DistanceGraph& g, const BackboneResult* b, TermId target,
               bool backbone_first) {
  if (!std::binary_search(g.nodes.begin(), g.nodes.end(), target)) {
    throw NotFoundError("term " + std::to_string(target.value) + " is not a node of the graph");
  }
  if (backbone_first && b == nullptr) {
    throw UsageError("backbone ego requested but no backbone is available");
  }
  const DistanceGraph& source = backbone_first ? b->backbone : g;

  EgoNetwork out;
  out.target = target;
  out.is_backbone_ego = backbone_first;
  out.nodes.push_back(target);
  for (const Edge& e : source.edges) {
    if (e.x == target) out.nodes.push_back(e.y);
    if (e.y == target) out.nodes.push_back(e.x);
  }
  std::sort(out.nodes.begin(), out.nodes.end());
  for (const Edge& e : source.edges) {
    if (std::binary_search(out.nodes.begin(), out.nodes.end(), e.x) &&
        std::binary_search(out.nodes.begin(), out.nodes.end(), e.y)) {
      out.edges.push_back(e);
    }
  }
  return out;
}

}  // namespace termnet
