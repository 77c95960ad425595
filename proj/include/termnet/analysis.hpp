#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "termnet/backbone.hpp"
#include "termnet/graph.hpp"
#include "termnet/tagger.hpp"

namespace termnet {

struct CohortUser {
  std::string user_id;
  std::size_t n_units = 0;
  // Sum over the user's units of the number of distinct term pairs in each.
  std::size_t n_term_pairs_posted = 0;
  bool contributes = false;

  friend bool operator==(const CohortUser&, const CohortUser&) = default;
};

struct CohortReport {
  std::vector<CohortUser> users;  // sorted by user_id
  std::size_t n_users = 0;
  std::size_t n_contributing = 0;
  double fraction_contributing = 0.0;
};

// A user contributes iff one of their units contains both endpoints of a
// backbone edge. Units without a user id are ignored.
CohortReport classify_cohort(std::span<const AnalysisUnit> units, const BackboneResult& b);

// External per-user binary labels (e.g. "post was a false positive"),
// aggregated by contribution class.
struct LabelRates {
  std::size_t contributing_labeled = 0;
  std::size_t contributing_positive = 0;
  std::size_t other_labeled = 0;
  std::size_t other_positive = 0;

  double contributing_rate() const;
  double other_rate() const;
};

// TSV of user_id<TAB>label with label in {0, 1, true, false}; an optional
// header line starting with "user_id" is skipped.
std::map<std::string, bool> parse_user_labels(std::string_view tsv);
LabelRates join_labels(const CohortReport& report, const std::map<std::string, bool>& labels);

struct EgoNetwork {
  TermId target;
  std::vector<TermId> nodes;  // sorted, includes target
  std::vector<Edge> edges;    // sorted by (x, y)
  bool is_backbone_ego = false;
};

// Induced subgraph on `target` and its neighbours. With backbone_first the
// neighbourhood and edges are taken from the global backbone `b` of `g`.
EgoNetwork ego(const DistanceGraph& g, const BackboneResult* b, TermId target,
               bool backbone_first);

}  // namespace termnet
