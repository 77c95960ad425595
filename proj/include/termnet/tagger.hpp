#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "termnet/dictionary.hpp"
#include "termnet/types.hpp"

namespace termnet {

struct Document {
  std::string doc_id;
  std::string user_id;
  std::int64_t timestamp = 0;  // UTC seconds
  std::string text;
  std::string source;
};

struct AnalysisUnit {
  std::string unit_id;
  std::vector<std::string> member_doc_ids;
  std::vector<TermId> terms;  // sorted, unique, non-blocked roots
  std::optional<std::string> user_id;

  friend bool operator==(const AnalysisUnit&, const AnalysisUnit&) = default;
};

enum class UnitMode { per_document, timeline_window };

struct UnitPolicy {
  UnitMode mode = UnitMode::per_document;
  int window_days = 0;  // required >= 1 for timeline_window

  friend bool operator==(const UnitPolicy&, const UnitPolicy&) = default;
};

std::string_view to_string(UnitMode mode);
UnitMode parse_unit_mode(std::string_view text);

// Greedy longest-match tagger over a token trie built from the dictionary's
// surface index.
class Tagger {
 public:
  explicit Tagger(std::shared_ptr<const Dictionary> dict);

  // Sorted unique root terms mentioned in `text`.
  std::vector<TermId> tag(std::string_view text) const;

  const Dictionary& dictionary() const { return *dict_; }

 private:
  struct Node {
    std::unordered_map<std::string, std::uint32_t> next;
    std::optional<TermId> term;
  };

  std::shared_ptr<const Dictionary> dict_;
  std::vector<Node> trie_;
};

std::vector<TermId> tag_document(const Tagger& tagger, const Document& doc);

// Tags documents (in parallel with `threads` workers) and groups them into
// units. Output is ordered by (user_id, unit start) for timeline windows and
// by input order for per-document units.
std::vector<AnalysisUnit> build_units(const std::vector<Document>& docs,
                                      const UnitPolicy& policy, const Tagger& tagger,
                                      unsigned threads = 1);

// ISO-8601 date or date-time ("2021-03-04", "2021-03-04T05:06:07Z",
// "2021-03-04T05:06:07.25+01:00") to UTC seconds.
std::int64_t parse_iso8601(std::string_view text);
std::string format_iso8601(std::int64_t seconds);

// Corpus: one JSON object per line with fields doc_id, user_id, timestamp,
// text, source.
std::vector<Document> parse_corpus(std::string_view jsonl, std::string_view origin = "<corpus>");
std::vector<Document> read_corpus(const std::filesystem::path& path);

// Tagged units: one JSON object per line with unit_id, user_id,
// member_doc_ids and terms (canonical names, sorted).
std::string write_units(const std::vector<AnalysisUnit>& units, const Dictionary& dict);
std::vector<AnalysisUnit> parse_units(std::string_view jsonl, const Dictionary& dict,
                                      std::string_view origin = "<units>");

}  // namespace termnet
