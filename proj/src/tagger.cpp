#include "termnet/tagger.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "termnet/parallel.hpp"
#include "termnet/text.hpp"

namespace termnet {
namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t* y, unsigned* m, unsigned* d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  *d = doy - (153 * mp + 2) / 5 + 1;
  *m = mp < 10 ? mp + 3 : mp - 9;
  *y = static_cast<std::int64_t>(yoe) + era * 400 + (*m <= 2);
}

int read_digits(std::string_view text, std::size_t pos, std::size_t count) {
  if (pos + count > text.size()) throw DataError("truncated timestamp");
  int value = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const char c = text[pos + i];
    if (c < '0' || c > '9') throw DataError("invalid digit in timestamp");
    value = value * 10 + (c - '0');
  }
  return value;
}

std::string json_string_field(const nlohmann::json& record, const char* field,
                              const std::string& where) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string()) {
    throw DataError(where + ": missing string field '" + field + "'");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(UnitMode mode) {
  return mode == UnitMode::per_document ? "per_document" : "timeline_window";
}

UnitMode parse_unit_mode(std::string_view text) {
  if (text == "per_document") return UnitMode::per_document;
  if (text == "timeline_window") return UnitMode::timeline_window;
  throw UsageError("unknown unit mode '" + std::string(text) +
                   "' (expected per_document or timeline_window)");
}

Tagger::Tagger(std::shared_ptr<const Dictionary> dict) : dict_(std::move(dict)) {
  trie_.emplace_back();
  // Insert in sorted order so trie layout does not depend on hash iteration.
  std::map<std::string, TermId> sorted(dict_->surface_index().begin(),
                                       dict_->surface_index().end());
  for (const auto& [surface, term] : sorted) {
    std::uint32_t node = 0;
    for (const std::string& token : split(surface, ' ')) {
      auto it = trie_[node].next.find(token);
      if (it == trie_[node].next.end()) {
        const auto child = static_cast<std::uint32_t>(trie_.size());
        trie_[node].next.emplace(token, child);
        trie_.emplace_back();
        node = child;
      } else {
        node = it->second;
      }
    }
    trie_[node].term = term;
  }
}

std::vector<TermId> Tagger::tag(std::string_view text) const {
  const std::vector<std::string> tokens = tokenize(text);
  std::vector<TermId> found;
  std::size_t pos = 0;
  while (pos < tokens.size()) {
    std::uint32_t node = 0;
    std::size_t match_len = 0;
    std::optional<TermId> match;
    for (std::size_t i = pos; i < tokens.size(); ++i) {
      auto it = trie_[node].next.find(tokens[i]);
      if (it == trie_[node].next.end()) break;
      node = it->second;
      if (trie_[node].term) {
        match = trie_[node].term;
        match_len = i - pos + 1;
      }
    }
    if (match) {
      found.push_back(*match);
      pos += match_len;
    } else {
      ++pos;
    }
  }
  std::sort(found.begin(), found.end());
  found.erase(std::unique(found.begin(), found.end()), found.end());
  return found;
}

std::vector<TermId> tag_document(const Tagger& tagger, const Document& doc) {
  return tagger.tag(doc.text);
}

std::vector<AnalysisUnit> build_units(const std::vector<Document>& docs,
                                      const UnitPolicy& policy, const Tagger& tagger,
                                      unsigned threads) {
  if (policy.mode == UnitMode::timeline_window) {
    if (policy.window_days < 1) throw UsageError("window_days must be >= 1 for timeline_window");
    for (std::size_t i = 1; i < docs.size(); ++i) {
      const Document& a = docs[i - 1];
      const Document& b = docs[i];
      if (std::tie(b.user_id, b.timestamp) < std::tie(a.user_id, a.timestamp)) {
        throw DataError("document '" + b.doc_id + "' (record " + std::to_string(i + 1) +
                        ") is out of (user_id, timestamp) order after '" + a.doc_id + "'");
      }
    }
  }

  std::vector<std::vector<TermId>> tags(docs.size());
  parallel_for(docs.size(), threads,
               [&](unsigned, std::size_t i) { tags[i] = tag_document(tagger, docs[i]); });

  std::vector<AnalysisUnit> units;
  if (policy.mode == UnitMode::per_document) {
    std::set<std::string_view> seen;
    units.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (!seen.insert(docs[i].doc_id).second) {
        throw DataError("duplicate doc_id '" + docs[i].doc_id + "'");
      }
      AnalysisUnit unit;
      unit.unit_id = docs[i].doc_id;
      unit.member_doc_ids = {docs[i].doc_id};
      unit.terms = std::move(tags[i]);
      unit.user_id = docs[i].user_id;
      units.push_back(std::move(unit));
    }
    return units;
  }

  const std::int64_t window = static_cast<std::int64_t>(policy.window_days) * kSecondsPerDay;
  std::size_t i = 0;
  while (i < docs.size()) {
    const std::string& user = docs[i].user_id;
    const std::int64_t anchor = docs[i].timestamp;
    std::set<TermId> terms;
    AnalysisUnit* current = nullptr;
    std::int64_t current_window = -1;
    for (; i < docs.size() && docs[i].user_id == user; ++i) {
      const std::int64_t w = (docs[i].timestamp - anchor) / window;
      if (current == nullptr || w != current_window) {
        if (current != nullptr) current->terms.assign(terms.begin(), terms.end());
        terms.clear();
        units.emplace_back();
        current = &units.back();
        current->unit_id = user + "#w" + std::to_string(w);
        current->user_id = user;
        current_window = w;
      }
      current->member_doc_ids.push_back(docs[i].doc_id);
      terms.insert(tags[i].begin(), tags[i].end());
    }
    if (current != nullptr) current->terms.assign(terms.begin(), terms.end());
  }
  return units;
}

std::int64_t parse_iso8601(std::string_view text) {
  try {
    const int year = read_digits(text, 0, 4);
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') throw DataError("bad date");
    const int month = read_digits(text, 5, 2);
    const int day = read_digits(text, 8, 2);
    if (month < 1 || month > 12 || day < 1 || day > 31) throw DataError("date out of range");
    std::int64_t seconds = days_from_civil(year, month, day) * kSecondsPerDay;
    std::size_t pos = 10;
    if (pos < text.size()) {
      if (text[pos] != 'T' && text[pos] != ' ') throw DataError("bad date/time separator");
      const int hour = read_digits(text, pos + 1, 2);
      if (pos + 3 >= text.size() || text[pos + 3] != ':') throw DataError("bad time");
      const int minute = read_digits(text, pos + 4, 2);
      int second = 0;
      pos += 6;
      if (pos < text.size() && text[pos] == ':') {
        second = read_digits(text, pos + 1, 2);
        pos += 3;
      }
      if (hour > 23 || minute > 59 || second > 60) throw DataError("time out of range");
      seconds += hour * 3600 + minute * 60 + second;
      if (pos < text.size() && (text[pos] == '.' || text[pos] == ',')) {
        ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
      }
      if (pos < text.size()) {
        if (text[pos] == 'Z') {
          ++pos;
        } else if (text[pos] == '+' || text[pos] == '-') {
          const int sign = text[pos] == '+' ? 1 : -1;
          const int oh = read_digits(text, pos + 1, 2);
          pos += 3;
          if (pos < text.size() && text[pos] == ':') ++pos;
          const int om = read_digits(text, pos, 2);
          pos += 2;
          seconds -= sign * (oh * 3600 + om * 60);
        }
      }
      if (pos != text.size()) throw DataError("trailing characters");
    }
    return seconds;
  } catch (const DataError& e) {
    throw DataError("invalid ISO-8601 timestamp '" + std::string(text) + "': " + e.what());
  }
}

std::string format_iso8601(std::int64_t seconds) {
  std::int64_t days = seconds / kSecondsPerDay;
  std::int64_t rem = seconds % kSecondsPerDay;
  if (rem < 0) {
    rem += kSecondsPerDay;
    --days;
  }
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, &y, &m, &d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                static_cast<long long>(y), m, d, static_cast<long long>(rem / 3600),
                static_cast<long long>(rem / 60 % 60), static_cast<long long>(rem % 60));
  return buf;
}

std::vector<Document> parse_corpus(std::string_view jsonl, std::string_view origin) {
  std::vector<Document> docs;
  std::set<std::string> ids;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!record.is_object()) throw DataError(where + ": expected a JSON object");
    Document doc;
    doc.doc_id = json_string_field(record, "doc_id", where);
    doc.user_id = json_string_field(record, "user_id", where);
    doc.text = json_string_field(record, "text", where);
    doc.source = json_string_field(record, "source", where);
    auto ts = record.find("timestamp");
    if (ts == record.end()) throw DataError(where + ": missing field 'timestamp'");
    if (ts->is_string()) {
      try {
        doc.timestamp = parse_iso8601(ts->get<std::string>());
      } catch (const DataError& e) {
        throw DataError(where + ": " + e.what());
      }
    } else if (ts->is_number_integer()) {
      doc.timestamp = ts->get<std::int64_t>();
    } else {
      throw DataError(where + ": field 'timestamp' must be an ISO-8601 string");
    }
    if (doc.timestamp < 0) throw DataError(where + ": timestamp before 1970-01-01");
    if (!ids.insert(doc.doc_id).second) {
      throw DataError(where + ": duplicate doc_id '" + doc.doc_id + "'");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> read_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_file(path), path.string());
}

std::string write_units(const std::vector<AnalysisUnit>& units, const Dictionary& dict) {
  std::string out;
  for (const AnalysisUnit& unit : units) {
    nlohmann::ordered_json record;
    record["unit_id"] = unit.unit_id;
    record["user_id"] = unit.user_id ? nlohmann::ordered_json(*unit.user_id) : nullptr;
    record["member_doc_ids"] = unit.member_doc_ids;
    std::vector<std::string> names;
    names.reserve(unit.terms.size());
    for (TermId t : unit.terms) names.push_back(dict.name(t));
    std::sort(names.begin(), names.end());
    record["terms"] = names;
    out += record.dump();
    out += '\n';
  }
  return out;
}

std::vector<AnalysisUnit> parse_units(std::string_view jsonl, const Dictionary& dict,
                                      std::string_view origin) {
  std::vector<AnalysisUnit> units;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    try {
      const auto record = nlohmann::json::parse(line);
      AnalysisUnit unit;
      unit.unit_id = record.at("unit_id").get<std::string>();
      const auto& user = record.at("user_id");
      if (!user.is_null()) unit.user_id = user.get<std::string>();
      unit.member_doc_ids = record.at("member_doc_ids").get<std::vector<std::string>>();
      for (const auto& name : record.at("terms")) {
        const std::string n = name.get<std::string>();
        const auto id = dict.find(n);
        if (!id || dict.entry(*id).parent || dict.entry(*id).blocked) {
          throw DataError("term '" + n + "' is not a non-blocked root of the dictionary");
        }
        unit.terms.push_back(*id);
      }
      std::sort(unit.terms.begin(), unit.terms.end());
      unit.terms.erase(std::unique(unit.terms.begin(), unit.terms.end()), unit.terms.end());
      units.push_back(std::move(unit));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return units;
}

}  // namespace termnet
