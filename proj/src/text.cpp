#include "termnet/text.hpp"

#include <algorithm>
#include <cstdint>

namespace termnet {
namespace {

// Decodes one UTF-8 code point at text[pos]. Invalid sequences decode as a
// single byte so that tokenization never fails.
char32_t decode_utf8(std::string_view text, std::size_t pos, std::size_t* len) {
  const auto byte = [&](std::size_t i) {
    return static_cast<unsigned char>(text[i]);
  };
  const unsigned char lead = byte(pos);
  int extra = 0;
  char32_t cp = 0;
  if (lead < 0x80) {
    *len = 1;
    return lead;
  } else if ((lead & 0xE0) == 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3;
    cp = lead & 0x07;
  } else {
    *len = 1;
    return lead;
  }
  if (pos + extra >= text.size()) {
    *len = 1;
    return lead;
  }
  for (int i = 1; i <= extra; ++i) {
    const unsigned char c = byte(pos + i);
    if ((c & 0xC0) != 0x80) {
      *len = 1;
      return lead;
    }
    cp = (cp << 6) | (c & 0x3F);
  }
  *len = static_cast<std::size_t>(extra) + 1;
  return cp;
}

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_punctuation(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  // Latin-1 punctuation, general punctuation block, CJK punctuation.
  return cp == 0xA1 || cp == 0xAB || cp == 0xBB || cp == 0xBF ||
         (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         (cp >= 0x3001 && cp <= 0x3003) || (cp >= 0x300C && cp <= 0x3011);
}

struct CodePoint {
  char32_t value;
  std::size_t begin;
  std::size_t end;
};

std::string strip_punctuation(std::string_view piece) {
  std::vector<CodePoint> cps;
  for (std::size_t pos = 0; pos < piece.size();) {
    std::size_t len = 1;
    const char32_t cp = decode_utf8(piece, pos, &len);
    cps.push_back({cp, pos, pos + len});
    pos += len;
  }
  std::size_t first = 0;
  std::size_t last = cps.size();
  while (first < last && is_punctuation(cps[first].value)) ++first;
  while (last > first && is_punctuation(cps[last - 1].value)) --last;
  if (first == last) return {};
  return std::string(piece.substr(cps[first].begin, cps[last - 1].end - cps[first].begin));
}

}  // namespace

std::string fold_case(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t piece_begin = 0;
  bool in_piece = false;
  const auto flush = [&](std::size_t end) {
    if (!in_piece) return;
    std::string token = strip_punctuation(text.substr(piece_begin, end - piece_begin));
    if (!token.empty()) tokens.push_back(fold_case(token));
    in_piece = false;
  };
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t len = 1;
    const char32_t cp = decode_utf8(text, pos, &len);
    if (is_unicode_space(cp)) {
      flush(pos);
    } else if (!in_piece) {
      in_piece = true;
      piece_begin = pos;
    }
    pos += len;
  }
  flush(text.size());
  return tokens;
}

std::string normalize_surface(std::string_view surface) {
  std::string out;
  for (const std::string& token : tokenize(surface)) {
    if (!out.empty()) out += ' ';
    out += token;
  }
  return out;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::optional<std::string> nearest_match(std::string_view query,
                                         std::span<const std::string> candidates) {
  const std::string* best = nullptr;
  std::size_t best_distance = 0;
  for (const std::string& candidate : candidates) {
    const std::size_t d = edit_distance(query, candidate);
    if (best == nullptr || d < best_distance ||
        (d == best_distance && candidate < *best)) {
      best = &candidate;
      best_distance = d;
    }
  }
  if (best == nullptr) return std::nullopt;
  // Allow roughly one edit per three characters of the query.
  const std::size_t budget = std::max<std::size_t>(2, query.size() / 3);
  if (best_distance > budget) return std::nullopt;
  return *best;
}

std::string suggestion_suffix(std::string_view query,
                              std::span<const std::string> candidates) {
  const auto match = nearest_match(query, candidates);
  if (!match) return {};
  return "; did you mean '" + *match + "'?";
}

std::vector<std::string> split(std::string_view line, char delim) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace termnet
