#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace termnet {

// ASCII lowercase fold. Bytes >= 0x80 pass through unchanged.
std::string fold_case(std::string_view text);

// Splits on Unicode whitespace, strips leading/trailing punctuation from each
// piece, case-folds, and drops pieces that end up empty.
std::vector<std::string> tokenize(std::string_view text);

// Tokens of a dictionary surface form joined by single spaces; this is the
// key space the tagger matches against.
std::string normalize_surface(std::string_view surface);

std::size_t edit_distance(std::string_view a, std::string_view b);

// Closest candidate by edit distance, ties broken lexicographically. Returns
// nothing when the best candidate is too far to be a plausible typo.
std::optional<std::string> nearest_match(std::string_view query,
                                         std::span<const std::string> candidates);

// "; did you mean 'x'?" or empty.
std::string suggestion_suffix(std::string_view query,
                              std::span<const std::string> candidates);

// Splits on a single-character delimiter, keeping empty fields.
std::vector<std::string> split(std::string_view line, char delim);

std::string_view trim(std::string_view s);

}  // namespace termnet
