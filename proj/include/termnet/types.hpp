#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace termnet {

// Dense index into a dictionary's term inventory.
struct TermId {
  std::uint32_t value = 0;

  constexpr TermId() = default;
  constexpr explicit TermId(std::uint32_t v) : value(v) {}

  friend constexpr auto operator<=>(TermId, TermId) = default;
};

// Non-negative rational num/den with den > 0. Used as the exact companion of
// a floating-point edge weight when the weight derives from integer counts.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  friend constexpr bool operator==(const Ratio&, const Ratio&) = default;
};

// Malformed or inconsistent input data (exit code 2 at the CLI).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A named entity (term, layer, edge) that does not exist.
class NotFoundError : public DataError {
 public:
  using DataError::DataError;
};

// Invalid invocation or parameter combination (exit code 1 at the CLI).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace termnet

template <>
struct std::hash<termnet::TermId> {
  std::size_t operator()(termnet::TermId id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
