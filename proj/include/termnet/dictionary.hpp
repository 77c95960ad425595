#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "termnet/types.hpp"

namespace termnet {

enum class TermType { drug, medical_term, natural_product, other };

std::string_view to_string(TermType type);
TermType parse_term_type(std::string_view text);

struct TermEntry {
  std::string canonical_name;
  // Every form that resolves through this entry, including its own name.
  std::vector<std::string> surface_forms;
  std::optional<TermId> parent;
  TermType type = TermType::other;
  bool blocked = false;
};

// Hierarchical term inventory. Every distinct surface in the dictionary file
// is an entry; entries without a parent are roots and roots are the nodes of
// every graph built from tagged text. Immutable after construction.
class Dictionary {
 public:
  // `tsv` is the dictionary file content; `blocklist` holds raw surface forms
  // (folded and normalized here). `origin` names the source in errors.
  static Dictionary parse(std::string_view tsv,
                          std::span<const std::string> blocklist = {},
                          std::string_view origin = "<dictionary>");

  std::size_t size() const { return entries_.size(); }
  const TermEntry& entry(TermId id) const { return entries_.at(id.value); }
  std::span<const TermEntry> entries() const { return entries_; }

  // Root term for a case-folded surface form; absent for unknown or blocked
  // forms.
  std::optional<TermId> resolve(std::string_view surface) const;

  // Entry with this canonical name, blocked or not.
  std::optional<TermId> find(std::string_view canonical_name) const;

  TermId root(TermId id) const;
  const std::string& name(TermId id) const { return entry(id).canonical_name; }

  const std::unordered_map<std::string, TermId>& surface_index() const {
    return surface_index_;
  }

  // Normalized blocklist as applied, sorted and unique.
  std::span<const std::string> blocklist() const { return blocklist_; }

  // Non-blocked roots in TermId order.
  std::vector<TermId> roots() const;

  // Canonical names indexed by TermId.
  std::vector<std::string> names() const;

  // Canonical re-serialization: reparsing it (with blocklist_text()) yields
  // identical TermIds and surface index.
  std::string to_tsv() const;
  std::string blocklist_text() const;

 private:
  std::vector<TermEntry> entries_;
  std::unordered_map<std::string, TermId> surface_index_;
  std::vector<std::string> blocklist_;
};

// Blocklist file: one surface form per line, '#' starts a comment.
std::vector<std::string> parse_blocklist(std::string_view text);

std::string read_file(const std::filesystem::path& path);

std::shared_ptr<const Dictionary> load_dictionary(
    const std::filesystem::path& path,
    const std::optional<std::filesystem::path>& blocklist = std::nullopt);

}  // namespace termnet
