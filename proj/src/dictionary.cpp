#include "termnet/dictionary.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "termnet/text.hpp"

namespace termnet {
namespace {

struct Row {
  std::optional<std::string> parent;
  TermType type;
  std::size_t line;
};

}  // namespace

std::string_view to_string(TermType type) {
  switch (type) {
    case TermType::drug: return "drug";
    case TermType::medical_term: return "medical_term";
    case TermType::natural_product: return "natural_product";
    case TermType::other: return "other";
  }
  return "other";
}

TermType parse_term_type(std::string_view text) {
  if (text == "drug") return TermType::drug;
  if (text == "medical_term") return TermType::medical_term;
  if (text == "natural_product") return TermType::natural_product;
  if (text == "other") return TermType::other;
  throw DataError("unknown term type '" + std::string(text) + "'");
}

Dictionary Dictionary::parse(std::string_view tsv,
                             std::span<const std::string> blocklist,
                             std::string_view origin) {
  const std::string where(origin);
  std::map<std::string, std::vector<Row>> rows;

  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!saw_header) {
      if (line != "surface\tparent\ttype") {
        throw DataError(where + ":" + std::to_string(line_no) +
                        ": expected header 'surface<TAB>parent<TAB>type'");
      }
      saw_header = true;
      continue;
    }
    const auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw DataError(where + ":" + std::to_string(line_no) + ": expected 3 fields, got " +
                      std::to_string(fields.size()));
    }
    std::string surface = normalize_surface(fields[0]);
    if (surface.empty()) {
      throw DataError(where + ":" + std::to_string(line_no) + ": empty surface form");
    }
    std::optional<std::string> parent;
    if (trim(fields[1]) != "-") {
      parent = normalize_surface(fields[1]);
      if (parent->empty()) {
        throw DataError(where + ":" + std::to_string(line_no) + ": empty parent");
      }
    }
    TermType type;
    try {
      type = parse_term_type(trim(fields[2]));
    } catch (const DataError& e) {
      throw DataError(where + ":" + std::to_string(line_no) + ": " + e.what());
    }
    rows[surface].push_back(Row{std::move(parent), type, line_no});
  }
  if (rows.empty()) throw DataError(where + ": dictionary has no entries");

  Dictionary dict;
  std::unordered_map<std::string, TermId> id_of;
  for (const auto& [surface, ignored] : rows) {
    id_of.emplace(surface, TermId(static_cast<std::uint32_t>(dict.entries_.size())));
    TermEntry entry;
    entry.canonical_name = surface;
    dict.entries_.push_back(std::move(entry));
  }

  const auto lookup_parent = [&](const std::string& surface, const Row& row) {
    auto it = id_of.find(*row.parent);
    if (it == id_of.end()) {
      throw DataError(where + ":" + std::to_string(row.line) + ": parent '" + *row.parent +
                      "' of '" + surface + "' is not defined");
    }
    return it->second;
  };

  // The first row of a surface defines its parent and type.
  for (const auto& [surface, surface_rows] : rows) {
    TermEntry& entry = dict.entries_[id_of.at(surface).value];
    const Row& primary = surface_rows.front();
    entry.type = primary.type;
    if (primary.parent) entry.parent = lookup_parent(surface, primary);
  }

  // Cycle detection over the parent forest.
  const std::size_t n = dict.entries_.size();
  std::vector<std::uint8_t> state(n, 0);  // 0 unvisited, 1 on stack, 2 done
  std::vector<TermId> roots(n);
  for (std::uint32_t start = 0; start < n; ++start) {
    if (state[start] == 2) continue;
    std::vector<std::uint32_t> chain;
    std::uint32_t cur = start;
    while (true) {
      if (state[cur] == 2) break;
      if (state[cur] == 1) {
        auto pos = std::find(chain.begin(), chain.end(), cur);
        std::string cycle;
        for (auto it = pos; it != chain.end(); ++it) {
          cycle += dict.entries_[*it].canonical_name + " -> ";
        }
        cycle += dict.entries_[cur].canonical_name;
        throw DataError(where + ": cycle in parent chain: " + cycle);
      }
      state[cur] = 1;
      chain.push_back(cur);
      const auto& parent = dict.entries_[cur].parent;
      if (!parent) {
        roots[cur] = TermId(cur);
        state[cur] = 2;
        chain.pop_back();
        break;
      }
      cur = parent->value;
    }
    // Unwind: everything on the chain shares the root of where we stopped.
    const TermId root = roots[cur];
    for (std::uint32_t id : chain) {
      roots[id] = root;
      state[id] = 2;
    }
  }

  // Secondary rows must agree with the primary resolution.
  for (const auto& [surface, surface_rows] : rows) {
    const TermId self = id_of.at(surface);
    for (std::size_t i = 1; i < surface_rows.size(); ++i) {
      const Row& row = surface_rows[i];
      const TermId other_root = row.parent ? roots[lookup_parent(surface, row).value] : self;
      if (other_root != roots[self.value]) {
        throw DataError(where + ":" + std::to_string(row.line) + ": surface '" + surface +
                        "' maps to conflicting roots '" +
                        dict.entries_[roots[self.value].value].canonical_name + "' and '" +
                        dict.entries_[other_root.value].canonical_name + "'");
      }
    }
  }

  for (std::uint32_t id = 0; id < n; ++id) {
    std::optional<TermId> cur = TermId(id);
    const std::string& surface = dict.entries_[id].canonical_name;
    while (cur) {
      dict.entries_[cur->value].surface_forms.push_back(surface);
      cur = dict.entries_[cur->value].parent;
    }
  }
  for (TermEntry& entry : dict.entries_) {
    std::sort(entry.surface_forms.begin(), entry.surface_forms.end());
  }

  std::set<std::string> blocked_forms;
  for (const std::string& raw : blocklist) {
    std::string form = normalize_surface(raw);
    if (!form.empty()) blocked_forms.insert(std::move(form));
  }
  dict.blocklist_.assign(blocked_forms.begin(), blocked_forms.end());

  for (const std::string& form : dict.blocklist_) {
    auto it = id_of.find(form);
    if (it == id_of.end()) continue;
    for (const std::string& covered : dict.entries_[it->second.value].surface_forms) {
      dict.entries_[id_of.at(covered).value].blocked = true;
    }
  }

  for (std::uint32_t id = 0; id < n; ++id) {
    if (dict.entries_[id].blocked) continue;
    dict.surface_index_.emplace(dict.entries_[id].canonical_name, roots[id]);
  }
  return dict;
}

std::optional<TermId> Dictionary::resolve(std::string_view surface) const {
  auto it = surface_index_.find(std::string(surface));
  if (it == surface_index_.end()) {
    it = surface_index_.find(normalize_surface(surface));
    if (it == surface_index_.end()) return std::nullopt;
  }
  return it->second;
}

std::optional<TermId> Dictionary::find(std::string_view canonical_name) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), canonical_name,
      [](const TermEntry& e, std::string_view name) { return e.canonical_name < name; });
  if (it == entries_.end() || it->canonical_name != canonical_name) return std::nullopt;
  return TermId(static_cast<std::uint32_t>(it - entries_.begin()));
}

TermId Dictionary::root(TermId id) const {
  while (const auto& parent = entry(id).parent) id = *parent;
  return id;
}

std::vector<TermId> Dictionary::roots() const {
  std::vector<TermId> out;
  for (std::uint32_t id = 0; id < entries_.size(); ++id) {
    if (!entries_[id].parent && !entries_[id].blocked) out.emplace_back(id);
  }
  return out;
}

std::vector<std::string> Dictionary::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const TermEntry& e : entries_) out.push_back(e.canonical_name);
  return out;
}

std::string Dictionary::to_tsv() const {
  std::string out = "surface\tparent\ttype\n";
  for (const TermEntry& e : entries_) {
    out += e.canonical_name;
    out += '\t';
    out += e.parent ? entries_[e.parent->value].canonical_name : std::string("-");
    out += '\t';
    out += to_string(e.type);
    out += '\n';
  }
  return out;
}

std::string Dictionary::blocklist_text() const {
  std::string out;
  for (const std::string& form : blocklist_) {
    out += form;
    out += '\n';
  }
  return out;
}

std::vector<std::string> parse_blocklist(std::string_view text) {
  std::vector<std::string> forms;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto form = trim(line);
    if (!form.empty()) forms.emplace_back(form);
  }
  return forms;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw DataError("error reading " + path.string());
  return std::move(buf).str();
}

std::shared_ptr<const Dictionary> load_dictionary(
    const std::filesystem::path& path, const std::optional<std::filesystem::path>& blocklist) {
  std::vector<std::string> blocked;
  if (blocklist) blocked = parse_blocklist(read_file(*blocklist));
  return std::make_shared<const Dictionary>(
      Dictionary::parse(read_file(path), blocked, path.string()));
}

}  // namespace termnet
