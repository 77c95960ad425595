#pragma once

#include <unistd.h>

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles/oracles.hpp"
#include "termnet/graph.hpp"
#include "termnet/storage.hpp"

namespace testing {

inline std::filesystem::path data(const std::string& name) {
  return std::filesystem::path(TERMNET_TEST_DATA) / name;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("termnet_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline termnet::DistanceGraph to_graph(const std::vector<oracle::RationalEdge>& edges, int n,
                                       bool exact = true) {
  std::vector<termnet::Edge> list;
  for (const auto& e : edges) {
    termnet::Edge edge;
    edge.x = termnet::TermId(static_cast<std::uint32_t>(e.x));
    edge.y = termnet::TermId(static_cast<std::uint32_t>(e.y));
    edge.weight = static_cast<double>(e.num) / static_cast<double>(e.den);
    if (exact) edge.exact = termnet::Ratio{static_cast<std::uint64_t>(e.num), static_cast<std::uint64_t>(e.den)};
    list.push_back(edge);
  }
  std::vector<termnet::TermId> nodes;
  for (int i = 0; i < n; ++i) nodes.push_back(termnet::TermId(static_cast<std::uint32_t>(i)));
  return termnet::make_distance_graph(std::move(list), nodes);
}

// Graph from (x, y, d) triples over node ids 0..n-1, weights not exact.
inline termnet::DistanceGraph weighted(int n, std::vector<std::tuple<int, int, double>> edges) {
  std::vector<termnet::Edge> list;
  for (auto [x, y, d] : edges) {
    termnet::Edge e;
    e.x = termnet::TermId(static_cast<std::uint32_t>(x));
    e.y = termnet::TermId(static_cast<std::uint32_t>(y));
    e.weight = d;
    list.push_back(e);
  }
  std::vector<termnet::TermId> nodes;
  for (int i = 0; i < n; ++i) nodes.push_back(termnet::TermId(static_cast<std::uint32_t>(i)));
  return termnet::make_distance_graph(std::move(list), nodes);
}

inline termnet::TermId id(int v) { return termnet::TermId(static_cast<std::uint32_t>(v)); }

}  // namespace testing
