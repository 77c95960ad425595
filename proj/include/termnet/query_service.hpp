#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "termnet/storage.hpp"

namespace httplib {
class Server;
}

namespace termnet {

struct Response {
  int status = 200;
  std::string body;  // JSON
};

using QueryParams = std::map<std::string, std::string, std::less<>>;

// Read-only JSON façade over a loaded bundle. handle() is a pure function of
// the bundle and the request; backbones missing from the bundle and merged
// graphs are computed on first use and cached.
class QueryService {
 public:
  explicit QueryService(Bundle bundle, unsigned threads = 1);
  static std::unique_ptr<QueryService> load(const std::filesystem::path& dir, unsigned threads = 1);

  // GET /layers, /terms, /ego, /edge, /merged.
  Response handle(std::string_view path, const QueryParams& params) const;

  const Bundle& bundle() const { return bundle_; }

 private:
  struct LayerState {
    DistanceGraph distance;
    std::shared_ptr<const BackboneResult> backbone;
  };
  struct MergedState {
    ProximityGraph proximity;
    DistanceGraph distance;
    std::shared_ptr<const BackboneResult> backbone;
  };

  const LayerState& layer_state(std::string_view name) const;
  std::shared_ptr<const BackboneResult> layer_backbone(std::string_view name) const;
  std::shared_ptr<const MergedState> merged(MergeMode mode, bool with_backbone) const;
  TermId resolve_term(std::string_view name) const;

  Response layers() const;
  Response terms(const QueryParams& params) const;
  Response ego_view(const QueryParams& params) const;
  Response edge(const QueryParams& params) const;
  Response merged_view(const QueryParams& params) const;

  Bundle bundle_;
  unsigned threads_;
  std::vector<std::string> names_;
  std::vector<std::string> known_surfaces_;
  std::map<std::string, LayerState, std::less<>> layer_states_;

  mutable std::mutex mutex_;
  mutable std::map<std::string, std::shared_ptr<const BackboneResult>, std::less<>> computed_;
  mutable std::map<MergeMode, std::shared_ptr<const MergedState>> merged_;
};

// HTTP binding of a QueryService.
class HttpServer {
 public:
  explicit HttpServer(const QueryService& service);
  ~HttpServer();

  // Binds `host`:`port`; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

 private:
  const QueryService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace termnet
