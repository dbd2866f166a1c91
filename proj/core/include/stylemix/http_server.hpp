#pragma once

#include <memory>
#include <string>
#include <thread>

#include "stylemix/studio.hpp"

namespace stylemix {

/// HTTP transport over a Studio. Routes every GET and POST under /v1 to
/// Studio::handle.
class StudioServer {
 public:
  explicit StudioServer(Studio& studio);
  ~StudioServer();
  StudioServer(const StudioServer&) = delete;
  StudioServer& operator=(const StudioServer&) = delete;

  /// Binds `host`; port 0 picks an ephemeral port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  /// Serves on a background thread.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stylemix
