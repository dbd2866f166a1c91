#include "stylemix/http_server.hpp"

#include "httplib.h"
#include "stylemix/errors.hpp"

namespace stylemix {

struct StudioServer::Impl {
  Studio& studio;
  httplib::Server server;
  std::thread thread;

  explicit Impl(Studio& s) : studio(s) {
    const auto route = [this](const std::string& method) {
      return [this, method](const httplib::Request& req, httplib::Response& res) {
        const auto out = studio.handle(method, req.path, req.body);
        res.status = out.status;
        res.set_content(out.body, out.content_type);
      };
    };
    server.Get("/v1/.*", route("GET"));
    server.Post("/v1/.*", route("POST"));
    server.set_payload_max_length(64 * 1024 * 1024);
  }
};

StudioServer::StudioServer(Studio& studio) : impl_(std::make_unique<Impl>(studio)) {}

StudioServer::~StudioServer() { stop(); }

int StudioServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("could not bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw IoError("could not bind " + host + ":" + std::to_string(port));
  return port;
}

void StudioServer::listen() { impl_->server.listen_after_bind(); }

void StudioServer::start() {
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void StudioServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace stylemix
