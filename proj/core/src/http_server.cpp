// SPDX-License-Identifier: Apache-2.0
#include "bwc/http_server.hpp"

#include <httplib.h>

#include "bwc/error.hpp"

namespace bwc {

struct ReviewServer::Impl {
  ReviewService& service;
  httplib::Server server;

  explicit Impl(ReviewService& s) : service(s) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      HttpRequest request;
      request.method = req.method;
      request.path = req.path;
      for (const auto& [k, v] : req.params) request.query.emplace(k, v);
      for (const auto& [k, v] : req.headers) request.headers.emplace(k, v);
      request.body = req.body;
      const HttpResponse response = service.handle(request);
      res.status = response.status;
      res.set_content(response.body, response.content_type);
    };
    server.Get(R"(/v1/.*)", handler);
    server.Post(R"(/v1/.*)", handler);
  }
};

ReviewServer::ReviewServer(ReviewService& service) : impl_(std::make_unique<Impl>(service)) {}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::io, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw Error(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void ReviewServer::listen() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace bwc
