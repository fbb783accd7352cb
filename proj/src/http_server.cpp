#include "httplib.h"
#include "tsexplain/session.hpp"

namespace tsexplain::session {

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(Api& api) : impl_(std::make_unique<Impl>()) {
  auto handler = [&api](const httplib::Request& req, httplib::Response& res) {
    ApiRequest request;
    request.method = req.method;
    request.path = req.path;
    for (const auto& [key, value] : req.params) request.query.emplace(key, value);
    request.body = req.body;
    const auto response = api.handle(request);
    res.status = response.status;
    res.set_content(response.body, "application/json");
  };
  const std::string pattern = R"(/api/.*)";
  impl_->server.Get(pattern, handler);
  impl_->server.Post(pattern, handler);
  impl_->server.Delete(pattern, handler);
}

HttpServer::~HttpServer() = default;

bool HttpServer::listen(const std::string& host, int port, const std::function<void(int)>& on_bound) {
  if (port == 0) {
    port = impl_->server.bind_to_any_port(host);
    if (port < 0) return false;
  } else if (!impl_->server.bind_to_port(host, port)) {
    return false;
  }
  if (on_bound) on_bound(port);
  return impl_->server.listen_after_bind();
}

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace tsexplain::session
