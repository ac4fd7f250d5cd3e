#include "httplib.h"
#include "mkg/service.hpp"

namespace mkg::service {

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;
};

namespace {

void send(httplib::Response& res, const Reply& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

const char* kJson = "application/json";

}  // namespace

HttpServer::HttpServer(Service& service) : impl_(new Impl{service, {}}) {
  auto& svr = impl_->server;
  Service& s = impl_->service;
  svr.Post("/api/query", [&s](const httplib::Request& req, httplib::Response& res) { send(res, s.query(req.body)); });
  svr.Get(R"(/api/items/([^/]+)/storyboard)", [&s](const httplib::Request& req, httplib::Response& res) {
    send(res, s.storyboard(req.matches[1]));
  });
  svr.Get(R"(/api/items/([^/]+))",
          [&s](const httplib::Request& req, httplib::Response& res) { send(res, s.item(req.matches[1])); });
  svr.Post(R"(/api/sessions/([^/]+)/select)", [&s](const httplib::Request& req, httplib::Response& res) {
    send(res, s.select(req.matches[1], req.body));
  });
  svr.Get("/api/search", [&s](const httplib::Request& req, httplib::Response& res) {
    send(res, s.search(param(req, "q"), param(req, "k")));
  });
  svr.Get("/api/match", [&s](const httplib::Request& req, httplib::Response& res) {
    send(res, s.match(param(req, "q"), param(req, "k")));
  });
  svr.Get(R"(/api/images/([^/]+))",
          [&s](const httplib::Request& req, httplib::Response& res) { send(res, s.image(req.matches[1])); });

  svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const nlohmann::json body = {{"error", res.status == 404 ? "NotFound" : "BadRequest"},
                                 {"message", req.method + " " + req.path}};
    res.set_content(body.dump(), kJson);
  });
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string msg = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      msg = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(nlohmann::json{{"error", "Internal"}, {"message", msg}}.dump(), kJson);
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& svr = impl_->server;
  if (port == 0) {
    const int bound = svr.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host);
    return bound;
  }
  if (!svr.bind_to_port(host, port)) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::wait_ready() const { impl_->server.wait_until_ready(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace mkg::service
