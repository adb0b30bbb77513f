/* Copyright 2026 The T3 Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


// HTTP/1.1 binding of the API service.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <thread>

// Eigen must be parsed before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "t3/api/service.hpp"

#include <httplib.h>

namespace t3::api {

class HttpServer {
 public:
  explicit HttpServer(Service& service, std::optional<fs::path> static_dir = std::nullopt)
      : service_(service) {
    routes();
    if (static_dir) {
      require(fs::is_directory(*static_dir), ErrorKind::kConfig,
              "static directory '" + static_dir->string() + "' does not exist");
      server_.set_mount_point("/", static_dir->string());
    }
  }

  ~HttpServer() { stop(); }
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to `port` (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    require(bound > 0, ErrorKind::kConfig, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  /// Serves on the calling thread until stop().
  void listen() { server_.listen_after_bind(); }

  void start() {
    thread_ = std::thread([this] { listen(); });
    server_.wait_until_ready();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  using Handler = std::function<json(const httplib::Request&)>;

  static std::size_t epoch_param(const httplib::Request& req) {
    return parse_index(req.path_params.at("epoch"), "epoch");
  }

  static Query query(const httplib::Request& req) { return Query(req.params.begin(), req.params.end()); }

  static void reply(httplib::Response& res, const Handler& h, const httplib::Request& req) {
    try {
      res.status = 200;
      res.set_content(h(req).dump(), "application/json");
    } catch (const Error& e) {
      const ErrorResponse er = error_response(e);
      res.status = er.status;
      if (er.retriable) res.set_header("Retry-After", "1");
      res.set_content(er.body.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"error", {{"code", "internal_error"}, {"message", e.what()}, {"retriable", false}}}}.dump(),
                      "application/json");
    }
  }

  void get(const std::string& pattern, Handler h) {
    server_.Get(pattern, [h](const httplib::Request& req, httplib::Response& res) { reply(res, h, req); });
  }
  void post(const std::string& pattern, Handler h) {
    server_.Post(pattern, [h](const httplib::Request& req, httplib::Response& res) { reply(res, h, req); });
  }

  void routes() {
    Service& s = service_;
    get("/api/health", [](const auto&) { return json{{"status", "ok"}}; });
    get("/api/runs", [&s](const auto&) { return s.list_runs(); });
    get("/api/runs/:run/checkpoints", [&s](const auto& r) { return s.list_checkpoints(r.path_params.at("run")); });
    get("/api/runs/:run/checkpoints/:epoch/projection",
        [&s](const auto& r) { return s.projection(r.path_params.at("run"), epoch_param(r), query(r)); });
    get("/api/runs/:run/checkpoints/:epoch/examples",
        [&s](const auto& r) { return s.examples(r.path_params.at("run"), epoch_param(r), query(r)); });
    get("/api/runs/:run/checkpoints/:epoch/heads",
        [&s](const auto& r) { return s.heads(r.path_params.at("run"), epoch_param(r), query(r)); });

    post("/api/sessions", [&s](const auto& r) { return s.create_session(r.body); });
    get("/api/sessions/:sid", [&s](const auto& r) { return s.get_session(r.path_params.at("sid")); });
    server_.Delete("/api/sessions/:sid", [&s](const httplib::Request& req, httplib::Response& res) {
      reply(res, [&s](const auto& r) { return s.delete_session(r.path_params.at("sid")); }, req);
    });
    post("/api/sessions/:sid/prune", [&s](const auto& r) { return s.prune(r.path_params.at("sid"), r.body); });
    post("/api/sessions/:sid/restore", [&s](const auto& r) { return s.restore(r.path_params.at("sid"), r.body); });
    post("/api/sessions/:sid/reset", [&s](const auto& r) { return s.reset(r.path_params.at("sid")); });
    get("/api/sessions/:sid/examples/:example/prediction",
        [&s](const auto& r) { return s.prediction(r.path_params.at("sid"), r.path_params.at("example")); });
    get("/api/sessions/:sid/examples/:example/attention", [&s](const auto& r) {
      return s.attention(r.path_params.at("sid"), r.path_params.at("example"), query(r));
    });
    get("/api/sessions/:sid/examples/:example/saliency", [&s](const auto& r) {
      return s.saliency(r.path_params.at("sid"), r.path_params.at("example"), query(r));
    });

    // Unmatched /api paths get a JSON 404 rather than an empty body.
    server_.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (res.status == 404 && req.path.rfind("/api/", 0) == 0 && res.body.empty()) {
        res.set_content(json{{"error", {{"code", "not_found"}, {"message", "no endpoint " + req.method + " " + req.path},
                                         {"retriable", false}}}}.dump(),
                        "application/json");
      }
    });
  }

  Service& service_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace t3::api
