#pragma once

#include "mailgraph/service.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace mailgraph::http {

/// JSON API over a Service, plus static files at "/". Unauthenticated;
/// binds loopback unless told otherwise.
class ApiServer {
public:
    /// An empty `static_dir` serves a small placeholder page at "/".
    ApiServer(service::Service& service, std::filesystem::path static_dir = {});
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Port 0 picks a free port. Returns the bound port; Error(io) on failure.
    int bind(const std::string& host, int port);
    /// Serves on the bound socket until stop().
    void listen();
    /// listen() on a background thread; returns once the server accepts.
    void start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mailgraph::http
