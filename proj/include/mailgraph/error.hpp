#pragma once

#include <stdexcept>
#include <string>

namespace mailgraph {

/// Failure categories surfaced to the CLI (exit codes) and HTTP API (status codes).
enum class ErrorKind {
    invalid_argument,  // 400, exit 1
    not_found,         // 404, exit 1
    conflict,          // 409, exit 1
    io,                // 500, exit 2
    corrupt,           // 500, exit 2
    transport,         // 502, exit 2
    internal           // 500, exit 2
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// True for errors caused by the caller's input rather than the system.
    bool is_user_error() const noexcept;
    int http_status() const noexcept;

private:
    ErrorKind kind_;
};

}  // namespace mailgraph
