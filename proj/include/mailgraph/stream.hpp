#pragma once

#include "mailgraph/error.hpp"

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace mailgraph::transport {

/// The peer went away (EOF, reset or timeout) in the middle of a session.
class ConnectionLost : public Error {
public:
    explicit ConnectionLost(const std::string& what) : Error(ErrorKind::transport, what) {}
};

/// Byte stream to a mail server.
class Stream {
public:
    virtual ~Stream() = default;
    /// Returns 0 at end of stream.
    virtual std::size_t read_some(char* buffer, std::size_t size) = 0;
    virtual void write_all(std::string_view data) = 0;
};

struct ConnectOptions {
    bool use_tls = false;
    bool verify_peer = true;
    std::chrono::milliseconds timeout{30000};
};

/// Throws Error(transport) if the connection cannot be established.
std::unique_ptr<Stream> connect(const std::string& host, int port, const ConnectOptions& options = {});

/// Wraps an already connected socket; takes ownership of the descriptor.
std::unique_ptr<Stream> adopt_socket(int fd, std::chrono::milliseconds timeout);

/// CRLF/LF line framing plus exact-length reads for literals.
class LineReader {
public:
    explicit LineReader(Stream& stream) : stream_(stream) {}

    /// Line without its terminator, or nullopt at end of stream.
    std::optional<std::string> read_line();
    std::optional<std::string> read_exact(std::size_t n);

private:
    bool fill();

    Stream& stream_;
    std::string buffer_;
};

}  // namespace mailgraph::transport
