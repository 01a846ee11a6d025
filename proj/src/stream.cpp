#include "mailgraph/stream.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/err.h>
#include <openssl/ssl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace mailgraph::transport {

namespace {

class Socket {
public:
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket()
    {
        if (fd_ >= 0)
            ::close(fd_);
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const noexcept { return fd_; }

private:
    int fd_;
};

void set_timeouts(int fd, std::chrono::milliseconds timeout)
{
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

class TcpStream : public Stream {
public:
    TcpStream(int fd, std::chrono::milliseconds timeout) : socket_(fd) { set_timeouts(fd, timeout); }

    std::size_t read_some(char* buffer, std::size_t size) override
    {
        for (;;) {
            const auto n = ::recv(socket_.fd(), buffer, size, 0);
            if (n >= 0)
                return static_cast<std::size_t>(n);
            if (errno == EINTR)
                continue;
            throw ConnectionLost(std::string("connection lost: ") + std::strerror(errno));
        }
    }

    void write_all(std::string_view data) override
    {
        while (!data.empty()) {
            const auto n = ::send(socket_.fd(), data.data(), data.size(), MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR)
                    continue;
                throw ConnectionLost(std::string("connection lost: ") + std::strerror(errno));
            }
            data.remove_prefix(static_cast<std::size_t>(n));
        }
    }

    int fd() const noexcept { return socket_.fd(); }

private:
    Socket socket_;
};

std::string ssl_error()
{
    char buf[256];
    ERR_error_string_n(ERR_get_error(), buf, sizeof buf);
    return buf;
}

class TlsStream : public Stream {
public:
    TlsStream(std::unique_ptr<TcpStream> tcp, const std::string& host, bool verify) : tcp_(std::move(tcp))
    {
        ctx_ = SSL_CTX_new(TLS_client_method());
        if (!ctx_)
            throw Error(ErrorKind::transport, "TLS setup failed: " + ssl_error());
        SSL_CTX_set_min_proto_version(ctx_, TLS1_2_VERSION);
        if (verify) {
            SSL_CTX_set_default_verify_paths(ctx_);
            SSL_CTX_set_verify(ctx_, SSL_VERIFY_PEER, nullptr);
        }
        ssl_ = SSL_new(ctx_);
        SSL_set_fd(ssl_, tcp_->fd());
        SSL_set_tlsext_host_name(ssl_, host.c_str());
        if (verify)
            SSL_set1_host(ssl_, host.c_str());
        if (SSL_connect(ssl_) != 1) {
            const auto what = ssl_error();
            SSL_free(ssl_);
            SSL_CTX_free(ctx_);
            throw Error(ErrorKind::transport, "TLS handshake with " + host + " failed: " + what);
        }
    }

    ~TlsStream() override
    {
        SSL_shutdown(ssl_);
        SSL_free(ssl_);
        SSL_CTX_free(ctx_);
    }

    std::size_t read_some(char* buffer, std::size_t size) override
    {
        const int n = SSL_read(ssl_, buffer, static_cast<int>(size));
        if (n > 0)
            return static_cast<std::size_t>(n);
        if (SSL_get_error(ssl_, n) == SSL_ERROR_ZERO_RETURN)
            return 0;
        throw ConnectionLost("connection lost: " + ssl_error());
    }

    void write_all(std::string_view data) override
    {
        while (!data.empty()) {
            const int n = SSL_write(ssl_, data.data(), static_cast<int>(data.size()));
            if (n <= 0)
                throw ConnectionLost("connection lost: " + ssl_error());
            data.remove_prefix(static_cast<std::size_t>(n));
        }
    }

private:
    std::unique_ptr<TcpStream> tcp_;
    SSL_CTX* ctx_ = nullptr;
    SSL* ssl_ = nullptr;
};

}  // namespace

std::unique_ptr<Stream> connect(const std::string& host, int port, const ConnectOptions& options)
{
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const auto service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &result); rc != 0)
        throw Error(ErrorKind::transport, "cannot resolve " + host + ": " + gai_strerror(rc));

    int fd = -1;
    std::string last_error = "no addresses";
    for (auto* ai = result; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0)
            continue;
        set_timeouts(fd, options.timeout);
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0)
            break;
        last_error = std::strerror(errno);
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(result);
    if (fd < 0)
        throw Error(ErrorKind::transport, "cannot connect to " + host + ":" + service + ": " + last_error);

    auto tcp = std::make_unique<TcpStream>(fd, options.timeout);
    if (!options.use_tls)
        return tcp;
    return std::make_unique<TlsStream>(std::move(tcp), host, options.verify_peer);
}

std::unique_ptr<Stream> adopt_socket(int fd, std::chrono::milliseconds timeout)
{
    return std::make_unique<TcpStream>(fd, timeout);
}

bool LineReader::fill()
{
    char chunk[4096];
    const auto n = stream_.read_some(chunk, sizeof chunk);
    if (n == 0)
        return false;
    buffer_.append(chunk, n);
    return true;
}

std::optional<std::string> LineReader::read_line()
{
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            return line;
        }
        if (!fill())
            return std::nullopt;
    }
}

std::optional<std::string> LineReader::read_exact(std::size_t n)
{
    while (buffer_.size() < n)
        if (!fill())
            return std::nullopt;
    std::string out = buffer_.substr(0, n);
    buffer_.erase(0, n);
    return out;
}

}  // namespace mailgraph::transport
