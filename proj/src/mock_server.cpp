#include "mailgraph/mock_server.hpp"

#include "mailgraph/error.hpp"
#include "mailgraph/stream.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

namespace mailgraph::transport::mock {

namespace {

std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
            ++i;
        const auto start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t')
            ++i;
        if (i > start)
            out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::string replace_tag(std::string text, const std::string& tag)
{
    for (auto pos = text.find("<TAG>"); pos != std::string::npos; pos = text.find("<TAG>", pos + tag.size()))
        text.replace(pos, 5, tag);
    return text;
}

}  // namespace

Transcript Transcript::parse(std::string_view text)
{
    Transcript t;
    std::size_t number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++number;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty() || line.front() == '#')
            continue;
        if (line.size() < 2 || line[1] != ':' || (line[0] != 'S' && line[0] != 'C'))
            throw Error(ErrorKind::invalid_argument,
                        "transcript line " + std::to_string(number) + ": expected 'S:' or 'C:'");
        auto body = line.substr(2);
        if (!body.empty() && body.front() == ' ')
            body.remove_prefix(1);
        t.lines_.push_back({line[0] == 'S' ? TranscriptLine::Direction::server : TranscriptLine::Direction::client,
                            std::string(body), number});
    }
    return t;
}

Transcript Transcript::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::io, "cannot read transcript " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool match_client_line(std::string_view pattern, std::string_view actual, std::string* tag)
{
    const auto p = split_ws(pattern);
    const auto a = split_ws(actual);
    if (p.size() != a.size())
        return false;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == "<TAG>") {
            if (tag)
                *tag = std::string(a[i]);
            continue;
        }
        if (p[i] == "*")
            continue;
        if (p[i] != a[i])
            return false;
    }
    return true;
}

MockServer::MockServer(std::vector<Transcript> sessions) : sessions_(std::move(sessions))
{
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0)
        throw Error(ErrorKind::io, "mock server: socket failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    socklen_t len = sizeof addr;
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 8) != 0 ||
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
        ::close(listen_fd_);
        throw Error(ErrorKind::io, "mock server: cannot listen on loopback");
    }
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] { run(); });
}

MockServer::~MockServer() { stop(); }

void MockServer::stop()
{
    stopping_ = true;
    if (thread_.joinable())
        thread_.join();
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
}

std::vector<std::string> MockServer::received() const
{
    std::lock_guard lock(mutex_);
    return received_;
}

std::vector<std::string> MockServer::errors() const
{
    std::lock_guard lock(mutex_);
    return errors_;
}

void MockServer::record_error(std::string message)
{
    std::lock_guard lock(mutex_);
    errors_.push_back(std::move(message));
}

void MockServer::run()
{
    std::size_t next = 0;
    while (!stopping_) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        if (::poll(&pfd, 1, 50) <= 0)
            continue;
        const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0)
            continue;
        if (next >= sessions_.size()) {
            record_error("unexpected connection #" + std::to_string(next + 1));
            ::close(fd);
            ++next;
            continue;
        }
        serve(fd, sessions_[next++]);
        ++finished_;
    }
}

void MockServer::serve(int fd, const Transcript& transcript)
{
    auto stream = adopt_socket(fd, std::chrono::milliseconds(5000));
    LineReader reader(*stream);
    std::string tag;
    try {
        for (const auto& line : transcript.lines()) {
            if (line.direction == TranscriptLine::Direction::server) {
                stream->write_all(replace_tag(line.text, tag) + "\r\n");
                continue;
            }
            auto got = reader.read_line();
            if (!got) {
                record_error("line " + std::to_string(line.line_number) + ": expected '" + line.text +
                             "', got end of stream");
                return;
            }
            {
                std::lock_guard lock(mutex_);
                received_.push_back(*got);
            }
            if (!match_client_line(line.text, *got, &tag)) {
                record_error("line " + std::to_string(line.line_number) + ": expected '" + line.text + "', got '" +
                             *got + "'");
                return;
            }
        }
    } catch (const ConnectionLost& e) {
        record_error(std::string("session aborted: ") + e.what());
    }
}

}  // namespace mailgraph::transport::mock
