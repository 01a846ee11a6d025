#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

// Scripted line-protocol server for exercising the IMAP and POP3 clients.
//
// Transcript files hold one instruction per line:
//   S: <text>      sent by the server, CRLF appended, "<TAG>" replaced by
//                  the tag of the last client command
//   C: <pattern>   expected client line; "<TAG>" matches any tag and "*"
//                  matches any single argument
// Blank lines and lines starting with '#' are ignored.
namespace mailgraph::transport::mock {

struct TranscriptLine {
    enum class Direction { server, client };
    Direction direction;
    std::string text;
    std::size_t line_number;
};

class Transcript {
public:
    /// Throws Error(invalid_argument) on a line that is neither S: nor C:.
    static Transcript parse(std::string_view text);
    static Transcript load(const std::filesystem::path& path);

    const std::vector<TranscriptLine>& lines() const noexcept { return lines_; }

private:
    std::vector<TranscriptLine> lines_;
};

/// Whitespace-token match of a client line against a C: pattern. Stores the
/// captured tag when the pattern starts with <TAG>.
bool match_client_line(std::string_view pattern, std::string_view actual, std::string* tag = nullptr);

/// Listens on 127.0.0.1 with an ephemeral port and plays one transcript per
/// accepted connection, in order. A transcript that ends before the client
/// is done simulates a dropped connection.
class MockServer {
public:
    explicit MockServer(std::vector<Transcript> sessions);
    ~MockServer();
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    int port() const noexcept { return port_; }

    /// Every line the clients sent, across sessions.
    std::vector<std::string> received() const;
    /// Mismatches, formatted "line N: expected '...', got '...'".
    std::vector<std::string> errors() const;
    std::size_t sessions_finished() const noexcept { return finished_.load(); }

    void stop();

private:
    void run();
    void serve(int fd, const Transcript& transcript);
    void record_error(std::string message);

    std::vector<Transcript> sessions_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> stopping_{false};
    std::atomic<std::size_t> finished_{0};
    mutable std::mutex mutex_;
    std::vector<std::string> received_;
    std::vector<std::string> errors_;
    std::thread thread_;
};

}  // namespace mailgraph::transport::mock
