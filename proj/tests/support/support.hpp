#pragma once

#include "mailgraph/config.hpp"
#include "mailgraph/mime.hpp"
#include "mailgraph/store.hpp"
#include "mailgraph/text.hpp"
#include "mailgraph/transport.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace testsupport {

/// mkdtemp directory, removed recursively on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Minimal RFC 5322 message with CRLF line endings.
std::string make_raw(const std::string& message_id, const std::string& subject, const std::string& body,
                     const std::string& from = "sender@example.com");

/// Digest + location record for store tests, with corpus stats left to the caller.
mailgraph::store::MessageRecord make_record(const std::string& message_id, const mailgraph::text::TermVector& vector,
                                            const std::string& account = "acct");

/// Applies `ops` random mutations (messages, categories, edges, centroids).
/// Invalid picks are rejected by the store and ignored here.
void random_store_ops(std::mt19937_64& rng, mailgraph::store::GraphStore& store, std::size_t ops);

/// First post-commit totality violation, or empty.
std::string totality_violation(const mailgraph::store::GraphStore& store);

/// Pronounceable words from a seeded generator; lists are pairwise disjoint.
std::vector<std::vector<std::string>> disjoint_vocabularies(std::size_t sets, std::size_t words_per_set,
                                                            std::uint64_t seed);

/// A few sentences drawn from `vocab`.
std::string topic_text(std::mt19937_64& rng, const std::vector<std::string>& vocab, std::size_t words);

struct TopicMessage {
    std::string message_id;
    std::size_t topic;
    std::string raw;
};

/// topics x per_topic messages, interleaved round-robin, deterministic for a seed.
std::vector<TopicMessage> topic_corpus(std::size_t topics, std::size_t per_topic, std::size_t vocab_words,
                                       std::uint64_t seed);

/// Mean over categories of the largest single-topic fraction of its members.
double purity(const std::vector<std::vector<std::size_t>>& topics_per_category);

/// Transcript text for one IMAP session that opens `mailbox`, reports
/// `uidvalidity`, and serves every message with uid > `expected_last_seen`.
/// With `drop_after`, the connection ends in the middle of the body of the
/// (drop_after+1)-th served message.
struct ImapMessage {
    std::uint64_t uid;
    std::string raw;  // normalized to CRLF by the builder
};
std::string imap_session(const std::vector<ImapMessage>& messages, std::uint64_t uidvalidity,
                         std::uint64_t expected_last_seen, const std::string& user = "alice",
                         const std::string& password = "secret", const std::string& mailbox = "INBOX",
                         std::optional<std::size_t> drop_after = std::nullopt);

/// POP3 session: UIDL listing of all messages, RETR of the unseen ones.
struct Pop3Message {
    std::string uidl;
    std::string raw;
};
std::string pop3_session(const std::vector<Pop3Message>& messages, const std::vector<std::string>& seen,
                         const std::string& user = "alice", const std::string& password = "secret");

std::string to_crlf(std::string_view text);

/// Config rooted in `dir` with no accounts.
mailgraph::AppConfig test_config(const std::filesystem::path& dir);

/// Plain-TCP IMAP account for a mock server on 127.0.0.1; the password
/// ("secret") is exported through MAILGRAPH_TEST_PASSWORD.
mailgraph::transport::AccountConfig mock_imap_account(const std::string& id, int port,
                                                      mailgraph::SourceKind kind = mailgraph::SourceKind::imap);

/// Mailbox command keywords that would alter server state.
bool is_mutating_command(const std::string& client_line);

}  // namespace testsupport
