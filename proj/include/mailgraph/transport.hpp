#pragma once

#include "mailgraph/mime.hpp"
#include "mailgraph/stream.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

// Read-only acquisition of raw messages. Nothing in this module issues a
// command that alters server state: no STORE, EXPUNGE, COPY/MOVE or DELE,
// and bodies are fetched with BODY.PEEK so \Seen is left untouched.
namespace mailgraph::transport {

struct AccountConfig {
    std::string account_id;
    SourceKind source_kind = SourceKind::imap;
    std::string host;
    int port = 0;
    bool use_tls = true;
    /// Skips certificate verification; meant for local test servers.
    bool tls_insecure = false;
    std::string username;
    /// Name of the environment variable holding the password.
    std::string credential_env;
    std::vector<std::string> mailboxes{"INBOX"};
    std::filesystem::path mbox_path;
    std::chrono::milliseconds timeout{30000};

    /// Throws Error(invalid_argument) if required fields are missing.
    void validate() const;
};

nlohmann::json to_json(const AccountConfig& a);
AccountConfig account_from_json(const nlohmann::json& j);

/// Reads the secret from the environment variable named in the account.
std::string resolve_credential(const AccountConfig& account);

struct MailboxState {
    std::uint64_t uidvalidity = 0;
    /// IMAP: highest UID delivered. mbox: number of messages delivered.
    std::uint64_t last_seen_uid = 0;
    std::set<std::string> seen_uidl;  // POP3 only

    friend bool operator==(const MailboxState&, const MailboxState&) = default;
};

/// Per (account, mailbox) incremental fetch position.
class SyncState {
public:
    using Key = std::pair<std::string, std::string>;

    MailboxState get(const std::string& account_id, const std::string& mailbox) const;
    void put(const std::string& account_id, const std::string& mailbox, MailboxState state);
    /// Overwrites entries present in `fragment`.
    void merge(const SyncState& fragment);
    const std::map<Key, MailboxState>& entries() const noexcept { return entries_; }

    nlohmann::json to_json() const;
    static SyncState from_json(const nlohmann::json& j);

    friend bool operator==(const SyncState&, const SyncState&) = default;

private:
    std::map<Key, MailboxState> entries_;
};

struct FetchResult {
    std::vector<RawMessage> messages;
    /// Only the mailboxes touched by this fetch.
    SyncState new_state;
    /// The connection dropped; state covers only fully received messages.
    bool partial = false;
    std::string error;
};

FetchResult imap_fetch_new(const AccountConfig& account, const std::string& mailbox, const SyncState& state);

/// Mailbox names from LIST "" "*".
std::vector<std::string> imap_list_mailboxes(const AccountConfig& account);

/// Throws "UIDL unsupported" for servers without UIDL.
FetchResult pop3_fetch_new(const AccountConfig& account, const SyncState& state);

FetchResult import_mbox(const std::filesystem::path& path, const std::string& account_id, const SyncState& state);

/// Splits mbox contents into messages, undoing ">From " quoting.
std::vector<std::string> split_mbox(std::string_view contents);

/// Stable 64-bit FNV-1a hash, used as the uid of POP3 messages.
std::uint64_t uidl_hash(std::string_view uidl) noexcept;

/// Fetches every mailbox of the account according to its source kind.
std::vector<FetchResult> fetch_account(const AccountConfig& account, const SyncState& state);

}  // namespace mailgraph::transport
