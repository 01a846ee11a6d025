#include "mailgraph/transport.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

namespace mailgraph::transport {

using nlohmann::json;

namespace {

bool starts_with_ci(std::string_view s, std::string_view prefix)
{
    if (s.size() < prefix.size())
        return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::toupper(static_cast<unsigned char>(s[i])) != std::toupper(static_cast<unsigned char>(prefix[i])))
            return false;
    return true;
}

// IMAP astring: bare atom when possible, quoted string otherwise.
std::string astring(std::string_view s)
{
    const bool atom = !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return c > 0x20 && c < 0x7F && c != '(' && c != ')' && c != '{' && c != '"' && c != '\\' &&
               c != '%' && c != '*' && c != ']';
    });
    if (atom)
        return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\')
            out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

struct ImapResponse {
    std::string text;
    std::vector<std::string> literals;
};

struct ImapResult {
    std::vector<ImapResponse> untagged;
    std::string status;  // OK, NO or BAD
    std::string line;
};

class ImapSession {
public:
    explicit ImapSession(Stream& stream) : stream_(stream), reader_(stream) {}

    ImapResponse read_response()
    {
        static const std::regex literal_tail(R"(\{(\d+)\+?\}$)");
        ImapResponse r;
        auto line = reader_.read_line();
        if (!line)
            throw ConnectionLost("connection lost");
        for (;;) {
            r.text += *line;
            std::smatch m;
            if (!std::regex_search(*line, m, literal_tail))
                break;
            auto lit = reader_.read_exact(std::stoull(m[1].str()));
            if (!lit)
                throw ConnectionLost("connection lost");
            r.literals.push_back(std::move(*lit));
            line = reader_.read_line();
            if (!line)
                throw ConnectionLost("connection lost");
        }
        return r;
    }

    ImapResult command(const std::string& text)
    {
        const auto tag = "a" + std::to_string(next_tag_++);
        stream_.write_all(tag + " " + text + "\r\n");
        ImapResult result;
        for (;;) {
            auto r = read_response();
            if (r.text.starts_with(tag + " ")) {
                result.line = r.text;
                const auto rest = std::string_view(r.text).substr(tag.size() + 1);
                result.status = std::string(rest.substr(0, rest.find(' ')));
                std::transform(result.status.begin(), result.status.end(), result.status.begin(),
                               [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
                return result;
            }
            result.untagged.push_back(std::move(r));
        }
    }

private:
    Stream& stream_;
    LineReader reader_;
    int next_tag_ = 1;
};

std::unique_ptr<Stream> open(const AccountConfig& account)
{
    return connect(account.host, account.port,
                   ConnectOptions{account.use_tls, !account.tls_insecure, account.timeout});
}

void imap_login(ImapSession& session, const AccountConfig& account)
{
    const auto greeting = session.read_response();
    if (!starts_with_ci(greeting.text, "* OK") && !starts_with_ci(greeting.text, "* PREAUTH"))
        throw Error(ErrorKind::transport, "unexpected IMAP greeting: " + greeting.text);
    if (starts_with_ci(greeting.text, "* PREAUTH"))
        return;
    const auto password = resolve_credential(account);
    const auto login = session.command("LOGIN " + astring(account.username) + " " + astring(password));
    if (login.status != "OK")
        throw Error(ErrorKind::transport, "auth failed");
}

void imap_logout(ImapSession& session)
{
    try {
        session.command("LOGOUT");
    } catch (const ConnectionLost&) {
        // Everything needed was already received.
    }
}

class Pop3Session {
public:
    explicit Pop3Session(Stream& stream) : stream_(stream), reader_(stream) {}

    std::string read_status()
    {
        auto line = reader_.read_line();
        if (!line)
            throw ConnectionLost("connection lost");
        return *line;
    }

    std::string command(const std::string& text)
    {
        stream_.write_all(text + "\r\n");
        return read_status();
    }

    std::vector<std::string> read_multiline()
    {
        std::vector<std::string> lines;
        for (;;) {
            auto line = reader_.read_line();
            if (!line)
                throw ConnectionLost("connection lost");
            if (*line == ".")
                return lines;
            if (line->starts_with(".."))
                line->erase(0, 1);
            lines.push_back(std::move(*line));
        }
    }

private:
    Stream& stream_;
    LineReader reader_;
};

}  // namespace

void AccountConfig::validate() const
{
    if (account_id.empty())
        throw Error(ErrorKind::invalid_argument, "account_id is required");
    if (source_kind == SourceKind::mbox) {
        if (mbox_path.empty())
            throw Error(ErrorKind::invalid_argument, "account " + account_id + ": mbox_path is required");
        return;
    }
    if (host.empty() || port <= 0 || port > 65535 || username.empty())
        throw Error(ErrorKind::invalid_argument, "account " + account_id + ": host, port and username are required");
    if (source_kind == SourceKind::imap && mailboxes.empty())
        throw Error(ErrorKind::invalid_argument, "account " + account_id + ": no mailboxes");
}

json to_json(const AccountConfig& a)
{
    return {{"account_id", a.account_id},
            {"source_kind", to_string(a.source_kind)},
            {"host", a.host},
            {"port", a.port},
            {"use_tls", a.use_tls},
            {"tls_insecure", a.tls_insecure},
            {"username", a.username},
            {"credential_env", a.credential_env},
            {"mailboxes", a.mailboxes},
            {"mbox_path", a.mbox_path.string()},
            {"timeout_ms", a.timeout.count()}};
}

AccountConfig account_from_json(const json& j)
{
    AccountConfig a;
    a.account_id = j.at("account_id").get<std::string>();
    const auto kind = source_kind_from_string(j.value("source_kind", std::string("imap")));
    if (!kind)
        throw Error(ErrorKind::invalid_argument, "account " + a.account_id + ": unknown source_kind");
    a.source_kind = *kind;
    a.host = j.value("host", std::string());
    a.port = j.value("port", 0);
    a.use_tls = j.value("use_tls", true);
    a.tls_insecure = j.value("tls_insecure", false);
    a.username = j.value("username", std::string());
    a.credential_env = j.value("credential_env", std::string());
    a.mailboxes = j.value("mailboxes", std::vector<std::string>{"INBOX"});
    a.mbox_path = j.value("mbox_path", std::string());
    a.timeout = std::chrono::milliseconds(j.value("timeout_ms", std::int64_t{30000}));
    a.validate();
    return a;
}

std::string resolve_credential(const AccountConfig& account)
{
    if (account.credential_env.empty())
        throw Error(ErrorKind::invalid_argument, "account " + account.account_id + ": credential_env not set");
    const char* value = std::getenv(account.credential_env.c_str());
    if (!value)
        throw Error(ErrorKind::invalid_argument,
                    "account " + account.account_id + ": environment variable " + account.credential_env +
                        " is not set");
    return value;
}

MailboxState SyncState::get(const std::string& account_id, const std::string& mailbox) const
{
    auto it = entries_.find({account_id, mailbox});
    return it == entries_.end() ? MailboxState{} : it->second;
}

void SyncState::put(const std::string& account_id, const std::string& mailbox, MailboxState state)
{
    entries_[{account_id, mailbox}] = std::move(state);
}

void SyncState::merge(const SyncState& fragment)
{
    for (const auto& [key, value] : fragment.entries_)
        entries_[key] = value;
}

json SyncState::to_json() const
{
    json accounts = json::object();
    for (const auto& [key, s] : entries_)
        accounts[key.first][key.second] = {
            {"uidvalidity", s.uidvalidity}, {"last_seen_uid", s.last_seen_uid}, {"seen_uidl", s.seen_uidl}};
    return {{"accounts", accounts}};
}

SyncState SyncState::from_json(const json& j)
{
    SyncState out;
    if (!j.contains("accounts"))
        return out;
    for (const auto& [account, boxes] : j.at("accounts").items())
        for (const auto& [mailbox, s] : boxes.items()) {
            MailboxState st;
            st.uidvalidity = s.at("uidvalidity").get<std::uint64_t>();
            st.last_seen_uid = s.at("last_seen_uid").get<std::uint64_t>();
            st.seen_uidl = s.value("seen_uidl", std::set<std::string>{});
            out.put(account, mailbox, std::move(st));
        }
    return out;
}

FetchResult imap_fetch_new(const AccountConfig& account, const std::string& mailbox, const SyncState& state)
{
    static const std::regex uidvalidity_re(R"(\[UIDVALIDITY (\d+)\])", std::regex::icase);
    static const std::regex uid_re(R"(\bUID (\d+))", std::regex::icase);

    FetchResult result;
    MailboxState entry = state.get(account.account_id, mailbox);
    result.new_state.put(account.account_id, mailbox, entry);

    auto stream = open(account);
    try {
        ImapSession session(*stream);
        imap_login(session, account);

        const auto examine = session.command("EXAMINE " + astring(mailbox));
        if (examine.status != "OK")
            throw Error(ErrorKind::transport, "cannot open mailbox " + mailbox + ": " + examine.line);
        std::uint64_t uidvalidity = 0;
        for (const auto& r : examine.untagged) {
            std::smatch m;
            if (std::regex_search(r.text, m, uidvalidity_re))
                uidvalidity = std::stoull(m[1].str());
        }
        if (uidvalidity != entry.uidvalidity) {
            entry.uidvalidity = uidvalidity;
            entry.last_seen_uid = 0;
        }
        result.new_state.put(account.account_id, mailbox, entry);

        const auto search = session.command("UID SEARCH UID " + std::to_string(entry.last_seen_uid + 1) + ":*");
        if (search.status != "OK")
            throw Error(ErrorKind::transport, "UID SEARCH failed: " + search.line);
        std::vector<std::uint64_t> uids;
        for (const auto& r : search.untagged) {
            if (!starts_with_ci(r.text, "* SEARCH"))
                continue;
            std::istringstream in(r.text.substr(8));
            std::uint64_t uid;
            while (in >> uid)
                if (uid > entry.last_seen_uid)  // "n:*" always matches the highest UID
                    uids.push_back(uid);
        }
        std::sort(uids.begin(), uids.end());
        uids.erase(std::unique(uids.begin(), uids.end()), uids.end());

        for (const auto uid : uids) {
            const auto fetch = session.command("UID FETCH " + std::to_string(uid) + " (UID BODY.PEEK[])");
            if (fetch.status != "OK") {
                result.error = "UID FETCH " + std::to_string(uid) + " failed: " + fetch.line;
                break;
            }
            const ImapResponse* body = nullptr;
            for (const auto& r : fetch.untagged) {
                std::smatch m;
                if (!r.literals.empty() && std::regex_search(r.text, m, uid_re) && std::stoull(m[1].str()) == uid)
                    body = &r;
            }
            if (!body) {
                result.error = "no body returned for UID " + std::to_string(uid);
                break;
            }
            result.messages.push_back(
                {body->literals.front(), MessageLocation{account.account_id, mailbox, uid, uidvalidity, SourceKind::imap}});
            entry.last_seen_uid = uid;
            result.new_state.put(account.account_id, mailbox, entry);
        }
        imap_logout(session);
    } catch (const ConnectionLost&) {
        result.partial = true;
        result.error = "connection lost";
    }
    return result;
}

std::vector<std::string> imap_list_mailboxes(const AccountConfig& account)
{
    auto stream = open(account);
    ImapSession session(*stream);
    imap_login(session, account);
    const auto list = session.command("LIST \"\" \"*\"");
    if (list.status != "OK")
        throw Error(ErrorKind::transport, "LIST failed: " + list.line);
    std::vector<std::string> names;
    for (const auto& r : list.untagged) {
        if (!starts_with_ci(r.text, "* LIST"))
            continue;
        if (!r.literals.empty()) {
            names.push_back(r.literals.back());
            continue;
        }
        std::string_view t = r.text;
        while (!t.empty() && t.back() == ' ')
            t.remove_suffix(1);
        if (t.ends_with('"')) {
            const auto open_quote = t.rfind('"', t.size() - 2);
            names.emplace_back(t.substr(open_quote + 1, t.size() - open_quote - 2));
        } else {
            names.emplace_back(t.substr(t.rfind(' ') + 1));
        }
    }
    imap_logout(session);
    return names;
}

std::uint64_t uidl_hash(std::string_view uidl) noexcept
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : uidl) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

FetchResult pop3_fetch_new(const AccountConfig& account, const SyncState& state)
{
    const std::string mailbox = "INBOX";
    FetchResult result;
    MailboxState entry = state.get(account.account_id, mailbox);
    result.new_state.put(account.account_id, mailbox, entry);

    auto stream = open(account);
    try {
        Pop3Session session(*stream);
        if (!session.read_status().starts_with("+OK"))
            throw Error(ErrorKind::transport, "unexpected POP3 greeting");
        const auto password = resolve_credential(account);
        if (!session.command("USER " + account.username).starts_with("+OK") ||
            !session.command("PASS " + password).starts_with("+OK"))
            throw Error(ErrorKind::transport, "auth failed");

        if (!session.command("UIDL").starts_with("+OK")) {
            session.command("QUIT");
            throw Error(ErrorKind::transport, "UIDL unsupported");
        }
        std::vector<std::pair<std::string, std::string>> listing;  // (message number, uidl)
        for (const auto& line : session.read_multiline()) {
            std::istringstream in(line);
            std::string number, uidl;
            if (in >> number >> uidl)
                listing.emplace_back(number, uidl);
        }

        for (const auto& [number, uidl] : listing) {
            if (entry.seen_uidl.contains(uidl))
                continue;
            if (!session.command("RETR " + number).starts_with("+OK")) {
                result.error = "RETR " + number + " failed";
                continue;
            }
            std::string raw;
            for (const auto& line : session.read_multiline()) {
                raw += line;
                raw += "\r\n";
            }
            result.messages.push_back(
                {std::move(raw), MessageLocation{account.account_id, mailbox, uidl_hash(uidl), 0, SourceKind::pop3}});
            entry.seen_uidl.insert(uidl);
            result.new_state.put(account.account_id, mailbox, entry);
        }
        try {
            session.command("QUIT");
        } catch (const ConnectionLost&) {
        }
    } catch (const ConnectionLost&) {
        result.partial = true;
        result.error = "connection lost";
    }
    return result;
}

std::vector<std::string> split_mbox(std::string_view contents)
{
    static const std::regex quoted_from("^>+From ");
    std::vector<std::string> messages;
    std::string* current = nullptr;
    std::size_t pos = 0;
    while (pos < contents.size()) {
        auto nl = contents.find('\n', pos);
        const std::size_t next = nl == std::string_view::npos ? contents.size() : nl + 1;
        const auto line = contents.substr(pos, next - pos);
        pos = next;
        if (line.starts_with("From ")) {
            messages.emplace_back();
            current = &messages.back();
            continue;
        }
        if (!current)
            continue;  // preamble before the first separator
        if (line.starts_with(">") && std::regex_search(std::string(line.substr(0, 64)), quoted_from))
            current->append(line.substr(1));
        else
            current->append(line);
    }
    // The blank line before each separator belongs to the mbox framing.
    for (auto& m : messages) {
        if (m.ends_with("\r\n\r\n"))
            m.resize(m.size() - 2);
        else if (m.ends_with("\n\n"))
            m.pop_back();
    }
    return messages;
}

FetchResult import_mbox(const std::filesystem::path& path, const std::string& account_id, const SyncState& state)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::io, "cannot read mbox " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();

    const std::string mailbox = path.string();
    MailboxState entry = state.get(account_id, mailbox);
    FetchResult result;
    auto messages = split_mbox(ss.str());
    for (std::size_t i = entry.last_seen_uid; i < messages.size(); ++i) {
        if (messages[i].empty())
            continue;
        result.messages.push_back(
            {std::move(messages[i]), MessageLocation{account_id, mailbox, i, 0, SourceKind::mbox}});
    }
    entry.last_seen_uid = std::max<std::uint64_t>(entry.last_seen_uid, messages.size());
    result.new_state.put(account_id, mailbox, entry);
    return result;
}

std::vector<FetchResult> fetch_account(const AccountConfig& account, const SyncState& state)
{
    std::vector<FetchResult> out;
    switch (account.source_kind) {
    case SourceKind::imap:
        for (const auto& mailbox : account.mailboxes) {
            out.push_back(imap_fetch_new(account, mailbox, state));
            if (out.back().partial)
                break;
        }
        break;
    case SourceKind::pop3: out.push_back(pop3_fetch_new(account, state)); break;
    case SourceKind::mbox: out.push_back(import_mbox(account.mbox_path, account.account_id, state)); break;
    }
    return out;
}

}  // namespace mailgraph::transport
