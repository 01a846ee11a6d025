#include "support.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace testsupport {

TempDir::TempDir()
{
    std::string pattern = (std::filesystem::temp_directory_path() / "mailgraph-test-XXXXXX").string();
    if (!::mkdtemp(pattern.data()))
        throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
}

TempDir::~TempDir()
{
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents)
{
    std::ofstream out(path, std::ios::binary);
    out << contents;
}

std::string to_crlf(std::string_view text)
{
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\n' && (i == 0 || text[i - 1] != '\r'))
            out += '\r';
        out += text[i];
    }
    return out;
}

std::string make_raw(const std::string& message_id, const std::string& subject, const std::string& body,
                     const std::string& from)
{
    return to_crlf("Message-ID: <" + message_id + ">\nFrom: " + from + "\nTo: me@example.com\nSubject: " + subject +
                   "\nDate: Mon, 01 Jan 2024 10:00:00 +0000\n\n" + body + "\n");
}

mailgraph::store::MessageRecord make_record(const std::string& message_id, const mailgraph::text::TermVector& vector,
                                            const std::string& account)
{
    mailgraph::store::MessageRecord r;
    r.digest.message_id = message_id;
    r.digest.content_id = "synth-" + message_id;
    r.digest.vector = vector;
    for (const auto& [t, c] : vector)
        r.digest.weighted[t] = static_cast<double>(c);
    r.digest.keywords = mailgraph::text::top_keywords(r.digest.weighted, 3);
    r.location = {account, "INBOX", 1, 1, mailgraph::SourceKind::imap};
    r.headers.subject = "subject of " + message_id;
    return r;
}

void random_store_ops(std::mt19937_64& rng, mailgraph::store::GraphStore& store, std::size_t ops)
{
    using namespace mailgraph;
    auto pick = [&](const auto& map) -> std::string {
        if (map.empty())
            return "missing";
        auto it = map.begin();
        std::advance(it, static_cast<long>(rng() % map.size()));
        return it->first;
    };
    auto real = [&] { return static_cast<double>(rng() % 1000001) / 1000000.0; };
    for (std::size_t i = 0; i < ops; ++i) {
        try {
            switch (rng() % 7) {
            case 0:
            case 1: {
                const auto id = "m" + std::to_string(rng() % 1000) + "@r";
                text::TermVector v;
                for (int k = 0; k < 3; ++k)
                    v["w" + std::to_string(rng() % 20)] = 1 + rng() % 4;
                if (!store.has_message(id))
                    store.corpus_stats() = text::record_document(store.corpus_stats(), v);
                store.add_message(make_record(id, v, "acct" + std::to_string(rng() % 2)));
                break;
            }
            case 2: {
                std::optional<std::string> parent;
                if (rng() % 2)
                    parent = pick(store.categories());
                const auto prov = rng() % 2 ? store::Provenance::user : store::Provenance::automatic;
                store.create_category("cat" + std::to_string(rng() % 6), parent, prov, rng() % 4 == 0,
                                      static_cast<std::int64_t>(rng() % 100000));
                break;
            }
            case 3:
            case 4:
                store.assign(pick(store.messages()), pick(store.categories()), real(),
                             rng() % 3 ? store::Provenance::automatic : store::Provenance::user);
                break;
            case 5: {
                const auto edges = store.edges();
                if (!edges.empty()) {
                    const auto& e = edges[rng() % edges.size()];
                    store.unassign(e.message_id, e.category_id);
                }
                break;
            }
            case 6:
                store.set_centroid(pick(store.categories()), {{"w" + std::to_string(rng() % 20), real()}});
                break;
            }
        } catch (const mailgraph::Error&) {
        }
        if (rng() % 50 == 0)
            store.commit_batch();
    }
}

std::string totality_violation(const mailgraph::store::GraphStore& store)
{
    for (const auto& [id, m] : store.messages())
        if (store.degree(id) == 0)
            return "message " + id + " has no category";
    for (const auto& [id, c] : store.categories())
        if (!c.pinned && store.degree(id) == 0)
            return "unpinned category " + id + " is empty";
    try {
        store.validate();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

std::vector<std::vector<std::string>> disjoint_vocabularies(std::size_t sets, std::size_t words_per_set,
                                                            std::uint64_t seed)
{
    static const std::string consonants = "bcdfghjklmnprstvz";
    static const std::string vowels = "aeiou";
    const auto& stop = mailgraph::text::builtin_stopwords();
    std::mt19937_64 rng(seed);
    std::set<std::string> used;
    std::vector<std::vector<std::string>> out(sets);
    for (auto& set : out)
        while (set.size() < words_per_set) {
            std::string w;
            const int syllables = 2 + static_cast<int>(rng() % 2);
            for (int i = 0; i < syllables; ++i) {
                w += consonants[rng() % consonants.size()];
                w += vowels[rng() % vowels.size()];
            }
            if (stop.contains(w) || !used.insert(w).second)
                continue;
            set.push_back(w);
        }
    return out;
}

std::string topic_text(std::mt19937_64& rng, const std::vector<std::string>& vocab, std::size_t words)
{
    std::string out;
    for (std::size_t i = 0; i < words; ++i) {
        auto w = vocab[rng() % vocab.size()];
        if (i % 6 == 0 && !w.empty())
            w[0] = static_cast<char>(w[0] - 'a' + 'A');
        out += w;
        out += (i % 6 == 5 || i + 1 == words) ? ". " : " ";
    }
    if (!out.empty())
        out.pop_back();
    return out;
}

std::vector<TopicMessage> topic_corpus(std::size_t topics, std::size_t per_topic, std::size_t vocab_words,
                                       std::uint64_t seed)
{
    const auto vocab = disjoint_vocabularies(topics, vocab_words, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<TopicMessage> out;
    for (std::size_t i = 0; i < per_topic; ++i)
        for (std::size_t t = 0; t < topics; ++t) {
            const auto id = "t" + std::to_string(t) + "-m" + std::to_string(i) + "@corpus.test";
            const auto subject = topic_text(rng, vocab[t], 3);
            const auto body = topic_text(rng, vocab[t], 24);
            out.push_back({id, t, make_raw(id, subject.substr(0, subject.size() - 1), body)});
        }
    return out;
}

double purity(const std::vector<std::vector<std::size_t>>& topics_per_category)
{
    if (topics_per_category.empty())
        return 0.0;
    double sum = 0.0;
    for (const auto& members : topics_per_category) {
        if (members.empty())
            continue;
        std::map<std::size_t, std::size_t> counts;
        for (auto t : members)
            ++counts[t];
        std::size_t best = 0;
        for (const auto& [t, n] : counts)
            best = std::max(best, n);
        sum += static_cast<double>(best) / static_cast<double>(members.size());
    }
    return sum / static_cast<double>(topics_per_category.size());
}

namespace {

std::vector<std::string> crlf_lines(const std::string& crlf_text)
{
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < crlf_text.size()) {
        auto end = crlf_text.find("\r\n", pos);
        if (end == std::string::npos)
            end = crlf_text.size();
        lines.push_back(crlf_text.substr(pos, end - pos));
        pos = end + 2;
    }
    return lines;
}

std::string ensure_crlf_terminated(std::string_view raw)
{
    auto s = to_crlf(raw);
    if (!s.ends_with("\r\n"))
        s += "\r\n";
    return s;
}

}  // namespace

std::string imap_session(const std::vector<ImapMessage>& messages, std::uint64_t uidvalidity,
                         std::uint64_t expected_last_seen, const std::string& user, const std::string& password,
                         const std::string& mailbox, std::optional<std::size_t> drop_after)
{
    std::ostringstream t;
    t << "S: * OK [CAPABILITY IMAP4rev1] mock ready\n";
    t << "C: <TAG> LOGIN " << user << ' ' << password << '\n';
    t << "S: <TAG> OK LOGIN completed\n";
    t << "C: <TAG> EXAMINE " << mailbox << '\n';
    t << "S: * " << messages.size() << " EXISTS\n";
    t << "S: * OK [UIDVALIDITY " << uidvalidity << "] UIDs valid\n";
    t << "S: * FLAGS (\\Answered \\Flagged \\Deleted \\Seen \\Draft)\n";
    t << "S: <TAG> OK [READ-ONLY] EXAMINE completed\n";
    t << "C: <TAG> UID SEARCH UID " << expected_last_seen + 1 << ":*\n";

    std::vector<std::size_t> served;
    std::uint64_t highest = 0;
    for (std::size_t i = 0; i < messages.size(); ++i) {
        highest = std::max(highest, messages[i].uid);
        if (messages[i].uid > expected_last_seen)
            served.push_back(i);
    }
    t << "S: * SEARCH";
    for (auto i : served)
        t << ' ' << messages[i].uid;
    // "n:*" always includes the highest UID, even when it is below n.
    if (served.empty() && highest > 0)
        t << ' ' << highest;
    t << "\nS: <TAG> OK SEARCH completed\n";

    for (std::size_t k = 0; k < served.size(); ++k) {
        const auto& m = messages[served[k]];
        const auto body = ensure_crlf_terminated(m.raw);
        t << "C: <TAG> UID FETCH " << m.uid << " (UID BODY.PEEK[])\n";
        t << "S: * " << served[k] + 1 << " FETCH (UID " << m.uid << " BODY[] {" << body.size() << "}\n";
        auto lines = crlf_lines(body);
        if (drop_after && k == *drop_after) {
            lines.resize(lines.size() / 2);
            for (const auto& l : lines)
                t << "S: " << l << '\n';
            return t.str();
        }
        for (const auto& l : lines)
            t << "S: " << l << '\n';
        t << "S: )\n";
        t << "S: <TAG> OK FETCH completed\n";
    }
    t << "C: <TAG> LOGOUT\n";
    t << "S: * BYE logging out\n";
    t << "S: <TAG> OK LOGOUT completed\n";
    return t.str();
}

std::string pop3_session(const std::vector<Pop3Message>& messages, const std::vector<std::string>& seen,
                         const std::string& user, const std::string& password)
{
    std::ostringstream t;
    t << "S: +OK POP3 mock ready\n";
    t << "C: USER " << user << "\nS: +OK\n";
    t << "C: PASS " << password << "\nS: +OK logged in\n";
    t << "C: UIDL\nS: +OK\n";
    for (std::size_t i = 0; i < messages.size(); ++i)
        t << "S: " << i + 1 << ' ' << messages[i].uidl << '\n';
    t << "S: .\n";
    for (std::size_t i = 0; i < messages.size(); ++i) {
        if (std::find(seen.begin(), seen.end(), messages[i].uidl) != seen.end())
            continue;
        t << "C: RETR " << i + 1 << "\nS: +OK message follows\n";
        for (const auto& l : crlf_lines(ensure_crlf_terminated(messages[i].raw)))
            t << "S: " << (l.starts_with(".") ? "." : "") << l << '\n';
        t << "S: .\n";
    }
    t << "C: QUIT\nS: +OK bye\n";
    return t.str();
}

mailgraph::AppConfig test_config(const std::filesystem::path& dir)
{
    mailgraph::AppConfig c;
    c.data_dir = dir / "data";
    return c;
}

mailgraph::transport::AccountConfig mock_imap_account(const std::string& id, int port, mailgraph::SourceKind kind)
{
    ::setenv("MAILGRAPH_TEST_PASSWORD", "secret", 1);
    mailgraph::transport::AccountConfig a;
    a.account_id = id;
    a.source_kind = kind;
    a.host = "127.0.0.1";
    a.port = port;
    a.use_tls = false;
    a.username = "alice";
    a.credential_env = "MAILGRAPH_TEST_PASSWORD";
    a.timeout = std::chrono::milliseconds(3000);
    return a;
}

bool is_mutating_command(const std::string& client_line)
{
    std::istringstream in(client_line);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) {
        std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        words.push_back(w);
    }
    static const std::set<std::string> verbs = {"STORE", "EXPUNGE", "DELE", "COPY", "MOVE", "DELETE", "RENAME",
                                                "APPEND", "SELECT", "CREATE", "SETFLAGS"};
    for (const auto& word : words)
        if (verbs.contains(word) || word.find("+FLAGS") != std::string::npos ||
            word.find("-FLAGS") != std::string::npos)
            return true;
    // BODY[] without PEEK sets \Seen.
    return client_line.find("BODY[") != std::string::npos && client_line.find("BODY.PEEK[") == std::string::npos;
}

}  // namespace testsupport
