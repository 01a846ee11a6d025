#include "mailgraph/store.hpp"

#include "mailgraph/error.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mailgraph::store {

using nlohmann::json;

namespace {

[[noreturn]] void corrupt(const std::string& what)
{
    throw Error(ErrorKind::corrupt, "corrupt store: " + what);
}

Provenance provenance_from(const json& j)
{
    const auto s = j.get<std::string>();
    if (s == "auto")
        return Provenance::automatic;
    if (s == "user")
        return Provenance::user;
    corrupt("unknown provenance '" + s + "'");
}

json weights_to_json(const text::WeightMap& w)
{
    json j = json::object();
    for (const auto& [t, v] : w)
        j[t] = v;
    return j;
}

text::WeightMap weights_from_json(const json& j)
{
    text::WeightMap w;
    for (const auto& [t, v] : j.items()) {
        const double x = v.get<double>();
        if (!(x >= 0.0))
            corrupt("negative weight for term '" + t + "'");
        w.emplace(t, x);
    }
    return w;
}

void write_all(int fd, std::string_view data, const std::filesystem::path& path)
{
    while (!data.empty()) {
        const auto n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw Error(ErrorKind::io, "write " + path.string() + ": " + std::strerror(errno));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

}  // namespace

std::string_view to_string(Provenance p) noexcept
{
    return p == Provenance::user ? "user" : "auto";
}

std::string RepairAction::describe() const
{
    switch (kind) {
    case Kind::assigned_default: return "assigned " + id + " to " + unsorted_id;
    case Kind::deleted_category: return "deleted empty category " + id;
    case Kind::reparented_category: return "re-parented category " + id;
    }
    return {};
}

GraphStore::GraphStore(int max_depth, std::int64_t created_at) : max_depth_(max_depth)
{
    if (max_depth < 1)
        throw Error(ErrorKind::invalid_argument, "max_depth must be at least 1");
    categories_.emplace(unsorted_id, Category{unsorted_id, "unsorted", Provenance::user, std::nullopt,
                                              true, {}, created_at});
    categories_.emplace(spam_id, Category{spam_id, "spam", Provenance::user, std::nullopt, true, {},
                                          created_at});
}

std::optional<std::string> GraphStore::existing_id(const std::string& message_id,
                                                   const std::string& content_id,
                                                   const std::string& account_id) const
{
    auto it = messages_.find(message_id);
    if (it == messages_.end())
        return std::nullopt;
    if (it->second.location.account_id == account_id)
        return message_id;
    if (messages_.contains(content_id))
        return content_id;
    return std::nullopt;
}

std::string GraphStore::add_message(MessageRecord record)
{
    const auto& id = record.digest.message_id;
    if (id.empty())
        throw Error(ErrorKind::invalid_argument, "message id must not be empty");
    if (auto existing = existing_id(id, record.digest.content_id, record.location.account_id))
        return *existing;
    std::string key = id;
    if (messages_.contains(key)) {
        // Same Message-ID from another account: fall back to the content hash.
        key = record.digest.content_id;
        if (key.empty())
            throw Error(ErrorKind::invalid_argument, "colliding message id without content id");
        record.digest.message_id = key;
    }
    messages_.emplace(key, std::move(record));
    return key;
}

void GraphStore::update_location(const std::string& message_id, const MessageLocation& location)
{
    auto it = messages_.find(message_id);
    if (it == messages_.end())
        throw Error(ErrorKind::not_found, "unknown message " + message_id);
    it->second.location = location;
}

void GraphStore::set_spam_score(const std::string& message_id, double score)
{
    auto it = messages_.find(message_id);
    if (it == messages_.end())
        throw Error(ErrorKind::not_found, "unknown message " + message_id);
    it->second.spam_score = score;
}

const MessageRecord& GraphStore::message(const std::string& id) const
{
    auto it = messages_.find(id);
    if (it == messages_.end())
        throw Error(ErrorKind::not_found, "unknown message " + id);
    return it->second;
}

const Category& GraphStore::category(const std::string& id) const
{
    auto it = categories_.find(id);
    if (it == categories_.end())
        throw Error(ErrorKind::not_found, "unknown category " + id);
    return it->second;
}

int GraphStore::depth(const std::string& category_id) const
{
    int d = 0;
    std::optional<std::string> cur = category_id;
    while (cur) {
        if (++d > static_cast<int>(categories_.size()))
            corrupt("category cycle");
        cur = category(*cur).parent;
    }
    return d;
}

std::vector<std::string> GraphStore::children(const std::string& category_id) const
{
    std::vector<std::string> out;
    for (const auto& [id, c] : categories_)
        if (c.parent == category_id)
            out.push_back(id);
    return out;
}

std::string GraphStore::unique_sibling_name(const std::string& name, const std::optional<std::string>& parent,
                                            const std::string& skip_id) const
{
    auto taken = [&](const std::string& candidate) {
        return std::any_of(categories_.begin(), categories_.end(), [&](const auto& kv) {
            return kv.first != skip_id && kv.second.parent == parent && kv.second.name == candidate;
        });
    };
    if (!taken(name))
        return name;
    for (int n = 2;; ++n) {
        auto candidate = name + "-" + std::to_string(n);
        if (!taken(candidate))
            return candidate;
    }
}

std::string GraphStore::create_category(const std::string& name, const std::optional<std::string>& parent,
                                        Provenance provenance, bool pinned, std::int64_t created_at)
{
    if (name.empty())
        throw Error(ErrorKind::invalid_argument, "category name must not be empty");
    if (parent) {
        if (!categories_.contains(*parent))
            throw Error(ErrorKind::not_found, "unknown category " + *parent);
        if (depth(*parent) >= max_depth_)
            throw Error(ErrorKind::conflict, "depth exceeded");
    }
    std::string id;
    do {
        id = "c" + std::to_string(next_category_seq_++);
    } while (categories_.contains(id));
    categories_.emplace(id, Category{id, unique_sibling_name(name, parent), provenance, parent, pinned, {},
                                     created_at});
    return id;
}

void GraphStore::set_centroid(const std::string& category_id, text::WeightMap centroid)
{
    auto it = categories_.find(category_id);
    if (it == categories_.end())
        throw Error(ErrorKind::not_found, "unknown category " + category_id);
    it->second.centroid = std::move(centroid);
}

void GraphStore::assign(const std::string& message_id, const std::string& category_id, double score,
                        Provenance provenance)
{
    if (!messages_.contains(message_id))
        throw Error(ErrorKind::not_found, "unknown message " + message_id);
    if (!categories_.contains(category_id))
        throw Error(ErrorKind::not_found, "unknown category " + category_id);
    if (!(score >= 0.0 && score <= 1.0))
        throw Error(ErrorKind::invalid_argument, "edge score must be in [0,1]");
    const EdgeKey key{message_id, category_id};
    auto it = edges_.find(key);
    if (it != edges_.end()) {
        if (it->second.provenance == Provenance::user && provenance == Provenance::automatic)
            return;
        it->second = {score, provenance};
        return;
    }
    edges_.emplace(key, EdgeData{score, provenance});
    by_message_[message_id].insert(category_id);
    by_category_[category_id].insert(message_id);
}

void GraphStore::unassign(const std::string& message_id, const std::string& category_id)
{
    auto it = edges_.find({message_id, category_id});
    if (it == edges_.end())
        throw Error(ErrorKind::not_found, "no such edge");
    edges_.erase(it);
    if (auto m = by_message_.find(message_id); m != by_message_.end()) {
        m->second.erase(category_id);
        if (m->second.empty())
            by_message_.erase(m);
    }
    if (auto c = by_category_.find(category_id); c != by_category_.end()) {
        c->second.erase(message_id);
        if (c->second.empty())
            by_category_.erase(c);
    }
}

std::optional<Membership> GraphStore::edge(const std::string& message_id, const std::string& category_id) const
{
    auto it = edges_.find({message_id, category_id});
    if (it == edges_.end())
        return std::nullopt;
    return Membership{message_id, category_id, it->second.score, it->second.provenance};
}

std::vector<Membership> GraphStore::edges() const
{
    std::vector<Membership> out;
    out.reserve(edges_.size());
    for (const auto& [k, e] : edges_)
        out.push_back({k.first, k.second, e.score, e.provenance});
    return out;
}

std::size_t GraphStore::degree(const std::string& id) const
{
    if (auto it = by_message_.find(id); it != by_message_.end())
        return it->second.size();
    if (auto it = by_category_.find(id); it != by_category_.end())
        return it->second.size();
    return 0;
}

std::vector<Neighbor> GraphStore::neighbors(const std::string& id) const
{
    std::vector<Neighbor> out;
    if (messages_.contains(id)) {
        if (auto it = by_message_.find(id); it != by_message_.end())
            for (const auto& c : it->second) {
                const auto& e = edges_.at({id, c});
                out.push_back({c, e.score, e.provenance});
            }
    } else if (categories_.contains(id)) {
        if (auto it = by_category_.find(id); it != by_category_.end())
            for (const auto& m : it->second) {
                const auto& e = edges_.at({m, id});
                out.push_back({m, e.score, e.provenance});
            }
    } else {
        throw Error(ErrorKind::not_found, "unknown id " + id);
    }
    std::stable_sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.score > b.score;
    });
    return out;
}

void GraphStore::erase_category(const std::string& id)
{
    if (auto it = by_category_.find(id); it != by_category_.end()) {
        const auto members = it->second;
        for (const auto& m : members)
            unassign(m, id);
    }
    categories_.erase(id);
}

std::vector<RepairAction> GraphStore::commit_batch()
{
    std::vector<RepairAction> repairs;
    for (const auto& [id, record] : messages_) {
        if (degree(id) == 0) {
            assign(id, unsorted_id, 0.0, Provenance::automatic);
            repairs.push_back({RepairAction::Kind::assigned_default, id});
        }
    }

    std::vector<std::string> empty;
    for (const auto& [id, c] : categories_)
        if (!c.pinned && !by_category_.contains(id))
            empty.push_back(id);
    for (const auto& id : empty) {
        const auto parent = categories_.at(id).parent;
        for (const auto& child : children(id)) {
            auto& c = categories_.at(child);
            c.parent = parent;
            c.name = unique_sibling_name(c.name, parent, child);
            repairs.push_back({RepairAction::Kind::reparented_category, child});
        }
        erase_category(id);
        repairs.push_back({RepairAction::Kind::deleted_category, id});
    }

    ++revision_;
    return repairs;
}

json to_json(const text::MessageDigest& d)
{
    json vec = json::object();
    for (const auto& [t, c] : d.vector)
        vec[t] = c;
    return {{"message_id", d.message_id}, {"content_id", d.content_id}, {"keywords", d.keywords},
            {"summary", d.summary},       {"vector", vec},             {"weighted", weights_to_json(d.weighted)}};
}

text::MessageDigest digest_from_json(const json& j)
{
    text::MessageDigest d;
    d.message_id = j.at("message_id").get<std::string>();
    d.content_id = j.value("content_id", std::string());
    d.keywords = j.at("keywords").get<std::vector<std::string>>();
    d.summary = j.at("summary").get<std::string>();
    for (const auto& [t, c] : j.at("vector").items()) {
        const auto n = c.get<std::uint64_t>();
        if (n == 0)
            corrupt("zero term count in digest " + d.message_id);
        d.vector.emplace(t, n);
    }
    d.weighted = weights_from_json(j.at("weighted"));
    for (const auto& k : d.keywords)
        if (!d.vector.contains(k))
            corrupt("keyword outside term vector in digest " + d.message_id);
    return d;
}

json to_json(const MessageLocation& loc)
{
    return {{"account_id", loc.account_id}, {"mailbox", loc.mailbox}, {"uid", loc.uid},
            {"uidvalidity", loc.uidvalidity}, {"source_kind", to_string(loc.source_kind)}};
}

MessageLocation location_from_json(const json& j)
{
    MessageLocation loc;
    loc.account_id = j.at("account_id").get<std::string>();
    loc.mailbox = j.at("mailbox").get<std::string>();
    loc.uid = j.at("uid").get<std::uint64_t>();
    loc.uidvalidity = j.at("uidvalidity").get<std::uint64_t>();
    const auto kind = source_kind_from_string(j.at("source_kind").get<std::string>());
    if (!kind)
        corrupt("unknown source kind");
    loc.source_kind = *kind;
    return loc;
}

json to_json(const Category& c)
{
    return {{"category_id", c.category_id},
            {"name", c.name},
            {"provenance", to_string(c.provenance)},
            {"parent", c.parent ? json(*c.parent) : json(nullptr)},
            {"pinned", c.pinned},
            {"centroid", weights_to_json(c.centroid)},
            {"created_at", c.created_at}};
}

json to_json(const MessageHeaders& h)
{
    return {{"from", h.from},
            {"to", h.to},
            {"cc", h.cc},
            {"subject", h.subject},
            {"date", h.date ? json(*h.date) : json(nullptr)}};
}

json GraphStore::to_json() const
{
    json doc = extra_;
    doc["version"] = store_version;
    doc["revision"] = revision_;
    doc["next_category_seq"] = next_category_seq_;

    json df = json::object();
    for (const auto& [t, n] : corpus_stats_.df)
        df[t] = n;
    doc["corpus_stats"] = {{"doc_count", corpus_stats_.doc_count}, {"df", df}};

    json cats = json::array();
    for (const auto& [id, c] : categories_)
        cats.push_back(store::to_json(c));
    doc["categories"] = cats;

    json msgs = json::array();
    for (const auto& [id, m] : messages_)
        msgs.push_back({{"digest", store::to_json(m.digest)},
                        {"location", store::to_json(m.location)},
                        {"headers", store::to_json(m.headers)},
                        {"spam_score", m.spam_score}});
    doc["messages"] = msgs;

    json edges = json::array();
    for (const auto& [k, e] : edges_)
        edges.push_back({{"message_id", k.first},
                         {"category_id", k.second},
                         {"score", e.score},
                         {"provenance", to_string(e.provenance)}});
    doc["edges"] = edges;
    doc["classifier"] = classifier_;
    doc["sync_state"] = sync_state_;
    return doc;
}

GraphStore GraphStore::from_json(const json& doc, int max_depth)
{
    if (!doc.is_object())
        corrupt("document is not an object");
    if (!doc.contains("version") || !doc["version"].is_number_integer() || doc["version"].get<int>() != store_version)
        throw Error(ErrorKind::corrupt, "unsupported version");

    GraphStore s(max_depth);
    s.categories_.clear();
    try {
        s.revision_ = doc.value("revision", std::uint64_t{0});
        s.next_category_seq_ = doc.value("next_category_seq", std::uint64_t{1});

        const auto& stats = doc.at("corpus_stats");
        s.corpus_stats_.doc_count = stats.at("doc_count").get<std::uint64_t>();
        for (const auto& [t, n] : stats.at("df").items())
            s.corpus_stats_.df.emplace(t, n.get<std::uint64_t>());

        for (const auto& c : doc.at("categories")) {
            Category cat;
            cat.category_id = c.at("category_id").get<std::string>();
            cat.name = c.at("name").get<std::string>();
            cat.provenance = provenance_from(c.at("provenance"));
            if (!c.at("parent").is_null())
                cat.parent = c.at("parent").get<std::string>();
            cat.pinned = c.at("pinned").get<bool>();
            cat.centroid = weights_from_json(c.at("centroid"));
            cat.created_at = c.at("created_at").get<std::int64_t>();
            if (!s.categories_.emplace(cat.category_id, cat).second)
                corrupt("duplicate category " + cat.category_id);
        }

        for (const auto& m : doc.at("messages")) {
            MessageRecord r;
            r.digest = digest_from_json(m.at("digest"));
            r.location = location_from_json(m.at("location"));
            const auto& h = m.at("headers");
            r.headers.from = h.at("from").get<std::string>();
            r.headers.to = h.at("to").get<std::vector<std::string>>();
            r.headers.cc = h.at("cc").get<std::vector<std::string>>();
            r.headers.subject = h.at("subject").get<std::string>();
            if (!h.at("date").is_null())
                r.headers.date = h.at("date").get<std::int64_t>();
            r.spam_score = m.at("spam_score").get<double>();
            const auto id = r.digest.message_id;
            if (!s.messages_.emplace(id, std::move(r)).second)
                corrupt("duplicate message " + id);
        }

        for (const auto& e : doc.at("edges")) {
            const auto mid = e.at("message_id").get<std::string>();
            const auto cid = e.at("category_id").get<std::string>();
            const double score = e.at("score").get<double>();
            const auto prov = provenance_from(e.at("provenance"));
            if (!s.messages_.contains(mid) || !s.categories_.contains(cid))
                corrupt("dangling edge");
            if (!(score >= 0.0 && score <= 1.0))
                corrupt("edge score out of range");
            if (!s.edges_.emplace(EdgeKey{mid, cid}, EdgeData{score, prov}).second)
                corrupt("duplicate edge");
            s.by_message_[mid].insert(cid);
            s.by_category_[cid].insert(mid);
        }

        s.classifier_ = doc.value("classifier", json::object());
        s.sync_state_ = doc.value("sync_state", json::object());
        static const std::set<std::string> known = {"version", "revision", "next_category_seq", "corpus_stats",
                                                    "categories", "messages", "edges", "classifier",
                                                    "sync_state"};
        for (const auto& [k, v] : doc.items())
            if (!known.contains(k))
                s.extra_[k] = v;
    } catch (const json::exception& e) {
        corrupt(e.what());
    }
    s.validate();
    return s;
}

void GraphStore::validate() const
{
    if (!categories_.contains(unsorted_id) || !categories_.contains(spam_id))
        corrupt("missing builtin category");
    std::set<std::pair<std::optional<std::string>, std::string>> sibling_names;
    for (const auto& [id, c] : categories_) {
        if (c.category_id != id)
            corrupt("category key mismatch for " + id);
        if (c.parent && !categories_.contains(*c.parent))
            corrupt("dangling parent of " + id);
        int d = 0;
        std::optional<std::string> cur = id;
        while (cur) {
            if (++d > static_cast<int>(categories_.size()))
                corrupt("category cycle at " + id);
            cur = categories_.at(*cur).parent;
        }
        if (d > max_depth_)
            corrupt("depth exceeded at " + id);
        if (!sibling_names.emplace(c.parent, c.name).second)
            corrupt("duplicate sibling name '" + c.name + "'");
    }
    for (const auto& [id, m] : messages_)
        if (m.digest.message_id != id)
            corrupt("message key mismatch for " + id);
    for (const auto& [k, e] : edges_) {
        if (!messages_.contains(k.first) || !categories_.contains(k.second))
            corrupt("dangling edge");
        if (!(e.score >= 0.0 && e.score <= 1.0))
            corrupt("edge score out of range");
    }
    for (const auto& [t, n] : corpus_stats_.df)
        if (n < 1 || n > corpus_stats_.doc_count)
            corrupt("document frequency out of range for '" + t + "'");
}

bool operator==(const GraphStore& a, const GraphStore& b)
{
    return a.max_depth_ == b.max_depth_ && a.revision_ == b.revision_ &&
           a.next_category_seq_ == b.next_category_seq_ && a.messages_ == b.messages_ &&
           a.categories_ == b.categories_ && a.edges_ == b.edges_ && a.corpus_stats_ == b.corpus_stats_ &&
           a.classifier_ == b.classifier_ && a.sync_state_ == b.sync_state_ && a.extra_ == b.extra_;
}

void persist(const GraphStore& store, const std::filesystem::path& path, const PersistHooks& hooks)
{
    const auto data = store.to_json().dump(1);
    auto temp = path;
    temp += ".tmp";
    const int fd = ::open(temp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0)
        throw Error(ErrorKind::io, "open " + temp.string() + ": " + std::strerror(errno));
    try {
        write_all(fd, data, temp);
        if (::fsync(fd) != 0)
            throw Error(ErrorKind::io, "fsync " + temp.string() + ": " + std::strerror(errno));
    } catch (...) {
        ::close(fd);
        std::filesystem::remove(temp);
        throw;
    }
    ::close(fd);

    if (hooks.before_rename)
        hooks.before_rename(temp);

    std::error_code ec;
    std::filesystem::rename(temp, path, ec);
    if (ec) {
        std::filesystem::remove(temp);
        throw Error(ErrorKind::io, "rename " + temp.string() + ": " + ec.message());
    }
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    if (const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC); dfd >= 0) {
        ::fsync(dfd);
        ::close(dfd);
    }
}

GraphStore load(const std::filesystem::path& path, int max_depth)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::io, "cannot read store " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    json doc;
    try {
        doc = json::parse(ss.str());
    } catch (const json::exception& e) {
        corrupt(std::string("invalid JSON: ") + e.what());
    }
    return GraphStore::from_json(doc, max_depth);
}

}  // namespace mailgraph::store
