#pragma once

#include "mailgraph/mime.hpp"
#include "mailgraph/text.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mailgraph::store {

inline constexpr int store_version = 1;
inline constexpr const char* unsorted_id = "unsorted";
inline constexpr const char* spam_id = "spam";

enum class Provenance { automatic, user };

std::string_view to_string(Provenance p) noexcept;

struct Category {
    std::string category_id;
    std::string name;
    Provenance provenance = Provenance::automatic;
    std::optional<std::string> parent;
    bool pinned = false;
    text::WeightMap centroid;
    std::int64_t created_at = 0;

    friend bool operator==(const Category&, const Category&) = default;
};

struct Membership {
    std::string message_id;
    std::string category_id;
    double score = 0.0;
    Provenance provenance = Provenance::automatic;

    friend bool operator==(const Membership&, const Membership&) = default;
};

struct MessageHeaders {
    std::string from;
    std::vector<std::string> to;
    std::vector<std::string> cc;
    std::string subject;
    std::optional<std::int64_t> date;

    friend bool operator==(const MessageHeaders&, const MessageHeaders&) = default;
};

/// Everything kept about a message; the body itself stays on the server.
struct MessageRecord {
    text::MessageDigest digest;
    MessageLocation location;
    MessageHeaders headers;
    double spam_score = 0.5;

    friend bool operator==(const MessageRecord&, const MessageRecord&) = default;
};

/// Counterpart of a node in the bipartite relation.
struct Neighbor {
    std::string id;
    double score = 0.0;
    Provenance provenance = Provenance::automatic;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct RepairAction {
    enum class Kind { assigned_default, deleted_category, reparented_category };
    Kind kind;
    std::string id;  // message id for assigned_default, category id otherwise

    std::string describe() const;
    friend bool operator==(const RepairAction&, const RepairAction&) = default;
};

/// Bipartite message <-> category graph with a category forest.
///
/// A fresh store contains the pinned categories "unsorted" and "spam". Edges
/// only ever join a message to a category. Between commits the graph may be
/// temporarily incomplete (edgeless messages, empty categories);
/// commit_batch() restores the totality invariants.
class GraphStore {
public:
    explicit GraphStore(int max_depth = 3, std::int64_t created_at = 0);

    int max_depth() const noexcept { return max_depth_; }
    std::uint64_t revision() const noexcept { return revision_; }

    // --- messages --------------------------------------------------------
    /// Inserts the message unless it is already present. A Message-ID that
    /// collides with a message from a different account is stored under the
    /// digest's content id instead. Returns the id the message is stored under.
    std::string add_message(MessageRecord record);
    /// The id `add_message` would return for an already stored message, if any.
    std::optional<std::string> existing_id(const std::string& message_id, const std::string& content_id,
                                           const std::string& account_id) const;
    void update_location(const std::string& message_id, const MessageLocation& location);
    void set_spam_score(const std::string& message_id, double score);

    bool has_message(const std::string& id) const { return messages_.contains(id); }
    const MessageRecord& message(const std::string& id) const;
    const std::map<std::string, MessageRecord>& messages() const noexcept { return messages_; }

    // --- categories ------------------------------------------------------
    /// Sibling-name collisions get "-2", "-3", ... appended. Throws
    /// "depth exceeded" if the parent is already at max depth.
    std::string create_category(const std::string& name, const std::optional<std::string>& parent,
                                Provenance provenance, bool pinned, std::int64_t created_at = 0);
    void set_centroid(const std::string& category_id, text::WeightMap centroid);
    bool has_category(const std::string& id) const { return categories_.contains(id); }
    const Category& category(const std::string& id) const;
    const std::map<std::string, Category>& categories() const noexcept { return categories_; }
    /// 1 for roots.
    int depth(const std::string& category_id) const;
    std::vector<std::string> children(const std::string& category_id) const;

    // --- edges -----------------------------------------------------------
    /// Overwrites an existing edge, except that a user edge is never
    /// replaced by an automatic one.
    void assign(const std::string& message_id, const std::string& category_id, double score,
                Provenance provenance);
    void unassign(const std::string& message_id, const std::string& category_id);
    std::optional<Membership> edge(const std::string& message_id, const std::string& category_id) const;
    std::vector<Membership> edges() const;
    std::size_t edge_count() const noexcept { return edges_.size(); }
    std::size_t degree(const std::string& id) const;

    /// Categories of a message or messages of a category, by descending
    /// score then id.
    std::vector<Neighbor> neighbors(const std::string& id) const;

    /// Restores the totality invariants and bumps the revision.
    std::vector<RepairAction> commit_batch();

    // --- sections owned by other modules ---------------------------------
    text::CorpusStats& corpus_stats() noexcept { return corpus_stats_; }
    const text::CorpusStats& corpus_stats() const noexcept { return corpus_stats_; }
    nlohmann::json& classifier_section() noexcept { return classifier_; }
    const nlohmann::json& classifier_section() const noexcept { return classifier_; }
    nlohmann::json& sync_section() noexcept { return sync_state_; }
    const nlohmann::json& sync_section() const noexcept { return sync_state_; }

    nlohmann::json to_json() const;
    /// Validates every invariant; throws Error(corrupt) naming the first failure.
    static GraphStore from_json(const nlohmann::json& doc, int max_depth = 3);

    /// Throws Error(corrupt) if any structural invariant is broken.
    void validate() const;

    friend bool operator==(const GraphStore&, const GraphStore&);

private:
    using EdgeKey = std::pair<std::string, std::string>;  // (message, category)
    struct EdgeData {
        double score;
        Provenance provenance;
        bool operator==(const EdgeData&) const = default;
    };

    std::string unique_sibling_name(const std::string& name, const std::optional<std::string>& parent,
                                    const std::string& skip_id = {}) const;
    void erase_category(const std::string& id);

    int max_depth_;
    std::uint64_t revision_ = 0;
    std::uint64_t next_category_seq_ = 1;
    std::map<std::string, MessageRecord> messages_;
    std::map<std::string, Category> categories_;
    std::map<EdgeKey, EdgeData> edges_;
    std::map<std::string, std::set<std::string>> by_message_;
    std::map<std::string, std::set<std::string>> by_category_;
    text::CorpusStats corpus_stats_;
    nlohmann::json classifier_ = nlohmann::json::object();
    nlohmann::json sync_state_ = nlohmann::json::object();
    nlohmann::json extra_ = nlohmann::json::object();
};

/// Test seam: called after the temp file is fully written and before the
/// rename that publishes it.
struct PersistHooks {
    std::function<void(const std::filesystem::path& temp_path)> before_rename;
};

/// Atomic write: temp file, fsync, rename.
void persist(const GraphStore& store, const std::filesystem::path& path, const PersistHooks& hooks = {});
GraphStore load(const std::filesystem::path& path, int max_depth = 3);

// JSON helpers shared with the service layer.
nlohmann::json to_json(const text::MessageDigest& d);
text::MessageDigest digest_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MessageLocation& loc);
MessageLocation location_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Category& c);
nlohmann::json to_json(const MessageHeaders& h);

}  // namespace mailgraph::store
