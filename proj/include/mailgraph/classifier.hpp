#pragma once

#include "mailgraph/store.hpp"
#include "mailgraph/text.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mailgraph::classifier {

struct ClassifierConfig {
    double assign_threshold = 0.30;         // θ
    double new_category_similarity = 0.25;  // τ
    double laplace = 1.0;                   // α
    std::size_t keyword_count = 10;
    std::size_t subcluster_k = 2;
    std::size_t subcluster_min_size = 12;
    std::size_t subcluster_min_child = 3;
    double spam_threshold = 0.90;
    double unknown_token_prob = 0.40;
    std::size_t interesting_tokens = 15;
    std::uint64_t min_token_evidence = 5;

    /// Throws Error(invalid_argument) naming the first out-of-range field.
    void validate() const;

    friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

nlohmann::json to_json(const ClassifierConfig& c);
ClassifierConfig config_from_json(const nlohmann::json& j);

struct CategoryCounts {
    std::map<std::string, std::uint64_t> token_counts;
    std::uint64_t total_tokens = 0;
    std::uint64_t doc_count = 0;

    friend bool operator==(const CategoryCounts&, const CategoryCounts&) = default;
};

/// Multinomial naive Bayes count tables. Categories with no documents and no
/// tokens are dropped, so train followed by untrain restores the exact prior state.
class CategoryModel {
public:
    const std::map<std::string, CategoryCounts>& categories() const noexcept { return categories_; }
    /// |V|: distinct terms with a nonzero count in any category.
    std::size_t vocabulary_size() const noexcept { return vocabulary_.size(); }
    bool contains_term(const std::string& term) const { return vocabulary_.contains(term); }
    /// At least one category has a document.
    bool trained() const noexcept;
    std::uint64_t total_docs() const noexcept;

    void train(const text::TermVector& vector, const std::string& category_id);
    /// Floors counts at zero; returns one warning per floored quantity.
    std::vector<std::string> untrain(const text::TermVector& vector, const std::string& category_id);
    void erase_category(const std::string& category_id);

    nlohmann::json to_json() const;
    static CategoryModel from_json(const nlohmann::json& j);

    friend bool operator==(const CategoryModel&, const CategoryModel&) = default;

private:
    void drop_if_empty(const std::string& category_id);

    std::map<std::string, CategoryCounts> categories_;
    // term -> number of categories holding a nonzero count
    std::map<std::string, std::uint64_t> vocabulary_;
};

struct SpamModel {
    std::map<std::string, std::uint64_t> good;
    std::map<std::string, std::uint64_t> bad;
    std::uint64_t ngood = 0;
    std::uint64_t nbad = 0;

    friend bool operator==(const SpamModel&, const SpamModel&) = default;
};

nlohmann::json to_json(const SpamModel& m);
SpamModel spam_model_from_json(const nlohmann::json& j);

// --- naive Bayes ----------------------------------------------------------

/// Returns the new model; see CategoryModel::train.
CategoryModel train(CategoryModel model, const text::TermVector& vector, const std::string& category_id);
CategoryModel untrain(CategoryModel model, const text::TermVector& vector, const std::string& category_id,
                      std::vector<std::string>* warnings = nullptr);

/// Posterior per category, computed in log space and normalized against the
/// maximum score. Throws "untrained model" when no category has documents.
std::map<std::string, double> classify(const CategoryModel& model, const text::TermVector& vector,
                                       double alpha = 1.0);

/// Every argmax category (ties ordered by id) plus every category with
/// posterior >= threshold.
std::vector<std::pair<std::string, double>> decide_memberships(const std::map<std::string, double>& posteriors,
                                                               double threshold);

// --- centroids and novelty ------------------------------------------------

/// Normalized mean of the members' normalized weighted vectors; empty for no members.
text::WeightMap update_centroid(const std::vector<const text::WeightMap*>& members);

/// Largest cosine between the vector and any non-empty centroid (spam excluded).
/// Returns {category id, similarity}, or nullopt when there is no candidate.
std::optional<std::pair<std::string, double>> best_centroid(const store::GraphStore& store,
                                                            const text::WeightMap& weighted);

/// Name for a new category: top-2 keywords joined by '-'.
std::string category_name_from(const text::MessageDigest& digest);

/// Creates an auto root category for the message when no centroid is within
/// `tau`, assigns the message with score 1.0 and seeds the centroid.
std::optional<std::string> maybe_create_category(store::GraphStore& store, const std::string& message_id,
                                                 double tau, std::int64_t created_at = 0);

// --- Graham spam filter ---------------------------------------------------

double graham_token_prob(const std::string& token, const SpamModel& model, const ClassifierConfig& config);
/// Combined probability over the most interesting distinct tokens; 0.5 when none.
double graham_score(const std::vector<std::string>& tokens, const SpamModel& model,
                    const ClassifierConfig& config);
std::vector<std::string> spam_tokens(const text::TermVector& vector);

// --- sub-categories -------------------------------------------------------

struct MemberVector {
    std::string message_id;
    text::WeightMap weighted;
};

struct Subcluster {
    std::string name;
    std::vector<std::string> member_ids;
    text::WeightMap centroid;
};

/// Deterministically seeded spherical k-means over the members. Returns an
/// empty list when any cluster ends up below `subcluster_min_child`.
/// Throws "too few members" / "max depth reached" (Error::conflict).
std::vector<Subcluster> subcluster(const std::vector<MemberVector>& members, const text::WeightMap& category_centroid,
                                   const std::string& parent_name, int parent_depth, int max_depth,
                                   const ClassifierConfig& config);

// --- stateful learner -----------------------------------------------------

/// Models plus the bookkeeping needed to undo self-training exactly.
class Classifier {
public:
    explicit Classifier(ClassifierConfig config = {});

    const ClassifierConfig& config() const noexcept { return config_; }
    /// Replaces the tuning knobs; learned tables are kept.
    void set_config(ClassifierConfig config);
    const CategoryModel& category_model() const noexcept { return nb_; }
    const SpamModel& spam_model() const noexcept { return spam_; }
    const std::set<std::string>* trained_categories(const std::string& message_id) const;

    /// Spam gate, then naive Bayes + novelty; assigns edges, self-trains on
    /// the argmax and refreshes centroids. Returns true if flagged as spam.
    bool ingest(store::GraphStore& store, const std::string& message_id, std::int64_t now = 0);

    /// Naive Bayes + novelty path without the spam gate.
    void categorize(store::GraphStore& store, const std::string& message_id, std::int64_t now = 0);

    /// Moves (or adds) a message to `to_category`, retraining the model.
    std::vector<std::string> apply_correction(store::GraphStore& store, const std::string& message_id,
                                              const std::optional<std::string>& from_category,
                                              const std::string& to_category, std::int64_t now = 0);

    /// Trains the spam tables from a user verdict and rewires the message's edges.
    void mark_spam(store::GraphStore& store, const std::string& message_id, bool is_spam, std::int64_t now = 0);

    /// Drops model state for categories no longer present in the store.
    void forget_missing_categories(const store::GraphStore& store);

    void refresh_centroid(store::GraphStore& store, const std::string& category_id) const;

    nlohmann::json to_json() const;
    static Classifier from_json(const nlohmann::json& j);

    friend bool operator==(const Classifier&, const Classifier&) = default;

private:
    void train_on(const store::GraphStore& store, const std::string& message_id, const std::string& category_id);
    std::vector<std::string> untrain_from(const store::GraphStore& store, const std::string& message_id,
                                          const std::string& category_id);
    void learn_spam_label(const store::GraphStore& store, const std::string& message_id, bool is_spam);

    ClassifierConfig config_;
    CategoryModel nb_;
    SpamModel spam_;
    std::map<std::string, std::set<std::string>> trained_on_;
    std::map<std::string, bool> spam_labels_;  // true = spam, false = ham
};

}  // namespace mailgraph::classifier
