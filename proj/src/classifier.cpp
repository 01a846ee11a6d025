#include "mailgraph/classifier.hpp"

#include "mailgraph/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mailgraph::classifier {

using nlohmann::json;

namespace {

[[noreturn]] void bad_config(const std::string& field)
{
    throw Error(ErrorKind::invalid_argument, "classifier config: " + field + " out of range");
}

json counts_to_json(const std::map<std::string, std::uint64_t>& m)
{
    json j = json::object();
    for (const auto& [k, v] : m)
        j[k] = v;
    return j;
}

std::map<std::string, std::uint64_t> counts_from_json(const json& j)
{
    std::map<std::string, std::uint64_t> m;
    for (const auto& [k, v] : j.items())
        m.emplace(k, v.get<std::uint64_t>());
    return m;
}

// Subtracts with a floor at zero, erasing entries that reach zero.
bool subtract(std::map<std::string, std::uint64_t>& table, const std::string& key, std::uint64_t n)
{
    auto it = table.find(key);
    const std::uint64_t have = it == table.end() ? 0 : it->second;
    if (it != table.end()) {
        if (have > n)
            it->second -= n;
        else
            table.erase(it);
    }
    return have >= n;
}

}  // namespace

void ClassifierConfig::validate() const
{
    if (!(assign_threshold > 0.0 && assign_threshold <= 1.0))
        bad_config("assign_threshold");
    if (!(new_category_similarity >= 0.0 && new_category_similarity < 1.0))
        bad_config("new_category_similarity");
    if (!(laplace > 0.0))
        bad_config("laplace");
    if (keyword_count < 1)
        bad_config("keyword_count");
    if (subcluster_k < 2)
        bad_config("subcluster_k");
    if (subcluster_min_size < 1)
        bad_config("subcluster_min_size");
    if (subcluster_min_child < 1)
        bad_config("subcluster_min_child");
    if (!(spam_threshold >= 0.0 && spam_threshold <= 1.0))
        bad_config("spam_threshold");
    if (!(unknown_token_prob >= 0.0 && unknown_token_prob <= 1.0))
        bad_config("unknown_token_prob");
    if (interesting_tokens < 1)
        bad_config("interesting_tokens");
}

json to_json(const ClassifierConfig& c)
{
    return {{"assign_threshold", c.assign_threshold},
            {"new_category_similarity", c.new_category_similarity},
            {"laplace", c.laplace},
            {"keyword_count", c.keyword_count},
            {"subcluster_k", c.subcluster_k},
            {"subcluster_min_size", c.subcluster_min_size},
            {"subcluster_min_child", c.subcluster_min_child},
            {"spam_threshold", c.spam_threshold},
            {"unknown_token_prob", c.unknown_token_prob},
            {"interesting_tokens", c.interesting_tokens},
            {"min_token_evidence", c.min_token_evidence}};
}

ClassifierConfig config_from_json(const json& j)
{
    ClassifierConfig c;
    c.assign_threshold = j.value("assign_threshold", c.assign_threshold);
    c.new_category_similarity = j.value("new_category_similarity", c.new_category_similarity);
    c.laplace = j.value("laplace", c.laplace);
    c.keyword_count = j.value("keyword_count", c.keyword_count);
    c.subcluster_k = j.value("subcluster_k", c.subcluster_k);
    c.subcluster_min_size = j.value("subcluster_min_size", c.subcluster_min_size);
    c.subcluster_min_child = j.value("subcluster_min_child", c.subcluster_min_child);
    c.spam_threshold = j.value("spam_threshold", c.spam_threshold);
    c.unknown_token_prob = j.value("unknown_token_prob", c.unknown_token_prob);
    c.interesting_tokens = j.value("interesting_tokens", c.interesting_tokens);
    c.min_token_evidence = j.value("min_token_evidence", c.min_token_evidence);
    c.validate();
    return c;
}

// --- CategoryModel --------------------------------------------------------

bool CategoryModel::trained() const noexcept
{
    return std::any_of(categories_.begin(), categories_.end(),
                       [](const auto& kv) { return kv.second.doc_count > 0; });
}

std::uint64_t CategoryModel::total_docs() const noexcept
{
    std::uint64_t n = 0;
    for (const auto& [id, c] : categories_)
        n += c.doc_count;
    return n;
}

void CategoryModel::train(const text::TermVector& vector, const std::string& category_id)
{
    auto& cat = categories_[category_id];
    for (const auto& [term, count] : vector) {
        if (count == 0)
            continue;
        auto& slot = cat.token_counts[term];
        if (slot == 0)
            ++vocabulary_[term];
        slot += count;
        cat.total_tokens += count;
    }
    ++cat.doc_count;
}

std::vector<std::string> CategoryModel::untrain(const text::TermVector& vector, const std::string& category_id)
{
    std::vector<std::string> warnings;
    auto it = categories_.find(category_id);
    if (it == categories_.end()) {
        warnings.push_back("untrain: category " + category_id + " has no counts");
        return warnings;
    }
    auto& cat = it->second;
    for (const auto& [term, count] : vector) {
        if (count == 0)
            continue;
        const auto tc = cat.token_counts.find(term);
        const std::uint64_t have = tc == cat.token_counts.end() ? 0 : tc->second;
        const std::uint64_t removed = std::min(have, count);
        if (have < count)
            warnings.push_back("untrain: count of '" + term + "' floored at 0");
        if (removed == 0)
            continue;
        subtract(cat.token_counts, term, removed);
        cat.total_tokens -= removed;
        if (!cat.token_counts.contains(term))
            subtract(vocabulary_, term, 1);
    }
    if (cat.doc_count == 0)
        warnings.push_back("untrain: document count floored at 0");
    else
        --cat.doc_count;
    drop_if_empty(category_id);
    return warnings;
}

void CategoryModel::drop_if_empty(const std::string& category_id)
{
    auto it = categories_.find(category_id);
    if (it != categories_.end() && it->second.doc_count == 0 && it->second.token_counts.empty())
        categories_.erase(it);
}

void CategoryModel::erase_category(const std::string& category_id)
{
    auto it = categories_.find(category_id);
    if (it == categories_.end())
        return;
    for (const auto& [term, count] : it->second.token_counts)
        subtract(vocabulary_, term, 1);
    categories_.erase(it);
}

json CategoryModel::to_json() const
{
    json cats = json::object();
    for (const auto& [id, c] : categories_)
        cats[id] = {{"token_counts", counts_to_json(c.token_counts)},
                    {"total_tokens", c.total_tokens},
                    {"doc_count", c.doc_count}};
    return {{"categories", cats}};
}

CategoryModel CategoryModel::from_json(const json& j)
{
    CategoryModel m;
    for (const auto& [id, c] : j.at("categories").items()) {
        CategoryCounts counts;
        counts.token_counts = counts_from_json(c.at("token_counts"));
        counts.total_tokens = c.at("total_tokens").get<std::uint64_t>();
        counts.doc_count = c.at("doc_count").get<std::uint64_t>();
        std::uint64_t sum = 0;
        for (const auto& [term, n] : counts.token_counts) {
            if (n == 0)
                throw Error(ErrorKind::corrupt, "corrupt store: zero token count in category model");
            sum += n;
            ++m.vocabulary_[term];
        }
        if (sum != counts.total_tokens)
            throw Error(ErrorKind::corrupt, "corrupt store: total_tokens mismatch for " + id);
        m.categories_.emplace(id, std::move(counts));
    }
    return m;
}

json to_json(const SpamModel& m)
{
    return {{"good", counts_to_json(m.good)}, {"bad", counts_to_json(m.bad)}, {"ngood", m.ngood}, {"nbad", m.nbad}};
}

SpamModel spam_model_from_json(const json& j)
{
    SpamModel m;
    m.good = counts_from_json(j.at("good"));
    m.bad = counts_from_json(j.at("bad"));
    m.ngood = j.at("ngood").get<std::uint64_t>();
    m.nbad = j.at("nbad").get<std::uint64_t>();
    return m;
}

// --- naive Bayes ----------------------------------------------------------

CategoryModel train(CategoryModel model, const text::TermVector& vector, const std::string& category_id)
{
    model.train(vector, category_id);
    return model;
}

CategoryModel untrain(CategoryModel model, const text::TermVector& vector, const std::string& category_id,
                      std::vector<std::string>* warnings)
{
    auto w = model.untrain(vector, category_id);
    if (warnings)
        warnings->insert(warnings->end(), w.begin(), w.end());
    return model;
}

std::map<std::string, double> classify(const CategoryModel& model, const text::TermVector& vector, double alpha)
{
    if (!model.trained())
        throw Error(ErrorKind::conflict, "untrained model");
    const double total_docs = static_cast<double>(model.total_docs());
    // An all-empty training set has |V| = 0; one pseudo-term keeps the
    // smoothed denominators positive.
    const double vocab = static_cast<double>(std::max<std::size_t>(model.vocabulary_size(), 1));

    std::map<std::string, double> scores;
    for (const auto& [id, c] : model.categories()) {
        if (c.doc_count == 0)
            continue;
        double s = std::log(static_cast<double>(c.doc_count) / total_docs);
        const double denom = static_cast<double>(c.total_tokens) + alpha * vocab;
        for (const auto& [term, tf] : vector) {
            const auto it = c.token_counts.find(term);
            const double count = it == c.token_counts.end() ? 0.0 : static_cast<double>(it->second);
            s += static_cast<double>(tf) * std::log((count + alpha) / denom);
        }
        scores.emplace(id, s);
    }
    double max = -INFINITY;
    for (const auto& [id, s] : scores)
        max = std::max(max, s);
    double sum = 0.0;
    for (auto& [id, s] : scores) {
        s = std::exp(s - max);
        sum += s;
    }
    for (auto& [id, s] : scores)
        s /= sum;
    return scores;
}

std::vector<std::pair<std::string, double>> decide_memberships(const std::map<std::string, double>& posteriors,
                                                               double threshold)
{
    double max = -INFINITY;
    for (const auto& [id, p] : posteriors)
        max = std::max(max, p);
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [id, p] : posteriors)
        if (p == max || p >= threshold)
            out.emplace_back(id, p);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

// --- centroids and novelty ------------------------------------------------

text::WeightMap update_centroid(const std::vector<const text::WeightMap*>& members)
{
    if (members.empty())
        return {};
    text::WeightMap sum;
    for (const auto* m : members)
        for (const auto& [term, w] : text::normalized(*m))
            sum[term] += w;
    for (auto& [term, w] : sum)
        w /= static_cast<double>(members.size());
    return text::normalized(sum);
}

std::optional<std::pair<std::string, double>> best_centroid(const store::GraphStore& store,
                                                            const text::WeightMap& weighted)
{
    std::optional<std::pair<std::string, double>> best;
    for (const auto& [id, c] : store.categories()) {
        if (id == store::spam_id || c.centroid.empty())
            continue;
        const double sim = text::cosine_similarity(weighted, c.centroid);
        if (!best || sim > best->second)
            best = {id, sim};
    }
    return best;
}

std::string category_name_from(const text::MessageDigest& digest)
{
    auto keywords = digest.keywords;
    if (keywords.empty())
        keywords = text::top_keywords(digest.weighted, 2);
    if (keywords.empty())
        return "misc";
    if (keywords.size() == 1)
        return keywords[0];
    return keywords[0] + "-" + keywords[1];
}

std::optional<std::string> maybe_create_category(store::GraphStore& store, const std::string& message_id,
                                                 double tau, std::int64_t created_at)
{
    const auto& digest = store.message(message_id).digest;
    const auto best = best_centroid(store, digest.weighted);
    if (best && best->second >= tau)
        return std::nullopt;
    const auto id = store.create_category(category_name_from(digest), std::nullopt, store::Provenance::automatic,
                                          false, created_at);
    store.assign(message_id, id, 1.0, store::Provenance::automatic);
    store.set_centroid(id, text::normalized(digest.weighted));
    return id;
}

// --- Graham ---------------------------------------------------------------

double graham_token_prob(const std::string& token, const SpamModel& model, const ClassifierConfig& config)
{
    auto lookup = [&](const std::map<std::string, std::uint64_t>& t) {
        auto it = t.find(token);
        return it == t.end() ? 0.0 : static_cast<double>(it->second);
    };
    const double g = lookup(model.good);
    const double b = lookup(model.bad);
    if (2.0 * g + b < static_cast<double>(config.min_token_evidence))
        return config.unknown_token_prob;
    const double bad_ratio = model.nbad == 0 ? 0.0 : std::min(1.0, b / static_cast<double>(model.nbad));
    const double good_ratio = model.ngood == 0 ? 0.0 : std::min(1.0, 2.0 * g / static_cast<double>(model.ngood));
    const double denom = good_ratio + bad_ratio;
    const double p = denom == 0.0 ? 0.0 : bad_ratio / denom;
    return std::clamp(p, 0.01, 0.99);
}

double graham_score(const std::vector<std::string>& tokens, const SpamModel& model, const ClassifierConfig& config)
{
    std::set<std::string> distinct(tokens.begin(), tokens.end());
    std::vector<std::pair<std::string, double>> probs;
    probs.reserve(distinct.size());
    for (const auto& t : distinct)
        probs.emplace_back(t, graham_token_prob(t, model, config));
    std::stable_sort(probs.begin(), probs.end(), [](const auto& a, const auto& b) {
        const double ia = std::abs(a.second - 0.5);
        const double ib = std::abs(b.second - 0.5);
        if (ia != ib)
            return ia > ib;
        return a.second > b.second;
    });
    if (probs.size() > config.interesting_tokens)
        probs.resize(config.interesting_tokens);
    if (probs.empty())
        return 0.5;
    double prod = 1.0;
    double inv = 1.0;
    for (const auto& [t, p] : probs) {
        prod *= p;
        inv *= 1.0 - p;
    }
    if (prod + inv == 0.0)
        return 0.5;
    return prod / (prod + inv);
}

std::vector<std::string> spam_tokens(const text::TermVector& vector)
{
    std::vector<std::string> out;
    out.reserve(vector.size());
    for (const auto& [term, count] : vector)
        out.push_back(term);
    return out;
}

// --- sub-categories -------------------------------------------------------

std::vector<Subcluster> subcluster(const std::vector<MemberVector>& members, const text::WeightMap& category_centroid,
                                   const std::string& parent_name, int parent_depth, int max_depth,
                                   const ClassifierConfig& config)
{
    if (members.size() < config.subcluster_min_size)
        throw Error(ErrorKind::conflict, "too few members");
    if (parent_depth >= max_depth)
        throw Error(ErrorKind::conflict, "max depth reached");

    std::vector<std::pair<std::string, text::WeightMap>> points;
    points.reserve(members.size());
    for (const auto& m : members)
        points.emplace_back(m.message_id, text::normalized(m.weighted));
    std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    text::WeightMap centre = category_centroid;
    if (centre.empty()) {
        std::vector<const text::WeightMap*> all;
        for (const auto& p : points)
            all.push_back(&p.second);
        centre = update_centroid(all);
    }

    // Seeds: farthest from the category centroid, then farthest from the
    // chosen seeds. Strict comparisons keep the smallest id on ties.
    std::vector<std::size_t> seeds;
    {
        std::size_t first = 0;
        double best = INFINITY;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double sim = text::cosine_similarity(points[i].second, centre);
            if (sim < best) {
                best = sim;
                first = i;
            }
        }
        seeds.push_back(first);
    }
    while (seeds.size() < config.subcluster_k) {
        std::size_t next = 0;
        double best = INFINITY;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double closest = -INFINITY;
            for (auto s : seeds)
                closest = std::max(closest, text::cosine_similarity(points[i].second, points[s].second));
            if (closest < best) {
                best = closest;
                next = i;
            }
        }
        seeds.push_back(next);
    }

    const std::size_t k = config.subcluster_k;
    std::vector<text::WeightMap> centroids;
    for (auto s : seeds)
        centroids.push_back(points[s].second);

    std::vector<std::size_t> assignment(points.size(), 0);
    std::vector<std::size_t> previous;
    for (int iter = 0; iter < 20; ++iter) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            std::size_t best_cluster = 0;
            double best = -INFINITY;
            for (std::size_t c = 0; c < k; ++c) {
                const double sim = text::cosine_similarity(points[i].second, centroids[c]);
                if (sim > best) {
                    best = sim;
                    best_cluster = c;
                }
            }
            assignment[i] = best_cluster;
        }
        if (assignment == previous)
            break;
        previous = assignment;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<const text::WeightMap*> group;
            for (std::size_t i = 0; i < points.size(); ++i)
                if (assignment[i] == c)
                    group.push_back(&points[i].second);
            centroids[c] = update_centroid(group);
        }
    }

    std::vector<Subcluster> out(k);
    for (std::size_t i = 0; i < points.size(); ++i)
        out[assignment[i]].member_ids.push_back(points[i].first);
    for (std::size_t c = 0; c < k; ++c) {
        if (out[c].member_ids.size() < config.subcluster_min_child)
            return {};
        std::vector<const text::WeightMap*> group;
        for (std::size_t i = 0; i < points.size(); ++i)
            if (assignment[i] == c)
                group.push_back(&points[i].second);
        out[c].centroid = update_centroid(group);
        const auto top = text::top_keywords(out[c].centroid, 1);
        out[c].name = parent_name + "/" + (top.empty() ? "cluster" + std::to_string(c + 1) : top.front());
    }
    return out;
}

// --- Classifier -----------------------------------------------------------

Classifier::Classifier(ClassifierConfig config) : config_(config) { config_.validate(); }

const std::set<std::string>* Classifier::trained_categories(const std::string& message_id) const
{
    auto it = trained_on_.find(message_id);
    return it == trained_on_.end() ? nullptr : &it->second;
}

void Classifier::train_on(const store::GraphStore& store, const std::string& message_id,
                          const std::string& category_id)
{
    auto& set = trained_on_[message_id];
    if (set.contains(category_id))
        return;
    nb_.train(store.message(message_id).digest.vector, category_id);
    set.insert(category_id);
}

std::vector<std::string> Classifier::untrain_from(const store::GraphStore& store, const std::string& message_id,
                                                  const std::string& category_id)
{
    auto it = trained_on_.find(message_id);
    if (it == trained_on_.end() || !it->second.contains(category_id))
        return {};
    auto warnings = nb_.untrain(store.message(message_id).digest.vector, category_id);
    it->second.erase(category_id);
    if (it->second.empty())
        trained_on_.erase(it);
    return warnings;
}

void Classifier::refresh_centroid(store::GraphStore& store, const std::string& category_id) const
{
    if (category_id == store::spam_id || !store.has_category(category_id))
        return;
    std::vector<const text::WeightMap*> members;
    for (const auto& n : store.neighbors(category_id))
        members.push_back(&store.message(n.id).digest.weighted);
    store.set_centroid(category_id, update_centroid(members));
}

void Classifier::set_config(ClassifierConfig config)
{
    config.validate();
    config_ = std::move(config);
}

bool Classifier::ingest(store::GraphStore& store, const std::string& message_id, std::int64_t now)
{
    const auto& digest = store.message(message_id).digest;
    const double score = graham_score(spam_tokens(digest.vector), spam_, config_);
    store.set_spam_score(message_id, score);
    if (score > config_.spam_threshold) {
        store.assign(message_id, store::spam_id, score, store::Provenance::automatic);
        return true;
    }
    categorize(store, message_id, now);
    return false;
}

void Classifier::categorize(store::GraphStore& store, const std::string& message_id, std::int64_t now)
{
    const auto& digest = store.message(message_id).digest;
    const auto best = best_centroid(store, digest.weighted);
    const bool novel = !best || best->second < config_.new_category_similarity;

    std::map<std::string, double> posteriors;
    if (nb_.trained() && !novel) {
        double sum = 0.0;
        for (const auto& [id, p] : classify(nb_, digest.vector, config_.laplace))
            if (store.has_category(id)) {
                posteriors.emplace(id, p);
                sum += p;
            }
        for (auto& [id, p] : posteriors)
            p /= sum;
    }

    if (posteriors.empty()) {
        if (auto created = maybe_create_category(store, message_id, config_.new_category_similarity, now)) {
            train_on(store, message_id, *created);
            return;
        }
        // Untrained model but a close centroid: join it.
        store.assign(message_id, best->first, best->second, store::Provenance::automatic);
        train_on(store, message_id, best->first);
        refresh_centroid(store, best->first);
        return;
    }

    const auto memberships = decide_memberships(posteriors, config_.assign_threshold);
    for (const auto& [id, p] : memberships)
        store.assign(message_id, id, p, store::Provenance::automatic);
    train_on(store, message_id, memberships.front().first);
    for (const auto& [id, p] : memberships)
        refresh_centroid(store, id);
}

std::vector<std::string> Classifier::apply_correction(store::GraphStore& store, const std::string& message_id,
                                                      const std::optional<std::string>& from_category,
                                                      const std::string& to_category, std::int64_t now)
{
    if (!store.has_message(message_id))
        throw Error(ErrorKind::not_found, "unknown message " + message_id);
    if (!store.has_category(to_category))
        throw Error(ErrorKind::not_found, "unknown category " + to_category);
    if (from_category && !store.has_category(*from_category))
        throw Error(ErrorKind::not_found, "unknown category " + *from_category);
    if (from_category && *from_category == to_category)
        return {};
    if (to_category == store::spam_id) {
        mark_spam(store, message_id, true, now);
        return {};
    }

    std::vector<std::string> warnings;
    if (from_category) {
        if (*from_category == store::spam_id) {
            learn_spam_label(store, message_id, false);
            if (store.edge(message_id, store::spam_id))
                store.unassign(message_id, store::spam_id);
        } else {
            warnings = untrain_from(store, message_id, *from_category);
            if (store.edge(message_id, *from_category))
                store.unassign(message_id, *from_category);
        }
    }

    const auto existing = store.edge(message_id, to_category);
    const auto* trained = trained_categories(message_id);
    if (!from_category && existing && existing->provenance == store::Provenance::user && trained &&
        trained->contains(to_category))
        return warnings;

    train_on(store, message_id, to_category);
    store.assign(message_id, to_category, 1.0, store::Provenance::user);
    if (from_category)
        refresh_centroid(store, *from_category);
    refresh_centroid(store, to_category);
    return warnings;
}

void Classifier::learn_spam_label(const store::GraphStore& store, const std::string& message_id, bool is_spam)
{
    const auto& vector = store.message(message_id).digest.vector;
    auto add = [&](std::map<std::string, std::uint64_t>& table) {
        for (const auto& [t, n] : vector)
            table[t] += n;
    };
    auto remove = [&](std::map<std::string, std::uint64_t>& table) {
        for (const auto& [t, n] : vector)
            subtract(table, t, n);
    };
    const auto label = spam_labels_.find(message_id);
    if (label != spam_labels_.end() && label->second == is_spam)
        return;
    if (label != spam_labels_.end()) {
        // Reverse the earlier verdict before learning the new one.
        if (label->second) {
            remove(spam_.bad);
            spam_.nbad -= std::min<std::uint64_t>(spam_.nbad, 1);
        } else {
            remove(spam_.good);
            spam_.ngood -= std::min<std::uint64_t>(spam_.ngood, 1);
        }
    }
    if (is_spam) {
        add(spam_.bad);
        ++spam_.nbad;
    } else {
        add(spam_.good);
        ++spam_.ngood;
    }
    spam_labels_[message_id] = is_spam;
}

void Classifier::mark_spam(store::GraphStore& store, const std::string& message_id, bool is_spam, std::int64_t now)
{
    if (!store.has_message(message_id))
        throw Error(ErrorKind::not_found, "unknown message " + message_id);
    learn_spam_label(store, message_id, is_spam);

    if (is_spam) {
        if (auto it = trained_on_.find(message_id); it != trained_on_.end()) {
            const auto cats = it->second;
            for (const auto& c : cats)
                untrain_from(store, message_id, c);
        }
        std::vector<std::string> touched;
        for (const auto& n : store.neighbors(message_id))
            if (n.id != store::spam_id) {
                store.unassign(message_id, n.id);
                touched.push_back(n.id);
            }
        store.assign(message_id, store::spam_id, 1.0, store::Provenance::user);
        for (const auto& c : touched)
            refresh_centroid(store, c);
    } else {
        const bool was_flagged = store.edge(message_id, store::spam_id).has_value();
        if (was_flagged)
            store.unassign(message_id, store::spam_id);
        if (was_flagged || store.degree(message_id) == 0)
            categorize(store, message_id, now);
    }
    const auto& vector = store.message(message_id).digest.vector;
    store.set_spam_score(message_id, graham_score(spam_tokens(vector), spam_, config_));
}

void Classifier::forget_missing_categories(const store::GraphStore& store)
{
    std::vector<std::string> gone;
    for (const auto& [id, c] : nb_.categories())
        if (!store.has_category(id))
            gone.push_back(id);
    for (const auto& id : gone)
        nb_.erase_category(id);
    for (auto it = trained_on_.begin(); it != trained_on_.end();) {
        if (!store.has_message(it->first)) {
            it = trained_on_.erase(it);
            continue;
        }
        std::erase_if(it->second, [&](const std::string& c) { return !store.has_category(c); });
        it = it->second.empty() ? trained_on_.erase(it) : std::next(it);
    }
}

json Classifier::to_json() const
{
    json trained = json::object();
    for (const auto& [m, cats] : trained_on_)
        trained[m] = cats;
    json labels = json::object();
    for (const auto& [m, spam] : spam_labels_)
        labels[m] = spam ? "spam" : "ham";
    return {{"category_model", nb_.to_json()},
            {"spam_model", classifier::to_json(spam_)},
            {"config", classifier::to_json(config_)},
            {"trained_on", trained},
            {"spam_labels", labels}};
}

Classifier Classifier::from_json(const json& j)
{
    Classifier c(j.contains("config") ? config_from_json(j.at("config")) : ClassifierConfig{});
    try {
        if (j.contains("category_model"))
            c.nb_ = CategoryModel::from_json(j.at("category_model"));
        if (j.contains("spam_model"))
            c.spam_ = spam_model_from_json(j.at("spam_model"));
        if (j.contains("trained_on"))
            for (const auto& [m, cats] : j.at("trained_on").items())
                c.trained_on_[m] = cats.get<std::set<std::string>>();
        if (j.contains("spam_labels"))
            for (const auto& [m, v] : j.at("spam_labels").items())
                c.spam_labels_[m] = v.get<std::string>() == "spam";
    } catch (const json::exception& e) {
        throw Error(ErrorKind::corrupt, std::string("corrupt store: classifier: ") + e.what());
    }
    return c;
}

}  // namespace mailgraph::classifier
