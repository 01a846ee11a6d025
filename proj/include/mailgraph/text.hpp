#pragma once

#include "mailgraph/mime.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mailgraph::text {

/// Term -> occurrence count; every count is >= 1.
using TermVector = std::map<std::string, std::uint64_t>;
/// Term -> non-negative weight.
using WeightMap = std::map<std::string, double>;
using StopwordSet = std::set<std::string, std::less<>>;

struct CorpusStats {
    std::uint64_t doc_count = 0;
    std::map<std::string, std::uint64_t> df;

    friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// Per-message node of the graph: keywords, extractive summary, term vector.
struct MessageDigest {
    std::string message_id;
    std::string content_id;
    std::vector<std::string> keywords;
    std::string summary;
    TermVector vector;
    WeightMap weighted;

    friend bool operator==(const MessageDigest&, const MessageDigest&) = default;
};

struct DigestOptions {
    std::size_t keyword_count = 10;
    std::size_t summary_sentences = 3;
};

/// Maximal runs of letters/digits, lowercased; single-character tokens dropped.
std::vector<std::string> tokenize(std::string_view text);

TermVector term_vector(const std::vector<std::string>& tokens, const StopwordSet& stopwords);

CorpusStats record_document(CorpusStats stats, const TermVector& vector);

/// count(t) * (ln((1+N)/(1+df(t))) + 1). Throws on an empty corpus.
WeightMap tfidf_weights(const TermVector& vector, const CorpusStats& stats);

/// Highest weights first, ties in lexicographic term order.
std::vector<std::string> top_keywords(const WeightMap& weighted, std::size_t k);

std::vector<std::string> split_sentences(std::string_view text);

/// Top-n sentences by mean token weight, kept in document order and joined by a space.
std::string summarize(std::string_view text, const WeightMap& weighted, std::size_t n);

double cosine_similarity(const WeightMap& a, const WeightMap& b);
double norm(const WeightMap& v);
/// v / |v|; empty for the zero vector.
WeightMap normalized(const WeightMap& v);

StopwordSet parse_stopwords(std::string_view contents);
StopwordSet load_stopwords(const std::filesystem::path& path);
/// Built-in English + Romanian lists.
const StopwordSet& builtin_stopwords();

/// Subject followed by body, the text every digest is computed from.
std::string digest_text(const mime::ParsedMessage& message);

/// Tokenizes (subject tokens count twice), records the document in `stats`,
/// then weights against the updated statistics. The summary is drawn from
/// digest_text().
MessageDigest make_digest(const mime::ParsedMessage& message, CorpusStats& stats,
                          const StopwordSet& stopwords, const DigestOptions& options = {});

}  // namespace mailgraph::text
