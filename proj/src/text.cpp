#include "mailgraph/text.hpp"

#include "mailgraph/error.hpp"
#include "mailgraph/unicode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mailgraph::text {

namespace detail {
extern const std::string_view builtin_stopwords_en;
extern const std::string_view builtin_stopwords_ro;
}  // namespace detail

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> tokens;
    std::string current;
    std::size_t current_len = 0;
    auto flush = [&] {
        if (current_len > 1)
            tokens.push_back(current);
        current.clear();
        current_len = 0;
    };
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t cp = unicode::next_code_point(text, pos);
        if (unicode::is_letter(cp) || unicode::is_digit(cp)) {
            unicode::append_utf8(current, unicode::to_lower(cp));
            ++current_len;
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

TermVector term_vector(const std::vector<std::string>& tokens, const StopwordSet& stopwords)
{
    TermVector counts;
    for (const auto& t : tokens)
        if (!stopwords.contains(t))
            ++counts[t];
    return counts;
}

CorpusStats record_document(CorpusStats stats, const TermVector& vector)
{
    ++stats.doc_count;
    for (const auto& [term, count] : vector)
        if (count > 0)
            ++stats.df[term];
    return stats;
}

WeightMap tfidf_weights(const TermVector& vector, const CorpusStats& stats)
{
    if (stats.doc_count == 0)
        throw Error(ErrorKind::invalid_argument, "empty corpus");
    const double n = static_cast<double>(stats.doc_count);
    WeightMap out;
    for (const auto& [term, count] : vector) {
        const auto it = stats.df.find(term);
        const double df = it == stats.df.end() ? 0.0 : static_cast<double>(it->second);
        out.emplace(term, static_cast<double>(count) * (std::log((1.0 + n) / (1.0 + df)) + 1.0));
    }
    return out;
}

std::vector<std::string> top_keywords(const WeightMap& weighted, std::size_t k)
{
    std::vector<std::pair<std::string, double>> ranked(weighted.begin(), weighted.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i)
        out.push_back(ranked[i].first);
    return out;
}

std::vector<std::string> split_sentences(std::string_view text)
{
    auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    auto push = [&](std::vector<std::string>& out, std::string_view s) {
        while (!s.empty() && is_ws(s.front()))
            s.remove_prefix(1);
        while (!s.empty() && is_ws(s.back()))
            s.remove_suffix(1);
        if (!s.empty())
            out.emplace_back(s);
    };
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || is_ws(text[i + 1]))) {
            push(out, text.substr(start, i + 1 - start));
            start = i + 1;
        }
    }
    if (start < text.size())
        push(out, text.substr(start));
    return out;
}

std::string summarize(std::string_view text, const WeightMap& weighted, std::size_t n)
{
    const auto sentences = split_sentences(text);
    if (sentences.empty())
        return {};
    std::vector<double> scores;
    scores.reserve(sentences.size());
    for (const auto& s : sentences) {
        const auto tokens = tokenize(s);
        double sum = 0.0;
        for (const auto& t : tokens)
            if (auto it = weighted.find(t); it != weighted.end())
                sum += it->second;
        scores.push_back(sum / (1.0 + static_cast<double>(tokens.size())));
    }
    std::vector<std::size_t> order(sentences.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(std::min(n, order.size()));
    std::sort(order.begin(), order.end());

    std::string out;
    for (auto idx : order) {
        if (!out.empty())
            out.push_back(' ');
        out += sentences[idx];
    }
    return out;
}

double norm(const WeightMap& v)
{
    double sq = 0.0;
    for (const auto& [term, w] : v)
        sq += w * w;
    return std::sqrt(sq);
}

double cosine_similarity(const WeightMap& a, const WeightMap& b)
{
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0)
        return 0.0;
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    double dot = 0.0;
    for (const auto& [term, w] : small)
        if (auto it = large.find(term); it != large.end())
            dot += w * it->second;
    return std::clamp(dot / (na * nb), 0.0, 1.0);
}

WeightMap normalized(const WeightMap& v)
{
    const double n = norm(v);
    if (n == 0.0)
        return {};
    WeightMap out;
    for (const auto& [term, w] : v)
        out.emplace(term, w / n);
    return out;
}

StopwordSet parse_stopwords(std::string_view contents)
{
    StopwordSet out;
    std::istringstream in{std::string(contents)};
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos)
            continue;
        const auto e = line.find_last_not_of(" \t\r");
        const std::string_view term = std::string_view(line).substr(b, e - b + 1);
        std::string lowered;
        for (std::size_t pos = 0; pos < term.size();)
            unicode::append_utf8(lowered, unicode::to_lower(unicode::next_code_point(term, pos)));
        out.insert(std::move(lowered));
    }
    return out;
}

StopwordSet load_stopwords(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::io, "cannot read stopword file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_stopwords(ss.str());
}

const StopwordSet& builtin_stopwords()
{
    static const StopwordSet words = [] {
        auto en = parse_stopwords(detail::builtin_stopwords_en);
        en.merge(parse_stopwords(detail::builtin_stopwords_ro));
        return en;
    }();
    return words;
}

std::string digest_text(const mime::ParsedMessage& message)
{
    if (message.subject.empty())
        return message.body_text;
    if (message.body_text.empty())
        return message.subject;
    return message.subject + "\n\n" + message.body_text;
}

MessageDigest make_digest(const mime::ParsedMessage& message, CorpusStats& stats,
                          const StopwordSet& stopwords, const DigestOptions& options)
{
    const auto source = digest_text(message);
    MessageDigest d;
    d.message_id = message.message_id;
    d.content_id = message.content_id;
    // The subject is counted a second time on top of its occurrence in `source`.
    auto tokens = tokenize(message.subject);
    auto rest = tokenize(source);
    tokens.insert(tokens.end(), rest.begin(), rest.end());
    d.vector = term_vector(tokens, stopwords);
    stats = record_document(std::move(stats), d.vector);
    d.weighted = tfidf_weights(d.vector, stats);
    d.keywords = top_keywords(d.weighted, options.keyword_count);
    d.summary = summarize(source, d.weighted, options.summary_sentences);
    return d;
}

}  // namespace mailgraph::text
