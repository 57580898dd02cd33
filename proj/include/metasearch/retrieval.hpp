#pragma once

// BM25 (plain and term-weighted), RM3 pseudo-relevance feedback, and the
// rerankers applied to BM25 runs: publication-year boost, vector-similarity
// reordering and paragraph-to-document collapsing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "index.hpp"
#include "query.hpp"
#include "run.hpp"
#include "tokenizer.hpp"

namespace metasearch {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    std::size_t max_results = kMaxResultsPerTopic;

    void validate() const {
        if (!(k1 >= 0.0)) throw Error(ErrorKind::InvalidParameter, "bm25.k1 must be >= 0");
        if (!(b >= 0.0 && b <= 1.0)) throw Error(ErrorKind::InvalidParameter, "bm25.b must be in [0,1]");
        if (max_results < 1) throw Error(ErrorKind::InvalidParameter, "bm25.max_results must be >= 1");
    }
};

struct Rm3Params {
    std::size_t fb_docs = 10;
    std::size_t fb_terms = 10;
    double original_weight = 0.5;

    void validate() const {
        if (fb_docs < 1) throw Error(ErrorKind::InvalidParameter, "rm3.fb_docs must be >= 1");
        if (fb_terms < 1) throw Error(ErrorKind::InvalidParameter, "rm3.fb_terms must be >= 1");
        if (!(original_weight >= 0.0 && original_weight <= 1.0))
            throw Error(ErrorKind::InvalidParameter, "rm3.original_weight must be in [0,1]");
    }
};

/// Analysed query: index term -> weight. Ordered so scoring is deterministic.
using TermWeights = std::map<std::string, double>;

/// Lucene-style idf, always positive: ln(1 + (N - df + 0.5) / (df + 0.5)).
inline double bm25_idf(std::size_t n_docs, std::size_t df) {
    const auto n = static_cast<double>(n_docs);
    const auto d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

inline double bm25_tf_component(double tf, double doc_len, double avgdl, const Bm25Params& p) {
    const double norm = avgdl > 0.0 ? doc_len / avgdl : 1.0;
    return tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
}

namespace detail {

inline void check_tokenizer(const InvertedIndex& idx, const Tokenizer& tokenizer) {
    if (idx.tokenizer_fingerprint() != tokenizer.fingerprint())
        throw Error(ErrorKind::TokenizerMismatch,
                    "index built with '" + idx.tokenizer_fingerprint() + "', query analysed with '" +
                        tokenizer.fingerprint() + "'");
}

}  // namespace detail

/// Core scorer: score(d) = sum_t w_t * idf(t) * tf-component(t, d) over the
/// documents matching at least one positively weighted term. Returns the top
/// `max_results` entries in ranking order.
inline std::vector<RunEntry> score_weighted_terms(const InvertedIndex& idx, const TermWeights& weights,
                                                  const Bm25Params& p, int topic = 0, std::string_view tag = {}) {
    p.validate();
    std::vector<double> acc(idx.doc_count(), 0.0);
    std::vector<std::uint32_t> touched;
    std::vector<char> seen(idx.doc_count(), 0);
    const double avgdl = idx.avgdl();
    for (const auto& [term, w] : weights) {
        if (!(w > 0.0)) continue;
        const auto postings = idx.postings(term);
        if (postings.empty()) continue;
        const double idf = bm25_idf(idx.doc_count(), postings.size());
        for (const auto& post : postings) {
            const double dl = idx.doc(post.doc).length;
            acc[post.doc] += w * idf * bm25_tf_component(post.tf, dl, avgdl, p);
            if (!seen[post.doc]) {
                seen[post.doc] = 1;
                touched.push_back(post.doc);
            }
        }
    }
    std::vector<RunEntry> out;
    out.reserve(touched.size());
    for (auto d : touched) {
        const auto& doc = idx.doc(d);
        out.push_back({topic, doc.surrogate_id, doc.original_id, 0, acc[d], std::string(tag)});
    }
    finalize_ranking(out, p.max_results);
    return out;
}

/// Token multiplicities as weights, so a repeated query word counts twice.
inline TermWeights count_weights(const std::vector<std::string>& tokens) {
    TermWeights w;
    for (const auto& t : tokens) w[t] += 1.0;
    return w;
}

inline std::vector<RunEntry> bm25_search(const InvertedIndex& idx, const Tokenizer& tokenizer, std::string_view query,
                                         const Bm25Params& p = {}, int topic = 0, std::string_view tag = {}) {
    detail::check_tokenizer(idx, tokenizer);
    return score_weighted_terms(idx, count_weights(tokenizer(query)), p, topic, tag);
}

/// Each weighted term (possibly a phrase) is analysed with the index
/// tokenizer; every resulting token contributes weight * bm25(token, d).
inline TermWeights analyse_weighted_query(const WeightedQuery& wq, const Tokenizer& tokenizer) {
    TermWeights w;
    for (const auto& term : wq.terms)
        for (const auto& tok : tokenizer(term.text)) w[tok] += term.weight;
    return w;
}

inline std::vector<RunEntry> weighted_bm25_search(const InvertedIndex& idx, const Tokenizer& tokenizer,
                                                  const WeightedQuery& wq, const Bm25Params& p = {}, int topic = 0,
                                                  std::string_view tag = {}) {
    detail::check_tokenizer(idx, tokenizer);
    return score_weighted_terms(idx, analyse_weighted_query(wq, tokenizer), p, topic, tag);
}

// ---------------------------------------------------------------------------
// RM3

struct Rm3Expansion {
    /// Truncated, renormalised relevance model P(w|F).
    std::vector<std::pair<std::string, double>> feedback_terms;
    /// Interpolated final query weights (sum to 1).
    TermWeights query_weights;
    std::size_t feedback_docs = 0;
};

/// Estimates the RM3 query from the top feedback documents of `initial`:
///   P(w|F) = sum_d P(w|d) s(d), P(w|d) = tf/dl, s = softmax of BM25 scores,
/// keeps the fb_terms most probable non-stopwords, and interpolates with the
/// original query distribution (token counts / query length).
inline Rm3Expansion rm3_expand(const InvertedIndex& idx, const Tokenizer& tokenizer,
                               const std::vector<std::string>& query_tokens, const std::vector<RunEntry>& initial,
                               const Rm3Params& rp) {
    rp.validate();
    Rm3Expansion ex;
    const auto k = std::min(rp.fb_docs, initial.size());
    ex.feedback_docs = k;
    if (k == 0 || query_tokens.empty()) return ex;

    double max_score = initial.front().score;
    for (std::size_t i = 0; i < k; ++i) max_score = std::max(max_score, initial[i].score);
    std::vector<double> doc_weight(k);
    double z = 0.0;
    for (std::size_t i = 0; i < k; ++i) z += doc_weight[i] = std::exp(initial[i].score - max_score);
    for (auto& w : doc_weight) w /= z;

    std::map<std::uint32_t, double> model;  // term id -> P(w|F)
    for (std::size_t i = 0; i < k; ++i) {
        const auto ord = idx.ordinal_of(initial[i].surrogate_id);
        if (!ord) throw Error(ErrorKind::UnknownDocId, initial[i].surrogate_id);
        const auto& doc = idx.doc(*ord);
        if (doc.length == 0) continue;
        for (const auto& f : idx.forward(*ord))
            model[f.term] += doc_weight[i] * static_cast<double>(f.tf) / static_cast<double>(doc.length);
    }

    std::vector<std::pair<std::string, double>> ranked;
    for (const auto& [term, prob] : model) {
        const auto& text = idx.term(term);
        if (tokenizer.is_stopword(text)) continue;
        ranked.emplace_back(text, prob);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > rp.fb_terms) ranked.resize(rp.fb_terms);
    double mass = 0.0;
    for (const auto& [_, prob] : ranked) mass += prob;
    if (mass > 0.0)
        for (auto& [_, prob] : ranked) prob /= mass;
    ex.feedback_terms = ranked;

    const double alpha = rp.original_weight;
    const auto original = count_weights(query_tokens);
    const auto qlen = static_cast<double>(query_tokens.size());
    for (const auto& [term, count] : original) ex.query_weights[term] += alpha * count / qlen;
    for (const auto& [term, prob] : ranked) ex.query_weights[term] += (1.0 - alpha) * prob;
    std::erase_if(ex.query_weights, [](const auto& kv) { return !(kv.second > 0.0); });
    double total = 0.0;
    for (const auto& [_, w] : ex.query_weights) total += w;
    if (total > 0.0)
        for (auto& [_, w] : ex.query_weights) w /= total;
    return ex;
}

/// BM25 -> relevance model over the top fb_docs -> weighted BM25 with the
/// interpolated query. With original_weight == 1 the expanded query is the
/// original one and the initial ranking is returned as is; an empty initial
/// ranking is returned unchanged.
inline std::vector<RunEntry> rm3_search(const InvertedIndex& idx, const Tokenizer& tokenizer, std::string_view query,
                                        const Bm25Params& bp = {}, const Rm3Params& rp = {}, int topic = 0,
                                        std::string_view tag = {}) {
    detail::check_tokenizer(idx, tokenizer);
    rp.validate();
    const auto tokens = tokenizer(query);
    Bm25Params first = bp;
    first.max_results = std::max(bp.max_results, rp.fb_docs);
    auto initial = score_weighted_terms(idx, count_weights(tokens), first, topic, tag);
    if (initial.empty() || rp.original_weight == 1.0) {
        if (initial.size() > bp.max_results) initial.resize(bp.max_results);
        return initial;
    }
    const auto ex = rm3_expand(idx, tokenizer, tokens, initial, rp);
    return score_weighted_terms(idx, ex.query_weights, bp, topic, tag);
}

// ---------------------------------------------------------------------------
// Rerankers

/// original_id -> publish year (absent when unknown).
using PublishYears = std::unordered_map<std::string, std::optional<int>>;

inline PublishYears publish_years(const std::vector<DocumentRecord>& records) {
    PublishYears out;
    out.reserve(records.size());
    for (const auto& r : records) out.emplace(r.doc_id, r.publish_year);
    return out;
}

/// Within the first `top_n` entries, entries published in `boost_year` move
/// ahead of the rest; both groups keep their relative order and the tail is
/// untouched. Scores become n..1 so the reordered list stays well-formed.
inline std::vector<RunEntry> recency_rerank(std::vector<RunEntry> entries, const PublishYears& years,
                                            std::size_t top_n = 50, int boost_year = 2020) {
    const auto n = std::min(top_n, entries.size());
    std::vector<char> boosted(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = years.find(entries[i].original_id);
        if (it == years.end()) throw Error(ErrorKind::UnknownDocId, entries[i].original_id);
        boosted[i] = it->second == boost_year;
    }
    std::vector<RunEntry> head;
    head.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (boosted[i]) head.push_back(std::move(entries[i]));
    for (std::size_t i = 0; i < n; ++i)
        if (!boosted[i]) head.push_back(std::move(entries[i]));
    std::move(head.begin(), head.end(), entries.begin());
    assign_rank_scores(entries);
    return entries;
}

using Vector = std::vector<double>;

struct VectorStore {
    std::unordered_map<std::string, Vector> docs;
    std::map<int, Vector> topics;
};

/// JSONL {"id": ..., "vector": [...]}; ids of the form "topic:<n>" are topic
/// vectors, everything else is keyed by surrogate document id.
inline VectorStore load_vectors(std::istream& in) {
    VectorStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto obj = nlohmann::json::parse(line);
            auto id = obj.at("id").get<std::string>();
            auto vec = obj.at("vector").get<Vector>();
            if (id.starts_with("topic:"))
                store.topics[std::stoi(id.substr(6))] = std::move(vec);
            else
                store.docs[id] = std::move(vec);
        } catch (const std::exception& e) {
            throw Error(ErrorKind::MalformedLine, "vector line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return store;
}

inline VectorStore load_vectors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open vectors '" + path + "'");
    return load_vectors(in);
}

inline double cosine(const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw Error(ErrorKind::DimensionMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Stable reorder of the first `top_n` entries by descending cosine
/// similarity to the topic vector; the tail is untouched.
inline std::vector<RunEntry> similarity_rerank(std::vector<RunEntry> entries,
                                               const std::unordered_map<std::string, Vector>& doc_vectors,
                                               const Vector& topic_vector, std::size_t top_n = 50) {
    const auto n = std::min(top_n, entries.size());
    std::vector<std::pair<double, std::size_t>> sims;
    sims.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = doc_vectors.find(entries[i].surrogate_id);
        if (it == doc_vectors.end()) throw Error(ErrorKind::MissingVector, entries[i].surrogate_id);
        sims.emplace_back(cosine(it->second, topic_vector), i);
    }
    std::stable_sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<RunEntry> head;
    head.reserve(n);
    for (const auto& [_, i] : sims) head.push_back(std::move(entries[i]));
    std::move(head.begin(), head.end(), entries.begin());
    assign_rank_scores(entries);
    return entries;
}

/// Keeps the first occurrence of each original document id and reports the
/// original id. Equal-score neighbours are re-ordered by descending id so the
/// result keeps the ranking tie-break.
inline std::vector<RunEntry> collapse_paragraphs(const std::vector<RunEntry>& entries) {
    std::vector<RunEntry> out;
    std::unordered_set<std::string_view> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.original_id).second) continue;
        out.push_back(e);
        out.back().surrogate_id = e.original_id;
    }
    std::stable_sort(out.begin(), out.end(), ranks_before);
    assign_ranks(out);
    return out;
}

/// Applies a per-topic transformation to every topic of a run.
template <typename Fn>
Run map_topics(const Run& run, Fn&& fn) {
    Run out;
    out.tag = run.tag;
    for (const auto& [topic, list] : run.topics) out.topics[topic] = fn(topic, list);
    return out;
}

inline Run collapse_paragraphs(const Run& run) {
    return map_topics(run, [](int, const std::vector<RunEntry>& list) { return collapse_paragraphs(list); });
}

inline Run recency_rerank(const Run& run, const PublishYears& years, std::size_t top_n = 50, int boost_year = 2020) {
    return map_topics(run, [&](int, const std::vector<RunEntry>& list) {
        return recency_rerank(list, years, top_n, boost_year);
    });
}

inline Run similarity_rerank(const Run& run, const VectorStore& vectors, std::size_t top_n = 50) {
    return map_topics(run, [&](int topic, const std::vector<RunEntry>& list) {
        if (list.empty()) return list;
        auto it = vectors.topics.find(topic);
        if (it == vectors.topics.end()) throw Error(ErrorKind::MissingVector, "topic:" + std::to_string(topic));
        return similarity_rerank(list, vectors.docs, it->second, top_n);
    });
}

}  // namespace metasearch
