#pragma once

// Shared test helpers: fixture paths, scratch directories, random instance
// generators and brute-force reference implementations. The references are
// written from the formulas, not from the library code.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <metasearch/metasearch.hpp>

namespace testing_support {

namespace fs = std::filesystem;
namespace ms = metasearch;

inline fs::path fixture(const std::string& rel) { return fs::path(METASEARCH_FIXTURES) / rel; }

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

class ScratchDir {
public:
    explicit ScratchDir(const std::string& name) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("metasearch-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

// ---------------------------------------------------------------------------
// Generators

inline std::string doc_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "d%03d", i);
    return buf;
}

/// Random run over ids d000..d(pool-1) with ranks 1..n (no score ties).
inline std::vector<ms::RunEntry> random_ranking(std::mt19937_64& rng, int topic, int pool, int n,
                                                const std::string& tag = "r") {
    std::vector<int> ids(pool);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<ms::RunEntry> out;
    for (int i = 0; i < std::min(n, pool); ++i)
        out.push_back({topic, doc_name(ids[i]), doc_name(ids[i]), i + 1, static_cast<double>(n - i), tag});
    return out;
}

inline ms::TopicQrels random_qrels(std::mt19937_64& rng, int pool, int judged) {
    std::vector<int> ids(pool);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::uniform_int_distribution<int> grade(0, 2);
    ms::TopicQrels q;
    for (int i = 0; i < std::min(judged, pool); ++i) q[doc_name(ids[i])] = grade(rng);
    return q;
}

// ---------------------------------------------------------------------------
// Metric references, computed on plain (doc id list, grade map) inputs.

using Ranking = std::vector<std::string>;

inline int oracle_grade(const ms::TopicQrels& q, const std::string& d) {
    return q.contains(d) ? q.at(d) : -1;
}

inline double oracle_precision(const Ranking& r, const ms::TopicQrels& q, std::size_t k) {
    double hits = 0;
    for (std::size_t i = 0; i < k; ++i)
        if (i < r.size() && oracle_grade(q, r[i]) > 0) hits += 1;
    return hits / static_cast<double>(k);
}

inline double oracle_ndcg(const Ranking& r, const ms::TopicQrels& q, std::size_t k) {
    auto dcg = [k](const std::vector<int>& gains) {
        double s = 0;
        for (std::size_t i = 0; i < gains.size() && i < k; ++i)
            if (gains[i] > 0) s += gains[i] / (std::log(static_cast<double>(i + 2)) / std::log(2.0));
        return s;
    };
    std::vector<int> got;
    for (const auto& d : r) got.push_back(std::max(0, oracle_grade(q, d)));
    std::vector<int> ideal;
    for (const auto& [d, g] : q) ideal.push_back(g);
    std::sort(ideal.rbegin(), ideal.rend());
    const double i = dcg(ideal);
    return i == 0 ? 0.0 : dcg(got) / i;
}

inline double oracle_ap(const Ranking& r, const ms::TopicQrels& q) {
    std::size_t R = 0;
    for (const auto& [d, g] : q) R += g > 0;
    if (R == 0) return 0;
    double s = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (oracle_grade(q, r[i]) <= 0) continue;
        std::size_t rel_upto = 0;
        for (std::size_t j = 0; j <= i; ++j) rel_upto += oracle_grade(q, r[j]) > 0;
        s += static_cast<double>(rel_upto) / static_cast<double>(i + 1);
    }
    return s / static_cast<double>(R);
}

inline double oracle_bpref(const Ranking& r, const ms::TopicQrels& q) {
    std::size_t R = 0, N = 0;
    for (const auto& [d, g] : q) (g > 0 ? R : N) += 1;
    if (R == 0) return 0;
    double s = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (oracle_grade(q, r[i]) <= 0) continue;
        // judged non-relevant documents ranked above this relevant one
        std::size_t n_above = 0;
        for (std::size_t j = 0; j < i; ++j) n_above += oracle_grade(q, r[j]) == 0;
        if (n_above == 0)
            s += 1;
        else
            s += 1 - static_cast<double>(std::min(n_above, R)) / static_cast<double>(std::min(R, N));
    }
    return s / static_cast<double>(R);
}

inline double oracle_rbp(const Ranking& r, const ms::TopicQrels& q, double p) {
    double s = 0;
    for (std::size_t i = 0; i < r.size(); ++i)
        if (oracle_grade(q, r[i]) > 0) s += std::pow(p, static_cast<double>(i));
    return (1 - p) * s;
}

inline Ranking ids_of(const std::vector<ms::RunEntry>& entries) {
    Ranking r;
    for (const auto& e : entries) r.push_back(e.surrogate_id);
    return r;
}

// ---------------------------------------------------------------------------
// RRF reference: per document, sum 1/(k + best rank) over the runs that list
// it; order by fused score, ties by descending id.

using FusedList = std::vector<std::pair<std::string, double>>;

inline FusedList oracle_rrf(const std::vector<std::vector<ms::RunEntry>>& runs, double k, std::size_t cap = 1000) {
    std::set<std::string> docs;
    for (const auto& run : runs)
        for (const auto& e : run) docs.insert(e.original_id);
    std::vector<std::pair<std::string, long double>> scored;
    for (const auto& d : docs) {
        long double s = 0;
        for (const auto& run : runs) {
            int best = 0;
            for (const auto& e : run)
                if (e.original_id == d && (best == 0 || e.rank < best)) best = e.rank;
            if (best) s += 1.0L / (static_cast<long double>(k) + best);
        }
        scored.emplace_back(d, s);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (std::fabs(a.second - b.second) > 1e-13L) return a.second > b.second;
        return a.first > b.first;
    });
    FusedList out;
    for (const auto& [d, s] : scored) out.emplace_back(d, static_cast<double>(s));
    if (out.size() > cap) out.resize(cap);
    return out;
}

// ---------------------------------------------------------------------------
// BM25 reference over raw token lists (no index structures).

struct NaiveDoc {
    std::string id;
    std::vector<std::string> tokens;
};

inline std::vector<std::pair<std::string, double>> oracle_bm25(const std::vector<NaiveDoc>& docs,
                                                               const std::map<std::string, double>& weights,
                                                               double k1 = 1.2, double b = 0.75) {
    double total = 0;
    for (const auto& d : docs) total += static_cast<double>(d.tokens.size());
    const double N = static_cast<double>(docs.size());
    const double avgdl = total / N;
    std::vector<std::pair<std::string, double>> out;
    for (const auto& d : docs) {
        double score = 0;
        bool matched = false;
        for (const auto& [term, w] : weights) {
            double df = 0;
            for (const auto& o : docs) df += std::count(o.tokens.begin(), o.tokens.end(), term) > 0;
            const double tf = static_cast<double>(std::count(d.tokens.begin(), d.tokens.end(), term));
            if (tf == 0) continue;
            matched = true;
            const double idf = std::log(1 + (N - df + 0.5) / (df + 0.5));
            const double norm = avgdl > 0 ? (1 - b + b * static_cast<double>(d.tokens.size()) / avgdl) : 1.0;
            score += w * idf * tf * (k1 + 1) / (tf + k1 * norm);
        }
        if (matched) out.emplace_back(d.id, score);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first > b.first;
    });
    return out;
}

/// Relevance model from scratch: P(w|F) = sum_d softmax(score_d) * tf(w,d)/|d|.
inline std::map<std::string, double> oracle_rm1(const std::vector<NaiveDoc>& feedback, const std::vector<double>& scores) {
    double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> w;
    double z = 0;
    for (double s : scores) {
        w.push_back(std::exp(s - mx));
        z += w.back();
    }
    std::map<std::string, double> model;
    for (std::size_t i = 0; i < feedback.size(); ++i) {
        const auto& toks = feedback[i].tokens;
        if (toks.empty()) continue;
        for (const auto& t : std::set<std::string>(toks.begin(), toks.end()))
            model[t] += (w[i] / z) * static_cast<double>(std::count(toks.begin(), toks.end(), t)) /
                        static_cast<double>(toks.size());
    }
    return model;
}

}  // namespace testing_support
