#pragma once

// Reciprocal Rank Fusion and the run-combination recipes built on it,
// including run selection with Soboroff-style pseudo-judgments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "eval.hpp"
#include "run.hpp"

namespace metasearch {

struct RrfParams {
    double k = 60.0;
    std::size_t max_results = kMaxResultsPerTopic;

    void validate() const {
        if (!(k > 0.0)) throw Error(ErrorKind::InvalidParameter, "rrf.k must be > 0");
        if (max_results < 1) throw Error(ErrorKind::InvalidParameter, "rrf.max_results must be >= 1");
    }
};

/// score(d) = sum over runs containing d of 1 / (k + rank). Documents are
/// keyed by original id; when a run lists a document more than once (an
/// uncollapsed paragraph run) only its best rank counts. Contributions are
/// summed in ascending-rank order, so the result does not depend on the
/// order of `runs`.
inline Run rrf_fuse(const std::vector<const Run*>& runs, const RrfParams& p = {}, std::string_view tag = "rrf") {
    p.validate();
    if (runs.empty()) throw Error(ErrorKind::EmptyRunList, "nothing to fuse");
    std::set<int> topics;
    for (const auto& [t, _] : runs.front()->topics) topics.insert(t);
    for (std::size_t i = 1; i < runs.size(); ++i) {
        std::set<int> other;
        for (const auto& [t, _] : runs[i]->topics) other.insert(t);
        if (other != topics)
            throw Error(ErrorKind::TopicSetMismatch, "run '" + runs[i]->tag + "' covers a different topic set than '" +
                                                         runs.front()->tag + "'");
    }

    Run fused;
    fused.tag = std::string(tag);
    for (int topic : topics) {
        std::unordered_map<std::string, std::vector<int>> ranks;
        for (const auto* run : runs) {
            std::unordered_map<std::string_view, int> best;
            for (const auto& e : run->topics.at(topic)) {
                auto [it, inserted] = best.emplace(e.original_id, e.rank);
                if (!inserted) it->second = std::min(it->second, e.rank);
            }
            for (const auto& [doc, r] : best) ranks[std::string(doc)].push_back(r);
        }
        std::vector<RunEntry> entries;
        entries.reserve(ranks.size());
        for (auto& [doc, rs] : ranks) {
            std::sort(rs.begin(), rs.end());
            // extended precision so that equal sums from different rank sets tie exactly
            long double score = 0.0L;
            for (int r : rs) score += 1.0L / (static_cast<long double>(p.k) + r);
            entries.push_back({topic, doc, doc, 0, static_cast<double>(score), fused.tag});
        }
        finalize_ranking(entries, p.max_results);
        fused.topics[topic] = std::move(entries);
    }
    return fused;
}

inline Run rrf_fuse(const std::vector<Run>& runs, const RrfParams& p = {}, std::string_view tag = "rrf") {
    std::vector<const Run*> ptrs;
    for (const auto& r : runs) ptrs.push_back(&r);
    return rrf_fuse(ptrs, p, tag);
}

/// The 16 variation x index runs fused in a single RRF step.
inline Run fusion_of_runs(const std::vector<Run>& runs, const RrfParams& p = {}, std::string_view tag = "fusionOfRuns") {
    if (runs.size() != 16)
        throw Error(ErrorKind::WrongRunCount, "fusionOfRuns needs 16 runs, got " + std::to_string(runs.size()));
    return rrf_fuse(runs, p, tag);
}

/// Two-stage RRF: each group (one per query variation) is fused, then the
/// four group fusions are fused.
inline Run fusion_of_fusions(const std::vector<std::vector<Run>>& groups, const RrfParams& p = {},
                             std::string_view tag = "fusionOfFusions") {
    if (groups.size() != 4)
        throw Error(ErrorKind::WrongGroupShape, "fusionOfFusions needs 4 groups, got " + std::to_string(groups.size()));
    std::vector<Run> stage1;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].size() != 4)
            throw Error(ErrorKind::WrongGroupShape, "group " + std::to_string(g + 1) + " has " +
                                                        std::to_string(groups[g].size()) + " runs, expected 4");
        stage1.push_back(rrf_fuse(groups[g], p, std::string(tag) + ".g" + std::to_string(g + 1)));
    }
    return rrf_fuse(stage1, p, tag);
}

/// RRF over third-party runs together with our own; duplicates are not
/// removed, so a run passed twice counts twice.
inline Run all_filtering(const std::vector<Run>& external_runs, const std::vector<Run>& own_runs, const RrfParams& p = {},
                         std::string_view tag = "allFiltering") {
    std::vector<const Run*> all;
    for (const auto& r : external_runs) all.push_back(&r);
    for (const auto& r : own_runs) all.push_back(&r);
    return rrf_fuse(all, p, tag);
}

// ---------------------------------------------------------------------------
// Soboroff selection

struct SoboroffParams {
    std::size_t pool_depth = 100;
    double sample_fraction = 0.1;
    std::size_t trials = 50;
    std::size_t select_middle = 9;
    std::uint64_t seed = 0;
};

struct SoboroffSelection {
    /// Indices into the candidate list, in mean-rank order.
    std::vector<std::size_t> selected;
    /// Mean rank (1 = best) of every candidate over all trials.
    std::vector<double> mean_rank;
    /// All candidate indices sorted by mean rank (stable on ties).
    std::vector<std::size_t> order;
};

namespace detail {

// Fractional ranks (1 = best); tied scores share the average of their positions.
inline std::vector<double> rank_scores(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    std::vector<double> ranks(scores.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

/// Per trial and topic, the pool is the union of every candidate's top
/// `pool_depth` documents; ceil(sample_fraction * |pool|) of them are drawn
/// uniformly as pseudo-relevant (the rest of the pool is pseudo-non-relevant).
/// Candidates are scored with `measure` against these pseudo-qrels and
/// ranked; after all trials they are ordered by mean rank and the
/// `select_middle` runs centred on the median position are returned.
inline SoboroffSelection soboroff_select(const std::vector<Run>& candidates, const SoboroffParams& p,
                                         const Measure& measure = {MeasureKind::AveragePrecision}) {
    if (!(p.sample_fraction > 0.0 && p.sample_fraction <= 1.0))
        throw Error(ErrorKind::InvalidFraction, "sample_fraction must be in (0, 1]");
    if (p.select_middle == 0 || candidates.size() < p.select_middle)
        throw Error(ErrorKind::TooFewRuns, std::to_string(candidates.size()) + " candidate runs, need at least " +
                                               std::to_string(std::max<std::size_t>(p.select_middle, 1)));
    if (p.trials == 0 || p.pool_depth == 0)
        throw Error(ErrorKind::InvalidParameter, "soboroff trials and pool_depth must be >= 1");

    std::set<int> topics;
    for (const auto& run : candidates)
        for (const auto& [t, _] : run.topics) topics.insert(t);

    // The pools do not depend on the trial.
    std::map<int, std::vector<std::string>> pools;
    for (int t : topics) {
        std::set<std::string> pool;
        for (const auto& run : candidates) {
            auto it = run.topics.find(t);
            if (it == run.topics.end()) continue;
            for (std::size_t i = 0; i < std::min(p.pool_depth, it->second.size()); ++i)
                pool.insert(it->second[i].surrogate_id);
        }
        pools[t].assign(pool.begin(), pool.end());
    }

    const auto n = candidates.size();
    std::vector<double> rank_sum(n, 0.0);
    for (std::size_t trial = 0; trial < p.trials; ++trial) {
        std::seed_seq seq{static_cast<std::uint32_t>(p.seed), static_cast<std::uint32_t>(p.seed >> 32),
                          static_cast<std::uint32_t>(trial)};
        std::mt19937_64 rng(seq);
        Qrels pseudo;
        for (const auto& [t, pool] : pools) {
            if (pool.empty()) continue;
            auto docs = pool;
            const auto take = std::min(
                docs.size(),
                static_cast<std::size_t>(std::ceil(p.sample_fraction * static_cast<double>(docs.size()) - 1e-9)));
            for (std::size_t i = 0; i < take; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, docs.size() - 1);
                std::swap(docs[i], docs[pick(rng)]);
            }
            auto& tq = pseudo.judgments[t];
            for (std::size_t i = 0; i < docs.size(); ++i) tq[docs[i]] = i < take ? 1 : 0;
        }
        std::vector<double> scores(n);
        for (std::size_t r = 0; r < n; ++r) scores[r] = mean_measure(candidates[r], pseudo, measure);
        const auto ranks = detail::rank_scores(scores);
        for (std::size_t r = 0; r < n; ++r) rank_sum[r] += ranks[r];
    }

    SoboroffSelection sel;
    sel.mean_rank.resize(n);
    for (std::size_t r = 0; r < n; ++r) sel.mean_rank[r] = rank_sum[r] / static_cast<double>(p.trials);
    sel.order.resize(n);
    std::iota(sel.order.begin(), sel.order.end(), std::size_t{0});
    std::stable_sort(sel.order.begin(), sel.order.end(),
                     [&](auto a, auto b) { return sel.mean_rank[a] < sel.mean_rank[b]; });
    const auto start = (n - p.select_middle) / 2;
    sel.selected.assign(sel.order.begin() + static_cast<std::ptrdiff_t>(start),
                        sel.order.begin() + static_cast<std::ptrdiff_t>(start + p.select_middle));
    return sel;
}

/// RRF over the Soboroff-selected middle candidates plus our own runs.
inline Run soboroff_filtering(const std::vector<Run>& candidates, const std::vector<Run>& own_runs,
                              const SoboroffParams& sp, const Measure& measure = {MeasureKind::AveragePrecision},
                              const RrfParams& p = {}, std::string_view tag = "soboroffFiltering") {
    const auto sel = soboroff_select(candidates, sp, measure);
    std::vector<const Run*> all;
    for (auto i : sel.selected) all.push_back(&candidates[i]);
    for (const auto& r : own_runs) all.push_back(&r);
    return rrf_fuse(all, p, tag);
}

}  // namespace metasearch
