#pragma once

// Ranked result lists in TREC submission form ("topic Q0 docid rank score tag").

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "error.hpp"

namespace metasearch {

/// Maximum number of results per topic accepted by TREC-style submissions.
inline constexpr std::size_t kMaxResultsPerTopic = 1000;

struct RunEntry {
    int topic = 0;
    std::string surrogate_id;
    std::string original_id;
    int rank = 0;
    double score = 0.0;
    std::string tag;

    friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

/// Entries per topic, each list ordered by rank (1..n).
struct Run {
    std::string tag;
    std::map<int, std::vector<RunEntry>> topics;

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& [_, list] : topics) n += list.size();
        return n;
    }
    friend bool operator==(const Run&, const Run&) = default;
};

/// Ranking order: score descending, ties by descending document id. This is
/// the order trec_eval imposes when it evaluates a run.
inline bool ranks_before(const RunEntry& a, const RunEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.surrogate_id > b.surrogate_id;
}

inline void assign_ranks(std::vector<RunEntry>& entries) {
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i].rank = static_cast<int>(i + 1);
}

/// Sorts by `ranks_before`, truncates to `cap` and numbers the ranks.
inline void finalize_ranking(std::vector<RunEntry>& entries, std::size_t cap = kMaxResultsPerTopic) {
    if (entries.size() > cap) {
        std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(cap), entries.end(),
                          ranks_before);
        entries.resize(cap);
    } else {
        std::sort(entries.begin(), entries.end(), ranks_before);
    }
    assign_ranks(entries);
}

/// Replaces scores with n, n-1, ..., 1 so that a reordered list keeps
/// strictly decreasing scores.
inline void assign_rank_scores(std::vector<RunEntry>& entries) {
    const auto n = entries.size();
    for (std::size_t i = 0; i < n; ++i) {
        entries[i].rank = static_cast<int>(i + 1);
        entries[i].score = static_cast<double>(n - i);
    }
}

/// Rounds scores to the 6 decimals written to disk and restores the ranking
/// order on the rounded values, so a written run re-evaluates identically.
inline void quantize_scores(Run& run) {
    for (auto& [_, list] : run.topics) {
        for (auto& e : list) e.score = std::round(e.score * 1e6) / 1e6;
        std::stable_sort(list.begin(), list.end(), ranks_before);
        assign_ranks(list);
    }
}

inline std::string format_score(double score) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", score);
    std::string s(buf);
    if (s == "-0.000000") s.erase(0, 1);
    return s;
}

inline void write_run(std::ostream& out, const Run& run) {
    for (const auto& [topic, list] : run.topics) {
        std::vector<const RunEntry*> sorted;
        sorted.reserve(list.size());
        for (const auto& e : list) sorted.push_back(&e);
        std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->rank < b->rank; });
        for (const auto* e : sorted)
            out << topic << " Q0 " << e->surrogate_id << ' ' << e->rank << ' ' << format_score(e->score) << ' '
                << (e->tag.empty() ? run.tag : e->tag) << '\n';
    }
}

/// Atomic: writes `<path>.tmp` then renames over `path`.
inline void write_run(const std::string& path, const Run& run) {
    const auto tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::IoFailure, "cannot write '" + tmp + "'");
        write_run(out, run);
        out.close();
        if (!out) throw Error(ErrorKind::IoFailure, "cannot write '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::IoFailure, "cannot rename to '" + path + "': " + ec.message());
}

struct ReadRunOptions {
    /// Ignore the rank column and re-rank each topic by score (ties by
    /// descending id), as trec_eval does. Needed for third-party runs whose
    /// ranks start at 0 or contain gaps.
    bool rerank_by_score = false;
};

inline Run read_run(std::istream& in, ReadRunOptions opts = {}) {
    Run run;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::istringstream ls(line);
        RunEntry e;
        std::string q0;
        std::string extra;
        if (!(ls >> e.topic >> q0 >> e.surrogate_id >> e.rank >> e.score >> e.tag) || (ls >> extra))
            throw Error(ErrorKind::MalformedLine, "run line " + std::to_string(lineno) + ": '" + line + "'");
        e.original_id = e.surrogate_id;
        if (run.tag.empty()) run.tag = e.tag;
        run.topics[e.topic].push_back(std::move(e));
    }
    for (auto& [topic, list] : run.topics) {
        if (opts.rerank_by_score) {
            std::stable_sort(list.begin(), list.end(), ranks_before);
            assign_ranks(list);
            continue;
        }
        std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
        for (std::size_t i = 0; i < list.size(); ++i)
            if (list[i].rank != static_cast<int>(i + 1))
                throw Error(ErrorKind::RankGap, "topic " + std::to_string(topic) + ": expected rank " +
                                                    std::to_string(i + 1) + ", found " + std::to_string(list[i].rank));
    }
    return run;
}

inline Run read_run(const std::string& path, ReadRunOptions opts = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open run '" + path + "'");
    return read_run(in, opts);
}

struct RunValidation {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

/// Checks the ranked-list invariants (contiguous ranks, non-increasing
/// scores, descending-id tie-break, unique documents) and warns when a topic
/// exceeds the 1000-result cap.
inline RunValidation validate_run(const Run& run, std::size_t cap = kMaxResultsPerTopic) {
    RunValidation v;
    for (const auto& [topic, list] : run.topics) {
        const auto where = "topic " + std::to_string(topic);
        if (list.size() > cap)
            v.warnings.push_back("CapExceeded: " + where + " has " + std::to_string(list.size()) +
                                 " entries (limit " + std::to_string(cap) + ")");
        std::unordered_set<std::string_view> seen;
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto& e = list[i];
            if (e.topic != topic) v.errors.push_back(where + ": entry filed under wrong topic");
            if (e.rank != static_cast<int>(i + 1))
                v.errors.push_back(where + ": rank " + std::to_string(e.rank) + " at position " +
                                   std::to_string(i + 1));
            if (!seen.insert(e.surrogate_id).second) v.errors.push_back(where + ": duplicate document " + e.surrogate_id);
            if (i == 0) continue;
            const auto& prev = list[i - 1];
            if (prev.score < e.score)
                v.errors.push_back(where + ": score increases at rank " + std::to_string(e.rank));
            else if (prev.score == e.score && prev.surrogate_id < e.surrogate_id)
                v.errors.push_back(where + ": tie at rank " + std::to_string(e.rank) +
                                   " not broken by descending document id");
        }
    }
    return v;
}

}  // namespace metasearch
