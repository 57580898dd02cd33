#pragma once

// Relevance judgments, trec_eval-compatible effectiveness measures, and the
// qrels analyses (per-source relevance distribution, assessor agreement).

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "run.hpp"
#include "tokenizer.hpp"

namespace metasearch {

/// Graded judgments: 0 not relevant, 1 partially relevant, 2 relevant.
using TopicQrels = std::map<std::string, int>;

struct Qrels {
    std::map<int, TopicQrels> judgments;

    std::optional<int> grade(int topic, std::string_view doc) const {
        auto t = judgments.find(topic);
        if (t == judgments.end()) return std::nullopt;
        auto d = t->second.find(std::string(doc));
        if (d == t->second.end()) return std::nullopt;
        return d->second;
    }
    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& [_, tq] : judgments) n += tq.size();
        return n;
    }
    friend bool operator==(const Qrels&, const Qrels&) = default;
};

/// Lines "topic iteration docid grade".
inline Qrels read_qrels(std::istream& in) {
    Qrels q;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::istringstream ls(line);
        int topic = 0;
        std::string iter;
        std::string doc;
        std::string grade_text;
        std::string extra;
        if (!(ls >> topic >> iter >> doc >> grade_text) || (ls >> extra))
            throw Error(ErrorKind::MalformedLine, "qrels line " + std::to_string(lineno) + ": '" + line + "'");
        int grade = -1;
        if (grade_text == "0") grade = 0;
        else if (grade_text == "1") grade = 1;
        else if (grade_text == "2") grade = 2;
        else throw Error(ErrorKind::InvalidGrade, "qrels line " + std::to_string(lineno) + ": grade '" + grade_text + "'");
        if (!q.judgments[topic].emplace(doc, grade).second)
            throw Error(ErrorKind::DuplicateJudgment, "topic " + std::to_string(topic) + ", document " + doc);
    }
    return q;
}

inline Qrels read_qrels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open qrels '" + path + "'");
    return read_qrels(in);
}

inline void write_qrels(std::ostream& out, const Qrels& q) {
    for (const auto& [topic, tq] : q.judgments)
        for (const auto& [doc, grade] : tq) out << topic << " 0 " << doc << ' ' << grade << '\n';
}

// ---------------------------------------------------------------------------
// Measures over one topic. `ranking` is in rank order; binary measures treat
// grade >= 1 as relevant and unjudged documents as non-relevant.

namespace detail {

inline int grade_of(const TopicQrels& q, const RunEntry& e) {
    auto it = q.find(e.surrogate_id);
    return it == q.end() ? -1 : it->second;  // -1: unjudged
}

inline std::size_t count_relevant(const TopicQrels& q) {
    return static_cast<std::size_t>(std::count_if(q.begin(), q.end(), [](const auto& kv) { return kv.second >= 1; }));
}

}  // namespace detail

inline double precision_at_k(std::span<const RunEntry> ranking, const TopicQrels& q, std::size_t k) {
    if (k == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) hits += detail::grade_of(q, ranking[i]) >= 1;
    return static_cast<double>(hits) / static_cast<double>(k);
}

/// Linear gain (the grade), discount log2(rank + 1); 0 when no document has
/// positive grade.
inline double ndcg_at_k(std::span<const RunEntry> ranking, const TopicQrels& q, std::size_t k) {
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        const int g = detail::grade_of(q, ranking[i]);
        if (g > 0) dcg += g / std::log2(static_cast<double>(i) + 2.0);
    }
    std::vector<int> ideal;
    for (const auto& [_, g] : q)
        if (g > 0) ideal.push_back(g);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

/// trec_eval's bpref: unjudged documents are skipped and each retrieved
/// relevant document is penalised by the judged non-relevant documents above
/// it, capped at R.
inline double bpref(std::span<const RunEntry> ranking, const TopicQrels& q) {
    const auto rel = detail::count_relevant(q);
    const auto nonrel = q.size() - rel;
    if (rel == 0) return 0.0;
    const double denom = static_cast<double>(std::min(rel, nonrel));
    std::size_t nonrel_above = 0;
    double sum = 0.0;
    for (const auto& e : ranking) {
        const int g = detail::grade_of(q, e);
        if (g < 0) continue;
        if (g >= 1)
            sum += nonrel_above > 0 ? 1.0 - static_cast<double>(std::min(nonrel_above, rel)) / denom : 1.0;
        else
            ++nonrel_above;
    }
    return sum / static_cast<double>(rel);
}

/// Rank-biased precision, (1 - p) * sum_i p^(i-1) * rel_i over the full ranking.
inline double rbp(std::span<const RunEntry> ranking, const TopicQrels& q, double p = 0.5) {
    double sum = 0.0;
    double discount = 1.0;
    for (const auto& e : ranking) {
        if (detail::grade_of(q, e) >= 1) sum += discount;
        discount *= p;
    }
    return (1.0 - p) * sum;
}

inline double average_precision(std::span<const RunEntry> ranking, const TopicQrels& q) {
    const auto rel = detail::count_relevant(q);
    if (rel == 0) return 0.0;
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (detail::grade_of(q, ranking[i]) >= 1) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(rel);
}

// ---------------------------------------------------------------------------
// Named measures

enum class MeasureKind { Precision, Ndcg, Bpref, Rbp, AveragePrecision };

struct Measure {
    MeasureKind kind = MeasureKind::AveragePrecision;
    std::size_t cutoff = 0;  // P and NDCG only
    double persistence = 0.5;  // RBP only

    /// trec_eval-style name: P_10, ndcg_cut_10, bpref, rbp_0.5, map.
    std::string name() const {
        switch (kind) {
            case MeasureKind::Precision: return "P_" + std::to_string(cutoff);
            case MeasureKind::Ndcg: return "ndcg_cut_" + std::to_string(cutoff);
            case MeasureKind::Bpref: return "bpref";
            case MeasureKind::Rbp: {
                std::ostringstream os;
                os << "rbp_" << persistence;
                return os.str();
            }
            case MeasureKind::AveragePrecision: return "map";
        }
        return "?";
    }

    double operator()(std::span<const RunEntry> ranking, const TopicQrels& q) const {
        switch (kind) {
            case MeasureKind::Precision: return precision_at_k(ranking, q, cutoff);
            case MeasureKind::Ndcg: return ndcg_at_k(ranking, q, cutoff);
            case MeasureKind::Bpref: return bpref(ranking, q);
            case MeasureKind::Rbp: return rbp(ranking, q, persistence);
            case MeasureKind::AveragePrecision: return average_precision(ranking, q);
        }
        return 0.0;
    }
};

/// Accepts "map", "bpref", "rbp", "rbp_<p>", "P_<k>", "P@<k>", "ndcg_cut_<k>", "ndcg@<k>".
inline Measure parse_measure(std::string_view name) {
    auto lower = to_lower(name);
    auto number_after = [&](std::string_view prefix) -> std::optional<std::size_t> {
        if (!std::string_view(lower).starts_with(prefix)) return std::nullopt;
        auto digits = std::string_view(lower).substr(prefix.size());
        std::size_t k = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
        if (ec != std::errc() || p != digits.data() + digits.size() || k == 0) return std::nullopt;
        return k;
    };
    if (lower == "map" || lower == "ap") return {MeasureKind::AveragePrecision};
    if (lower == "bpref") return {MeasureKind::Bpref};
    if (lower == "rbp") return {MeasureKind::Rbp, 0, 0.5};
    if (lower.starts_with("rbp_")) {
        try {
            std::size_t used = 0;
            const double p = std::stod(lower.substr(4), &used);
            if (used == lower.size() - 4 && p > 0.0 && p < 1.0) return {MeasureKind::Rbp, 0, p};
        } catch (const std::exception&) {
        }
    }
    for (auto prefix : {"p_", "p@"})
        if (auto k = number_after(prefix)) return {MeasureKind::Precision, *k};
    for (auto prefix : {"ndcg_cut_", "ndcg@"})
        if (auto k = number_after(prefix)) return {MeasureKind::Ndcg, *k};
    throw Error(ErrorKind::InvalidParameter, "unknown measure '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Full report

struct EvalOptions {
    std::vector<std::size_t> cutoffs{5, 10, 15, 20, 30};
    double rbp_persistence = 0.5;
    /// Judged topics missing from the run score 0 and count in the means
    /// (trec_eval -c).
    bool complete_topics = true;

    std::vector<Measure> measures() const {
        std::vector<Measure> out;
        for (auto k : cutoffs) out.push_back({MeasureKind::Precision, k});
        for (auto k : cutoffs) out.push_back({MeasureKind::Ndcg, k});
        out.push_back({MeasureKind::Bpref});
        out.push_back({MeasureKind::Rbp, 0, rbp_persistence});
        out.push_back({MeasureKind::AveragePrecision});
        return out;
    }
};

struct TopicResult {
    int topic = 0;
    std::vector<double> values;  // parallel to MetricReport::measures
    std::size_t num_ret = 0;
    std::size_t num_rel = 0;
    std::size_t num_rel_ret = 0;
};

struct MetricReport {
    std::vector<Measure> measures;
    std::vector<TopicResult> topics;
    std::vector<double> means;
    std::size_t num_ret = 0;
    std::size_t num_rel = 0;
    std::size_t num_rel_ret = 0;
    /// Run topics with no judgments; excluded from the means.
    std::vector<int> unjudged_topics;

    std::optional<double> mean(std::string_view measure_name) const {
        for (std::size_t i = 0; i < measures.size(); ++i)
            if (measures[i].name() == measure_name) return means[i];
        return std::nullopt;
    }
    const TopicResult* topic(int number) const {
        for (const auto& t : topics)
            if (t.topic == number) return &t;
        return nullptr;
    }
};

/// Means are over judged topics holding at least one relevant document.
inline MetricReport evaluate_all(const Run& run, const Qrels& qrels, const EvalOptions& opts = {}) {
    MetricReport report;
    report.measures = opts.measures();
    report.means.assign(report.measures.size(), 0.0);
    static const std::vector<RunEntry> kEmpty;

    for (const auto& [topic, _] : run.topics)
        if (!qrels.judgments.contains(topic)) report.unjudged_topics.push_back(topic);

    for (const auto& [topic, tq] : qrels.judgments) {
        const auto rel = detail::count_relevant(tq);
        if (rel == 0) continue;
        auto it = run.topics.find(topic);
        if (it == run.topics.end() && !opts.complete_topics) continue;
        const auto& ranking = it == run.topics.end() ? kEmpty : it->second;
        TopicResult tr;
        tr.topic = topic;
        tr.num_ret = ranking.size();
        tr.num_rel = rel;
        for (const auto& e : ranking) tr.num_rel_ret += detail::grade_of(tq, e) >= 1;
        for (const auto& m : report.measures) tr.values.push_back(m(ranking, tq));
        report.num_ret += tr.num_ret;
        report.num_rel += tr.num_rel;
        report.num_rel_ret += tr.num_rel_ret;
        report.topics.push_back(std::move(tr));
    }
    if (!report.topics.empty()) {
        for (const auto& tr : report.topics)
            for (std::size_t i = 0; i < tr.values.size(); ++i) report.means[i] += tr.values[i];
        for (auto& m : report.means) m /= static_cast<double>(report.topics.size());
    }
    return report;
}

/// Mean of a single measure over judged topics (the same topic rules as
/// evaluate_all).
inline double mean_measure(const Run& run, const Qrels& qrels, const Measure& measure, bool complete_topics = true) {
    static const std::vector<RunEntry> kEmpty;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [topic, tq] : qrels.judgments) {
        if (detail::count_relevant(tq) == 0) continue;
        auto it = run.topics.find(topic);
        if (it == run.topics.end() && !complete_topics) continue;
        sum += measure(it == run.topics.end() ? kEmpty : it->second, tq);
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

namespace detail {

inline std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace detail

/// Aligned text table: one row per topic plus "all".
inline void write_report_table(std::ostream& out, const MetricReport& r, std::string_view run_tag = {}) {
    std::vector<std::string> header{"topic"};
    for (const auto& m : r.measures) header.push_back(m.name());
    header.insert(header.end(), {"num_ret", "num_rel", "num_rel_ret"});
    std::vector<std::vector<std::string>> rows;
    for (const auto& t : r.topics) {
        std::vector<std::string> row{std::to_string(t.topic)};
        for (double v : t.values) row.push_back(detail::fixed4(v));
        row.insert(row.end(), {std::to_string(t.num_ret), std::to_string(t.num_rel), std::to_string(t.num_rel_ret)});
        rows.push_back(std::move(row));
    }
    {
        std::vector<std::string> row{"all"};
        for (double v : r.means) row.push_back(detail::fixed4(v));
        row.insert(row.end(), {std::to_string(r.num_ret), std::to_string(r.num_rel), std::to_string(r.num_rel_ret)});
        rows.push_back(std::move(row));
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
    }
    if (!run_tag.empty()) out << "run: " << run_tag << '\n';
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << "  ";
            out << (c == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[c])) << row[c];
        }
        out << std::right << '\n';
    };
    emit(header);
    for (const auto& row : rows) emit(row);
    if (!r.unjudged_topics.empty()) {
        out << "unjudged topics (excluded):";
        for (int t : r.unjudged_topics) out << ' ' << t;
        out << '\n';
    }
}

inline void write_report_csv(std::ostream& out, const MetricReport& r) {
    out << "topic";
    for (const auto& m : r.measures) out << ',' << m.name();
    out << ",num_ret,num_rel,num_rel_ret\n";
    for (const auto& t : r.topics) {
        out << t.topic;
        for (double v : t.values) out << ',' << detail::fixed4(v);
        out << ',' << t.num_ret << ',' << t.num_rel << ',' << t.num_rel_ret << '\n';
    }
    out << "all";
    for (double v : r.means) out << ',' << detail::fixed4(v);
    out << ',' << r.num_ret << ',' << r.num_rel << ',' << r.num_rel_ret << '\n';
}

// ---------------------------------------------------------------------------
// Assessor agreement

struct Agreement {
    std::size_t common = 0;
    std::size_t agreed = 0;
    std::size_t disagreed = 0;
    std::size_t only_a = 0;
    std::size_t only_b = 0;
    double pct_agree() const { return common ? static_cast<double>(agreed) / static_cast<double>(common) : 0.0; }
    double pct_disagree() const { return common ? static_cast<double>(disagreed) / static_cast<double>(common) : 0.0; }
};

/// Compares judgments on the (topic, doc) pairs judged in both sets; with
/// `binary`, grades are collapsed to relevant (>= 1) / not relevant first.
inline Agreement agreement(const Qrels& a, const Qrels& b, bool binary = false) {
    Agreement r;
    for (const auto& [topic, ta] : a.judgments) {
        auto tb = b.judgments.find(topic);
        for (const auto& [doc, ga] : ta) {
            if (tb == b.judgments.end()) {
                ++r.only_a;
                continue;
            }
            auto it = tb->second.find(doc);
            if (it == tb->second.end()) {
                ++r.only_a;
                continue;
            }
            ++r.common;
            const int x = binary ? (ga >= 1) : ga;
            const int y = binary ? (it->second >= 1) : it->second;
            if (x == y) ++r.agreed;
            else ++r.disagreed;
        }
    }
    r.only_b = b.size() - r.common;
    if (r.common == 0) throw Error(ErrorKind::NoOverlap, "the two qrels share no judged (topic, document) pair");
    return r;
}

// ---------------------------------------------------------------------------
// Relevance by source

struct SourceRow {
    std::string source;
    std::size_t partially_relevant = 0;  // unique docs holding grade 1 somewhere
    std::size_t relevant = 0;            // unique docs holding grade 2 somewhere
    std::size_t documents = 0;           // corpus documents from this source
};

struct SourceStats {
    std::vector<SourceRow> rows;  // case-insensitive source order
    SourceRow total{"Total"};
};

/// Percentage with at most two decimals, trailing zeros dropped
/// ("38.1", "4.66", "100"); 0 when the total is 0.
inline std::string format_percent(std::size_t count, std::size_t total) {
    if (total == 0) return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * static_cast<double>(count) / static_cast<double>(total));
    std::string s(buf);
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s;
}

/// Judged documents that cannot be resolved to a record are counted under
/// "unknown".
inline SourceStats source_stats(const Qrels& qrels, const std::vector<DocumentRecord>& records) {
    std::unordered_map<std::string_view, std::string_view> source_of;
    std::map<std::string, SourceRow> rows;
    for (const auto& r : records) {
        source_of.emplace(r.doc_id, r.source);
        auto& row = rows[r.source];
        row.source = r.source;
        ++row.documents;
    }
    std::set<std::string> grade1;
    std::set<std::string> grade2;
    for (const auto& [_, tq] : qrels.judgments)
        for (const auto& [doc, g] : tq) {
            if (g == 1) grade1.insert(doc);
            if (g == 2) grade2.insert(doc);
        }
    auto row_for = [&](const std::string& doc) -> SourceRow& {
        auto it = source_of.find(doc);
        std::string src = it == source_of.end() ? "unknown" : std::string(it->second);
        auto& row = rows[src];
        row.source = src;
        return row;
    };
    for (const auto& d : grade1) ++row_for(d).partially_relevant;
    for (const auto& d : grade2) ++row_for(d).relevant;

    SourceStats stats;
    for (auto& [_, row] : rows) {
        stats.total.partially_relevant += row.partially_relevant;
        stats.total.relevant += row.relevant;
        stats.total.documents += row.documents;
        stats.rows.push_back(std::move(row));
    }
    std::stable_sort(stats.rows.begin(), stats.rows.end(), [](const SourceRow& a, const SourceRow& b) {
        return to_lower(a.source) < to_lower(b.source);
    });
    return stats;
}

inline void write_source_stats(std::ostream& out, const SourceStats& s) {
    std::vector<std::vector<std::string>> rows;
    auto make = [&](const SourceRow& r) {
        return std::vector<std::string>{
            r.source.empty() ? "(none)" : r.source,
            std::to_string(r.partially_relevant) + " (" + format_percent(r.partially_relevant, s.total.partially_relevant) + "%)",
            std::to_string(r.relevant) + " (" + format_percent(r.relevant, s.total.relevant) + "%)",
            std::to_string(r.documents)};
    };
    const std::vector<std::string> header{"Source", "Partially Relevant (1)", "Relevant (2)", "# documents per source"};
    for (const auto& r : s.rows) rows.push_back(make(r));
    rows.push_back(make(s.total));
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
    }
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << "  ";
            out << (c == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[c])) << row[c];
        }
        out << std::right << '\n';
    };
    emit(header);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i + 1 == rows.size()) {
            std::size_t total_width = 0;
            for (auto w : width) total_width += w + 2;
            out << std::string(total_width - 2, '-') << '\n';
        }
        emit(rows[i]);
    }
}

}  // namespace metasearch
