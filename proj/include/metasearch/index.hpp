#pragma once

// Immutable in-memory inverted index holding exactly the statistics BM25 and
// RM3 need (N, df, tf, dl, avgdl), with a versioned single-file binary
// serialization.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "tokenizer.hpp"

namespace metasearch {

struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
    friend bool operator==(const Posting&, const Posting&) = default;
};

struct DocEntry {
    std::string surrogate_id;
    std::string original_id;
    std::uint32_t length = 0;
    friend bool operator==(const DocEntry&, const DocEntry&) = default;
};

struct ForwardEntry {
    std::uint32_t term = 0;
    std::uint32_t tf = 0;
};

class InvertedIndex {
public:
    InvertedIndex() = default;

    std::size_t doc_count() const noexcept { return docs_.size(); }
    std::size_t term_count() const noexcept { return terms_.size(); }
    std::uint64_t total_terms() const noexcept { return total_terms_; }
    double avgdl() const noexcept {
        return docs_.empty() ? 0.0 : static_cast<double>(total_terms_) / static_cast<double>(docs_.size());
    }
    IndexVariant variant() const noexcept { return variant_; }
    const std::string& tokenizer_fingerprint() const noexcept { return fingerprint_; }

    const DocEntry& doc(std::uint32_t ordinal) const { return docs_.at(ordinal); }
    std::span<const DocEntry> docs() const noexcept { return docs_; }

    /// Terms in lexicographic order; term ids index this vector.
    std::span<const std::string> terms() const noexcept { return terms_; }
    const std::string& term(std::uint32_t id) const { return terms_.at(id); }

    std::optional<std::uint32_t> term_id(std::string_view term) const {
        auto it = std::lower_bound(terms_.begin(), terms_.end(), term);
        if (it == terms_.end() || *it != term) return std::nullopt;
        return static_cast<std::uint32_t>(it - terms_.begin());
    }

    std::span<const Posting> postings(std::uint32_t term_id) const { return postings_.at(term_id); }
    std::span<const Posting> postings(std::string_view term) const {
        auto id = term_id(term);
        return id ? postings(*id) : std::span<const Posting>{};
    }

    std::size_t df(std::string_view term) const { return postings(term).size(); }

    /// Per-document (term id, tf) pairs sorted by term id; derived from the
    /// postings, never persisted.
    std::span<const ForwardEntry> forward(std::uint32_t ordinal) const { return forward_.at(ordinal); }

    std::optional<std::uint32_t> ordinal_of(const std::string& surrogate_id) const {
        auto it = ordinals_.find(surrogate_id);
        if (it == ordinals_.end()) return std::nullopt;
        return it->second;
    }

    friend bool operator==(const InvertedIndex& a, const InvertedIndex& b) {
        return a.variant_ == b.variant_ && a.fingerprint_ == b.fingerprint_ && a.docs_ == b.docs_ &&
               a.terms_ == b.terms_ && a.postings_ == b.postings_ && a.total_terms_ == b.total_terms_;
    }

private:
    friend InvertedIndex build_index(const std::vector<IndexableDoc>&, const Tokenizer&, unsigned);
    friend void save_index(const InvertedIndex&, std::ostream&);
    friend InvertedIndex load_index(std::istream&);

    void derive_forward() {
        ordinals_.clear();
        ordinals_.reserve(docs_.size());
        for (std::uint32_t i = 0; i < docs_.size(); ++i)
            if (!ordinals_.emplace(docs_[i].surrogate_id, i).second)
                throw Error(ErrorKind::DuplicateSurrogateId, docs_[i].surrogate_id);
        forward_.assign(docs_.size(), {});
        for (std::uint32_t t = 0; t < postings_.size(); ++t)
            for (const auto& p : postings_[t]) forward_[p.doc].push_back({t, p.tf});
    }

    IndexVariant variant_ = IndexVariant::TitleAbstract;
    std::string fingerprint_;
    std::vector<DocEntry> docs_;
    std::vector<std::string> terms_;
    std::vector<std::vector<Posting>> postings_;
    std::uint64_t total_terms_ = 0;
    std::vector<std::vector<ForwardEntry>> forward_;
    std::unordered_map<std::string, std::uint32_t> ordinals_;
};

/// Builds the index. Documents receive ordinals in input order. Tokenization
/// is spread over `threads` workers (0 = hardware concurrency); the result
/// does not depend on the thread count.
inline InvertedIndex build_index(const std::vector<IndexableDoc>& docs, const Tokenizer& tokenizer,
                                 unsigned threads = 1) {
    if (docs.empty()) throw Error(ErrorKind::EmptyCorpus, "no documents to index");
    {
        std::unordered_set<std::string_view> ids;
        ids.reserve(docs.size());
        for (const auto& d : docs)
            if (!ids.insert(d.surrogate_id).second) throw Error(ErrorKind::DuplicateSurrogateId, d.surrogate_id);
    }

    std::vector<std::vector<std::string>> tokens(docs.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, docs.size()));
    if (threads <= 1) {
        for (std::size_t i = 0; i < docs.size(); ++i) tokens[i] = tokenizer(docs[i].text);
    } else {
        std::vector<std::jthread> workers;
        for (unsigned w = 0; w < threads; ++w)
            workers.emplace_back([&, w] {
                for (std::size_t i = w; i < docs.size(); i += threads) tokens[i] = tokenizer(docs[i].text);
            });
    }

    InvertedIndex idx;
    idx.variant_ = docs.front().variant;
    idx.fingerprint_ = tokenizer.fingerprint();
    idx.docs_.reserve(docs.size());

    std::unordered_map<std::string, std::vector<Posting>> by_term;
    std::unordered_map<std::string_view, std::uint32_t> counts;
    for (std::uint32_t ord = 0; ord < docs.size(); ++ord) {
        counts.clear();
        for (const auto& t : tokens[ord]) ++counts[t];
        for (const auto& [t, tf] : counts) by_term[std::string(t)].push_back({ord, tf});
        idx.docs_.push_back({docs[ord].surrogate_id, docs[ord].original_id,
                             static_cast<std::uint32_t>(tokens[ord].size())});
        idx.total_terms_ += tokens[ord].size();
    }

    idx.terms_.reserve(by_term.size());
    for (const auto& [t, _] : by_term) idx.terms_.push_back(t);
    std::sort(idx.terms_.begin(), idx.terms_.end());
    idx.postings_.reserve(idx.terms_.size());
    for (const auto& t : idx.terms_) idx.postings_.push_back(std::move(by_term[t]));  // already ordinal-sorted
    idx.derive_forward();
    return idx;
}

namespace detail {

inline constexpr std::array<char, 8> kIndexMagic{'M', 'S', 'I', 'N', 'D', 'E', 'X', '\0'};
inline constexpr std::uint32_t kIndexVersion = 1;
inline constexpr std::array<char, 4> kIndexTrailer{'E', 'N', 'D', '!'};

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}
    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void raw(std::span<const char> bytes) { out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); }

private:
    std::ostream& out_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}
    std::uint8_t u8() {
        char c = 0;
        need(in_.get(c));
        return static_cast<std::uint8_t>(c);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    std::string str() {
        const auto n = u32();
        if (n > (1u << 28)) throw Error(ErrorKind::IoFailure, "corrupt index: string length " + std::to_string(n));
        std::string s(n, '\0');
        need(in_.read(s.data(), n));
        return s;
    }
    template <std::size_t N>
    std::array<char, N> raw() {
        std::array<char, N> a{};
        need(in_.read(a.data(), N));
        return a;
    }
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    void need(const std::istream& s) {
        if (!s) throw Error(ErrorKind::IoFailure, "truncated index file");
    }
    std::istream& in_;
};

}  // namespace detail

inline void save_index(const InvertedIndex& idx, std::ostream& out) {
    detail::BinaryWriter w(out);
    w.raw(detail::kIndexMagic);
    w.u32(detail::kIndexVersion);
    w.str(idx.fingerprint_);
    w.u8(static_cast<std::uint8_t>(idx.variant_));
    w.u64(idx.docs_.size());
    for (const auto& d : idx.docs_) {
        w.str(d.surrogate_id);
        w.str(d.original_id);
        w.u32(d.length);
    }
    w.u64(idx.total_terms_);
    w.u64(idx.terms_.size());
    for (std::size_t t = 0; t < idx.terms_.size(); ++t) {
        w.str(idx.terms_[t]);
        w.u32(static_cast<std::uint32_t>(idx.postings_[t].size()));
        for (const auto& p : idx.postings_[t]) {
            w.u32(p.doc);
            w.u32(p.tf);
        }
    }
    w.raw(detail::kIndexTrailer);
    if (!out) throw Error(ErrorKind::IoFailure, "write failed");
}

inline void save_index(const InvertedIndex& idx, const std::string& path) {
    const auto tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::IoFailure, "cannot write '" + tmp + "'");
        save_index(idx, out);
        out.close();
        if (!out) throw Error(ErrorKind::IoFailure, "cannot write '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::IoFailure, "cannot rename to '" + path + "': " + ec.message());
}

/// Reads an index and re-validates every structural invariant; a damaged
/// file raises instead of yielding a partial index.
inline InvertedIndex load_index(std::istream& in) {
    detail::BinaryReader r(in);
    auto magic = r.raw<8>();
    if (magic != detail::kIndexMagic) throw Error(ErrorKind::FormatVersionMismatch, "not an index file");
    if (auto v = r.u32(); v != detail::kIndexVersion)
        throw Error(ErrorKind::FormatVersionMismatch,
                    "index version " + std::to_string(v) + ", expected " + std::to_string(detail::kIndexVersion));
    InvertedIndex idx;
    idx.fingerprint_ = r.str();
    const auto variant = r.u8();
    if (variant > static_cast<std::uint8_t>(IndexVariant::Paragraph))
        throw Error(ErrorKind::IoFailure, "corrupt index: bad variant");
    idx.variant_ = static_cast<IndexVariant>(variant);
    const auto ndocs = r.u64();
    for (std::uint64_t i = 0; i < ndocs; ++i) {
        DocEntry d;
        d.surrogate_id = r.str();
        d.original_id = r.str();
        d.length = r.u32();
        idx.docs_.push_back(std::move(d));
    }
    idx.total_terms_ = r.u64();
    const auto nterms = r.u64();
    std::vector<std::uint64_t> recount(idx.docs_.size(), 0);
    for (std::uint64_t t = 0; t < nterms; ++t) {
        auto term = r.str();
        if (!idx.terms_.empty() && !(idx.terms_.back() < term))
            throw Error(ErrorKind::IoFailure, "corrupt index: terms out of order");
        idx.terms_.push_back(std::move(term));
        const auto n = r.u32();
        if (n == 0 || n > idx.docs_.size()) throw Error(ErrorKind::IoFailure, "corrupt index: bad df");
        std::vector<Posting> list;
        list.reserve(n);
        for (std::uint32_t k = 0; k < n; ++k) {
            Posting p{r.u32(), r.u32()};
            if (p.doc >= idx.docs_.size() || p.tf == 0 || (!list.empty() && list.back().doc >= p.doc))
                throw Error(ErrorKind::IoFailure, "corrupt index: bad posting");
            recount[p.doc] += p.tf;
            list.push_back(p);
        }
        idx.postings_.push_back(std::move(list));
    }
    if (r.raw<4>() != detail::kIndexTrailer) throw Error(ErrorKind::IoFailure, "corrupt index: missing trailer");
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < recount.size(); ++i) {
        if (recount[i] != idx.docs_[i].length) throw Error(ErrorKind::IoFailure, "corrupt index: length mismatch");
        total += recount[i];
    }
    if (total != idx.total_terms_) throw Error(ErrorKind::IoFailure, "corrupt index: total_terms mismatch");
    idx.derive_forward();
    return idx;
}

inline InvertedIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "'");
    return load_index(in);
}

}  // namespace metasearch
