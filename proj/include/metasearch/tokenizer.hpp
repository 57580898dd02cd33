#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "porter.hpp"

namespace metasearch {

/// The English stop set used by Lucene's StandardAnalyzer (and therefore by
/// Anserini/pyserini indexes).
inline std::set<std::string, std::less<>> default_stopwords() {
    return {"a",    "an",    "and",   "are",  "as",   "at",    "be",    "but",  "by",
            "for",  "if",    "in",    "into", "is",   "it",    "no",    "not",  "of",
            "on",   "or",    "such",  "that", "the",  "their", "then",  "there", "these",
            "they", "this",  "to",    "was",  "will", "with"};
}

/// One term per line; blank lines and lines starting with '#' are skipped.
inline std::set<std::string, std::less<>> load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open stopword list '" + path + "'");
    std::set<std::string, std::less<>> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        out.insert(line.substr(first));
    }
    return out;
}

namespace detail {

// Bytes >= 0x80 are treated as word characters so UTF-8 sequences are kept
// inside their token instead of splitting it.
constexpr bool is_word_byte(unsigned char c) noexcept {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

constexpr char ascii_lower(char c) noexcept {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace detail

/// Split on any non-alphanumeric character. Pure and allocation-only; no
/// lowercasing, stopping or stemming.
inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !detail::is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && detail::is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = detail::ascii_lower(c);
    return out;
}

struct Tokenizer {
    bool lowercase = true;
    bool stem = true;
    std::set<std::string, std::less<>> stopwords = default_stopwords();

    /// Pipeline: split, lowercase, drop stopwords, stem.
    std::vector<std::string> operator()(std::string_view text) const {
        std::vector<std::string> out;
        for (auto& w : split_words(text)) {
            if (lowercase) w = to_lower(w);
            if (stopwords.contains(w)) continue;
            out.push_back(stem ? porter_stem(w) : std::move(w));
        }
        return out;
    }

    bool is_stopword(std::string_view term) const { return stopwords.contains(term); }

    /// Stable identity of the configuration; stored in every index so that a
    /// query analysed differently from the collection is rejected.
    std::string fingerprint() const {
        std::uint64_t h = 14695981039346656037ULL;  // FNV-1a
        for (const auto& w : stopwords) {
            for (unsigned char c : w) {
                h ^= c;
                h *= 1099511628211ULL;
            }
            h ^= 0xFF;
            h *= 1099511628211ULL;
        }
        static constexpr char hex[] = "0123456789abcdef";
        std::string digest(16, '0');
        for (int i = 15; i >= 0; --i, h >>= 4) digest[static_cast<std::size_t>(i)] = hex[h & 0xF];
        return std::string("lc=") + (lowercase ? "1" : "0") + ";stem=porter:" + (stem ? "1" : "0") +
               ";stop=" + std::to_string(stopwords.size()) + ":" + digest;
    }
};

inline std::vector<std::string> tokenize(std::string_view text, const Tokenizer& t) { return t(text); }

}  // namespace metasearch
