#pragma once

// CORD-19-style metadata ingestion and construction of the three surrogate
// document families (title+abstract, full text, paragraph-level).

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace metasearch {

enum class IndexVariant { TitleAbstract, FullText, Paragraph };

constexpr std::string_view to_string(IndexVariant v) noexcept {
    switch (v) {
        case IndexVariant::TitleAbstract: return "title_abstract";
        case IndexVariant::FullText: return "full_text";
        case IndexVariant::Paragraph: return "paragraph";
    }
    return "unknown";
}

inline std::optional<IndexVariant> parse_index_variant(std::string_view s) {
    if (s == "title_abstract") return IndexVariant::TitleAbstract;
    if (s == "full_text") return IndexVariant::FullText;
    if (s == "paragraph") return IndexVariant::Paragraph;
    return std::nullopt;
}

struct DocumentRecord {
    std::string doc_id;
    std::string title;
    std::string abstract;
    std::vector<std::string> paragraphs;
    std::optional<int> publish_year;
    std::string source;
    /// Remaining metadata columns keyed by their original column name
    /// (publish_time, doi, url, pmcid, pubmed_id, authors, ...). Empty
    /// values are not stored.
    std::map<std::string, std::string> extra;

    friend bool operator==(const DocumentRecord&, const DocumentRecord&) = default;
};

struct IndexableDoc {
    std::string surrogate_id;
    std::string original_id;
    std::string text;
    IndexVariant variant = IndexVariant::TitleAbstract;
    std::optional<std::size_t> paragraph_index;

    friend bool operator==(const IndexableDoc&, const IndexableDoc&) = default;
};

enum class MetadataFormat { Csv, Jsonl };

namespace detail {

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "'");
    return in;
}

/// RFC 4180 reader: quoted fields may contain separators, doubled quotes
/// and line breaks. Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    if (in.peek() == std::char_traits<char>::eof()) return false;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (int c = in.get(); c != std::char_traits<char>::eof(); c = in.get()) {
        any = true;
        const char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            fields.push_back(std::move(field));
            return true;
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    if (quoted) throw Error(ErrorKind::MalformedRow, "unterminated quoted field at end of file");
    if (any) fields.push_back(std::move(field));
    return any;
}

inline std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace detail

/// Year from a CORD-19 publish_time value: the first standalone run of
/// exactly four digits ("2020", "2020-03-01", "Mar 2020", "2019-2020").
inline std::optional<int> extract_publish_year(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] < '0' || s[i] > '9') {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && s[j] >= '0' && s[j] <= '9') ++j;
        if (j - i == 4) {
            int year = 0;
            std::from_chars(s.data() + i, s.data() + j, year);
            return year;
        }
        i = j;
    }
    return std::nullopt;
}

namespace detail {

inline constexpr std::string_view kIdColumn = "cord_uid";

class RecordAssembler {
public:
    DocumentRecord assemble(const std::vector<std::pair<std::string, std::string>>& cells,
                            std::size_t row) {
        DocumentRecord rec;
        for (const auto& [name, value] : cells) {
            if (name == "cord_uid" || name == "doc_id") {
                rec.doc_id = value;
            } else if (name == "title") {
                rec.title = value;
            } else if (name == "abstract") {
                rec.abstract = value;
            } else if (name == "source_x" || name == "source") {
                rec.source = value;
            } else if (!value.empty()) {
                rec.extra[name] = value;
            }
        }
        if (rec.doc_id.empty())
            throw Error(ErrorKind::MalformedRow, "row " + std::to_string(row) + ": empty doc id");
        if (auto it = rec.extra.find("publish_time"); it != rec.extra.end())
            rec.publish_year = extract_publish_year(it->second);
        if (!seen_.insert(rec.doc_id).second)
            throw Error(ErrorKind::DuplicateDocId, rec.doc_id);
        return rec;
    }

private:
    std::unordered_set<std::string> seen_;
};

inline void require_columns(const std::set<std::string, std::less<>>& names) {
    if (!names.contains("cord_uid") && !names.contains("doc_id"))
        throw Error(ErrorKind::MissingColumn, std::string(kIdColumn));
    for (std::string_view col : {"title", "abstract"})
        if (!names.contains(col)) throw Error(ErrorKind::MissingColumn, std::string(col));
}

inline std::vector<DocumentRecord> parse_metadata_csv(std::istream& in) {
    std::vector<std::string> header;
    if (!read_csv_record(in, header)) throw Error(ErrorKind::MissingColumn, std::string(kIdColumn));
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
    require_columns({header.begin(), header.end()});

    std::vector<DocumentRecord> out;
    RecordAssembler assembler;
    std::vector<std::string> fields;
    std::vector<std::pair<std::string, std::string>> cells;
    std::size_t row = 0;
    while (read_csv_record(in, fields)) {
        ++row;
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (fields.size() != header.size())
            throw Error(ErrorKind::MalformedRow, "row " + std::to_string(row) + ": expected " +
                                                     std::to_string(header.size()) + " fields, got " +
                                                     std::to_string(fields.size()));
        cells.clear();
        for (std::size_t i = 0; i < header.size(); ++i) cells.emplace_back(header[i], fields[i]);
        out.push_back(assembler.assemble(cells, row));
    }
    return out;
}

inline std::string json_scalar_to_string(const nlohmann::json& v) {
    if (v.is_null()) return {};
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

inline std::vector<DocumentRecord> parse_metadata_jsonl(std::istream& in) {
    std::vector<DocumentRecord> out;
    RecordAssembler assembler;
    std::string line;
    std::size_t row = 0;
    std::vector<std::pair<std::string, std::string>> cells;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw Error(ErrorKind::MalformedRow, "row " + std::to_string(row) + ": invalid JSON");
        }
        if (!obj.is_object())
            throw Error(ErrorKind::MalformedRow, "row " + std::to_string(row) + ": not an object");
        std::set<std::string, std::less<>> keys;
        cells.clear();
        for (const auto& [k, v] : obj.items()) {
            keys.insert(k);
            cells.emplace_back(k, json_scalar_to_string(v));
        }
        require_columns(keys);
        out.push_back(assembler.assemble(cells, row));
    }
    return out;
}

}  // namespace detail

inline std::vector<DocumentRecord> parse_metadata(std::istream& in, MetadataFormat format) {
    return format == MetadataFormat::Csv ? detail::parse_metadata_csv(in)
                                         : detail::parse_metadata_jsonl(in);
}

inline std::vector<DocumentRecord> parse_metadata(const std::string& path, MetadataFormat format) {
    auto in = detail::open_input(path);
    return parse_metadata(in, format);
}

/// Writes records as CSV: cord_uid,title,abstract,source_x followed by the
/// sorted union of extra columns.
inline void write_metadata_csv(std::ostream& out, const std::vector<DocumentRecord>& records) {
    std::set<std::string> extra_cols;
    for (const auto& r : records)
        for (const auto& [k, _] : r.extra) extra_cols.insert(k);
    out << "cord_uid,title,abstract,source_x";
    for (const auto& c : extra_cols) out << ',' << detail::csv_escape(c);
    out << '\n';
    for (const auto& r : records) {
        out << detail::csv_escape(r.doc_id) << ',' << detail::csv_escape(r.title) << ','
            << detail::csv_escape(r.abstract) << ',' << detail::csv_escape(r.source);
        for (const auto& c : extra_cols) {
            auto it = r.extra.find(c);
            out << ',' << (it == r.extra.end() ? std::string() : detail::csv_escape(it->second));
        }
        out << '\n';
    }
}

inline void write_metadata_jsonl(std::ostream& out, const std::vector<DocumentRecord>& records) {
    for (const auto& r : records) {
        nlohmann::ordered_json obj;
        obj["cord_uid"] = r.doc_id;
        obj["title"] = r.title;
        obj["abstract"] = r.abstract;
        obj["source_x"] = r.source;
        for (const auto& [k, v] : r.extra) obj[k] = v;
        out << obj.dump() << '\n';
    }
}

/// Full-text sidecar: one {"doc_id": ..., "paragraphs": [...]} object per line.
inline std::unordered_map<std::string, std::vector<std::string>> load_fulltext(std::istream& in) {
    std::unordered_map<std::string, std::vector<std::string>> out;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto obj = nlohmann::json::parse(line);
            auto id = obj.at("doc_id").get<std::string>();
            auto paras = obj.at("paragraphs").get<std::vector<std::string>>();
            if (!out.emplace(id, std::move(paras)).second) throw Error(ErrorKind::DuplicateDocId, id);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::MalformedRow, "full text row " + std::to_string(row) + ": " + e.what());
        }
    }
    return out;
}

inline std::unordered_map<std::string, std::vector<std::string>> load_fulltext(const std::string& path) {
    auto in = detail::open_input(path);
    return load_fulltext(in);
}

/// Moves paragraphs onto their records. Returns the number of sidecar
/// entries whose doc_id matched no record.
inline std::size_t attach_fulltext(std::vector<DocumentRecord>& records,
                                   std::unordered_map<std::string, std::vector<std::string>> fulltext) {
    for (auto& r : records) {
        auto it = fulltext.find(r.doc_id);
        if (it == fulltext.end()) continue;
        r.paragraphs = std::move(it->second);
        fulltext.erase(it);
    }
    return fulltext.size();
}

inline std::string make_paragraph_id(std::string_view original_id, std::size_t paragraph_index) {
    return std::string(original_id) + "." + std::to_string(paragraph_index);
}

/// Inverse of make_paragraph_id. Splits on the last '.', so original ids may
/// themselves contain dots.
inline std::optional<std::pair<std::string, std::size_t>> parse_paragraph_id(std::string_view surrogate) {
    auto dot = surrogate.rfind('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == surrogate.size()) return std::nullopt;
    std::size_t idx = 0;
    auto digits = surrogate.substr(dot + 1);
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
    if (ec != std::errc() || p != digits.data() + digits.size()) return std::nullopt;
    if (digits.size() > 1 && digits[0] == '0') return std::nullopt;
    return std::pair{std::string(surrogate.substr(0, dot)), idx};
}

namespace detail {

inline void append_part(std::string& text, std::string_view part) {
    if (part.empty()) return;
    if (!text.empty()) text.push_back(' ');
    text.append(part);
}

}  // namespace detail

inline std::vector<IndexableDoc> build_indexable_docs(const std::vector<DocumentRecord>& records,
                                                      IndexVariant variant) {
    std::vector<IndexableDoc> docs;
    docs.reserve(records.size());
    for (const auto& r : records) {
        std::string head;
        detail::append_part(head, r.title);
        detail::append_part(head, r.abstract);
        switch (variant) {
            case IndexVariant::TitleAbstract:
                docs.push_back({r.doc_id, r.doc_id, std::move(head), variant, std::nullopt});
                break;
            case IndexVariant::FullText: {
                for (const auto& p : r.paragraphs) detail::append_part(head, p);
                docs.push_back({r.doc_id, r.doc_id, std::move(head), variant, std::nullopt});
                break;
            }
            case IndexVariant::Paragraph: {
                if (r.paragraphs.empty()) {
                    docs.push_back({make_paragraph_id(r.doc_id, 0), r.doc_id, head, variant, 0});
                    break;
                }
                for (std::size_t i = 0; i < r.paragraphs.size(); ++i) {
                    std::string text = head;
                    detail::append_part(text, r.paragraphs[i]);
                    docs.push_back({make_paragraph_id(r.doc_id, i), r.doc_id, std::move(text), variant, i});
                }
                break;
            }
        }
    }
    return docs;
}

}  // namespace metasearch
