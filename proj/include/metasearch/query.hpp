#pragma once

// Topics, local ontology/lexicon resources, weighted query construction and
// the four query variations used by the fusion runs.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "tokenizer.hpp"

namespace metasearch {

struct Topic {
    int number = 0;
    std::string query;
    std::string question;
    std::string narrative;
    friend bool operator==(const Topic&, const Topic&) = default;
};

/// Collapses whitespace runs to one space and trims both ends.
inline std::string normalize_whitespace(std::string_view s) {
    std::string out;
    bool pending = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.push_back(c);
    }
    return out;
}

/// Matching key for phrases: lowercased words joined by single spaces.
inline std::string phrase_key(std::string_view s) {
    std::string key;
    for (const auto& w : split_words(s)) {
        if (!key.empty()) key.push_back(' ');
        key += to_lower(w);
    }
    return key;
}

namespace detail {

struct XmlElement {
    std::string name;
    std::map<std::string, std::string> attrs;
    std::vector<XmlElement> children;
    std::string text;  // concatenated character data of this element only
};

/// Small non-validating XML reader: elements, attributes, character data,
/// comments, processing instructions, CDATA and the predefined/numeric
/// entities. Enough for TREC topic files; anything unbalanced is rejected.
class XmlReader {
public:
    explicit XmlReader(std::string_view src) : s_(src) {}

    XmlElement parse_document() {
        XmlElement root;
        root.name = "#document";
        parse_content(root);
        if (pos_ != s_.size()) fail("unexpected closing tag");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        std::size_t line = 1 + static_cast<std::size_t>(std::count(s_.begin(), s_.begin() + static_cast<std::ptrdiff_t>(std::min(pos_, s_.size())), '\n'));
        throw Error(ErrorKind::MalformedXml, what + " (line " + std::to_string(line) + ")");
    }

    bool starts(std::string_view p) const { return s_.substr(pos_, p.size()) == p; }

    void skip_past(std::string_view terminator, const char* what) {
        auto end = s_.find(terminator, pos_);
        if (end == std::string_view::npos) fail(std::string("unterminated ") + what);
        pos_ = end + terminator.size();
    }

    void skip_space() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    std::string name() {
        const auto start = pos_;
        while (pos_ < s_.size()) {
            const char c = s_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':' || c == '.' ||
                static_cast<unsigned char>(c) >= 0x80)
                ++pos_;
            else
                break;
        }
        if (pos_ == start) fail("expected a name");
        return std::string(s_.substr(start, pos_ - start));
    }

    void append_utf8(std::string& out, unsigned cp) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }

    std::string decode(std::string_view raw) {
        std::string out;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] != '&') {
                out.push_back(raw[i]);
                continue;
            }
            auto semi = raw.find(';', i);
            if (semi == std::string_view::npos) fail("unterminated entity");
            auto ent = raw.substr(i + 1, semi - i - 1);
            if (ent == "amp") out.push_back('&');
            else if (ent == "lt") out.push_back('<');
            else if (ent == "gt") out.push_back('>');
            else if (ent == "quot") out.push_back('"');
            else if (ent == "apos") out.push_back('\'');
            else if (ent.size() > 1 && ent[0] == '#') {
                unsigned cp = 0;
                const bool hex = ent[1] == 'x' || ent[1] == 'X';
                auto digits = ent.substr(hex ? 2 : 1);
                auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cp, hex ? 16 : 10);
                if (ec != std::errc() || p != digits.data() + digits.size() || digits.empty() || cp > 0x10FFFF)
                    fail("bad character reference");
                append_utf8(out, cp);
            } else {
                fail("unknown entity '&" + std::string(ent) + ";'");
            }
            i = semi;
        }
        return out;
    }

    void parse_content(XmlElement& parent) {
        while (pos_ < s_.size()) {
            if (starts("<!--")) {
                skip_past("-->", "comment");
            } else if (starts("<![CDATA[")) {
                pos_ += 9;
                auto end = s_.find("]]>", pos_);
                if (end == std::string_view::npos) fail("unterminated CDATA");
                parent.text.append(s_.substr(pos_, end - pos_));
                pos_ = end + 3;
            } else if (starts("<?")) {
                skip_past("?>", "processing instruction");
            } else if (starts("<!")) {
                skip_past(">", "declaration");
            } else if (starts("</")) {
                return;
            } else if (s_[pos_] == '<') {
                parent.children.push_back(parse_element());
            } else {
                auto next = s_.find('<', pos_);
                if (next == std::string_view::npos) next = s_.size();
                parent.text += decode(s_.substr(pos_, next - pos_));
                pos_ = next;
            }
        }
    }

    XmlElement parse_element() {
        ++pos_;  // '<'
        XmlElement el;
        el.name = name();
        while (true) {
            skip_space();
            if (pos_ >= s_.size()) fail("unterminated start tag <" + el.name + ">");
            if (starts("/>")) {
                pos_ += 2;
                return el;
            }
            if (s_[pos_] == '>') {
                ++pos_;
                break;
            }
            auto attr = name();
            skip_space();
            if (pos_ >= s_.size() || s_[pos_] != '=') fail("expected '=' after attribute " + attr);
            ++pos_;
            skip_space();
            if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) fail("unquoted attribute " + attr);
            const char q = s_[pos_++];
            auto end = s_.find(q, pos_);
            if (end == std::string_view::npos) fail("unterminated attribute " + attr);
            el.attrs[attr] = decode(s_.substr(pos_, end - pos_));
            pos_ = end + 1;
        }
        parse_content(el);
        if (!starts("</")) fail("missing </" + el.name + ">");
        pos_ += 2;
        auto closing = name();
        if (closing != el.name) fail("mismatched </" + closing + "> for <" + el.name + ">");
        skip_space();
        if (pos_ >= s_.size() || s_[pos_] != '>') fail("malformed end tag </" + closing);
        ++pos_;
        return el;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

inline void collect_topics(const XmlElement& el, std::vector<const XmlElement*>& out) {
    for (const auto& c : el.children) {
        if (c.name == "topic")
            out.push_back(&c);
        else
            collect_topics(c, out);
    }
}

}  // namespace detail

/// Parses a TREC topics file (<topic number="N"> with query, question and
/// narrative children). Document order is preserved.
inline std::vector<Topic> parse_topics(std::string_view xml) {
    const auto doc = detail::XmlReader(xml).parse_document();
    std::vector<const detail::XmlElement*> elements;
    detail::collect_topics(doc, elements);

    std::vector<Topic> topics;
    std::set<int> numbers;
    for (std::size_t i = 0; i < elements.size(); ++i) {
        const auto& el = *elements[i];
        auto it = el.attrs.find("number");
        if (it == el.attrs.end())
            throw Error(ErrorKind::MissingField, "topic #" + std::to_string(i + 1) + ": number attribute");
        Topic t;
        auto num = normalize_whitespace(it->second);
        auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), t.number);
        if (ec != std::errc() || p != num.data() + num.size() || t.number <= 0)
            throw Error(ErrorKind::MalformedXml, "topic number '" + it->second + "' is not a positive integer");
        if (!numbers.insert(t.number).second)
            throw Error(ErrorKind::MalformedXml, "duplicate topic number " + std::to_string(t.number));

        auto field = [&](std::string_view name) -> std::string {
            for (const auto& c : el.children)
                if (c.name == name) return normalize_whitespace(c.text);
            throw Error(ErrorKind::MissingField, "topic " + std::to_string(t.number) + ": <" + std::string(name) + ">");
        };
        t.query = field("query");
        t.question = field("question");
        t.narrative = field("narrative");
        if (t.query.empty()) throw Error(ErrorKind::MissingField, "topic " + std::to_string(t.number) + ": empty <query>");
        topics.push_back(std::move(t));
    }
    return topics;
}

inline std::vector<Topic> parse_topics_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open topics '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_topics(ss.str());
}

// ---------------------------------------------------------------------------
// Phrase matching shared by the lexicon and the ontology.

/// Greedy longest-match, left-to-right, non-overlapping matcher over
/// lowercased word sequences.
template <typename Payload>
class PhraseMatcher {
public:
    /// First insertion of a key wins; returns false for a repeated key.
    bool insert(std::string_view phrase, Payload payload) {
        auto key = phrase_key(phrase);
        if (key.empty()) return false;
        const auto len = static_cast<std::size_t>(std::count(key.begin(), key.end(), ' ')) + 1;
        max_words_ = std::max(max_words_, len);
        return entries_.emplace(std::move(key), std::move(payload)).second;
    }

    std::vector<const Payload*> match(std::string_view text) const {
        std::vector<std::string> words;
        for (auto& w : split_words(text)) words.push_back(to_lower(w));
        std::vector<const Payload*> out;
        std::size_t i = 0;
        while (i < words.size()) {
            bool hit = false;
            for (std::size_t len = std::min(max_words_, words.size() - i); len >= 1; --len) {
                std::string key = words[i];
                for (std::size_t k = 1; k < len; ++k) key += ' ' + words[i + k];
                if (auto it = entries_.find(key); it != entries_.end()) {
                    out.push_back(&it->second);
                    i += len;
                    hit = true;
                    break;
                }
            }
            if (!hit) ++i;
        }
        return out;
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

private:
    std::unordered_map<std::string, Payload> entries_;
    std::size_t max_words_ = 0;
};

// ---------------------------------------------------------------------------
// Entity lexicon

struct Entity {
    std::string label;
    std::string entity_type;
    friend bool operator==(const Entity&, const Entity&) = default;
};

class EntityLexicon {
public:
    /// Returns false if the surface form was already present (first wins).
    bool add(std::string_view surface, Entity entity) { return matcher_.insert(surface, std::move(entity)); }

    /// Greedy longest-match over the lowercased token sequence; duplicates
    /// are removed keeping the first occurrence.
    std::vector<Entity> extract(std::string_view text) const {
        std::vector<Entity> out;
        for (const auto* e : matcher_.match(text))
            if (std::find(out.begin(), out.end(), *e) == out.end()) out.push_back(*e);
        return out;
    }

    std::size_t size() const noexcept { return matcher_.size(); }
    bool empty() const noexcept { return matcher_.empty(); }

private:
    PhraseMatcher<Entity> matcher_;
};

/// TSV: surface, label, entity_type. '#' starts a comment line.
inline EntityLexicon load_lexicon(std::istream& in) {
    EntityLexicon lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::array<std::string, 3> cols;
        std::size_t start = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            auto tab = line.find('\t', start);
            if (c < 2 && tab == std::string::npos)
                throw Error(ErrorKind::MalformedLine, "lexicon line " + std::to_string(lineno) + ": expected 3 columns");
            cols[c] = line.substr(start, c < 2 ? tab - start : std::string::npos);
            start = tab + 1;
        }
        if (cols[2].find('\t') != std::string::npos)
            throw Error(ErrorKind::MalformedLine, "lexicon line " + std::to_string(lineno) + ": too many columns");
        if (phrase_key(cols[0]).empty())
            throw Error(ErrorKind::MalformedLine, "lexicon line " + std::to_string(lineno) + ": empty surface form");
        lex.add(cols[0], {normalize_whitespace(cols[1]), normalize_whitespace(cols[2])});
    }
    return lex;
}

inline EntityLexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open lexicon '" + path + "'");
    return load_lexicon(in);
}

inline std::vector<Entity> extract_entities(std::string_view text, const EntityLexicon& lexicon) {
    return lexicon.extract(text);
}

// ---------------------------------------------------------------------------
// Ontology

struct Concept {
    std::string label;
    std::vector<std::string> parents;
    std::vector<std::string> children;
    std::vector<std::string> synonyms;
};

class Ontology {
public:
    Ontology() = default;

    /// Links are made symmetric: a parent listed on the child makes the child
    /// visible from the parent and vice versa. References to unknown labels
    /// are dropped and counted in `dropped_references()`.
    explicit Ontology(std::vector<Concept> concepts) {
        for (auto& c : concepts) {
            auto key = phrase_key(c.label);
            if (key.empty() || index_.contains(key)) continue;
            index_.emplace(key, concepts_.size());
            concepts_.push_back(std::move(c));
        }
        std::vector<std::vector<std::size_t>> parents(concepts_.size());
        std::vector<std::vector<std::size_t>> children(concepts_.size());
        auto link = [&](std::size_t child, std::size_t parent) {
            if (child == parent) return;
            if (std::find(parents[child].begin(), parents[child].end(), parent) == parents[child].end())
                parents[child].push_back(parent);
            if (std::find(children[parent].begin(), children[parent].end(), child) == children[parent].end())
                children[parent].push_back(child);
        };
        for (std::size_t i = 0; i < concepts_.size(); ++i) {
            for (const auto& p : concepts_[i].parents) {
                if (auto j = find(p)) link(i, *j);
                else ++dropped_;
            }
            for (const auto& ch : concepts_[i].children) {
                if (auto j = find(ch)) link(*j, i);
                else ++dropped_;
            }
        }
        for (std::size_t i = 0; i < concepts_.size(); ++i) {
            auto& c = concepts_[i];
            c.parents.clear();
            c.children.clear();
            for (auto p : parents[i]) c.parents.push_back(concepts_[p].label);
            for (auto ch : children[i]) c.children.push_back(concepts_[ch].label);
            matcher_.insert(c.label, i);
        }
        for (std::size_t i = 0; i < concepts_.size(); ++i)
            for (const auto& syn : concepts_[i].synonyms) matcher_.insert(syn, i);
    }

    std::size_t size() const noexcept { return concepts_.size(); }
    bool empty() const noexcept { return concepts_.empty(); }
    std::size_t dropped_references() const noexcept { return dropped_; }

    const Concept* concept_for(std::string_view label) const {
        auto i = find(label);
        return i ? &concepts_[*i] : nullptr;
    }

    /// Concepts whose label or synonym occurs in `text` (greedy longest match).
    std::vector<const Concept*> match(std::string_view text) const {
        std::vector<const Concept*> out;
        for (const auto* i : matcher_.match(text)) out.push_back(&concepts_[*i]);
        return out;
    }

private:
    std::optional<std::size_t> find(std::string_view label) const {
        auto it = index_.find(phrase_key(label));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<Concept> concepts_;
    std::unordered_map<std::string, std::size_t> index_;
    PhraseMatcher<std::size_t> matcher_;
    std::size_t dropped_ = 0;
};

/// JSONL: {"label": ..., "parents": [...], "children": [...], "synonyms": [...]}.
inline Ontology load_ontology(std::istream& in) {
    std::vector<Concept> concepts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto obj = nlohmann::json::parse(line);
            Concept c;
            c.label = obj.at("label").get<std::string>();
            auto list = [&](const char* key) {
                return obj.contains(key) ? obj[key].get<std::vector<std::string>>() : std::vector<std::string>{};
            };
            c.parents = list("parents");
            c.children = list("children");
            c.synonyms = list("synonyms");
            concepts.push_back(std::move(c));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::MalformedLine, "ontology line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return Ontology(std::move(concepts));
}

inline Ontology load_ontology(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open ontology '" + path + "'");
    return load_ontology(in);
}

/// Direct parents and children (one level each way) of every concept
/// mentioned in the query terms. Terms equal to an input term or one of its
/// words are never returned.
inline std::vector<std::string> expand_with_ontology(const std::vector<std::string>& query_terms,
                                                     const Ontology& ontology) {
    std::set<std::string> originals;
    for (const auto& t : query_terms) {
        originals.insert(phrase_key(t));
        for (const auto& w : split_words(t)) originals.insert(to_lower(w));
    }
    std::vector<std::string> out;
    std::set<std::string> emitted;
    auto emit = [&](const std::string& label) {
        auto key = phrase_key(label);
        if (originals.contains(key) || !emitted.insert(key).second) return;
        out.push_back(label);
    };
    for (const auto& t : query_terms)
        for (const auto* c : ontology.match(t)) {
            for (const auto& p : c->parents) emit(p);
            for (const auto& ch : c->children) emit(ch);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Weighted query

enum class TermOrigin { Original, OntologyAlternative, EntityLabel, EntityType };

constexpr std::string_view to_string(TermOrigin o) noexcept {
    switch (o) {
        case TermOrigin::Original: return "original";
        case TermOrigin::OntologyAlternative: return "ontology";
        case TermOrigin::EntityLabel: return "entity_label";
        case TermOrigin::EntityType: return "entity_type";
    }
    return "unknown";
}

/// The term weighting schema: original 1.0, ontology alternative 0.7,
/// entity label 0.4, entity type 0.1.
constexpr double origin_weight(TermOrigin o) noexcept {
    switch (o) {
        case TermOrigin::Original: return 1.0;
        case TermOrigin::OntologyAlternative: return 0.7;
        case TermOrigin::EntityLabel: return 0.4;
        case TermOrigin::EntityType: return 0.1;
    }
    return 0.0;
}

struct WeightedTerm {
    std::string text;
    double weight = 0.0;
    TermOrigin origin = TermOrigin::Original;
    friend bool operator==(const WeightedTerm&, const WeightedTerm&) = default;
};

struct WeightedQuery {
    std::vector<WeightedTerm> terms;

    /// Adds a term; a term already present (same phrase key) keeps the
    /// higher-weighted origin and its first position.
    void add(std::string_view text, TermOrigin origin) {
        auto key = phrase_key(text);
        if (key.empty()) return;
        for (auto& t : terms) {
            if (phrase_key(t.text) != key) continue;
            if (origin_weight(origin) > t.weight) {
                t.weight = origin_weight(origin);
                t.origin = origin;
            }
            return;
        }
        terms.push_back({std::string(text), origin_weight(origin), origin});
    }

    /// Indri-style rendering, e.g. `#weight( 1.0 coronavirus 0.7 #1(coronavirus infection) )`.
    std::string to_indri() const {
        std::ostringstream os;
        os << "#weight(";
        for (const auto& t : terms) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%.1f", t.weight);
            os << ' ' << buf << ' ';
            auto key = phrase_key(t.text);
            if (key.find(' ') != std::string::npos)
                os << "#1(" << key << ')';
            else
                os << key;
        }
        os << " )";
        return os.str();
    }
};

/// Query words at 1.0; ontology neighbours of the query and of entities found
/// in query+question at 0.7; entity labels at 0.4; entity types at 0.1.
inline WeightedQuery build_weighted_query(const Topic& topic, const Ontology& ontology, const EntityLexicon& lexicon) {
    WeightedQuery wq;
    for (const auto& w : split_words(topic.query)) wq.add(to_lower(w), TermOrigin::Original);

    const auto entities = lexicon.extract(topic.query + " " + topic.question);
    std::vector<std::string> lookups{topic.query};
    for (const auto& e : entities) lookups.push_back(e.label);
    for (const auto& alt : expand_with_ontology(lookups, ontology)) wq.add(alt, TermOrigin::OntologyAlternative);
    for (const auto& e : entities) wq.add(e.label, TermOrigin::EntityLabel);
    for (const auto& e : entities) wq.add(e.entity_type, TermOrigin::EntityType);
    return wq;
}

// ---------------------------------------------------------------------------
// Query variations

enum class VariationId { V1, V2, V3, V4 };

constexpr std::string_view to_string(VariationId v) noexcept {
    switch (v) {
        case VariationId::V1: return "V1";
        case VariationId::V2: return "V2";
        case VariationId::V3: return "V3";
        case VariationId::V4: return "V4";
    }
    return "V?";
}

inline constexpr std::array<VariationId, 4> kAllVariations{VariationId::V1, VariationId::V2, VariationId::V3,
                                                           VariationId::V4};

struct QueryVariation {
    VariationId id = VariationId::V1;
    std::string text;
    friend bool operator==(const QueryVariation&, const QueryVariation&) = default;
};

/// NE(text): entity labels in order of first occurrence.
inline std::vector<std::string> named_entities(std::string_view text, const EntityLexicon& lexicon) {
    std::vector<std::string> out;
    for (auto& e : lexicon.extract(text))
        if (std::find(out.begin(), out.end(), e.label) == out.end()) out.push_back(std::move(e.label));
    return out;
}

/// V1 = query + NE(question); V2 = V1 + NE(narrative);
/// V3 = question + NE(query); V4 = V3 + NE(narrative).
inline std::vector<QueryVariation> generate_variations(const Topic& topic, const EntityLexicon& lexicon) {
    auto join = [](std::string base, const std::vector<std::string>& parts) {
        for (const auto& p : parts) {
            if (p.empty()) continue;
            if (!base.empty()) base.push_back(' ');
            base += p;
        }
        return base;
    };
    const auto ne_query = named_entities(topic.query, lexicon);
    const auto ne_question = named_entities(topic.question, lexicon);
    const auto ne_narrative = named_entities(topic.narrative, lexicon);
    const auto v1 = join(topic.query, ne_question);
    const auto v3 = join(topic.question, ne_query);
    return {{VariationId::V1, v1},
            {VariationId::V2, join(v1, ne_narrative)},
            {VariationId::V3, v3},
            {VariationId::V4, join(v3, ne_narrative)}};
}

}  // namespace metasearch
