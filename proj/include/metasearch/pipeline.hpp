#pragma once

// Declarative batch pipeline: ingest -> index -> expand -> retrieve -> rerank
// -> fuse -> evaluate, driven by one JSON configuration file.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "fusion.hpp"
#include "index.hpp"
#include "query.hpp"
#include "retrieval.hpp"
#include "run.hpp"
#include "tokenizer.hpp"

namespace metasearch {

enum class RecipeKind { KuRun1, KuRun2, KuRun3, FusionOfRuns, FusionOfFusions, AllFiltering, SoboroffFiltering };

inline std::optional<RecipeKind> parse_recipe_kind(std::string_view s) {
    if (s == "ku_run1") return RecipeKind::KuRun1;
    if (s == "ku_run2") return RecipeKind::KuRun2;
    if (s == "ku_run3") return RecipeKind::KuRun3;
    if (s == "fusionOfRuns") return RecipeKind::FusionOfRuns;
    if (s == "fusionOfFusions") return RecipeKind::FusionOfFusions;
    if (s == "allFiltering") return RecipeKind::AllFiltering;
    if (s == "soboroffFiltering") return RecipeKind::SoboroffFiltering;
    return std::nullopt;
}

/// The four index configurations each query variation is run against.
enum class RunConfig { TitleAbstract, FullText, Paragraph, ParagraphCollapsed };

inline constexpr std::array<RunConfig, 4> kAllRunConfigs{RunConfig::TitleAbstract, RunConfig::FullText,
                                                         RunConfig::Paragraph, RunConfig::ParagraphCollapsed};

constexpr std::string_view to_string(RunConfig c) noexcept {
    switch (c) {
        case RunConfig::TitleAbstract: return "title_abstract";
        case RunConfig::FullText: return "full_text";
        case RunConfig::Paragraph: return "paragraph";
        case RunConfig::ParagraphCollapsed: return "paragraph_collapsed";
    }
    return "?";
}

struct Recipe {
    std::string name;
    RecipeKind kind = RecipeKind::KuRun1;
    std::string tag;
    IndexVariant index = IndexVariant::TitleAbstract;  // ku_run1/2/3 only
    /// "<variation>:<config>" runs left out of the 16-run grid, e.g. "V4:paragraph_collapsed".
    std::set<std::string> skip_runs;
};

struct PipelineConfig {
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    std::filesystem::path metadata;
    MetadataFormat metadata_format = MetadataFormat::Csv;
    std::optional<std::filesystem::path> fulltext;

    bool lowercase = true;
    bool stem = true;
    std::optional<std::filesystem::path> stopwords;

    std::vector<IndexVariant> indices{IndexVariant::TitleAbstract, IndexVariant::FullText, IndexVariant::Paragraph};
    bool save_indices = false;

    std::filesystem::path topics;
    std::optional<std::filesystem::path> qrels;
    std::optional<std::filesystem::path> ontology;
    std::optional<std::filesystem::path> lexicon;
    std::optional<std::filesystem::path> vectors;
    std::vector<std::filesystem::path> external_runs;

    Bm25Params bm25;
    Rm3Params rm3;
    RrfParams rrf;
    SoboroffParams soboroff;
    std::string soboroff_measure = "map";
    std::size_t rerank_top_n = 50;
    int boost_year = 2020;
    EvalOptions eval;

    std::vector<Recipe> recipes;
};

namespace detail {

class ConfigReader {
public:
    explicit ConfigReader(std::filesystem::path base) : base_(std::move(base)) {}

    [[noreturn]] static void fail(const std::string& field, const std::string& why) {
        throw Error(ErrorKind::ConfigInvalid, field + ": " + why);
    }

    std::filesystem::path path(const nlohmann::json& j, const std::string& field, bool must_exist = true) const {
        if (!j.is_string() || j.get<std::string>().empty()) fail(field, "expected a path string");
        std::filesystem::path p = j.get<std::string>();
        if (p.is_relative()) p = base_ / p;
        if (must_exist && !std::filesystem::exists(p)) fail(field, "file not found: " + p.string());
        return p;
    }

    std::optional<std::filesystem::path> opt_path(const nlohmann::json& obj, const char* key, const std::string& field) const {
        if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
        return path(obj[key], field);
    }

    template <typename T>
    static T number(const nlohmann::json& obj, const char* key, T fallback, const std::string& field) {
        if (!obj.contains(key)) return fallback;
        const auto& v = obj[key];
        if (!v.is_number()) fail(field, "expected a number");
        if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) fail(field, "expected an integer");
            if constexpr (std::is_unsigned_v<T>)
                if (v.get<long long>() < 0) fail(field, "must be non-negative");
        }
        return v.get<T>();
    }

    static bool boolean(const nlohmann::json& obj, const char* key, bool fallback, const std::string& field) {
        if (!obj.contains(key)) return fallback;
        if (!obj[key].is_boolean()) fail(field, "expected true/false");
        return obj[key].get<bool>();
    }

    static const nlohmann::json& object(const nlohmann::json& root, const char* key) {
        static const nlohmann::json kEmpty = nlohmann::json::object();
        if (!root.contains(key)) return kEmpty;
        if (!root[key].is_object()) fail(key, "expected an object");
        return root[key];
    }

private:
    std::filesystem::path base_;
};

}  // namespace detail

/// Parses and validates a configuration. Relative paths resolve against
/// `base_dir` (normally the config file's directory).
inline PipelineConfig parse_config(const nlohmann::json& root, const std::filesystem::path& base_dir) {
    using detail::ConfigReader;
    ConfigReader rd(base_dir);
    if (!root.is_object()) ConfigReader::fail("(root)", "expected a JSON object");
    PipelineConfig c;

    if (!root.contains("output_dir")) ConfigReader::fail("output_dir", "required");
    c.output_dir = rd.path(root["output_dir"], "output_dir", false);
    c.seed = ConfigReader::number<std::uint64_t>(root, "seed", 0, "seed");
    c.threads = ConfigReader::number<unsigned>(root, "threads", 1, "threads");

    const auto& corpus = ConfigReader::object(root, "corpus");
    if (!corpus.contains("metadata")) ConfigReader::fail("corpus.metadata", "required");
    c.metadata = rd.path(corpus["metadata"], "corpus.metadata");
    if (corpus.contains("format")) {
        const auto f = corpus["format"].is_string() ? corpus["format"].get<std::string>() : "";
        if (f == "csv") c.metadata_format = MetadataFormat::Csv;
        else if (f == "jsonl") c.metadata_format = MetadataFormat::Jsonl;
        else ConfigReader::fail("corpus.format", "expected \"csv\" or \"jsonl\"");
    }
    c.fulltext = rd.opt_path(corpus, "fulltext", "corpus.fulltext");

    const auto& tok = ConfigReader::object(root, "tokenizer");
    c.lowercase = ConfigReader::boolean(tok, "lowercase", true, "tokenizer.lowercase");
    c.stem = ConfigReader::boolean(tok, "stem", true, "tokenizer.stem");
    c.stopwords = rd.opt_path(tok, "stopwords", "tokenizer.stopwords");

    if (root.contains("indices")) {
        if (!root["indices"].is_array()) ConfigReader::fail("indices", "expected an array");
        c.indices.clear();
        for (std::size_t i = 0; i < root["indices"].size(); ++i) {
            const auto& v = root["indices"][i];
            auto variant = v.is_string() ? parse_index_variant(v.get<std::string>()) : std::nullopt;
            if (!variant) ConfigReader::fail("indices[" + std::to_string(i) + "]", "unknown index variant");
            c.indices.push_back(*variant);
        }
    }
    c.save_indices = ConfigReader::boolean(root, "save_indices", false, "save_indices");

    if (!root.contains("topics")) ConfigReader::fail("topics", "required");
    c.topics = rd.path(root["topics"], "topics");
    c.qrels = rd.opt_path(root, "qrels", "qrels");
    c.ontology = rd.opt_path(root, "ontology", "ontology");
    c.lexicon = rd.opt_path(root, "lexicon", "lexicon");
    c.vectors = rd.opt_path(root, "vectors", "vectors");
    if (root.contains("external_runs")) {
        if (!root["external_runs"].is_array()) ConfigReader::fail("external_runs", "expected an array of paths");
        for (std::size_t i = 0; i < root["external_runs"].size(); ++i)
            c.external_runs.push_back(rd.path(root["external_runs"][i], "external_runs[" + std::to_string(i) + "]"));
    }

    const auto& bm25 = ConfigReader::object(root, "bm25");
    c.bm25.k1 = ConfigReader::number<double>(bm25, "k1", c.bm25.k1, "bm25.k1");
    c.bm25.b = ConfigReader::number<double>(bm25, "b", c.bm25.b, "bm25.b");
    c.bm25.max_results = ConfigReader::number<std::size_t>(bm25, "max_results", c.bm25.max_results, "bm25.max_results");
    const auto& rm3 = ConfigReader::object(root, "rm3");
    c.rm3.fb_docs = ConfigReader::number<std::size_t>(rm3, "fb_docs", c.rm3.fb_docs, "rm3.fb_docs");
    c.rm3.fb_terms = ConfigReader::number<std::size_t>(rm3, "fb_terms", c.rm3.fb_terms, "rm3.fb_terms");
    c.rm3.original_weight = ConfigReader::number<double>(rm3, "original_weight", c.rm3.original_weight, "rm3.original_weight");
    const auto& rrf = ConfigReader::object(root, "rrf");
    c.rrf.k = ConfigReader::number<double>(rrf, "k", c.rrf.k, "rrf.k");
    const auto& sob = ConfigReader::object(root, "soboroff");
    c.soboroff.pool_depth = ConfigReader::number<std::size_t>(sob, "pool_depth", c.soboroff.pool_depth, "soboroff.pool_depth");
    c.soboroff.sample_fraction =
        ConfigReader::number<double>(sob, "sample_fraction", c.soboroff.sample_fraction, "soboroff.sample_fraction");
    c.soboroff.trials = ConfigReader::number<std::size_t>(sob, "trials", c.soboroff.trials, "soboroff.trials");
    c.soboroff.select_middle =
        ConfigReader::number<std::size_t>(sob, "select_middle", c.soboroff.select_middle, "soboroff.select_middle");
    c.soboroff.seed = c.seed;
    if (sob.contains("measure")) {
        if (!sob["measure"].is_string()) ConfigReader::fail("soboroff.measure", "expected a measure name");
        c.soboroff_measure = sob["measure"].get<std::string>();
    }
    const auto& rerank = ConfigReader::object(root, "rerank");
    c.rerank_top_n = ConfigReader::number<std::size_t>(rerank, "top_n", c.rerank_top_n, "rerank.top_n");
    c.boost_year = ConfigReader::number<int>(rerank, "boost_year", c.boost_year, "rerank.boost_year");
    const auto& ev = ConfigReader::object(root, "eval");
    if (ev.contains("cutoffs")) {
        try {
            c.eval.cutoffs = ev["cutoffs"].get<std::vector<std::size_t>>();
        } catch (const nlohmann::json::exception&) {
            ConfigReader::fail("eval.cutoffs", "expected an array of positive integers");
        }
        if (c.eval.cutoffs.empty() || std::ranges::count(c.eval.cutoffs, std::size_t{0}))
            ConfigReader::fail("eval.cutoffs", "expected an array of positive integers");
    }
    c.eval.complete_topics = ConfigReader::boolean(ev, "complete_topics", true, "eval.complete_topics");

    auto check = [](auto&& validate, const char* field) {
        try {
            validate();
        } catch (const Error& e) {
            ConfigReader::fail(field, e.what());
        }
    };
    check([&] { c.bm25.validate(); }, "bm25");
    check([&] { c.rm3.validate(); }, "rm3");
    check([&] { c.rrf.validate(); }, "rrf");
    check([&] { (void)parse_measure(c.soboroff_measure); }, "soboroff.measure");
    if (!(c.soboroff.sample_fraction > 0.0 && c.soboroff.sample_fraction <= 1.0))
        ConfigReader::fail("soboroff.sample_fraction", "must be in (0, 1]");
    if (c.soboroff.trials == 0) ConfigReader::fail("soboroff.trials", "must be >= 1");
    if (c.soboroff.pool_depth == 0) ConfigReader::fail("soboroff.pool_depth", "must be >= 1");
    if (c.soboroff.select_middle == 0) ConfigReader::fail("soboroff.select_middle", "must be >= 1");

    if (!root.contains("recipes") || !root["recipes"].is_array() || root["recipes"].empty())
        ConfigReader::fail("recipes", "expected a non-empty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < root["recipes"].size(); ++i) {
        const auto field = "recipes[" + std::to_string(i) + "]";
        const auto& r = root["recipes"][i];
        Recipe recipe;
        std::string kind;
        if (r.is_string()) {
            recipe.name = kind = r.get<std::string>();
        } else if (r.is_object()) {
            if (!r.contains("name") || !r["name"].is_string()) ConfigReader::fail(field + ".name", "required string");
            recipe.name = r["name"].get<std::string>();
            kind = r.contains("kind") && r["kind"].is_string() ? r["kind"].get<std::string>() : recipe.name;
            if (r.contains("tag")) {
                if (!r["tag"].is_string()) ConfigReader::fail(field + ".tag", "expected a string");
                recipe.tag = r["tag"].get<std::string>();
            }
            if (r.contains("skip_runs")) {
                if (!r["skip_runs"].is_array()) ConfigReader::fail(field + ".skip_runs", "expected an array");
                for (const auto& s : r["skip_runs"]) {
                    if (!s.is_string()) ConfigReader::fail(field + ".skip_runs", "expected strings");
                    recipe.skip_runs.insert(s.get<std::string>());
                }
            }
        } else {
            ConfigReader::fail(field, "expected a recipe name or object");
        }
        auto parsed = parse_recipe_kind(kind);
        if (!parsed) ConfigReader::fail(field + ".kind", "unknown recipe kind '" + kind + "'");
        recipe.kind = *parsed;
        recipe.index = recipe.kind == RecipeKind::KuRun3 ? IndexVariant::Paragraph : IndexVariant::TitleAbstract;
        if (r.is_object() && r.contains("index")) {
            auto v = r["index"].is_string() ? parse_index_variant(r["index"].get<std::string>()) : std::nullopt;
            if (!v) ConfigReader::fail(field + ".index", "unknown index variant");
            recipe.index = *v;
        }
        if (recipe.name.empty() || recipe.name.find_first_of("/\\ \t") != std::string::npos)
            ConfigReader::fail(field + ".name", "must be a non-empty file-name-safe string");
        if (!names.insert(recipe.name).second) ConfigReader::fail(field + ".name", "duplicate recipe name '" + recipe.name + "'");
        if (recipe.tag.empty()) recipe.tag = recipe.name;
        if (recipe.kind == RecipeKind::KuRun3 && !c.vectors) ConfigReader::fail("vectors", "required by recipe " + recipe.name);
        if ((recipe.kind == RecipeKind::AllFiltering || recipe.kind == RecipeKind::SoboroffFiltering) &&
            c.external_runs.empty())
            ConfigReader::fail("external_runs", "required by recipe " + recipe.name);
        c.recipes.push_back(std::move(recipe));
    }
    return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot open config '" + path.string() + "'");
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ConfigInvalid, "(syntax): " + std::string(e.what()));
    }
    return parse_config(root, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

struct RecipeOutcome {
    std::string recipe;
    std::vector<std::filesystem::path> files;
    std::optional<std::string> error;
};

struct PipelineResult {
    std::vector<RecipeOutcome> recipes;
    std::vector<std::string> notices;
    bool ok() const {
        return std::all_of(recipes.begin(), recipes.end(), [](const auto& r) { return !r.error; });
    }
};

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    {
        std::vector<std::jthread> workers;
        for (unsigned w = 0; w < threads; ++w)
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mu);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
    }
    if (failure) std::rethrow_exception(failure);
}

/// Holds the loaded resources and caches indices and intermediate runs so
/// that recipes sharing work (the 16-run grid) compute it once.
class Pipeline {
public:
    explicit Pipeline(PipelineConfig config) : cfg_(std::move(config)) {}

    const PipelineConfig& config() const noexcept { return cfg_; }

    PipelineResult run() {
        PipelineResult result;
        load_resources(result);
        std::filesystem::create_directories(cfg_.output_dir);
        for (const auto& recipe : cfg_.recipes) {
            RecipeOutcome outcome{recipe.name, {}, std::nullopt};
            try {
                auto run = execute(recipe);
                run.tag = recipe.tag;
                for (auto& [_, list] : run.topics)
                    for (auto& e : list) e.tag = recipe.tag;
                quantize_scores(run);
                const auto check = validate_run(run);
                if (!check.ok()) throw Error(ErrorKind::InvalidParameter, "produced an invalid run: " + check.errors.front());
                const auto run_path = cfg_.output_dir / (recipe.name + ".run");
                write_run(run_path.string(), run);
                outcome.files.push_back(run_path);
                if (qrels_) {
                    const auto report = evaluate_all(run, *qrels_, cfg_.eval);
                    outcome.files.push_back(write_atomic(cfg_.output_dir / (recipe.name + ".eval.txt"),
                                                         [&](std::ostream& o) { write_report_table(o, report, recipe.tag); }));
                    outcome.files.push_back(write_atomic(cfg_.output_dir / (recipe.name + ".eval.csv"),
                                                         [&](std::ostream& o) { write_report_csv(o, report); }));
                }
            } catch (const std::exception& e) {
                outcome.error = "recipe '" + recipe.name + "': " + e.what();
            }
            result.recipes.push_back(std::move(outcome));
        }
        return result;
    }

    /// Executes one recipe and returns its (unquantized) run.
    Run execute(const Recipe& recipe) {
        switch (recipe.kind) {
            case RecipeKind::KuRun1: return ku_run1(recipe);
            case RecipeKind::KuRun2: return ku_run2(recipe);
            case RecipeKind::KuRun3: return ku_run3(recipe);
            case RecipeKind::FusionOfRuns: return fusion_of_runs(grid_flat(recipe), cfg_.rrf, recipe.tag);
            case RecipeKind::FusionOfFusions: return fusion_of_fusions(grid_groups(recipe), cfg_.rrf, recipe.tag);
            case RecipeKind::AllFiltering: return all_filtering(external_runs(), own_fusions(recipe), cfg_.rrf, recipe.tag);
            case RecipeKind::SoboroffFiltering:
                return soboroff_filtering(external_runs(), own_fusions(recipe), cfg_.soboroff,
                                          parse_measure(cfg_.soboroff_measure), cfg_.rrf, recipe.tag);
        }
        throw Error(ErrorKind::ConfigInvalid, "unhandled recipe kind");
    }

    const InvertedIndex& index(IndexVariant v) {
        auto& slot = indices_[v];
        if (!slot) {
            if (std::find(cfg_.indices.begin(), cfg_.indices.end(), v) == cfg_.indices.end())
                throw Error(ErrorKind::ConfigInvalid, "indices: variant '" + std::string(to_string(v)) + "' not enabled");
            slot = std::make_unique<InvertedIndex>(
                build_index(build_indexable_docs(records_, v), tokenizer_, std::max(1u, cfg_.threads)));
            if (cfg_.save_indices) {
                std::filesystem::create_directories(cfg_.output_dir / "index");
                save_index(*slot, (cfg_.output_dir / "index" / (std::string(to_string(v)) + ".idx")).string());
            }
        }
        return *slot;
    }

    /// One of the 16 grid runs (RM3 on one index configuration with one query variation).
    const Run& grid_run(VariationId variation, RunConfig rc) {
        const auto key = std::pair{variation, rc};
        if (auto it = grid_.find(key); it != grid_.end()) return it->second;
        const auto variant = rc == RunConfig::TitleAbstract ? IndexVariant::TitleAbstract
                             : rc == RunConfig::FullText    ? IndexVariant::FullText
                                                            : IndexVariant::Paragraph;
        const auto& idx = index(variant);
        const auto tag = std::string(to_string(variation)) + "." + std::string(to_string(rc));
        std::vector<std::vector<RunEntry>> per_topic(topics_.size());
        parallel_for(topics_.size(), cfg_.threads, [&](std::size_t i) {
            const auto& vars = variations_[i];
            const auto& text = vars[static_cast<std::size_t>(variation)].text;
            auto entries = rm3_search(idx, tokenizer_, text, cfg_.bm25, cfg_.rm3, topics_[i].number, tag);
            per_topic[i] = rc == RunConfig::ParagraphCollapsed ? collapse_paragraphs(entries) : std::move(entries);
        });
        Run run;
        run.tag = tag;
        for (std::size_t i = 0; i < topics_.size(); ++i) run.topics[topics_[i].number] = std::move(per_topic[i]);
        return grid_.emplace(key, std::move(run)).first->second;
    }

private:
    template <typename Fn>
    static std::filesystem::path write_atomic(const std::filesystem::path& path, Fn&& fn) {
        const auto tmp = path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorKind::IoFailure, "cannot write '" + tmp + "'");
            fn(out);
            out.close();
            if (!out) throw Error(ErrorKind::IoFailure, "cannot write '" + tmp + "'");
        }
        std::filesystem::rename(tmp, path);
        return path;
    }

    void load_resources(PipelineResult& result) {
        tokenizer_.lowercase = cfg_.lowercase;
        tokenizer_.stem = cfg_.stem;
        if (cfg_.stopwords) tokenizer_.stopwords = load_stopwords(cfg_.stopwords->string());
        records_ = parse_metadata(cfg_.metadata.string(), cfg_.metadata_format);
        if (cfg_.fulltext) {
            const auto unmatched = attach_fulltext(records_, load_fulltext(cfg_.fulltext->string()));
            if (unmatched)
                result.notices.push_back(std::to_string(unmatched) + " full-text entries match no metadata record");
        }
        years_ = publish_years(records_);
        topics_ = parse_topics_file(cfg_.topics.string());
        if (cfg_.ontology) {
            ontology_ = load_ontology(cfg_.ontology->string());
            if (ontology_.dropped_references())
                result.notices.push_back(std::to_string(ontology_.dropped_references()) +
                                         " ontology references to unknown concepts dropped");
        }
        if (cfg_.lexicon) lexicon_ = load_lexicon(cfg_.lexicon->string());
        if (cfg_.vectors) vectors_ = load_vectors(cfg_.vectors->string());
        if (cfg_.qrels)
            qrels_ = read_qrels(cfg_.qrels->string());
        else
            result.notices.push_back("no qrels configured: evaluation skipped");
        for (const auto& t : topics_) variations_.push_back(generate_variations(t, lexicon_));
    }

    template <typename Fn>
    Run per_topic_run(const std::string& tag, Fn&& fn) {
        std::vector<std::vector<RunEntry>> per_topic(topics_.size());
        parallel_for(topics_.size(), cfg_.threads, [&](std::size_t i) { per_topic[i] = fn(topics_[i]); });
        Run run;
        run.tag = tag;
        for (std::size_t i = 0; i < topics_.size(); ++i) run.topics[topics_[i].number] = std::move(per_topic[i]);
        return run;
    }

    // BM25 on the topic query, then the top-N published in the boost year first.
    Run ku_run1(const Recipe& r) {
        const auto& idx = index(r.index);
        return per_topic_run(r.tag, [&](const Topic& t) {
            auto entries = bm25_search(idx, tokenizer_, t.query, cfg_.bm25, t.number, r.tag);
            if (idx.variant() == IndexVariant::Paragraph) entries = collapse_paragraphs(entries);
            return recency_rerank(std::move(entries), years_, cfg_.rerank_top_n, cfg_.boost_year);
        });
    }

    // Weighted BM25 over the ontology/entity-expanded query.
    Run ku_run2(const Recipe& r) {
        const auto& idx = index(r.index);
        return per_topic_run(r.tag, [&](const Topic& t) {
            const auto wq = build_weighted_query(t, ontology_, lexicon_);
            auto entries = weighted_bm25_search(idx, tokenizer_, wq, cfg_.bm25, t.number, r.tag);
            if (idx.variant() == IndexVariant::Paragraph) entries = collapse_paragraphs(entries);
            return entries;
        });
    }

    // BM25 on paragraph documents, year boost on the top-N, then the top-N
    // re-sorted by embedding similarity, finally collapsed to articles.
    Run ku_run3(const Recipe& r) {
        const auto& idx = index(r.index);
        return per_topic_run(r.tag, [&](const Topic& t) {
            auto entries = bm25_search(idx, tokenizer_, t.query, cfg_.bm25, t.number, r.tag);
            entries = recency_rerank(std::move(entries), years_, cfg_.rerank_top_n, cfg_.boost_year);
            if (!entries.empty()) {
                auto tv = vectors_.topics.find(t.number);
                if (tv == vectors_.topics.end()) throw Error(ErrorKind::MissingVector, "topic:" + std::to_string(t.number));
                entries = similarity_rerank(std::move(entries), vectors_.docs, tv->second, cfg_.rerank_top_n);
            }
            if (idx.variant() == IndexVariant::Paragraph) entries = collapse_paragraphs(entries);
            return entries;
        });
    }

    static std::string grid_key(VariationId v, RunConfig rc) {
        return std::string(to_string(v)) + ":" + std::string(to_string(rc));
    }

    std::vector<Run> grid_flat(const Recipe& r) {
        std::vector<Run> out;
        for (auto v : kAllVariations)
            for (auto rc : kAllRunConfigs)
                if (!r.skip_runs.contains(grid_key(v, rc))) out.push_back(grid_run(v, rc));
        return out;
    }

    std::vector<std::vector<Run>> grid_groups(const Recipe& r) {
        std::vector<std::vector<Run>> out;
        for (auto v : kAllVariations) {
            std::vector<Run> group;
            for (auto rc : kAllRunConfigs)
                if (!r.skip_runs.contains(grid_key(v, rc))) group.push_back(grid_run(v, rc));
            out.push_back(std::move(group));
        }
        return out;
    }

    // fusionOfFusions and fusionOfRuns as extra inputs for the filtering recipes.
    std::vector<Run> own_fusions(const Recipe& r) {
        return {fusion_of_fusions(grid_groups(r), cfg_.rrf, "fusionOfFusions"),
                fusion_of_runs(grid_flat(r), cfg_.rrf, "fusionOfRuns")};
    }

    const std::vector<Run>& external_runs() {
        if (!external_loaded_) {
            for (const auto& p : cfg_.external_runs) external_.push_back(read_run(p.string(), {.rerank_by_score = true}));
            external_loaded_ = true;
        }
        return external_;
    }

    PipelineConfig cfg_;
    Tokenizer tokenizer_;
    std::vector<DocumentRecord> records_;
    PublishYears years_;
    std::vector<Topic> topics_;
    std::vector<std::vector<QueryVariation>> variations_;
    Ontology ontology_;
    EntityLexicon lexicon_;
    VectorStore vectors_;
    std::optional<Qrels> qrels_;
    std::map<IndexVariant, std::unique_ptr<InvertedIndex>> indices_;
    std::map<std::pair<VariationId, RunConfig>, Run> grid_;
    std::vector<Run> external_;
    bool external_loaded_ = false;
};

inline PipelineResult run_pipeline(const PipelineConfig& config) { return Pipeline(config).run(); }

}  // namespace metasearch
