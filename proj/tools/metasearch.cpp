// metasearch: command-line front end for the retrieval, fusion and
// evaluation toolkit.
//
// Exit status: 0 success, 1 operation or recipe failure, 2 usage or
// configuration error.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <metasearch/metasearch.hpp>

namespace ms = metasearch;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

constexpr const char* kConfigEnv = "METASEARCH_CONFIG";

struct TokenizerFlags {
    bool no_stem = false;
    bool no_lowercase = false;
    std::string stopwords;

    void attach(CLI::App* cmd) {
        cmd->add_flag("--no-stem", no_stem, "Disable Porter stemming");
        cmd->add_flag("--no-lowercase", no_lowercase, "Keep case");
        cmd->add_option("--stopwords", stopwords, "Stopword file (one word per line)")->check(CLI::ExistingFile);
    }

    ms::Tokenizer make() const {
        ms::Tokenizer t;
        t.stem = !no_stem;
        t.lowercase = !no_lowercase;
        if (!stopwords.empty()) t.stopwords = ms::load_stopwords(stopwords);
        return t;
    }
};

ms::MetadataFormat metadata_format(const std::string& path, const std::string& flag) {
    if (flag == "jsonl") return ms::MetadataFormat::Jsonl;
    if (flag == "csv") return ms::MetadataFormat::Csv;
    return path.ends_with(".jsonl") ? ms::MetadataFormat::Jsonl : ms::MetadataFormat::Csv;
}

void emit_run(const ms::Run& run, const std::string& out_path) {
    if (out_path.empty() || out_path == "-")
        ms::write_run(std::cout, run);
    else
        ms::write_run(out_path, run);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TREC-style retrieval, run fusion and evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "metasearch 1.0.0");

    int status = kOk;

    // index ------------------------------------------------------------------
    auto* index_cmd = app.add_subcommand("index", "Build and save an inverted index");
    std::string ix_metadata, ix_format = "auto", ix_fulltext, ix_variant = "title_abstract", ix_out;
    unsigned ix_threads = 1;
    TokenizerFlags ix_tok;
    index_cmd->add_option("--metadata", ix_metadata, "Metadata file (CSV or JSONL)")->required()->check(CLI::ExistingFile);
    index_cmd->add_option("--format", ix_format, "csv, jsonl or auto")->check(CLI::IsMember({"auto", "csv", "jsonl"}));
    index_cmd->add_option("--fulltext", ix_fulltext, "Full-text JSONL {doc_id, paragraphs}")->check(CLI::ExistingFile);
    index_cmd->add_option("--variant", ix_variant, "title_abstract, full_text or paragraph")
        ->check(CLI::IsMember({"title_abstract", "full_text", "paragraph"}));
    index_cmd->add_option("--out", ix_out, "Output index file")->required();
    index_cmd->add_option("--threads", ix_threads, "Tokenizer threads (0 = all cores)");
    ix_tok.attach(index_cmd);
    index_cmd->callback([&] {
        auto records = ms::parse_metadata(ix_metadata, metadata_format(ix_metadata, ix_format));
        if (!ix_fulltext.empty()) {
            if (auto n = ms::attach_fulltext(records, ms::load_fulltext(ix_fulltext)))
                std::cerr << "warning: " << n << " full-text entries match no metadata record\n";
        }
        const auto variant = *ms::parse_index_variant(ix_variant);
        const auto idx = ms::build_index(ms::build_indexable_docs(records, variant), ix_tok.make(), ix_threads);
        ms::save_index(idx, ix_out);
        std::cout << "docs\t" << idx.doc_count() << "\nterms\t" << idx.term_count() << "\ntokens\t" << idx.total_terms()
                  << "\navgdl\t" << idx.avgdl() << '\n';
    });

    // topics -----------------------------------------------------------------
    auto* topics_cmd = app.add_subcommand("topics", "Parse a topics file and list its topics");
    std::string tp_file;
    topics_cmd->add_option("file", tp_file, "Topics XML")->required()->check(CLI::ExistingFile);
    topics_cmd->callback([&] {
        for (const auto& t : ms::parse_topics_file(tp_file))
            std::cout << t.number << '\t' << t.query << '\t' << t.question << '\t' << t.narrative << '\n';
    });

    // expand -----------------------------------------------------------------
    auto* expand_cmd = app.add_subcommand("expand", "Show weighted queries or query variations per topic");
    std::string ex_topics, ex_ontology, ex_lexicon;
    bool ex_variations = false;
    expand_cmd->add_option("--topics", ex_topics, "Topics XML")->required()->check(CLI::ExistingFile);
    expand_cmd->add_option("--ontology", ex_ontology, "Ontology JSONL")->check(CLI::ExistingFile);
    expand_cmd->add_option("--lexicon", ex_lexicon, "Entity lexicon TSV")->check(CLI::ExistingFile);
    expand_cmd->add_flag("--variations", ex_variations, "Print the four query variations instead");
    expand_cmd->callback([&] {
        const auto ontology = ex_ontology.empty() ? ms::Ontology{} : ms::load_ontology(ex_ontology);
        const auto lexicon = ex_lexicon.empty() ? ms::EntityLexicon{} : ms::load_lexicon(ex_lexicon);
        for (const auto& t : ms::parse_topics_file(ex_topics)) {
            if (ex_variations) {
                for (const auto& v : ms::generate_variations(t, lexicon))
                    std::cout << t.number << '\t' << ms::to_string(v.id) << '\t' << v.text << '\n';
            } else {
                std::cout << t.number << '\t' << ms::build_weighted_query(t, ontology, lexicon).to_indri() << '\n';
            }
        }
    });

    // search -----------------------------------------------------------------
    auto* search_cmd = app.add_subcommand("search", "Retrieve a run for every topic from a saved index");
    std::string se_index, se_topics, se_model = "bm25", se_tag, se_out, se_ontology, se_lexicon;
    ms::Bm25Params se_bm25;
    ms::Rm3Params se_rm3;
    bool se_collapse = false;
    TokenizerFlags se_tok;
    search_cmd->add_option("--index", se_index, "Index file")->required()->check(CLI::ExistingFile);
    search_cmd->add_option("--topics", se_topics, "Topics XML")->required()->check(CLI::ExistingFile);
    search_cmd->add_option("--model", se_model, "bm25, rm3 or weighted")->check(CLI::IsMember({"bm25", "rm3", "weighted"}));
    search_cmd->add_option("--k1", se_bm25.k1, "BM25 k1");
    search_cmd->add_option("--b", se_bm25.b, "BM25 b");
    search_cmd->add_option("--max-results", se_bm25.max_results, "Results per topic");
    search_cmd->add_option("--fb-docs", se_rm3.fb_docs, "RM3 feedback documents");
    search_cmd->add_option("--fb-terms", se_rm3.fb_terms, "RM3 feedback terms");
    search_cmd->add_option("--original-weight", se_rm3.original_weight, "RM3 original query weight");
    search_cmd->add_option("--ontology", se_ontology, "Ontology JSONL (weighted model)")->check(CLI::ExistingFile);
    search_cmd->add_option("--lexicon", se_lexicon, "Entity lexicon TSV (weighted model)")->check(CLI::ExistingFile);
    search_cmd->add_flag("--collapse", se_collapse, "Collapse paragraph hits to articles");
    search_cmd->add_option("--tag", se_tag, "Run tag (default: model name)");
    search_cmd->add_option("--out", se_out, "Output run file (default: stdout)");
    se_tok.attach(search_cmd);
    search_cmd->callback([&] {
        const auto idx = ms::load_index(se_index);
        const auto tok = se_tok.make();
        const auto ontology = se_ontology.empty() ? ms::Ontology{} : ms::load_ontology(se_ontology);
        const auto lexicon = se_lexicon.empty() ? ms::EntityLexicon{} : ms::load_lexicon(se_lexicon);
        ms::Run run;
        run.tag = se_tag.empty() ? se_model : se_tag;
        for (const auto& t : ms::parse_topics_file(se_topics)) {
            std::vector<ms::RunEntry> entries;
            if (se_model == "bm25")
                entries = ms::bm25_search(idx, tok, t.query, se_bm25, t.number, run.tag);
            else if (se_model == "rm3")
                entries = ms::rm3_search(idx, tok, t.query, se_bm25, se_rm3, t.number, run.tag);
            else
                entries = ms::weighted_bm25_search(idx, tok, ms::build_weighted_query(t, ontology, lexicon), se_bm25,
                                                   t.number, run.tag);
            if (se_collapse) entries = ms::collapse_paragraphs(entries);
            run.topics[t.number] = std::move(entries);
        }
        ms::quantize_scores(run);
        emit_run(run, se_out);
    });

    // fuse -------------------------------------------------------------------
    auto* fuse_cmd = app.add_subcommand("fuse", "Reciprocal rank fusion of run files");
    std::vector<std::string> fu_runs;
    ms::RrfParams fu_params;
    std::string fu_tag = "rrf", fu_out;
    fuse_cmd->add_option("runs", fu_runs, "Run files")->required()->check(CLI::ExistingFile);
    fuse_cmd->add_option("--k", fu_params.k, "RRF constant");
    fuse_cmd->add_option("--max-results", fu_params.max_results, "Results per topic");
    fuse_cmd->add_option("--tag", fu_tag, "Run tag");
    fuse_cmd->add_option("--out", fu_out, "Output run file (default: stdout)");
    fuse_cmd->callback([&] {
        std::vector<ms::Run> runs;
        for (const auto& p : fu_runs) runs.push_back(ms::read_run(p, {.rerank_by_score = true}));
        auto fused = ms::rrf_fuse(runs, fu_params, fu_tag);
        ms::quantize_scores(fused);
        emit_run(fused, fu_out);
    });

    // eval -------------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a run against qrels");
    std::string ev_run, ev_qrels, ev_format = "table";
    std::vector<std::size_t> ev_cuts;
    double ev_rbp = 0.5;
    bool ev_judged_only = false;
    eval_cmd->add_option("--run", ev_run, "Run file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--qrels", ev_qrels, "Qrels file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--cut", ev_cuts, "Rank cutoffs for P and NDCG (repeatable; default 5,10,15,20,30)")
        ->check(CLI::PositiveNumber);
    eval_cmd->add_option("--rbp-p", ev_rbp, "RBP persistence")->check(CLI::Range(0.0, 1.0));
    eval_cmd->add_flag("--retrieved-only", ev_judged_only, "Average over topics present in the run only");
    eval_cmd->add_option("--format", ev_format, "table or csv")->check(CLI::IsMember({"table", "csv"}));
    eval_cmd->callback([&] {
        ms::EvalOptions opts;
        if (!ev_cuts.empty()) opts.cutoffs = ev_cuts;
        opts.rbp_persistence = ev_rbp;
        opts.complete_topics = !ev_judged_only;
        const auto run = ms::read_run(ev_run, {.rerank_by_score = true});
        const auto report = ms::evaluate_all(run, ms::read_qrels(ev_qrels), opts);
        if (ev_format == "csv")
            ms::write_report_csv(std::cout, report);
        else
            ms::write_report_table(std::cout, report, run.tag);
    });

    // stats ------------------------------------------------------------------
    auto* stats_cmd = app.add_subcommand("stats", "Relevant documents per corpus source");
    std::string st_qrels, st_metadata, st_format = "auto";
    stats_cmd->add_option("--qrels", st_qrels, "Qrels file")->required()->check(CLI::ExistingFile);
    stats_cmd->add_option("--metadata", st_metadata, "Metadata file")->required()->check(CLI::ExistingFile);
    stats_cmd->add_option("--format", st_format, "csv, jsonl or auto")->check(CLI::IsMember({"auto", "csv", "jsonl"}));
    stats_cmd->callback([&] {
        const auto records = ms::parse_metadata(st_metadata, metadata_format(st_metadata, st_format));
        ms::write_source_stats(std::cout, ms::source_stats(ms::read_qrels(st_qrels), records));
    });

    // agreement --------------------------------------------------------------
    auto* agree_cmd = app.add_subcommand("agreement", "Judgment agreement between two qrels files");
    std::string ag_a, ag_b;
    agree_cmd->add_option("ours", ag_a, "First qrels")->required()->check(CLI::ExistingFile);
    agree_cmd->add_option("theirs", ag_b, "Second qrels")->required()->check(CLI::ExistingFile);
    agree_cmd->callback([&] {
        const auto a = ms::read_qrels(ag_a);
        const auto b = ms::read_qrels(ag_b);
        std::printf("%-8s %8s %8s %8s %8s %8s %8s %8s\n", "mode", "common", "only_a", "only_b", "agreed", "%", "disagreed",
                    "%");
        for (bool binary : {false, true}) {
            const auto r = ms::agreement(a, b, binary);
            std::printf("%-8s %8zu %8zu %8zu %8zu %8.1f %8zu %8.1f\n", binary ? "binary" : "graded", r.common, r.only_a,
                        r.only_b, r.agreed, 100.0 * r.pct_agree(), r.disagreed, 100.0 * r.pct_disagree());
        }
    });

    // validate-run -----------------------------------------------------------
    auto* validate_cmd = app.add_subcommand("validate-run", "Check a run file's ranking invariants");
    std::string va_run;
    std::size_t va_cap = ms::kMaxResultsPerTopic;
    validate_cmd->add_option("run", va_run, "Run file")->required()->check(CLI::ExistingFile);
    validate_cmd->add_option("--cap", va_cap, "Maximum results per topic");
    validate_cmd->callback([&] {
        const auto v = ms::validate_run(ms::read_run(va_run), va_cap);
        for (const auto& e : v.errors) std::cout << "error: " << e << '\n';
        for (const auto& w : v.warnings) std::cout << "warning: " << w << '\n';
        if (v.ok()) std::cout << "ok\n";
        else status = kFailure;
    });

    // run --------------------------------------------------------------------
    auto* run_cmd = app.add_subcommand("run", "Execute the recipes of a pipeline config");
    std::string rn_config;
    std::vector<std::string> rn_only;
    run_cmd->add_option("--config", rn_config, std::string("Pipeline config (default: $") + kConfigEnv + ")");
    run_cmd->add_option("--recipe", rn_only, "Run only the named recipe(s)");
    run_cmd->callback([&] {
        if (rn_config.empty()) {
            if (const char* env = std::getenv(kConfigEnv)) rn_config = env;
        }
        if (rn_config.empty()) throw ms::Error(ms::ErrorKind::ConfigInvalid, std::string("no --config and $") + kConfigEnv + " unset");
        auto cfg = ms::load_config(rn_config);
        if (!rn_only.empty()) {
            std::erase_if(cfg.recipes, [&](const ms::Recipe& r) {
                return std::find(rn_only.begin(), rn_only.end(), r.name) == rn_only.end();
            });
            if (cfg.recipes.empty()) throw ms::Error(ms::ErrorKind::ConfigInvalid, "recipes: none selected");
        }
        const auto result = ms::run_pipeline(cfg);
        for (const auto& n : result.notices) std::cerr << "notice: " << n << '\n';
        for (const auto& r : result.recipes) {
            if (r.error) {
                std::cerr << "error: " << *r.error << '\n';
                continue;
            }
            for (const auto& f : r.files) std::cout << f.string() << '\n';
        }
        if (!result.ok()) status = kFailure;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    } catch (const ms::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ms::ErrorKind::ConfigInvalid ? kUsage : kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return status;
}
