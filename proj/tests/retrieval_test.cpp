#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

namespace ms = metasearch;
using namespace testing_support;

namespace {

ms::Tokenizer raw_tokenizer() {
    ms::Tokenizer t;
    t.stem = false;
    t.stopwords.clear();
    return t;
}

std::vector<ms::IndexableDoc> plain_docs(const std::vector<std::string>& texts) {
    std::vector<ms::IndexableDoc> docs;
    for (std::size_t i = 0; i < texts.size(); ++i)
        docs.push_back({"d" + std::to_string(i), "d" + std::to_string(i), texts[i], ms::IndexVariant::TitleAbstract, {}});
    return docs;
}

ms::RunEntry entry(const std::string& surrogate, const std::string& original, int rank, double score) {
    return {1, surrogate, original, rank, score, "t"};
}

}  // namespace

TEST(Bm25, EqualDocumentsTieBreakOnIdDescending) {
    const auto idx = ms::build_index(plain_docs({"a b", "b c"}), raw_tokenizer());
    const auto hits = ms::bm25_search(idx, raw_tokenizer(), "b");
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].surrogate_id, "d1");
    EXPECT_EQ(hits[1].surrogate_id, "d0");
    EXPECT_DOUBLE_EQ(hits[0].score, hits[1].score);
    // idf = ln(1 + (2 - 2 + 0.5) / (2 + 0.5)), tf part = 1 * 2.2 / (1 + 1.2) = 1
    EXPECT_NEAR(hits[0].score, std::log(1.2), 1e-12);
    EXPECT_EQ(hits[0].rank, 1);
    EXPECT_EQ(hits[1].rank, 2);
}

TEST(Bm25, NoMatchingTermsGivesEmptyList) {
    const auto idx = ms::build_index(plain_docs({"a b", "b c"}), raw_tokenizer());
    EXPECT_TRUE(ms::bm25_search(idx, raw_tokenizer(), "zzz").empty());
    EXPECT_TRUE(ms::bm25_search(idx, raw_tokenizer(), "").empty());
}

TEST(Bm25, TokenizerMismatchRejected) {
    const auto idx = ms::build_index(plain_docs({"a b"}), raw_tokenizer());
    try {
        ms::bm25_search(idx, ms::Tokenizer{}, "a");
        FAIL();
    } catch (const ms::Error& e) {
        EXPECT_EQ(e.kind(), ms::ErrorKind::TokenizerMismatch);
    }
}

TEST(Bm25, ParametersValidated) {
    const auto idx = ms::build_index(plain_docs({"a b"}), raw_tokenizer());
    ms::Bm25Params p;
    p.b = 1.5;
    EXPECT_THROW(ms::bm25_search(idx, raw_tokenizer(), "a", p), ms::Error);
    p = {};
    p.k1 = -1;
    EXPECT_THROW(ms::bm25_search(idx, raw_tokenizer(), "a", p), ms::Error);
}

TEST(Bm25, CapAtMaxResults) {
    std::vector<std::string> texts(1500, "x");
    const auto idx = ms::build_index(plain_docs(texts), raw_tokenizer());
    const auto hits = ms::bm25_search(idx, raw_tokenizer(), "x");
    EXPECT_EQ(hits.size(), 1000u);
    EXPECT_EQ(hits.back().rank, 1000);
}

// Random corpora and weighted queries against a full-scan scorer.
TEST(Bm25, WeightedMatchesNaiveScorer) {
    std::mt19937_64 rng(17);
    const auto tok = raw_tokenizer();
    for (int round = 0; round < 200; ++round) {
        std::uniform_int_distribution<int> ndocs(1, 15), len(0, 12), word(0, 9), nq(1, 4), wpick(0, 3);
        std::vector<std::string> texts(ndocs(rng));
        std::vector<NaiveDoc> naive;
        for (std::size_t i = 0; i < texts.size(); ++i) {
            for (int k = len(rng); k > 0; --k) texts[i] += "t" + std::to_string(word(rng)) + " ";
            naive.push_back({"d" + std::to_string(i), tok(texts[i])});
        }
        const auto idx = ms::build_index(plain_docs(texts), tok);
        ms::WeightedQuery wq;
        std::map<std::string, double> w;
        for (int k = nq(rng); k > 0; --k) {
            const auto term = "t" + std::to_string(word(rng));
            const auto origin = static_cast<ms::TermOrigin>(wpick(rng));
            wq.add(term, origin);
        }
        for (const auto& t : wq.terms) w[t.text] = t.weight;
        const auto got = ms::weighted_bm25_search(idx, tok, wq);
        const auto want = oracle_bm25(naive, w);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_NEAR(got[i].score, want[i].second, 1e-9);
            // order only matters where the scores are distinguishable
            if (i + 1 < got.size() && std::abs(want[i].second - want[i + 1].second) > 1e-9)
                EXPECT_EQ(got[i].surrogate_id, want[i].first);
        }
    }
}

TEST(Bm25, PhraseTermsSpreadWeightOverTokens) {
    const auto idx = ms::build_index(plain_docs({"coronavirus infection", "infection", "other"}), raw_tokenizer());
    ms::WeightedQuery wq;
    wq.add("coronavirus infection", ms::TermOrigin::OntologyAlternative);
    const auto got = ms::weighted_bm25_search(idx, raw_tokenizer(), wq);
    const auto want = oracle_bm25({{"d0", {"coronavirus", "infection"}}, {"d1", {"infection"}}, {"d2", {"other"}}},
                                  {{"coronavirus", 0.7}, {"infection", 0.7}});
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0].surrogate_id, "d0");
    EXPECT_NEAR(got[0].score, want[0].second, 1e-12);
    EXPECT_NEAR(got[1].score, want[1].second, 1e-12);
}

TEST(Rm3, DiscriminativeFeedbackTermEntersQuery) {
    const std::vector<std::string> texts{"coronavirus origin wuhan wuhan market", "coronavirus origin bat",
                                         "weather humidity", "immunity antibody", "coronavirus vaccine trial"};
    const auto tok = raw_tokenizer();
    const auto idx = ms::build_index(plain_docs(texts), tok);
    ms::Rm3Params rp;
    rp.fb_docs = 3;
    rp.fb_terms = 10;
    const auto query = tok("coronavirus origin");
    const auto initial = ms::bm25_search(idx, tok, "coronavirus origin");
    const auto ex = ms::rm3_expand(idx, tok, query, initial, rp);
    ASSERT_TRUE(ex.query_weights.contains("wuhan"));
    EXPECT_GT(ex.query_weights.at("wuhan"), 0.0);

    // independent relevance model over the same feedback set
    std::vector<NaiveDoc> fb;
    std::vector<double> scores;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, initial.size()); ++i) {
        const auto d = std::stoi(initial[i].surrogate_id.substr(1));
        fb.push_back({initial[i].surrogate_id, tok(texts[static_cast<std::size_t>(d)])});
        scores.push_back(initial[i].score);
    }
    auto rm1 = oracle_rm1(fb, scores);
    double mass = 0;
    for (const auto& [_, p] : rm1) mass += p;  // all terms kept: fewer than fb_terms
    ASSERT_EQ(ex.feedback_terms.size(), rm1.size());
    for (const auto& [term, p] : ex.feedback_terms) EXPECT_NEAR(p, rm1.at(term) / mass, 1e-12) << term;
    double total = 0;
    for (const auto& [term, w] : ex.query_weights) {
        const double orig = (term == "coronavirus" || term == "origin") ? 0.5 : 0.0;
        EXPECT_NEAR(w, 0.5 * orig + 0.5 * rm1.at(term) / mass, 1e-12) << term;
        total += w;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Rm3, TruncatesToFbTermsAndSkipsStopwords) {
    ms::Tokenizer tok;
    tok.stem = false;
    tok.stopwords = {"zz"};
    const auto idx = ms::build_index(plain_docs({"q a b c d e f zz zz zz zz", "q g h"}), tok);
    ms::Rm3Params rp;
    rp.fb_docs = 2;
    rp.fb_terms = 3;
    const auto ex = ms::rm3_expand(idx, tok, {"q"}, ms::bm25_search(idx, tok, "q"), rp);
    EXPECT_EQ(ex.feedback_terms.size(), 3u);
    for (const auto& [t, _] : ex.feedback_terms) EXPECT_NE(t, "zz");
}

TEST(Rm3, OriginalWeightOneIsBm25) {
    ms::Rm3Params rp;
    rp.original_weight = 1.0;
    const auto tok = ms::Tokenizer{};
    auto recs = ms::parse_metadata(fixture("toy/metadata.csv").string(), ms::MetadataFormat::Csv);
    const auto idx = ms::build_index(ms::build_indexable_docs(recs, ms::IndexVariant::TitleAbstract), tok);
    for (const auto& t : ms::parse_topics_file(fixture("toy/topics.xml").string()))
        EXPECT_EQ(ms::rm3_search(idx, tok, t.query, {}, rp, t.number, "x"),
                  ms::bm25_search(idx, tok, t.query, {}, t.number, "x"));
}

TEST(Rm3, EmptyInitialRankingUnchanged) {
    const auto idx = ms::build_index(plain_docs({"a b"}), raw_tokenizer());
    EXPECT_TRUE(ms::rm3_search(idx, raw_tokenizer(), "zzz").empty());
}

TEST(Rm3, ParametersValidated) {
    const auto idx = ms::build_index(plain_docs({"a b"}), raw_tokenizer());
    ms::Rm3Params rp;
    rp.original_weight = 1.5;
    EXPECT_THROW(ms::rm3_search(idx, raw_tokenizer(), "a", {}, rp), ms::Error);
    rp = {};
    rp.fb_docs = 0;
    EXPECT_THROW(ms::rm3_search(idx, raw_tokenizer(), "a", {}, rp), ms::Error);
}

TEST(Recency, StablePartitionExample) {
    ms::PublishYears years{{"a", 2020}, {"b", 2005}, {"c", 2020}, {"d", std::nullopt}, {"e", 2020}};
    std::vector<ms::RunEntry> in;
    int r = 1;
    for (const char* id : {"a", "b", "c", "d", "e"}) in.push_back(entry(id, id, r, 10.0 - r)), ++r;
    const auto out = ms::recency_rerank(in, years, 50, 2020);
    EXPECT_EQ(ids_of(out), (Ranking{"a", "c", "e", "b", "d"}));
    for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_EQ(out[i].rank, static_cast<int>(i + 1));
        if (i) EXPECT_GT(out[i - 1].score, out[i].score);
    }
}

TEST(Recency, UnknownDocRejected) {
    ms::PublishYears years{{"a", 2020}};
    EXPECT_THROW(ms::recency_rerank({entry("zz", "zz", 1, 1.0)}, years), ms::Error);
}

TEST(Recency, RandomStablePartitionProperty) {
    std::mt19937_64 rng(23);
    for (int round = 0; round < 1000; ++round) {
        std::uniform_int_distribution<int> n_dist(0, 80), top(0, 60), year(2017, 2021);
        const auto list = random_ranking(rng, 1, 100, n_dist(rng));
        ms::PublishYears years;
        for (int i = 0; i < 100; ++i) {
            const int y = year(rng);
            years[doc_name(i)] = y == 2017 ? std::nullopt : std::optional<int>(y);
        }
        const auto n = static_cast<std::size_t>(top(rng));
        const auto out = ms::recency_rerank(list, years, n, 2020);
        // oracle: two filtered copies of the head, then the untouched tail
        Ranking want;
        const auto head = std::min(n, list.size());
        for (std::size_t i = 0; i < head; ++i)
            if (years[list[i].original_id] == 2020) want.push_back(list[i].surrogate_id);
        for (std::size_t i = 0; i < head; ++i)
            if (years[list[i].original_id] != 2020) want.push_back(list[i].surrogate_id);
        for (std::size_t i = head; i < list.size(); ++i) want.push_back(list[i].surrogate_id);
        ASSERT_EQ(ids_of(out), want);
        ms::Run run;
        run.topics[1] = out;
        ASSERT_TRUE(ms::validate_run(run).ok());
    }
}

TEST(Similarity, AnglesOrder) {
    std::unordered_map<std::string, ms::Vector> vecs{
        {"deg90", {0.0, 1.0}}, {"deg45", {1.0, 1.0}}, {"deg0", {2.0, 0.0}}};
    std::vector<ms::RunEntry> in{entry("deg90", "deg90", 1, 3), entry("deg45", "deg45", 2, 2), entry("deg0", "deg0", 3, 1)};
    const auto out = ms::similarity_rerank(in, vecs, {1.0, 0.0}, 50);
    EXPECT_EQ(ids_of(out), (Ranking{"deg0", "deg45", "deg90"}));
    EXPECT_NEAR(ms::cosine(vecs["deg45"], {1.0, 0.0}), std::sqrt(0.5), 1e-12);
}

TEST(Similarity, TailUntouchedAndErrors) {
    std::unordered_map<std::string, ms::Vector> vecs{{"a", {0.0, 1.0}}, {"b", {1.0, 0.0}}};
    std::vector<ms::RunEntry> in{entry("a", "a", 1, 3), entry("b", "b", 2, 2), entry("c", "c", 3, 1)};
    EXPECT_EQ(ids_of(ms::similarity_rerank(in, vecs, {1.0, 0.0}, 2)), (Ranking{"b", "a", "c"}));
    EXPECT_THROW(ms::similarity_rerank(in, vecs, {1.0, 0.0}, 3), ms::Error);
    EXPECT_THROW(ms::similarity_rerank(in, vecs, {1.0, 0.0, 0.0}, 2), ms::Error);
}

TEST(Similarity, LoadVectors) {
    std::istringstream in(R"({"id":"topic:3","vector":[1,0]}
{"id":"a.0","vector":[0.5,0.5]}
)");
    const auto store = ms::load_vectors(in);
    EXPECT_EQ(store.topics.at(3), (ms::Vector{1, 0}));
    EXPECT_EQ(store.docs.at("a.0"), (ms::Vector{0.5, 0.5}));
    std::istringstream bad("{\"id\":\"x\"}\n");
    EXPECT_THROW(ms::load_vectors(bad), ms::Error);
}

TEST(Collapse, FirstSeenExample) {
    std::vector<ms::RunEntry> in{entry("A.2", "A", 1, 5), entry("B.0", "B", 2, 4), entry("A.0", "A", 3, 3),
                                 entry("C.1", "C", 4, 2)};
    const auto out = ms::collapse_paragraphs(in);
    EXPECT_EQ(ids_of(out), (Ranking{"A", "B", "C"}));
    EXPECT_EQ(out[2].rank, 3);
    EXPECT_EQ(out[2].score, 2.0);
}

TEST(Collapse, RandomMatchesFirstSeenOracle) {
    std::mt19937_64 rng(29);
    for (int round = 0; round < 1000; ++round) {
        std::uniform_int_distribution<int> art(0, 30), para(0, 4);
        std::vector<ms::RunEntry> in;
        std::set<std::string> used;
        double score = 200;
        while (in.size() < 100) {
            const auto orig = doc_name(art(rng));
            const auto sur = orig + "." + std::to_string(para(rng));
            if (!used.insert(sur).second) continue;
            in.push_back(entry(sur, orig, static_cast<int>(in.size() + 1), score -= 1.0));
        }
        Ranking want;
        std::set<std::string> seen;
        for (const auto& e : in)
            if (seen.insert(e.original_id).second) want.push_back(e.original_id);
        const auto out = ms::collapse_paragraphs(in);
        ASSERT_EQ(ids_of(out), want);
        std::set<std::string> uniq;
        for (const auto& e : out) ASSERT_TRUE(uniq.insert(e.original_id).second);
        ms::Run run;
        run.topics[1] = out;
        ASSERT_TRUE(ms::validate_run(run).ok());
    }
}

TEST(Collapse, EqualScoresReorderedByArticleId) {
    // "a.5" sorts above "a-b.1" but "a-b" sorts above "a"
    const std::vector<ms::RunEntry> in{entry("a.5", "a", 1, 1.0), entry("a-b.1", "a-b", 2, 1.0)};
    const auto out = ms::collapse_paragraphs(in);
    EXPECT_EQ(ids_of(out), (Ranking{"a-b", "a"}));
    ms::Run run;
    run.topics[1] = out;
    EXPECT_TRUE(ms::validate_run(run).ok());
}
