#include <gtest/gtest.h>

#include "support.hpp"

namespace ms = metasearch;
using namespace testing_support;

namespace {

ms::Run make_run(const std::string& tag, std::map<int, std::vector<std::string>> lists) {
    ms::Run run;
    run.tag = tag;
    for (auto& [topic, ids] : lists) {
        auto& out = run.topics[topic];
        for (std::size_t i = 0; i < ids.size(); ++i)
            out.push_back({topic, ids[i], ids[i], static_cast<int>(i + 1), static_cast<double>(ids.size() - i), tag});
    }
    return run;
}

std::vector<ms::Run> random_runs(std::mt19937_64& rng, int n_runs, int topics, int pool, int depth) {
    std::vector<ms::Run> runs;
    for (int r = 0; r < n_runs; ++r) {
        ms::Run run;
        run.tag = "r" + std::to_string(r);
        for (int t = 1; t <= topics; ++t) run.topics[t] = random_ranking(rng, t, pool, depth, run.tag);
        runs.push_back(std::move(run));
    }
    return runs;
}

void expect_matches_oracle(const ms::Run& fused, const std::vector<ms::Run>& runs, double k) {
    for (const auto& [topic, list] : fused.topics) {
        std::vector<std::vector<ms::RunEntry>> lists;
        for (const auto& r : runs) lists.push_back(r.topics.at(topic));
        const auto want = oracle_rrf(lists, k);
        ASSERT_EQ(list.size(), want.size());
        for (std::size_t i = 0; i < list.size(); ++i) {
            ASSERT_EQ(list[i].original_id, want[i].first) << "topic " << topic << " rank " << i + 1;
            ASSERT_NEAR(list[i].score, want[i].second, 1e-12);
        }
    }
}

}  // namespace

TEST(Rrf, HandCase) {
    const auto a = make_run("a", {{1, {"x", "y"}}});
    const auto c = make_run("c", {{1, {"z", "x"}}});
    const auto fused = ms::rrf_fuse(std::vector<ms::Run>{a, c});
    ASSERT_EQ(fused.topics.at(1)[0].original_id, "x");
    EXPECT_NEAR(fused.topics.at(1)[0].score, 1.0 / 61 + 1.0 / 62, 1e-12);
    EXPECT_NEAR(fused.topics.at(1)[0].score, 0.0325225, 1e-6);
}

TEST(Rrf, DisjointRunsTieBrokenById) {
    const auto a = make_run("a", {{1, {"doc-a"}}});
    const auto b = make_run("b", {{1, {"doc-b"}}});
    for (const auto& runs : {std::vector<ms::Run>{a, b}, std::vector<ms::Run>{b, a}}) {
        const auto& list = ms::rrf_fuse(runs).topics.at(1);
        ASSERT_EQ(list.size(), 2u);
        EXPECT_EQ(list[0].original_id, "doc-b");
        EXPECT_EQ(list[1].original_id, "doc-a");
        EXPECT_EQ(list[0].score, 1.0 / 61);
        EXPECT_EQ(list[1].score, 1.0 / 61);
    }
}

TEST(Rrf, SingleRunPreservesOrder) {
    std::mt19937_64 rng(1);
    for (int round = 0; round < 50; ++round) {
        const auto runs = random_runs(rng, 1, 3, 200, 150);
        const auto fused = ms::rrf_fuse(runs);
        for (const auto& [t, list] : fused.topics) EXPECT_EQ(ids_of(list), ids_of(runs[0].topics.at(t)));
    }
}

TEST(Rrf, RandomInstancesMatchOracle) {
    std::mt19937_64 rng(2);
    for (int round = 0; round < 100; ++round) {
        std::uniform_int_distribution<int> nr(2, 6), depth(1, 40);
        const auto runs = random_runs(rng, nr(rng), 2, 50, depth(rng));
        expect_matches_oracle(ms::rrf_fuse(runs), runs, 60.0);
    }
}

TEST(Rrf, PermutationInvariant) {
    std::mt19937_64 rng(3);
    for (int round = 0; round < 50; ++round) {
        auto runs = random_runs(rng, 5, 2, 30, 20);
        const auto fused = ms::rrf_fuse(runs);
        std::shuffle(runs.begin(), runs.end(), rng);
        EXPECT_EQ(ms::rrf_fuse(runs).topics, fused.topics);
    }
}

TEST(Rrf, CapsAtMaxResults) {
    std::mt19937_64 rng(4);
    const auto runs = random_runs(rng, 3, 1, 2000, 900);
    const auto fused = ms::rrf_fuse(runs);
    EXPECT_EQ(fused.topics.at(1).size(), 1000u);
    EXPECT_TRUE(ms::validate_run(fused).ok());
}

TEST(Rrf, ParagraphRunsUseBestRankPerArticle) {
    ms::Run para;
    para.tag = "p";
    para.topics[1] = {{1, "x.3", "x", 1, 3.0, "p"}, {1, "y.0", "y", 2, 2.0, "p"}, {1, "x.0", "x", 3, 1.0, "p"}};
    const auto fused = ms::rrf_fuse(std::vector<ms::Run>{para});
    const auto& list = fused.topics.at(1);
    ASSERT_EQ(list.size(), 2u);
    EXPECT_EQ(list[0].original_id, "x");
    EXPECT_EQ(list[0].surrogate_id, "x");
    EXPECT_DOUBLE_EQ(list[0].score, 1.0 / 61);
}

TEST(Rrf, Errors) {
    EXPECT_THROW(ms::rrf_fuse(std::vector<ms::Run>{}), ms::Error);
    const auto a = make_run("a", {{1, {"x"}}, {2, {"y"}}});
    const auto b = make_run("b", {{1, {"x"}}});
    try {
        ms::rrf_fuse(std::vector<ms::Run>{a, b});
        FAIL();
    } catch (const ms::Error& e) {
        EXPECT_EQ(e.kind(), ms::ErrorKind::TopicSetMismatch);
    }
    ms::RrfParams p;
    p.k = 0;
    EXPECT_THROW(ms::rrf_fuse(std::vector<ms::Run>{a}, p), ms::Error);
}

TEST(FusionOfRuns, RequiresSixteen) {
    std::mt19937_64 rng(5);
    const auto runs = random_runs(rng, 15, 1, 20, 10);
    try {
        ms::fusion_of_runs(runs);
        FAIL();
    } catch (const ms::Error& e) {
        EXPECT_EQ(e.kind(), ms::ErrorKind::WrongRunCount);
    }
    const auto sixteen = random_runs(rng, 16, 2, 40, 20);
    expect_matches_oracle(ms::fusion_of_runs(sixteen), sixteen, 60.0);
}

TEST(FusionOfFusions, ShapeChecked) {
    std::mt19937_64 rng(6);
    std::vector<std::vector<ms::Run>> groups(3, random_runs(rng, 4, 1, 10, 5));
    EXPECT_THROW(ms::fusion_of_fusions(groups), ms::Error);
    groups.push_back(random_runs(rng, 3, 1, 10, 5));
    try {
        ms::fusion_of_fusions(groups);
        FAIL();
    } catch (const ms::Error& e) {
        EXPECT_EQ(e.kind(), ms::ErrorKind::WrongGroupShape);
    }
}

TEST(FusionOfFusions, MatchesTwoStageOracle) {
    std::mt19937_64 rng(7);
    for (int round = 0; round < 30; ++round) {
        std::vector<std::vector<ms::Run>> groups;
        for (int g = 0; g < 4; ++g) groups.push_back(random_runs(rng, 4, 2, 30, 15));
        const auto fused = ms::fusion_of_fusions(groups);
        for (const auto& [topic, list] : fused.topics) {
            std::vector<std::vector<ms::RunEntry>> stage2;
            for (const auto& g : groups) {
                std::vector<std::vector<ms::RunEntry>> lists;
                for (const auto& r : g) lists.push_back(r.topics.at(topic));
                std::vector<ms::RunEntry> ranked;
                int rank = 0;
                for (const auto& [d, s] : oracle_rrf(lists, 60)) ranked.push_back({topic, d, d, ++rank, s, "g"});
                stage2.push_back(ranked);
            }
            const auto want = oracle_rrf(stage2, 60);
            ASSERT_EQ(list.size(), want.size());
            for (std::size_t i = 0; i < list.size(); ++i) ASSERT_EQ(list[i].original_id, want[i].first);
        }
    }
}

TEST(AllFiltering, MatchesOracleAndCountsDuplicatesTwice) {
    std::mt19937_64 rng(8);
    const auto ext = random_runs(rng, 2, 2, 30, 20);
    const auto own = random_runs(rng, 2, 2, 30, 20);
    const auto fused = ms::all_filtering(ext, own);
    expect_matches_oracle(fused, {ext[0], ext[1], own[0], own[1]}, 60.0);

    const auto doubled = ms::all_filtering({ext[0], ext[0]}, {});
    const auto single = ms::rrf_fuse(std::vector<ms::Run>{ext[0]});
    for (const auto& [t, list] : doubled.topics) {
        EXPECT_EQ(ids_of(list), ids_of(single.topics.at(t)));
        for (std::size_t i = 0; i < list.size(); ++i)
            EXPECT_NEAR(list[i].score, 2 * single.topics.at(t)[i].score, 1e-15);
    }
}

TEST(Soboroff, SelectsMiddleNine) {
    std::mt19937_64 rng(9);
    const auto runs = random_runs(rng, 27, 3, 200, 100);
    ms::SoboroffParams p;
    p.seed = 42;
    p.trials = 20;
    const auto sel = ms::soboroff_select(runs, p);
    ASSERT_EQ(sel.selected.size(), 9u);
    ASSERT_EQ(sel.order.size(), 27u);
    std::set<std::size_t> top(sel.order.begin(), sel.order.begin() + 9);
    std::set<std::size_t> bottom(sel.order.end() - 9, sel.order.end());
    for (auto i : sel.selected) {
        EXPECT_FALSE(top.contains(i));
        EXPECT_FALSE(bottom.contains(i));
    }
    for (std::size_t i = 1; i < sel.order.size(); ++i)
        EXPECT_LE(sel.mean_rank[sel.order[i - 1]], sel.mean_rank[sel.order[i]]);
    const auto again = ms::soboroff_select(runs, p);
    EXPECT_EQ(again.selected, sel.selected);
    EXPECT_EQ(again.mean_rank, sel.mean_rank);
}

TEST(Soboroff, FullSampleWithAllTiedKeepsInputOrder) {
    std::mt19937_64 rng(10);
    const auto runs = random_runs(rng, 11, 1, 10, 10);
    ms::SoboroffParams p;
    p.pool_depth = 10;
    p.sample_fraction = 1.0;
    p.trials = 1;
    p.select_middle = 3;
    const auto sel = ms::soboroff_select(runs, p, ms::parse_measure("P_10"));
    EXPECT_EQ(sel.selected, (std::vector<std::size_t>{4, 5, 6}));
    for (double r : sel.mean_rank) EXPECT_DOUBLE_EQ(r, 6.0);
}

TEST(Soboroff, Errors) {
    std::mt19937_64 rng(11);
    const auto runs = random_runs(rng, 8, 1, 10, 5);
    ms::SoboroffParams p;
    auto kind = [&](const ms::SoboroffParams& params) {
        try {
            ms::soboroff_select(runs, params);
        } catch (const ms::Error& e) {
            return e.kind();
        }
        return ms::ErrorKind::ConfigInvalid;
    };
    EXPECT_EQ(kind(p), ms::ErrorKind::TooFewRuns);
    p.select_middle = 3;
    p.sample_fraction = 0.0;
    EXPECT_EQ(kind(p), ms::ErrorKind::InvalidFraction);
    p.sample_fraction = 1.5;
    EXPECT_EQ(kind(p), ms::ErrorKind::InvalidFraction);
}

TEST(Soboroff, FilteringFusesSelectionWithOwnRuns) {
    std::mt19937_64 rng(12);
    const auto cands = random_runs(rng, 27, 2, 100, 50);
    const auto own = random_runs(rng, 2, 2, 100, 50);
    ms::SoboroffParams p;
    p.trials = 5;
    const auto sel = ms::soboroff_select(cands, p);
    std::vector<ms::Run> inputs;
    for (auto i : sel.selected) inputs.push_back(cands[i]);
    inputs.insert(inputs.end(), own.begin(), own.end());
    expect_matches_oracle(ms::soboroff_filtering(cands, own, p), inputs, 60.0);
}
