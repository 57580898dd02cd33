#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

namespace ms = metasearch;
using namespace testing_support;

namespace {

constexpr const char* kFig2 = R"(<topic number="1">
<query>coronavirus origin</query>
<question>what is the origin of COVID-19</question>
<narrative>seeking range of information about the SARS-CoV-2 virus's origin, including
its evolution, animal source, and first transmission into humans</narrative>
</topic>)";

ms::EntityLexicon lexicon_of(const std::string& tsv) {
    std::istringstream in(tsv);
    return ms::load_lexicon(in);
}

ms::Ontology ontology_of(const std::string& jsonl) {
    std::istringstream in(jsonl);
    return ms::load_ontology(in);
}

ms::ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ms::Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "nothing thrown";
    return ms::ErrorKind::IoFailure;
}

}  // namespace

TEST(Topics, ParsesFigureTwo) {
    const auto topics = ms::parse_topics(kFig2);
    ASSERT_EQ(topics.size(), 1u);
    EXPECT_EQ(topics[0].number, 1);
    EXPECT_EQ(topics[0].query, "coronavirus origin");
    EXPECT_EQ(topics[0].question, "what is the origin of COVID-19");
    EXPECT_EQ(topics[0].narrative,
              "seeking range of information about the SARS-CoV-2 virus's origin, including its evolution, animal "
              "source, and first transmission into humans");
}

TEST(Topics, RoundFiles) {
    EXPECT_EQ(ms::parse_topics_file(fixture("topics/round1.xml").string()).size(), 30u);
    const auto all = ms::parse_topics_file(fixture("topics/round5.xml").string());
    ASSERT_EQ(all.size(), 50u);
    EXPECT_EQ(all.front().query, "coronavirus origin");
    EXPECT_EQ(all.back().number, 50);
}

TEST(Topics, EntitiesCommentsAndCdata) {
    const auto t = ms::parse_topics(R"(<?xml version="1.0"?>
<!-- header -->
<topics>
  <topic number="7"><query>a &amp; b</query><question><![CDATA[x < y?]]></question>
  <narrative>caf&#233; &#x41;</narrative></topic>
</topics>)");
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0].query, "a & b");
    EXPECT_EQ(t[0].question, "x < y?");
    EXPECT_EQ(t[0].narrative, "caf\xC3\xA9 A");
}

TEST(Topics, Errors) {
    EXPECT_EQ(kind_of([] { ms::parse_topics("<topic number=\"1\"><query>x</query>"); }), ms::ErrorKind::MalformedXml);
    EXPECT_EQ(kind_of([] { ms::parse_topics("<topic number=\"1\"><query>x</query><question>q</question></topic>"); }),
              ms::ErrorKind::MissingField);
    EXPECT_EQ(kind_of([] {
                  ms::parse_topics("<topic number=\"1\"><query> </query><question>q</question>"
                                   "<narrative>n</narrative></topic>");
              }),
              ms::ErrorKind::MissingField);
    EXPECT_EQ(kind_of([] {
                  ms::parse_topics("<topic><query>a</query><question>q</question><narrative>n</narrative></topic>");
              }),
              ms::ErrorKind::MissingField);
    EXPECT_EQ(kind_of([] { ms::parse_topics("<a><b></a></b>"); }), ms::ErrorKind::MalformedXml);
    try {
        ms::parse_topics("<topics>\n<topic number=\"1\">\n<query>x</qery>\n</topic></topics>");
        FAIL();
    } catch (const ms::Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Entities, PainInTheStomach) {
    const auto lex = lexicon_of("pain\tpain\tcondition\nstomach\tstomach\tanatomy\n");
    const auto got = ms::extract_entities("pain in the stomach", lex);
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0], (ms::Entity{"pain", "condition"}));
    EXPECT_EQ(got[1], (ms::Entity{"stomach", "anatomy"}));
}

TEST(Entities, RepeatedMentionDeduplicated) {
    const auto lex = lexicon_of("sars cov 2\tsars-cov-2\tvirus\n");
    const auto got = ms::extract_entities("sars cov 2 sars cov 2", lex);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].label, "sars-cov-2");
}

TEST(Entities, LongestMatchWinsAndNoOverlap) {
    const auto lex = lexicon_of("respiratory\trespiratory\tanatomy\nrespiratory failure\trespiratory failure\tcondition\n"
                                "failure mode\tfailure mode\tother\n");
    const auto got = ms::extract_entities("Respiratory failure mode", lex);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].label, "respiratory failure");
}

TEST(Entities, EmptyInputs) {
    EXPECT_TRUE(ms::extract_entities("", lexicon_of("a\ta\tb\n")).empty());
    EXPECT_TRUE(ms::extract_entities("anything at all", ms::EntityLexicon{}).empty());
}

TEST(Entities, LexiconErrors) {
    EXPECT_THROW(lexicon_of("only-one-column\n"), ms::Error);
    EXPECT_THROW(lexicon_of("a\tb\tc\td\n"), ms::Error);
    EXPECT_EQ(lexicon_of("# comment\n\nx\ty\tz\n").size(), 1u);
}

// Brute-force check of the matcher on small random inputs: the result equals
// a left-to-right scan that at each position takes the longest entry.
TEST(Entities, MatchesNaiveScan) {
    const std::vector<std::string> vocab{"a", "b", "c"};
    std::mt19937_64 rng(3);
    for (int round = 0; round < 300; ++round) {
        std::uniform_int_distribution<int> pick(0, 2), len(1, 3), count(1, 5), tlen(0, 10);
        std::vector<std::string> entries;
        std::string tsv;
        for (int i = count(rng); i > 0; --i) {
            std::string e;
            for (int j = len(rng); j > 0; --j) e += (e.empty() ? "" : " ") + vocab[pick(rng)];
            entries.push_back(e);
            tsv += e + "\t" + e + "\tt\n";
        }
        std::vector<std::string> words;
        for (int i = tlen(rng); i > 0; --i) words.push_back(vocab[pick(rng)]);
        std::string text;
        for (const auto& w : words) text += w + " ";

        std::vector<std::string> expect;
        for (std::size_t i = 0; i < words.size();) {
            std::size_t best = 0;
            std::string label;
            for (const auto& e : entries) {
                const auto ew = ms::split_words(e);
                if (ew.size() <= best || i + ew.size() > words.size()) continue;
                if (std::equal(ew.begin(), ew.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
                    best = ew.size();
                    label = e;
                }
            }
            if (best == 0) {
                ++i;
                continue;
            }
            if (std::find(expect.begin(), expect.end(), label) == expect.end()) expect.push_back(label);
            i += best;
        }
        std::vector<std::string> got;
        for (const auto& e : ms::extract_entities(text, lexicon_of(tsv))) got.push_back(e.label);
        ASSERT_EQ(got, expect) << "text: " << text;
    }
}

TEST(Ontology, CovidParentIsCoronavirusInfection) {
    const auto onto = ms::load_ontology(fixture("toy/ontology.jsonl").string());
    const auto alts = ms::expand_with_ontology({"COVID-19"}, onto);
    ASSERT_FALSE(alts.empty());
    EXPECT_EQ(alts.front(), "coronavirus infection");
}

TEST(Ontology, OneLevelOnly) {
    const auto onto = ontology_of(R"({"label":"a","parents":["b"]}
{"label":"b","parents":["c"]}
{"label":"c"}
)");
    EXPECT_EQ(ms::expand_with_ontology({"a"}, onto), std::vector<std::string>{"b"});
    EXPECT_EQ(ms::expand_with_ontology({"b"}, onto), (std::vector<std::string>{"c", "a"}));
}

TEST(Ontology, SynonymsAndUnknownReferences) {
    const auto onto = ontology_of(R"({"label":"covid-19","parents":["coronavirus infection","ghost"],"synonyms":["covid 19"]}
{"label":"coronavirus infection"}
)");
    EXPECT_EQ(onto.dropped_references(), 1u);
    EXPECT_EQ(ms::expand_with_ontology({"new covid 19 cases"}, onto), std::vector<std::string>{"coronavirus infection"});
    EXPECT_TRUE(ms::expand_with_ontology({"nothing here"}, onto).empty());
    EXPECT_TRUE(ms::expand_with_ontology({"covid-19"}, ms::Ontology{}).empty());
}

TEST(WeightedQuery, FigureTwoTopic) {
    const auto topic = ms::parse_topics(kFig2).front();
    const auto lex = ms::load_lexicon(fixture("toy/lexicon.tsv").string());
    const auto onto = ms::load_ontology(fixture("toy/ontology.jsonl").string());
    const auto wq = ms::build_weighted_query(topic, onto, lex);
    std::map<std::string, double> w;
    for (const auto& t : wq.terms) w[t.text] = t.weight;
    EXPECT_EQ(w.at("coronavirus"), 1.0);
    EXPECT_EQ(w.at("origin"), 1.0);
    EXPECT_EQ(w.at("coronavirus infection"), 0.7);
    EXPECT_EQ(w.at("covid-19"), 0.4);
    EXPECT_EQ(w.at("disease"), 0.1);
    EXPECT_EQ(wq.to_indri().substr(0, 36), "#weight( 1.0 coronavirus 1.0 origin ");
}

TEST(WeightedQuery, MaxWeightWins) {
    ms::WeightedQuery wq;
    wq.add("fever", ms::TermOrigin::EntityLabel);
    wq.add("Fever", ms::TermOrigin::OntologyAlternative);
    wq.add("fever", ms::TermOrigin::EntityType);
    ASSERT_EQ(wq.terms.size(), 1u);
    EXPECT_EQ(wq.terms[0].weight, 0.7);
}

// Every order of adding the four origins for one term leaves the highest weight.
TEST(WeightedQuery, ExhaustiveDedupOrders) {
    std::vector<ms::TermOrigin> origins{ms::TermOrigin::Original, ms::TermOrigin::OntologyAlternative,
                                        ms::TermOrigin::EntityLabel, ms::TermOrigin::EntityType};
    for (unsigned mask = 1; mask < 16; ++mask) {
        std::vector<ms::TermOrigin> subset;
        double best = 0;
        for (unsigned i = 0; i < 4; ++i)
            if (mask & (1u << i)) {
                subset.push_back(origins[i]);
                best = std::max(best, ms::origin_weight(origins[i]));
            }
        std::sort(subset.begin(), subset.end());
        do {
            ms::WeightedQuery wq;
            for (auto o : subset) wq.add("x y", o);
            ASSERT_EQ(wq.terms.size(), 1u);
            ASSERT_EQ(wq.terms[0].weight, best);
        } while (std::next_permutation(subset.begin(), subset.end()));
    }
}

TEST(WeightedQuery, WeightsComeFromFixedSet) {
    const auto lex = ms::load_lexicon(fixture("toy/lexicon.tsv").string());
    const auto onto = ms::load_ontology(fixture("toy/ontology.jsonl").string());
    for (const auto& t : ms::parse_topics_file(fixture("topics/round5.xml").string()))
        for (const auto& term : ms::build_weighted_query(t, onto, lex).terms)
            EXPECT_TRUE(term.weight == 1.0 || term.weight == 0.7 || term.weight == 0.4 || term.weight == 0.1);
}

TEST(Variations, FigureTwo) {
    const auto topic = ms::parse_topics(kFig2).front();
    const auto lex = ms::load_lexicon(fixture("toy/lexicon.tsv").string());
    const auto v = ms::generate_variations(topic, lex);
    ASSERT_EQ(v.size(), 4u);
    EXPECT_EQ(v[0].id, ms::VariationId::V1);
    EXPECT_EQ(v[0].text, "coronavirus origin covid-19");
    EXPECT_EQ(v[1].text, "coronavirus origin covid-19 sars-cov-2");
    EXPECT_EQ(v[2].text, "what is the origin of COVID-19 coronavirus");
    EXPECT_EQ(v[3].text, "what is the origin of COVID-19 coronavirus sars-cov-2");
}

TEST(Variations, EmptyLexiconKeepsBaseText) {
    const auto topic = ms::parse_topics(kFig2).front();
    const auto v = ms::generate_variations(topic, ms::EntityLexicon{});
    EXPECT_EQ(v[0].text, topic.query);
    EXPECT_EQ(v[1].text, topic.query);
    EXPECT_EQ(v[2].text, topic.question);
    EXPECT_EQ(v[3].text, topic.question);
}
