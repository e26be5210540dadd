#include <doctest.h>

#include <random>

#include "testutil.hpp"
#include "tierrank/errors.hpp"
#include "tierrank/retrieval.hpp"

using namespace tierrank;

namespace {

std::vector<double> unit2(double angle) {
    return {std::cos(angle), std::sin(angle)};
}

ChannelRanking ranking_of(Channel channel,
                          const std::vector<std::string>& ids) {
    ChannelRanking r;
    r.channel = channel;
    int rank = 1;
    for (const auto& id : ids) r.entries.push_back({id, rank++, 1.0 / rank});
    return r;
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("dense search") {
    SUBCASE("self-similar window ranks first") {
        VectorIndex index;
        index.add("w1", EvidenceGrade::A, std::vector<double>{1.0, 0.0});
        index.add("w2", EvidenceGrade::B, std::vector<double>{0.0, 1.0});
        const auto ranking =
            dense_search(std::vector<double>{1.0, 0.0}, index, 10);
        REQUIRE(!ranking.entries.empty());
        CHECK(ranking.entries[0].window_id == "w1");
        CHECK(ranking.entries[0].rank == 1);
        CHECK(ranking.entries[0].score == doctest::Approx(1.0));
    }
    SUBCASE("grade filter restricts results") {
        VectorIndex index;
        index.add("a1", EvidenceGrade::A, unit2(0.1));
        index.add("b1", EvidenceGrade::B, unit2(0.05));
        index.add("b2", EvidenceGrade::C, unit2(0.0));
        const auto ranking = dense_search(
            unit2(0.0), index, 10, std::set<EvidenceGrade>{EvidenceGrade::A});
        REQUIRE(ranking.entries.size() == 1);
        CHECK(ranking.entries[0].window_id == "a1");
    }
    SUBCASE("empty index gives an empty ranking") {
        VectorIndex index;
        CHECK(dense_search(std::vector<double>{1.0}, index, 5).entries.empty());
    }
    SUBCASE("matches a brute-force argsort on random vectors") {
        std::mt19937_64 rng(41);
        std::normal_distribution<double> normal(0.0, 1.0);
        const int dim = 8;
        VectorIndex index;
        std::vector<std::pair<std::string, std::vector<double>>> raw;
        for (int i = 0; i < 200; ++i) {
            std::vector<double> v(dim);
            for (auto& x : v) x = normal(rng);
            char id[16];
            std::snprintf(id, sizeof(id), "w%03d", i);
            raw.emplace_back(id, v);
            index.add(id, EvidenceGrade::C, v);
        }
        std::vector<double> q(dim);
        for (auto& x : q) x = normal(rng);

        auto cosine_of = [&](const std::vector<double>& v) {
            double ab = 0.0, aa = 0.0, bb = 0.0;
            for (int i = 0; i < dim; ++i) {
                ab += q[i] * v[i];
                aa += q[i] * q[i];
                bb += v[i] * v[i];
            }
            return ab / (std::sqrt(aa) * std::sqrt(bb));
        };
        std::vector<std::pair<std::string, double>> expected;
        for (const auto& [id, vec] : raw) expected.emplace_back(id, cosine_of(vec));
        std::sort(expected.begin(), expected.end(), [](auto& a, auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });

        const auto ranking = dense_search(q, index, 200);
        REQUIRE(ranking.entries.size() == 200);
        for (int i = 0; i < 200; ++i) {
            CHECK(ranking.entries[i].window_id == expected[i].first);
            CHECK(ranking.entries[i].score ==
                  doctest::Approx(expected[i].second).epsilon(1e-12));
        }
    }
    SUBCASE("dimension mismatch is an error") {
        VectorIndex index;
        index.add("w1", EvidenceGrade::A, std::vector<double>{1.0, 0.0});
        CHECK_THROWS_AS(index.add("w2", EvidenceGrade::A,
                                  std::vector<double>{1.0, 0.0, 0.0}),
                        FormatError);
        CHECK_THROWS_AS(index.search(std::vector<double>{1.0}, 5), FormatError);
    }
}

TEST_CASE("rrf fusion") {
    SUBCASE("worked values at k = 60") {
        const std::vector<ChannelRanking> rankings = {
            ranking_of(Channel::Dense, {"d", "x1"}),
            ranking_of(Channel::Graph, {"d", "x2"}),
            ranking_of(Channel::Hyde, {"d", "x3"})};
        const auto fused = rrf_fuse(rankings, 60);
        REQUIRE(!fused.empty());
        CHECK(fused[0].first == "d");
        CHECK(fused[0].second == doctest::Approx(3.0 / 61.0).epsilon(1e-15));
    }
    SUBCASE("ranks (1,2,3) sum their reciprocal terms") {
        const std::vector<ChannelRanking> rankings = {
            ranking_of(Channel::Dense, {"d", "a", "b"}),
            ranking_of(Channel::Graph, {"a", "d", "b"}),
            ranking_of(Channel::Hyde, {"a", "b", "d"})};
        const auto fused = rrf_fuse(rankings, 60);
        double score_d = 0.0;
        for (const auto& [id, score] : fused) {
            if (id == "d") score_d = score;
        }
        CHECK(score_d ==
              doctest::Approx(1.0 / 61 + 1.0 / 62 + 1.0 / 63).epsilon(1e-15));
    }
    SUBCASE("single-channel presence is a single term") {
        const std::vector<ChannelRanking> rankings = {
            ranking_of(Channel::Dense, {"only"})};
        const auto fused = rrf_fuse(rankings, 60);
        REQUIRE(fused.size() == 1);
        CHECK(fused[0].second == doctest::Approx(1.0 / 61.0).epsilon(1e-15));
    }
    SUBCASE("ties break by window id ascending") {
        const std::vector<ChannelRanking> rankings = {
            ranking_of(Channel::Dense, {"zz", "aa"}),
            ranking_of(Channel::Graph, {"aa", "zz"})};
        const auto fused = rrf_fuse(rankings, 60);
        REQUIRE(fused.size() == 2);
        CHECK(fused[0].first == "aa");
        CHECK(fused[1].first == "zz");
    }
    SUBCASE("equals a naive recomputation on random rankings") {
        std::mt19937_64 rng(59);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<ChannelRanking> rankings;
            for (int c = 0; c < 3; ++c) {
                std::vector<std::string> ids;
                std::uniform_int_distribution<int> len(0, 20);
                const int n = len(rng);
                std::vector<int> pool(40);
                for (int i = 0; i < 40; ++i) pool[i] = i;
                std::shuffle(pool.begin(), pool.end(), rng);
                for (int i = 0; i < n; ++i) {
                    ids.push_back("w" + std::to_string(pool[i]));
                }
                rankings.push_back(
                    ranking_of(static_cast<Channel>(c), ids));
            }
            const auto fused = rrf_fuse(rankings, 60);
            const auto expected = testutil::naive_rrf(rankings, 60);
            REQUIRE(fused.size() == expected.size());
            for (const auto& [id, score] : fused) {
                CHECK(score ==
                      doctest::Approx(expected.at(id)).epsilon(1e-15));
            }
        }
    }
    SUBCASE("improving a rank in one channel never lowers the fused score") {
        std::mt19937_64 rng(61);
        for (int trial = 0; trial < 100; ++trial) {
            std::uniform_int_distribution<int> rank_pick(2, 15);
            const int r = rank_pick(rng);
            std::vector<std::string> ids;
            for (int i = 0; i < 16; ++i) ids.push_back("w" + std::to_string(i));
            // target sits at rank r in the dense channel
            std::swap(ids[0], ids[r - 1]);
            std::vector<ChannelRanking> base = {
                ranking_of(Channel::Dense, ids),
                ranking_of(Channel::Graph, {"w0", "w9"})};
            const auto before = rrf_fuse(base, 60);

            std::swap(ids[r - 1], ids[r - 2]);  // improve by one position
            std::vector<ChannelRanking> improved = {
                ranking_of(Channel::Dense, ids),
                ranking_of(Channel::Graph, {"w0", "w9"})};
            const auto after = rrf_fuse(improved, 60);

            auto score_of = [](const auto& fused, const std::string& id) {
                for (const auto& [wid, s] : fused) {
                    if (wid == id) return s;
                }
                return 0.0;
            };
            CHECK(score_of(after, "w0") >= score_of(before, "w0"));
        }
    }
}

TEST_CASE("picot anchors") {
    const std::string query =
        "HIIT vs MICT in prepubertal congenital heart disease patients";
    SUBCASE("anchors extracted and fabrications stripped") {
        MockScript script;
        script.complete_rules.push_back(
            {"HIIT vs MICT",
             R"({"P": "prepubertal congenital heart disease patients",
                 "I": "HIIT", "C": "MICT", "O": null, "T": "12 weeks"})",
             0, -1});
        MockGateway gw(std::move(script));
        const auto anchors = extract_picot_anchors(query, gw);
        CHECK(anchors.population ==
              "prepubertal congenital heart disease patients");
        CHECK(anchors.intervention == "HIIT");
        CHECK(anchors.comparator == "MICT");
        CHECK_FALSE(anchors.outcome.has_value());
        // "12 weeks" does not appear in the query: stripped.
        CHECK_FALSE(anchors.timeframe.has_value());
    }
    SUBCASE("empty query yields all-absent anchors without a gateway call") {
        MockGateway gw(MockScript{});
        const auto anchors = extract_picot_anchors("", gw);
        CHECK_FALSE(anchors.any());
        CHECK(gw.counts().complete == 0);
    }
    SUBCASE("gateway failure degrades to all-absent anchors") {
        MockScript script;
        script.complete_rules.push_back({"", "x", 1000, -1});
        MockGateway gw(std::move(script));
        CHECK_FALSE(extract_picot_anchors(query, gw).any());
    }
}

TEST_CASE("hypothetical generation") {
    PicotAnchors anchors;
    anchors.intervention = "HIIT";
    SUBCASE("conforming passages pass the anchor check") {
        MockScript script;
        script.complete_rules.push_back(
            {"", "A passage that reuses HIIT explicitly.", 0, -1});
        MockGateway gw(std::move(script));
        const auto passages = generate_hypotheticals("q", anchors, 3, 0.3, gw);
        CHECK(passages.size() == 3);
    }
    SUBCASE("all-absent anchors skip the check") {
        MockGateway gw(MockScript{});
        const auto passages =
            generate_hypotheticals("q", PicotAnchors{}, 2, 0.3, gw);
        CHECK(passages.size() == 2);
    }
    SUBCASE("non-conforming passages get one retry, then drop") {
        MockScript script;
        script.complete_rules.push_back({"", "no anchor here", 0, -1});
        MockGateway gw(std::move(script));
        const auto passages = generate_hypotheticals("q", anchors, 2, 0.3, gw);
        CHECK(passages.empty());
        CHECK(gw.counts().complete == 4);  // 2 passages x (1 try + 1 retry)
    }
    SUBCASE("retry can rescue a passage") {
        MockScript script;
        script.complete_rules.push_back({"", "missing anchors", 0, 1});
        script.complete_rules.push_back({"", "retry mentions HIIT", 0, -1});
        MockGateway gw(std::move(script));
        const auto passages = generate_hypotheticals("q", anchors, 1, 0.3, gw);
        REQUIRE(passages.size() == 1);
        CHECK(passages[0] == "retry mentions HIIT");
    }
}

TEST_CASE("hyde search") {
    VectorIndex index;
    index.add("w1", EvidenceGrade::B, std::vector<double>(
                                          hash_embed("knee ligament", 16)));
    index.add("w2", EvidenceGrade::B,
              std::vector<double>(hash_embed("shoulder cuff", 16)));
    MockGateway gw(MockScript{});

    SUBCASE("passage identical to a window text ranks it first") {
        const std::vector<std::string> passages = {"knee ligament"};
        const auto ranking = hyde_search(passages, index, 10, gw);
        REQUIRE(!ranking.entries.empty());
        CHECK(ranking.entries[0].window_id == "w1");
    }
    SUBCASE("best rank across passages is kept") {
        const std::vector<std::string> passages = {"knee ligament",
                                                   "shoulder cuff"};
        const auto ranking = hyde_search(passages, index, 10, gw);
        REQUIRE(ranking.entries.size() == 2);
        // both windows were rank 1 for one of the passages
        CHECK(ranking.entries[0].rank == 1);
    }
    SUBCASE("no passages, no ranking") {
        CHECK(hyde_search({}, index, 10, gw).entries.empty());
    }
}

TEST_CASE("dual track candidates") {
    MockGateway gw(MockScript{});
    FusionConfig config;
    config.hyde_passages = 1;

    VectorIndex index_a;
    index_a.add("a1", EvidenceGrade::A,
                std::vector<double>(hash_embed("guideline text", 16)));
    VectorIndex index_be;
    index_be.add("b1", EvidenceGrade::B,
                 std::vector<double>(hash_embed("review text", 16)));
    index_be.add("b2", EvidenceGrade::C,
                 std::vector<double>(hash_embed("trial text", 16)));

    SUBCASE("disjoint tracks merge to the union") {
        RetrievalInputs inputs{&index_a, &index_be, nullptr, nullptr};
        const auto result =
            dual_track_candidates("guideline text", inputs, config, gw);
        CHECK(result.merged.size() == 3);
        int a_count = 0;
        for (const auto& c : result.merged) {
            if (c.track == 'A') ++a_count;
        }
        CHECK(a_count == 1);
    }
    SUBCASE("empty grade-A store leaves only the B-E track") {
        VectorIndex empty_a;
        RetrievalInputs inputs{&empty_a, &index_be, nullptr, nullptr};
        const auto result =
            dual_track_candidates("review text", inputs, config, gw);
        CHECK(result.merged.size() == 2);
        for (const auto& c : result.merged) CHECK(c.track == 'B');
    }
}

TEST_CASE("ircot loop") {
    int retrievals = 0;
    auto retrieve_fn = [&](const std::string& q) {
        ++retrievals;
        return std::vector<std::string>{"w-" + q};
    };
    SUBCASE("sufficiency at the first reflection stops the loop") {
        MockScript script;
        script.complete_rules.push_back(
            {"retrieval controller", R"({"sufficient": true})", 0, -1});
        MockGateway gw(std::move(script));
        const auto result = ircot_loop("q", {}, retrieve_fn, gw, 5);
        CHECK(retrievals == 1);
        CHECK(result.trace.size() == 1);
        CHECK(result.trace[0].sufficient);
    }
    SUBCASE("always-insufficient runs exactly max_iters retrievals") {
        retrievals = 0;
        MockScript script;
        script.complete_rules.push_back(
            {"retrieval controller",
             R"({"sufficient": false, "subquery": "follow-up"})", 0, -1});
        MockGateway gw(std::move(script));
        const auto result = ircot_loop("q", {}, retrieve_fn, gw, 3);
        CHECK(retrievals == 3);
        CHECK(result.trace.size() == 3);
        // accumulation is the union of per-iteration results
        CHECK(result.accumulated ==
              std::vector<std::string>{"w-q", "w-follow-up"});
    }
    SUBCASE("provided subqueries feed the loop when the gateway gives none") {
        retrievals = 0;
        MockScript script;
        script.complete_rules.push_back(
            {"retrieval controller", R"({"sufficient": false})", 0, -1});
        MockGateway gw(std::move(script));
        const std::vector<std::string> subqueries = {"s1", "s2"};
        const auto result = ircot_loop("q", subqueries, retrieve_fn, gw, 3);
        CHECK(retrievals == 3);
        CHECK(result.accumulated ==
              std::vector<std::string>{"w-q", "w-s1", "w-s2"});
    }
    SUBCASE("gateway failure mid-loop returns the accumulation so far") {
        retrievals = 0;
        MockScript script;
        script.complete_rules.push_back({"retrieval controller", "x", 1000, -1});
        MockGateway gw(std::move(script));
        const auto result = ircot_loop("q", {}, retrieve_fn, gw, 4);
        CHECK(retrievals == 1);
        CHECK(result.accumulated == std::vector<std::string>{"w-q"});
    }
}

TEST_CASE("query decomposition") {
    const Schema schema = Schema::pico_default();
    SUBCASE("typed subqueries pass through with validated tags") {
        MockScript script;
        script.complete_rules.push_back(
            {"retrieval planner",
             R"([{"text": "find HIIT", "level": "node"},
                 {"text": "HIIT compares_to MICT", "level": "triple"},
                 {"text": "verify cardio topic", "level": "community"}])",
             0, -1});
        MockGateway gw(std::move(script));
        const auto subqueries = decompose_query("q", schema, gw);
        REQUIRE(subqueries.size() == 3);
        CHECK(subqueries[0].level == SubqueryLevel::Node);
        CHECK(subqueries[1].level == SubqueryLevel::Triple);
        CHECK(subqueries[2].level == SubqueryLevel::Community);
    }
    SUBCASE("invalid tag coerces to node level") {
        MockScript script;
        script.complete_rules.push_back(
            {"retrieval planner",
             R"([{"text": "x", "level": "galaxy"}])", 0, -1});
        MockGateway gw(std::move(script));
        const auto subqueries = decompose_query("q", schema, gw);
        REQUIRE(subqueries.size() == 1);
        CHECK(subqueries[0].level == SubqueryLevel::Node);
    }
    SUBCASE("empty query falls back to itself at node level") {
        MockGateway gw(MockScript{});
        const auto subqueries = decompose_query("", schema, gw);
        REQUIRE(subqueries.size() == 1);
        CHECK(subqueries[0].level == SubqueryLevel::Node);
    }
    SUBCASE("gateway garbage falls back to the original query") {
        MockScript script;
        script.complete_rules.push_back({"retrieval planner", "not json", 0, -1});
        MockGateway gw(std::move(script));
        const auto subqueries = decompose_query("the question", schema, gw);
        REQUIRE(subqueries.size() == 1);
        CHECK(subqueries[0].text == "the question");
    }
}

TEST_CASE("graph channel search") {
    // Two triples in one community; windows w1 and w2.
    std::vector<Triple> triples = {
        {TripleKind::EntityRelation,
         {"eccentric loading", "Intervention"},
         "recommends_for",
         {"achilles tendinopathy", "Condition"},
         "w1"},
        {TripleKind::EntityRelation,
         {"shockwave therapy", "Intervention"},
         "recommends_for",
         {"plantar heel pain", "Condition"},
         "w2"}};
    KnowledgeGraph graph;
    graph.schema = Schema::pico_default();
    graph.triples = triples;
    graph.nodes = collect_nodes(triples);
    for (auto& n : graph.nodes) n.embedding = {1.0};
    graph.communities =
        compress_communities(graph.nodes, triples, 0.5, 0.05, 10);
    graph.tree = build_knowledge_tree(graph.communities, triples, 2, nullptr);

    SUBCASE("entity named in the query surfaces its source window first") {
        const auto ranking =
            graph_search("does eccentric loading help?", graph, 10);
        REQUIRE(!ranking.entries.empty());
        CHECK(ranking.entries[0].window_id == "w1");
    }
    SUBCASE("no lexical overlap, no results") {
        CHECK(graph_search("zzz qqq", graph, 10).entries.empty());
    }
    SUBCASE("window reachable through two triples appears once") {
        std::vector<Triple> doubled = triples;
        doubled.push_back({TripleKind::EntityRelation,
                           {"eccentric loading", "Intervention"},
                           "reports_outcome",
                           {"pain score", "Outcome"},
                           "w1"});
        KnowledgeGraph g2;
        g2.schema = graph.schema;
        g2.triples = doubled;
        g2.nodes = collect_nodes(doubled);
        for (auto& n : g2.nodes) n.embedding = {1.0};
        g2.communities = compress_communities(g2.nodes, doubled, 0.5, 0.05, 10);
        g2.tree = build_knowledge_tree(g2.communities, doubled, 2, nullptr);
        const auto ranking = graph_search("eccentric loading", g2, 10);
        int w1_count = 0;
        for (const auto& e : ranking.entries) {
            if (e.window_id == "w1") ++w1_count;
        }
        CHECK(w1_count == 1);
    }
}

}  // TEST_SUITE
