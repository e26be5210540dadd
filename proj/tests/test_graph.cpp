#include <doctest.h>

#include <random>

#include "testutil.hpp"
#include "tierrank/errors.hpp"
#include "tierrank/graph.hpp"

using namespace tierrank;

namespace {

EvidenceWindow window_fixture(const std::string& id, const std::string& text) {
    return {id, "doc", text, EvidenceGrade::B, "ACL", {}, 2};
}

// Entity-relation triple between two Condition entities.
Triple rel(const std::string& head, const std::string& relation,
           const std::string& tail, const std::string& window = "w1") {
    return {TripleKind::EntityRelation,
            {head, "Condition"},
            relation,
            {tail, "Condition"},
            window};
}

std::string triples_json(const std::string& inner) {
    return "{\"triples\": [" + inner + "]}";
}

const char* kInSchemaTriple =
    R"({"kind":"entity_relation",
        "head":{"name":"runners","type":"Population"},
        "relation":"has_condition",
        "tail":{"name":"achilles tendinopathy","type":"Condition"}})";

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("schema validity") {
    CHECK(Schema::pico_default().valid());
    CHECK(Schema::pico_neutral().valid());

    Schema overlap = Schema::pico_default();
    overlap.relation_types.insert("Population");  // clashes with entity type
    CHECK_FALSE(overlap.valid());
    CHECK_THROWS_AS(overlap.require_valid(), FormatError);

    Schema empty;
    CHECK_FALSE(empty.valid());
}

TEST_CASE("shipped schema configs match the built-in instantiations") {
    const std::string root = TIERRANK_TEST_DIR;
    const Schema pico = load_schema(root + "/../configs/schema_pico.json");
    CHECK(pico.entity_types == Schema::pico_default().entity_types);
    CHECK(pico.relation_types == Schema::pico_default().relation_types);
    CHECK(pico.attribute_types == Schema::pico_default().attribute_types);

    const Schema neutral =
        load_schema(root + "/../configs/schema_pico_neutral.json");
    CHECK(neutral.entity_types == Schema::pico_neutral().entity_types);
    CHECK(neutral.relation_types == Schema::pico_neutral().relation_types);
}

TEST_CASE("extract_triples") {
    const Schema schema = Schema::pico_default();
    SUBCASE("in-schema triple is retained with provenance") {
        MockScript script;
        script.complete_rules.push_back(
            {"", triples_json(kInSchemaTriple), 0, -1});
        MockGateway gw(std::move(script));
        const auto triples =
            extract_triples(window_fixture("w9", "text"), schema, gw);
        REQUIRE(triples.size() == 1);
        CHECK(triples[0].head.name == "runners");
        CHECK(triples[0].relation == "has_condition");
        CHECK(triples[0].source_window_id == "w9");
    }
    SUBCASE("out-of-schema relation is dropped") {
        MockScript script;
        script.complete_rules.push_back(
            {"",
             triples_json(
                 R"({"kind":"entity_relation",
                     "head":{"name":"x","type":"Population"},
                     "relation":"foo",
                     "tail":{"name":"y","type":"Condition"}})"),
             0, -1});
        MockGateway gw(std::move(script));
        CHECK(extract_triples(window_fixture("w1", "text"), schema, gw).empty());
    }
    SUBCASE("out-of-schema entity type is dropped") {
        MockScript script;
        script.complete_rules.push_back(
            {"",
             triples_json(
                 R"({"kind":"entity_relation",
                     "head":{"name":"x","type":"Martian"},
                     "relation":"has_condition",
                     "tail":{"name":"y","type":"Condition"}})"),
             0, -1});
        MockGateway gw(std::move(script));
        CHECK(extract_triples(window_fixture("w1", "text"), schema, gw).empty());
    }
    SUBCASE("attribute triples check the attribute type set") {
        MockScript script;
        script.complete_rules.push_back(
            {"",
             triples_json(
                 R"({"kind":"entity_attribute",
                     "head":{"name":"HIIT","type":"Intervention"},
                     "relation":"has_timepoint",
                     "tail":{"name":"12","type":"followup_weeks"}})"),
             0, -1});
        MockGateway gw(std::move(script));
        const auto triples =
            extract_triples(window_fixture("w2", "text"), schema, gw);
        REQUIRE(triples.size() == 1);
        CHECK(triples[0].kind == TripleKind::EntityAttribute);
    }
    SUBCASE("empty window text short-circuits") {
        MockGateway gw(MockScript{});
        EvidenceWindow w = window_fixture("w0", "placeholder");
        w.text.clear();
        CHECK(extract_triples(w, schema, gw).empty());
        CHECK(gw.counts().complete == 0);
    }
    SUBCASE("malformed reply yields an empty list, never fabricated triples") {
        MockScript script;
        script.complete_rules.push_back({"", "garbage", 0, -1});
        MockGateway gw(std::move(script));
        CHECK(extract_triples(window_fixture("w1", "text"), schema, gw).empty());
    }
}

TEST_CASE("propose_schema_extension") {
    SUBCASE("confidence threshold gates acceptance") {
        Schema schema = Schema::pico_default();
        MockScript script;
        script.complete_rules.push_back(
            {"",
             R"({"entity_types":[{"name":"Footwear","confidence":0.9},
                                 {"name":"Weather","confidence":0.5}],
                 "relation_types":[],"attribute_types":[]})",
             0, -1});
        MockGateway gw(std::move(script));
        const auto accepted = propose_schema_extension(
            window_fixture("w1", "text"), schema, 0.7, gw);
        REQUIRE(accepted.entity_types.size() == 1);
        CHECK(accepted.entity_types[0].name == "Footwear");
        CHECK(schema.entity_types.count("Footwear") == 1);
        CHECK(schema.entity_types.count("Weather") == 0);
    }
    SUBCASE("existing types are ignored idempotently") {
        Schema schema = Schema::pico_default();
        MockScript script;
        script.complete_rules.push_back(
            {"",
             R"({"entity_types":[{"name":"Population","confidence":0.99}],
                 "relation_types":[],"attribute_types":[]})",
             0, -1});
        MockGateway gw(std::move(script));
        const auto before = schema.entity_types.size();
        const auto accepted = propose_schema_extension(
            window_fixture("w1", "text"), schema, 0.5, gw);
        CHECK(accepted.empty());
        CHECK(schema.entity_types.size() == before);
    }
    SUBCASE("gateway failure yields an empty extension") {
        Schema schema = Schema::pico_default();
        MockScript script;
        script.complete_rules.push_back({"", "x", 1000, -1});
        MockGateway gw(std::move(script));
        CHECK(propose_schema_extension(window_fixture("w1", "t"), schema, 0.5,
                                       gw)
                  .empty());
    }
}

TEST_CASE("relational similarity") {
    CHECK(relational_similarity({"has_population", "uses_intervention"},
                                {"has_population", "uses_intervention"}) == 1.0);
    CHECK(relational_similarity({"a", "b"}, {"b", "c"}) ==
          doctest::Approx(1.0 / 3.0));
    CHECK(relational_similarity({}, {"x"}) == 0.0);
    CHECK(relational_similarity({}, {}) == 0.0);
}

TEST_CASE("semantic affinity") {
    CHECK(semantic_affinity(std::vector<double>{1, 0},
                            std::vector<double>{1, 0}) == 1.0);
    CHECK(semantic_affinity(std::vector<double>{1, 0},
                            std::vector<double>{0, 1}) == 0.0);
    CHECK(semantic_affinity(std::vector<double>{1, 2},
                            std::vector<double>{2, 4}) ==
          doctest::Approx(1.0));
    CHECK(semantic_affinity(std::vector<double>{0, 0},
                            std::vector<double>{1, 0}) == 0.0);
}

TEST_CASE("affinity combines the two terms") {
    GraphNode node{"n", "Condition", {"a", "b"}, {1, 0}};
    Community community;
    community.relation_profile = {{"b", 1}, {"c", 2}};
    community.centroid = {1, 0};

    SUBCASE("lambda zero reduces to Jaccard exactly") {
        CHECK(affinity(node, community, 0.0) == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("weighted sum") {
        // relational 1/3, semantic 1.0
        CHECK(affinity(node, community, 0.5) ==
              doctest::Approx(1.0 / 3.0 + 0.5));
    }
    SUBCASE("random instances: lambda zero ignores embeddings") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int i = 0; i < 50; ++i) {
            GraphNode n = node;
            n.embedding = {normal(rng), normal(rng)};
            CHECK(affinity(n, community, 0.0) == doctest::Approx(1.0 / 3.0));
        }
    }
}

TEST_CASE("compress_communities") {
    SUBCASE("empty graph gives an empty list") {
        CHECK(compress_communities({}, {}, 0.5, 0.05, 50).empty());
    }
    SUBCASE("clique with identical profiles collapses to one community") {
        std::vector<Triple> triples;
        const std::vector<std::string> names = {"a", "b", "c", "d"};
        for (std::size_t i = 0; i < names.size(); ++i) {
            for (std::size_t j = i + 1; j < names.size(); ++j) {
                triples.push_back(rel(names[i], "associated", names[j]));
            }
        }
        auto nodes = collect_nodes(triples);
        for (auto& n : nodes) n.embedding = {1.0, 0.0};
        const auto communities =
            compress_communities(nodes, triples, 0.5, 0.05, 50);
        REQUIRE(communities.size() == 1);
        CHECK(communities[0].members.size() == 4);
    }
    SUBCASE("disconnected pairs never merge across components") {
        // Two disjoint edges with disjoint relation types and orthogonal
        // embeddings; no node is adjacent to both sides of any cross pair.
        std::vector<Triple> triples = {rel("a", "r1", "b"),
                                       rel("c", "r2", "d")};
        auto nodes = collect_nodes(triples);
        for (auto& n : nodes) {
            n.embedding = (n.name == "a" || n.name == "b")
                              ? std::vector<double>{1.0, 0.0}
                              : std::vector<double>{0.0, 1.0};
        }
        const auto communities =
            compress_communities(nodes, triples, 0.5, 1e-6, 50);
        CHECK(communities.size() >= 2);
        // Still a partition.
        std::set<std::string> seen;
        std::size_t total = 0;
        for (const auto& c : communities) {
            total += c.members.size();
            for (const auto& m : c.members) CHECK(seen.insert(m).second);
        }
        CHECK(total == nodes.size());
    }
    SUBCASE("output partitions the node set on random graphs") {
        std::mt19937_64 rng(19);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_int_distribution<int> rel_pick(0, 3);
        for (int trial = 0; trial < 10; ++trial) {
            std::uniform_int_distribution<int> node_count(2, 14);
            const int n = node_count(rng);
            std::vector<Triple> triples;
            for (int e = 0; e < 2 * n; ++e) {
                std::uniform_int_distribution<int> pick(0, n - 1);
                const int i = pick(rng);
                const int j = pick(rng);
                if (i == j) continue;
                triples.push_back(rel("n" + std::to_string(i),
                                      "r" + std::to_string(rel_pick(rng)),
                                      "n" + std::to_string(j)));
            }
            auto nodes = collect_nodes(triples);
            for (auto& node : nodes) {
                node.embedding = {normal(rng), normal(rng), normal(rng)};
            }
            const auto communities =
                compress_communities(nodes, triples, 0.5, 0.2, 50);
            std::set<std::string> seen;
            std::size_t total = 0;
            for (const auto& c : communities) {
                CHECK(!c.members.empty());
                total += c.members.size();
                for (const auto& m : c.members) CHECK(seen.insert(m).second);
            }
            CHECK(total == nodes.size());
        }
    }
}

TEST_CASE("build_knowledge_tree") {
    // One community, two relation triples, one attribute.
    std::vector<Triple> triples = {
        rel("HIIT", "compares_to", "MICT", "w1"),
        rel("HIIT", "reports_outcome", "VO2max", "w2"),
        {TripleKind::EntityAttribute,
         {"HIIT", "Intervention"},
         "has_timepoint",
         {"12", "followup_weeks"},
         "w1"}};
    auto nodes = collect_nodes(triples);
    for (auto& n : nodes) n.embedding = {1.0};
    const auto communities = compress_communities(nodes, triples, 0.5, 0.5, 50);

    SUBCASE("level sizes and parent chains on the fixture") {
        const auto tree = build_knowledge_tree(communities, triples, 3, nullptr);
        CHECK(tree.community_ids.size() == communities.size());
        CHECK(tree.keywords.size() >= communities.size());
        CHECK(tree.triples.size() == 2);
        CHECK(tree.attributes.size() == 1);
        CHECK_NOTHROW(tree.require_well_formed(communities));
    }
    SUBCASE("gateway labels the keywords when it answers") {
        MockScript script;
        script.complete_rules.push_back({"", R"(["training intensity"])", 0, -1});
        MockGateway gw(std::move(script));
        const auto tree = build_knowledge_tree(communities, triples, 3, &gw);
        bool found = false;
        for (const auto& k : tree.keywords) {
            if (k.text == "training intensity") found = true;
        }
        CHECK(found);
        CHECK_NOTHROW(tree.require_well_formed(communities));
    }
    SUBCASE("empty triple set gives a tree with only communities") {
        const auto tree = build_knowledge_tree(communities, {}, 3, nullptr);
        CHECK(tree.triples.empty());
        CHECK(tree.attributes.empty());
        CHECK(tree.community_ids.size() == communities.size());
    }
    SUBCASE("cross-community triples index under the head entity") {
        // Force two singleton communities by using disjoint relations and
        // orthogonal embeddings with a tiny epsilon.
        std::vector<Triple> cross = {rel("x", "recommends_for", "y", "w1")};
        auto cross_nodes = collect_nodes(cross);
        cross_nodes[0].embedding = {1.0, 0.0};
        cross_nodes[1].embedding = {0.0, 1.0};
        const auto two =
            compress_communities(cross_nodes, cross, 0.5, 1e-9, 50);
        REQUIRE(two.size() == 2);
        const auto tree = build_knowledge_tree(two, cross, 1, nullptr);
        REQUIRE(tree.triples.size() == 1);
        // Head "x" is in the community whose first keyword is "x".
        const int kw = tree.triples[0].keyword_id;
        for (const auto& k : tree.keywords) {
            if (k.id == kw) {
                for (const auto& c : two) {
                    if (c.id == k.community_id) {
                        CHECK(std::find(c.members.begin(), c.members.end(),
                                        "x") != c.members.end());
                    }
                }
            }
        }
    }
}

TEST_CASE("graph persistence") {
    testutil::TempDir dir("graph");
    SUBCASE("empty graph round-trips") {
        KnowledgeGraph graph;
        graph.schema = Schema::pico_default();
        save_graph(graph, dir.file("empty.json"));
        const auto loaded = load_graph(dir.file("empty.json"));
        CHECK(loaded.schema.entity_types == graph.schema.entity_types);
        CHECK(loaded.nodes.empty());
        CHECK(loaded.triples.empty());
    }
    SUBCASE("generated graph round-trips") {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<Triple> triples;
        for (int i = 0; i < 200; ++i) {
            triples.push_back(rel("n" + std::to_string(i % 40),
                                  "recommends_for",
                                  "n" + std::to_string((i * 7 + 1) % 40),
                                  "w" + std::to_string(i % 10)));
        }
        KnowledgeGraph graph;
        graph.schema = Schema::pico_default();
        graph.triples = triples;
        graph.nodes = collect_nodes(triples);
        for (auto& n : graph.nodes) n.embedding = {normal(rng), normal(rng)};
        graph.communities =
            compress_communities(graph.nodes, triples, 0.5, 0.05, 10);
        graph.tree = build_knowledge_tree(graph.communities, triples, 2, nullptr);

        save_graph(graph, dir.file("gen.json"));
        const auto loaded = load_graph(dir.file("gen.json"));
        CHECK(loaded.nodes == graph.nodes);
        CHECK(loaded.triples == graph.triples);
        CHECK(loaded.communities.size() == graph.communities.size());
        CHECK(loaded.tree.triples.size() == graph.tree.triples.size());
        CHECK_NOTHROW(loaded.tree.require_well_formed(loaded.communities));
    }
    SUBCASE("truncated file is a parse error") {
        testutil::write_file(dir.file("trunc.json"),
                             R"({"format":"tierrank-graph","vers)");
        CHECK_THROWS_AS(load_graph(dir.file("trunc.json")), FormatError);
    }
}

TEST_CASE("extraction never invents: empty gateway output, empty graph") {
    MockScript script;
    script.complete_rules.push_back({"", triples_json(""), 0, -1});
    MockGateway gw(std::move(script));
    WindowStore store;
    store.add(window_fixture("w1", "some clinical text"));
    GraphBuildOptions options;
    const auto graph = build_graph(store, Schema::pico_default(), options, gw);
    CHECK(graph.nodes.empty());
    CHECK(graph.triples.empty());
    CHECK(graph.communities.empty());
}

}  // TEST_SUITE
