#include "tierrank/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tierrank/prompts.hpp"
#include "tierrank/text.hpp"
#include "tierrank/vec.hpp"

namespace tierrank {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Schema

bool Schema::valid() const {
    if (entity_types.empty() || relation_types.empty() ||
        attribute_types.empty()) {
        return false;
    }
    std::set<std::string> all;
    for (const auto* set : {&entity_types, &relation_types, &attribute_types}) {
        for (const auto& name : *set) {
            if (!all.insert(name).second) return false;
        }
    }
    return true;
}

void Schema::require_valid() const {
    if (!valid()) {
        throw FormatError(
            "schema must have non-empty type sets with names unique across "
            "entity/relation/attribute kinds");
    }
}

Schema Schema::pico_default() {
    Schema s;
    s.entity_types = {"Population",     "Condition",  "Intervention",
                      "Comparator",     "Outcome",    "Timepoint",
                      "Arm",            "Device",     "Recommendation",
                      "AdverseEvent",   "Contraindication"};
    s.relation_types = {"has_population",     "has_condition",
                        "uses_intervention",  "compares_to",
                        "reports_outcome",    "has_timepoint",
                        "targets_arm",        "uses_device",
                        "recommends_for",     "recommends_against",
                        "has_adverse_event",  "contraindicated_for"};
    s.attribute_types = {"age_bin",
                         "age_range",
                         "sex",
                         "baseline_severity",
                         "time_since_injury_or_surgery",
                         "inclusion_criteria",
                         "exclusion_criteria",
                         "dose",
                         "frequency",
                         "session_duration",
                         "intensity",
                         "progression_rule",
                         "setting",
                         "supervision",
                         "followup_weeks",
                         "timepoint_value",
                         "timepoint_unit",
                         "measure_name",
                         "outcome_domain",
                         "primary_outcome",
                         "adverse_event",
                         "contraindication",
                         "recommendation_strength",
                         "evidence_certainty",
                         "applicability_notes",
                         "study_design",
                         "sample_size",
                         "protocol_params"};
    return s;
}

Schema Schema::pico_neutral() {
    Schema s;
    s.entity_types = {"ClinicalConcept", "EvidenceStatement", "Study",
                      "Guideline",       "Recommendation",    "Protocol",
                      "OutcomeMeasure",  "Device",            "AdverseEvent",
                      "Contraindication", "Topic"};
    s.relation_types = {"mentions",        "associated_with",
                        "belongs_to_topic", "reported_in",
                        "supported_by",    "has_protocol",
                        "uses_device",     "reports_measure",
                        "recommends_for",  "recommends_against",
                        "has_adverse_event", "contraindicated_for"};
    s.attribute_types = pico_default().attribute_types;
    return s;
}

// ---------------------------------------------------------------------------
// Extraction

namespace {

std::string schema_summary(const Schema& schema) {
    json j = {{"entity_types", schema.entity_types},
              {"relation_types", schema.relation_types},
              {"attribute_types", schema.attribute_types}};
    return j.dump();
}

bool in_schema(const Schema& schema, const Triple& t) {
    if (!schema.relation_types.count(t.relation)) return false;
    if (!schema.entity_types.count(t.head.type)) return false;
    if (t.kind == TripleKind::EntityRelation) {
        return schema.entity_types.count(t.tail.type) > 0;
    }
    return schema.attribute_types.count(t.tail.type) > 0;
}

}  // namespace

std::vector<Triple> extract_triples(const EvidenceWindow& window,
                                    const Schema& schema,
                                    ModelGateway& gateway) {
    schema.require_valid();
    if (window.text.empty()) return {};

    std::string prompt = prompts::fill(prompts::kExtractTriplesTemplate,
                                       "schema", schema_summary(schema));
    prompt = prompts::fill(std::move(prompt), "window", window.text);

    std::vector<Triple> kept;
    try {
        const json j = json::parse(gateway.complete(prompt, 0.0));
        for (const auto& entry : j.at("triples")) {
            Triple t;
            const std::string kind = entry.value("kind", "entity_relation");
            t.kind = kind == "entity_attribute" ? TripleKind::EntityAttribute
                                                : TripleKind::EntityRelation;
            t.head = {entry.at("head").at("name").get<std::string>(),
                      entry.at("head").at("type").get<std::string>()};
            t.relation = entry.at("relation").get<std::string>();
            t.tail = {entry.at("tail").at("name").get<std::string>(),
                      entry.at("tail").at("type").get<std::string>()};
            t.source_window_id = window.id;
            if (in_schema(schema, t)) {
                kept.push_back(std::move(t));
            } else {
                spdlog::warn("dropping out-of-schema triple ({} -{}-> {})",
                             t.head.name, t.relation, t.tail.name);
            }
        }
    } catch (const std::exception& e) {
        spdlog::warn("triple extraction failed for window '{}': {}", window.id,
                     e.what());
        return {};
    }
    return kept;
}

SchemaExtension propose_schema_extension(const EvidenceWindow& window,
                                         Schema& schema, double mu,
                                         ModelGateway& gateway) {
    if (mu < 0.0 || mu > 1.0) throw Error("mu must be in [0,1]");
    std::string prompt = prompts::fill(prompts::kSchemaExtensionTemplate,
                                       "schema", schema_summary(schema));
    prompt = prompts::fill(std::move(prompt), "window", window.text);

    SchemaExtension accepted;
    try {
        const json j = json::parse(gateway.complete(prompt, 0.0));
        auto take = [&](const char* key, std::set<std::string>& target,
                        std::vector<SchemaExtension::Proposal>& out) {
            for (const auto& p : j.value(key, json::array())) {
                SchemaExtension::Proposal proposal{
                    p.at("name").get<std::string>(),
                    p.at("confidence").get<double>()};
                if (proposal.confidence < mu) continue;
                // Idempotent: names already present anywhere are ignored.
                if (schema.entity_types.count(proposal.name) ||
                    schema.relation_types.count(proposal.name) ||
                    schema.attribute_types.count(proposal.name)) {
                    continue;
                }
                target.insert(proposal.name);
                out.push_back(std::move(proposal));
            }
        };
        take("entity_types", schema.entity_types, accepted.entity_types);
        take("relation_types", schema.relation_types, accepted.relation_types);
        take("attribute_types", schema.attribute_types,
             accepted.attribute_types);
    } catch (const std::exception& e) {
        spdlog::warn("schema extension failed for window '{}': {}", window.id,
                     e.what());
        return {};
    }
    return accepted;
}

// ---------------------------------------------------------------------------
// Nodes and communities

std::vector<GraphNode> collect_nodes(std::span<const Triple> triples) {
    std::vector<GraphNode> nodes;
    std::map<std::string, std::size_t> index;
    auto touch = [&](const EntityRef& ref) -> GraphNode& {
        auto it = index.find(ref.name);
        if (it == index.end()) {
            index[ref.name] = nodes.size();
            nodes.push_back({ref.name, ref.type, {}, {}});
            return nodes.back();
        }
        return nodes[it->second];
    };
    for (const auto& t : triples) {
        touch(t.head).relation_types.insert(t.relation);
        if (t.kind == TripleKind::EntityRelation) {
            touch(t.tail).relation_types.insert(t.relation);
        }
    }
    return nodes;
}

void attach_node_embeddings(std::vector<GraphNode>& nodes,
                            ModelGateway& gateway) {
    if (nodes.empty()) return;
    std::vector<std::string> names;
    names.reserve(nodes.size());
    for (const auto& n : nodes) names.push_back(n.name);
    auto vectors = gateway.embed(names);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        nodes[i].embedding = std::move(vectors[i]);
    }
}

double relational_similarity(const std::set<std::string>& node_relations,
                             const std::set<std::string>& community_profile) {
    if (node_relations.empty() && community_profile.empty()) return 0.0;
    std::size_t intersection = 0;
    for (const auto& r : node_relations) {
        if (community_profile.count(r)) ++intersection;
    }
    const std::size_t uni =
        node_relations.size() + community_profile.size() - intersection;
    return static_cast<double>(intersection) / static_cast<double>(uni);
}

double semantic_affinity(std::span<const double> node_embedding,
                         std::span<const double> community_centroid) {
    if (norm(node_embedding) == 0.0 || norm(community_centroid) == 0.0) {
        spdlog::warn("semantic_affinity: zero vector, returning 0");
        return 0.0;
    }
    return cosine(node_embedding, community_centroid);
}

namespace {

std::set<std::string> profile_keys(const Community& c) {
    std::set<std::string> keys;
    for (const auto& [k, _] : c.relation_profile) keys.insert(k);
    return keys;
}

}  // namespace

double affinity(const GraphNode& node, const Community& community,
                double lambda) {
    if (lambda < 0.0) throw Error("lambda must be >= 0");
    const double rel =
        relational_similarity(node.relation_types, profile_keys(community));
    double sem = 0.0;
    if (lambda != 0.0) {
        sem = semantic_affinity(node.embedding, community.centroid);
    }
    return rel + lambda * sem;
}

namespace {

std::vector<double> mean_embedding(const std::vector<const GraphNode*>& nodes) {
    if (nodes.empty()) return {};
    std::vector<double> centroid(nodes.front()->embedding.size(), 0.0);
    for (const auto* n : nodes) {
        for (std::size_t i = 0; i < centroid.size() && i < n->embedding.size();
             ++i) {
            centroid[i] += n->embedding[i];
        }
    }
    for (auto& x : centroid) x /= static_cast<double>(nodes.size());
    return centroid;
}

}  // namespace

std::vector<Community> compress_communities(std::span<const GraphNode> nodes,
                                            std::span<const Triple> triples,
                                            double lambda, double epsilon,
                                            int max_rounds) {
    if (epsilon <= 0.0) throw Error("epsilon must be > 0");
    if (lambda < 0.0) throw Error("lambda must be >= 0");
    if (nodes.empty()) return {};

    std::map<std::string, std::size_t> node_index;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        node_index[nodes[i].name] = i;
    }

    // Undirected adjacency over entity-relation edges.
    std::vector<std::set<std::size_t>> adjacent(nodes.size());
    for (const auto& t : triples) {
        if (t.kind != TripleKind::EntityRelation) continue;
        auto h = node_index.find(t.head.name);
        auto ta = node_index.find(t.tail.name);
        if (h == node_index.end() || ta == node_index.end()) continue;
        if (h->second == ta->second) continue;
        adjacent[h->second].insert(ta->second);
        adjacent[ta->second].insert(h->second);
    }

    // member sets, by community slot; merged-away slots become empty.
    std::vector<std::vector<std::size_t>> members(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) members[i] = {i};

    auto make_community = [&](const std::vector<std::size_t>& member_ids,
                              int id) {
        Community c;
        c.id = id;
        std::vector<const GraphNode*> ptrs;
        for (std::size_t idx : member_ids) {
            c.members.push_back(nodes[idx].name);
            for (const auto& r : nodes[idx].relation_types) {
                ++c.relation_profile[r];
            }
            ptrs.push_back(&nodes[idx]);
        }
        c.centroid = mean_embedding(ptrs);
        return c;
    };

    // Same formula as affinity(); cosine() already yields 0 for zero
    // vectors, so degenerate embeddings are reported once per call rather
    // than once per node/community evaluation.
    bool warned_zero = false;
    auto phi_of = [&](const GraphNode& node, const Community& community) {
        const double rel =
            relational_similarity(node.relation_types, profile_keys(community));
        if (lambda == 0.0) return rel;
        if (!warned_zero &&
            (norm(node.embedding) == 0.0 || norm(community.centroid) == 0.0)) {
            spdlog::warn(
                "compress_communities: zero embedding or centroid; semantic "
                "term treated as 0");
            warned_zero = true;
        }
        return rel + lambda * cosine(node.embedding, community.centroid);
    };

    for (int round = 0; round < max_rounds; ++round) {
        // Live communities this round.
        std::vector<std::size_t> live;
        for (std::size_t s = 0; s < members.size(); ++s) {
            if (!members[s].empty()) live.push_back(s);
        }
        if (live.size() < 2) break;

        std::vector<Community> communities;
        communities.reserve(live.size());
        for (std::size_t s : live) {
            communities.push_back(make_community(members[s], 0));
        }

        // phi(e, C) for every node/community pair, reused across pairs.
        std::vector<std::vector<double>> phi(
            nodes.size(), std::vector<double>(live.size(), 0.0));
        for (std::size_t e = 0; e < nodes.size(); ++e) {
            for (std::size_t c = 0; c < live.size(); ++c) {
                phi[e][c] = phi_of(nodes[e], communities[c]);
            }
        }

        // adjacency of node -> community (any member adjacent).
        std::vector<std::size_t> slot_of(nodes.size());
        for (std::size_t c = 0; c < live.size(); ++c) {
            for (std::size_t idx : members[live[c]]) slot_of[idx] = c;
        }
        std::vector<std::vector<bool>> adj_to(
            nodes.size(), std::vector<bool>(live.size(), false));
        for (std::size_t e = 0; e < nodes.size(); ++e) {
            for (std::size_t nb : adjacent[e]) {
                adj_to[e][slot_of[nb]] = true;
            }
        }

        double best_gap = std::numeric_limits<double>::infinity();
        std::size_t best_a = 0;
        std::size_t best_b = 0;
        bool found = false;
        for (std::size_t a = 0; a < live.size(); ++a) {
            for (std::size_t b = a + 1; b < live.size(); ++b) {
                double sum_a = 0.0;
                double sum_b = 0.0;
                int boundary = 0;
                for (std::size_t e = 0; e < nodes.size(); ++e) {
                    if (adj_to[e][a] && adj_to[e][b]) {
                        sum_a += phi[e][a];
                        sum_b += phi[e][b];
                        ++boundary;
                    }
                }
                if (boundary == 0) continue;  // nothing straddles the pair
                const double gap =
                    std::abs(sum_a - sum_b) / static_cast<double>(boundary);
                if (gap < epsilon && gap < best_gap) {
                    best_gap = gap;
                    best_a = a;
                    best_b = b;
                    found = true;
                }
            }
        }
        if (!found) break;

        auto& into = members[live[best_a]];
        auto& from = members[live[best_b]];
        into.insert(into.end(), from.begin(), from.end());
        std::sort(into.begin(), into.end());
        from.clear();
    }

    std::vector<Community> out;
    int next_id = 0;
    for (const auto& member_ids : members) {
        if (member_ids.empty()) continue;
        out.push_back(make_community(member_ids, next_id++));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Knowledge tree

void KnowledgeTree::require_well_formed(
    std::span<const Community> communities) const {
    std::set<int> community_set(community_ids.begin(), community_ids.end());
    if (community_set.size() != communities.size()) {
        throw FormatError("tree L4 does not match the community list");
    }
    std::map<int, int> keyword_to_community;
    for (const auto& k : keywords) {
        if (!community_set.count(k.community_id)) {
            throw FormatError("keyword '" + k.text +
                              "' points to a missing community");
        }
        keyword_to_community[k.id] = k.community_id;
    }
    std::set<int> l2_ids;
    for (const auto& t : triples) {
        if (!keyword_to_community.count(t.keyword_id)) {
            throw FormatError("L2 item points to a missing keyword");
        }
        l2_ids.insert(t.id);
    }
    for (const auto& a : attributes) {
        if (!l2_ids.count(a.parent_l2_id)) {
            throw FormatError("L1 item points to a missing L2 parent");
        }
    }
}

KnowledgeTree build_knowledge_tree(std::span<const Community> communities,
                                   std::span<const Triple> triples,
                                   int keywords_per_community,
                                   ModelGateway* gateway) {
    if (keywords_per_community < 1) keywords_per_community = 1;
    KnowledgeTree tree;

    std::map<std::string, int> community_of_node;
    for (const auto& c : communities) {
        tree.community_ids.push_back(c.id);
        for (const auto& m : c.members) community_of_node[m] = c.id;
    }

    // L3: keywords.
    int keyword_id = 0;
    std::map<int, int> primary_keyword;  // community -> first keyword id
    for (const auto& c : communities) {
        std::vector<std::string> labels;
        if (gateway) {
            try {
                json members = c.members;
                std::string prompt =
                    prompts::fill(prompts::kCommunityKeywordsTemplate,
                                  "entities", members.dump());
                prompt = prompts::fill(std::move(prompt), "count",
                                       std::to_string(keywords_per_community));
                const json reply =
                    json::parse(gateway->complete(prompt, 0.0));
                labels = reply.get<std::vector<std::string>>();
            } catch (const std::exception& e) {
                spdlog::warn("community keyword labeling failed: {}", e.what());
                labels.clear();
            }
        }
        if (labels.empty()) {
            // Fallback: member names by triple-incidence frequency.
            std::map<std::string, int> freq;
            for (const auto& m : c.members) freq[m] = 0;
            for (const auto& t : triples) {
                if (freq.count(t.head.name)) ++freq[t.head.name];
                if (t.kind == TripleKind::EntityRelation &&
                    freq.count(t.tail.name)) {
                    ++freq[t.tail.name];
                }
            }
            std::vector<std::pair<std::string, int>> ranked(freq.begin(),
                                                            freq.end());
            std::sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            for (const auto& [name, _] : ranked) {
                labels.push_back(name);
                if (static_cast<int>(labels.size()) >= keywords_per_community) {
                    break;
                }
            }
        }
        if (static_cast<int>(labels.size()) > keywords_per_community) {
            labels.resize(static_cast<std::size_t>(keywords_per_community));
        }
        for (const auto& label : labels) {
            if (!primary_keyword.count(c.id)) {
                primary_keyword[c.id] = keyword_id;
            }
            tree.keywords.push_back({keyword_id++, c.id, label});
        }
    }

    // L2: entity-relation triples under their head's community keyword.
    int l2_id = 0;
    std::map<std::string, int> first_l2_of_head;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto& t = triples[i];
        if (t.kind != TripleKind::EntityRelation) continue;
        auto it = community_of_node.find(t.head.name);
        if (it == community_of_node.end()) {
            spdlog::warn("triple head '{}' has no community; skipped",
                         t.head.name);
            continue;
        }
        const int kw = primary_keyword.at(it->second);
        tree.triples.push_back({l2_id, static_cast<int>(i), kw});
        first_l2_of_head.try_emplace(t.head.name, l2_id);
        ++l2_id;
    }

    // L1: attribute pairs under the first L2 triple of the same entity.
    int l1_id = 0;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto& t = triples[i];
        if (t.kind != TripleKind::EntityAttribute) continue;
        auto it = first_l2_of_head.find(t.head.name);
        if (it == first_l2_of_head.end()) {
            spdlog::warn(
                "attribute of '{}' has no owning relation triple; skipped",
                t.head.name);
            continue;
        }
        tree.attributes.push_back({l1_id++, static_cast<int>(i), it->second});
    }

    return tree;
}

// ---------------------------------------------------------------------------
// Build + persistence

KnowledgeGraph build_graph(const WindowStore& store, Schema schema,
                           const GraphBuildOptions& options,
                           ModelGateway& gateway) {
    schema.require_valid();
    KnowledgeGraph graph;
    for (const auto& window : store.windows()) {
        if (options.schema_expansion) {
            propose_schema_extension(window, schema, options.mu, gateway);
        }
        auto triples = extract_triples(window, schema, gateway);
        graph.triples.insert(graph.triples.end(), triples.begin(),
                             triples.end());
    }
    graph.schema = std::move(schema);
    graph.nodes = collect_nodes(graph.triples);
    attach_node_embeddings(graph.nodes, gateway);
    graph.communities =
        compress_communities(graph.nodes, graph.triples, options.lambda,
                             options.epsilon, options.max_rounds);
    graph.tree =
        build_knowledge_tree(graph.communities, graph.triples,
                             options.keywords_per_community, &gateway);
    return graph;
}

namespace {

constexpr const char* kGraphFormat = "tierrank-graph";
constexpr int kGraphVersion = 1;

json triple_to_json(const Triple& t) {
    return {{"kind", t.kind == TripleKind::EntityRelation ? "entity_relation"
                                                          : "entity_attribute"},
            {"head", {{"name", t.head.name}, {"type", t.head.type}}},
            {"relation", t.relation},
            {"tail", {{"name", t.tail.name}, {"type", t.tail.type}}},
            {"source_window_id", t.source_window_id}};
}

Triple triple_from_json(const json& j) {
    Triple t;
    t.kind = j.at("kind").get<std::string>() == "entity_attribute"
                 ? TripleKind::EntityAttribute
                 : TripleKind::EntityRelation;
    t.head = {j.at("head").at("name").get<std::string>(),
              j.at("head").at("type").get<std::string>()};
    t.relation = j.at("relation").get<std::string>();
    t.tail = {j.at("tail").at("name").get<std::string>(),
              j.at("tail").at("type").get<std::string>()};
    t.source_window_id = j.at("source_window_id").get<std::string>();
    return t;
}

}  // namespace

void save_graph(const KnowledgeGraph& graph, const std::string& path) {
    json j;
    j["format"] = kGraphFormat;
    j["version"] = kGraphVersion;
    j["schema"] = {{"entity_types", graph.schema.entity_types},
                   {"relation_types", graph.schema.relation_types},
                   {"attribute_types", graph.schema.attribute_types}};
    j["nodes"] = json::array();
    for (const auto& n : graph.nodes) {
        j["nodes"].push_back({{"name", n.name},
                              {"type", n.type},
                              {"relation_types", n.relation_types},
                              {"embedding", n.embedding}});
    }
    j["triples"] = json::array();
    for (const auto& t : graph.triples) j["triples"].push_back(triple_to_json(t));
    j["communities"] = json::array();
    for (const auto& c : graph.communities) {
        j["communities"].push_back({{"id", c.id},
                                    {"members", c.members},
                                    {"relation_profile", c.relation_profile},
                                    {"keywords", c.keywords},
                                    {"centroid", c.centroid}});
    }
    json tree;
    tree["communities"] = graph.tree.community_ids;
    tree["keywords"] = json::array();
    for (const auto& k : graph.tree.keywords) {
        tree["keywords"].push_back(
            {{"id", k.id}, {"community_id", k.community_id}, {"text", k.text}});
    }
    tree["triples"] = json::array();
    for (const auto& t : graph.tree.triples) {
        tree["triples"].push_back({{"id", t.id},
                                   {"triple_index", t.triple_index},
                                   {"keyword_id", t.keyword_id}});
    }
    tree["attributes"] = json::array();
    for (const auto& a : graph.tree.attributes) {
        tree["attributes"].push_back({{"id", a.id},
                                      {"triple_index", a.triple_index},
                                      {"parent_l2_id", a.parent_l2_id}});
    }
    j["tree"] = std::move(tree);

    std::ofstream out(path);
    if (!out) throw FormatError("cannot write graph file: " + path);
    out << j.dump(2) << "\n";
}

KnowledgeGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open graph file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("graph parse error in " + path + ": " + e.what());
    }
    if (j.value("format", "") != kGraphFormat ||
        j.value("version", -1) != kGraphVersion) {
        throw FormatError("not a knowledge graph file (or wrong version): " +
                          path);
    }
    KnowledgeGraph graph;
    try {
        graph.schema.entity_types =
            j.at("schema").at("entity_types").get<std::set<std::string>>();
        graph.schema.relation_types =
            j.at("schema").at("relation_types").get<std::set<std::string>>();
        graph.schema.attribute_types =
            j.at("schema").at("attribute_types").get<std::set<std::string>>();
        for (const auto& n : j.at("nodes")) {
            graph.nodes.push_back(
                {n.at("name").get<std::string>(),
                 n.at("type").get<std::string>(),
                 n.at("relation_types").get<std::set<std::string>>(),
                 n.at("embedding").get<std::vector<double>>()});
        }
        for (const auto& t : j.at("triples")) {
            graph.triples.push_back(triple_from_json(t));
        }
        for (const auto& c : j.at("communities")) {
            Community community;
            community.id = c.at("id").get<int>();
            community.members = c.at("members").get<std::vector<std::string>>();
            community.relation_profile =
                c.at("relation_profile").get<std::map<std::string, int>>();
            community.keywords = c.at("keywords").get<std::vector<std::string>>();
            community.centroid = c.at("centroid").get<std::vector<double>>();
            graph.communities.push_back(std::move(community));
        }
        const auto& tree = j.at("tree");
        graph.tree.community_ids = tree.at("communities").get<std::vector<int>>();
        for (const auto& k : tree.at("keywords")) {
            graph.tree.keywords.push_back({k.at("id").get<int>(),
                                           k.at("community_id").get<int>(),
                                           k.at("text").get<std::string>()});
        }
        for (const auto& t : tree.at("triples")) {
            graph.tree.triples.push_back({t.at("id").get<int>(),
                                          t.at("triple_index").get<int>(),
                                          t.at("keyword_id").get<int>()});
        }
        for (const auto& a : tree.at("attributes")) {
            graph.tree.attributes.push_back({a.at("id").get<int>(),
                                             a.at("triple_index").get<int>(),
                                             a.at("parent_l2_id").get<int>()});
        }
    } catch (const json::exception& e) {
        throw FormatError("invalid graph file " + path + ": " + e.what());
    }
    return graph;
}

void save_schema(const Schema& schema, const std::string& path) {
    schema.require_valid();
    const json j = {{"entity_types", schema.entity_types},
                    {"relation_types", schema.relation_types},
                    {"attribute_types", schema.attribute_types}};
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write schema file: " + path);
    out << j.dump(2) << "\n";
}

Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open schema file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("schema parse error in " + path + ": " + e.what());
    }
    Schema schema;
    try {
        schema.entity_types = j.at("entity_types").get<std::set<std::string>>();
        schema.relation_types =
            j.at("relation_types").get<std::set<std::string>>();
        schema.attribute_types =
            j.at("attribute_types").get<std::set<std::string>>();
    } catch (const json::exception& e) {
        throw FormatError("invalid schema file " + path + ": " + e.what());
    }
    schema.require_valid();
    return schema;
}

}  // namespace tierrank
