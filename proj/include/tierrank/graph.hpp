#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tierrank/gateway.hpp"
#include "tierrank/window.hpp"

namespace tierrank {

// Typed extraction space: entity, relation and attribute type names,
// unique across the three sets.
struct Schema {
    std::set<std::string> entity_types;
    std::set<std::string> relation_types;
    std::set<std::string> attribute_types;

    bool valid() const;
    void require_valid() const;  // throws FormatError

    // PICO-extended default instantiation.
    static Schema pico_default();
    // PICO-neutral alternate used for ablation runs.
    static Schema pico_neutral();
};

struct EntityRef {
    std::string name;
    std::string type;
    bool operator==(const EntityRef&) const = default;
};

enum class TripleKind { EntityRelation, EntityAttribute };

// (h, r, t) entity triple or (e, r_attr, value:attr_type) attribute pair.
struct Triple {
    TripleKind kind = TripleKind::EntityRelation;
    EntityRef head;
    std::string relation;
    EntityRef tail;  // for attributes: name = value, type = attribute type
    std::string source_window_id;
    bool operator==(const Triple&) const = default;
};

struct SchemaExtension {
    struct Proposal {
        std::string name;
        double confidence = 0.0;  // in [0,1]
    };
    std::vector<Proposal> entity_types;
    std::vector<Proposal> relation_types;
    std::vector<Proposal> attribute_types;

    bool empty() const {
        return entity_types.empty() && relation_types.empty() &&
               attribute_types.empty();
    }
};

// Schema-constrained triple extraction for one window. Out-of-schema
// triples in the gateway reply are dropped; a malformed reply yields an
// empty list with a warning. Never fabricates triples.
std::vector<Triple> extract_triples(const EvidenceWindow& window,
                                    const Schema& schema,
                                    ModelGateway& gateway);

// Proposes new schema types from window content; proposals at confidence
// >= mu are appended to the live schema (idempotent for existing names)
// and returned. Gateway failure yields an empty extension.
SchemaExtension propose_schema_extension(const EvidenceWindow& window,
                                         Schema& schema, double mu,
                                         ModelGateway& gateway);

struct GraphNode {
    std::string name;
    std::string type;
    std::set<std::string> relation_types;  // incident relation types
    std::vector<double> embedding;
    bool operator==(const GraphNode&) const = default;
};

// Entity nodes mentioned by the triples, in first-appearance order, with
// their incident relation-type sets. Attribute values are not nodes.
std::vector<GraphNode> collect_nodes(std::span<const Triple> triples);

// Embeds node names through the gateway.
void attach_node_embeddings(std::vector<GraphNode>& nodes,
                            ModelGateway& gateway);

struct Community {
    int id = 0;
    std::vector<std::string> members;            // node names
    std::map<std::string, int> relation_profile; // type -> incidence count
    std::vector<std::string> keywords;
    std::vector<double> centroid;                // mean member embedding
};

// Jaccard over relation-type sets; 0 when both sets are empty.
double relational_similarity(const std::set<std::string>& node_relations,
                             const std::set<std::string>& community_profile);

// Cosine between a node embedding and the community centroid; zero
// vectors score 0 (warning logged).
double semantic_affinity(std::span<const double> node_embedding,
                         std::span<const double> community_centroid);

// Combined affinity: relational + lambda * semantic.
double affinity(const GraphNode& node, const Community& community,
                double lambda);

// Agglomerative merging from singleton communities: in each round the
// qualifying pair (nonempty boundary, mean-affinity gap below epsilon)
// with the smallest gap is merged, until no pair qualifies or max_rounds
// merges were made. Boundary nodes of (Ca, Cb) are the nodes with an
// entity-relation edge into both. Output always partitions the node set.
std::vector<Community> compress_communities(std::span<const GraphNode> nodes,
                                            std::span<const Triple> triples,
                                            double lambda, double epsilon,
                                            int max_rounds);

// Four-level index over the compressed graph:
//   L4 communities -> L3 keywords -> L2 entity-relation triples
//   -> L1 attribute pairs.
struct KnowledgeTree {
    struct Keyword {
        int id = 0;
        int community_id = 0;
        std::string text;
    };
    struct TripleEntry {
        int id = 0;
        int triple_index = 0;  // into KnowledgeGraph::triples
        int keyword_id = 0;
    };
    struct AttributeEntry {
        int id = 0;
        int triple_index = 0;  // into KnowledgeGraph::triples
        int parent_l2_id = 0;
    };

    std::vector<int> community_ids;        // L4
    std::vector<Keyword> keywords;         // L3
    std::vector<TripleEntry> triples;      // L2
    std::vector<AttributeEntry> attributes;  // L1

    // Every L1/L2/L3 item reaches exactly one community; throws
    // FormatError on a broken chain.
    void require_well_formed(std::span<const Community> communities) const;
};

// Keywords come from the gateway (JSON array reply); on failure the
// top-frequency member entity names are used. Entity-relation triples are
// indexed under their head entity's community; attribute pairs under the
// first L2 triple with the same head (skipped with a warning when the
// entity has no relation triple).
KnowledgeTree build_knowledge_tree(std::span<const Community> communities,
                                   std::span<const Triple> triples,
                                   int keywords_per_community,
                                   ModelGateway* gateway);

struct KnowledgeGraph {
    Schema schema;
    std::vector<GraphNode> nodes;
    std::vector<Triple> triples;
    std::vector<Community> communities;
    KnowledgeTree tree;
};

struct GraphBuildOptions {
    double lambda = 0.5;
    double epsilon = 0.05;
    int max_rounds = 50;
    double mu = 0.7;
    bool schema_expansion = false;
    int keywords_per_community = 5;
};

// Full construction pass over a window store.
KnowledgeGraph build_graph(const WindowStore& store, Schema schema,
                           const GraphBuildOptions& options,
                           ModelGateway& gateway);

// Versioned JSON round-trip.
void save_graph(const KnowledgeGraph& graph, const std::string& path);
KnowledgeGraph load_graph(const std::string& path);

// Plain schema JSON ({"entity_types": [...], ...}).
void save_schema(const Schema& schema, const std::string& path);
Schema load_schema(const std::string& path);

}  // namespace tierrank
