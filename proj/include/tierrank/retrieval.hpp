#pragma once

#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tierrank/gateway.hpp"
#include "tierrank/graph.hpp"
#include "tierrank/window.hpp"

namespace tierrank {

enum class Channel { Dense, Graph, Hyde };
std::string_view channel_label(Channel c);

struct RankedWindow {
    std::string window_id;
    int rank = 0;  // 1-based, strictly increasing
    double score = 0.0;
};

struct ChannelRanking {
    Channel channel = Channel::Dense;
    std::vector<RankedWindow> entries;
};

struct FusionConfig {
    int rrf_k = 60;
    int dense_top_k = 300;
    int graph_top_k = 120;
    int hyde_passages = 3;
    double hyde_temperature = 0.3;
    int hyde_top_k = 300;
};

// Extracted P/I/C/O/T anchors; a field is absent when the query does not
// state it. Fields are never synthesized: values that cannot be traced
// back to the query text are stripped.
struct PicotAnchors {
    std::optional<std::string> population;    // P
    std::optional<std::string> intervention;  // I
    std::optional<std::string> comparator;    // C
    std::optional<std::string> outcome;       // O
    std::optional<std::string> timeframe;     // T

    bool any() const;
    std::vector<std::pair<char, std::string>> present() const;
};

// Exact cosine scan over unit-normalized window embeddings.
class VectorIndex {
public:
    void add(const std::string& id, EvidenceGrade grade,
             std::span<const double> embedding);

    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    std::size_t dim() const { return dim_; }

    // Descending cosine similarity, ties broken by id ascending.
    std::vector<std::pair<std::string, double>> search(
        std::span<const double> query, int top_k,
        const std::optional<std::set<EvidenceGrade>>& grade_filter = {}) const;

private:
    std::vector<std::string> ids_;
    std::vector<EvidenceGrade> grades_;
    std::vector<std::vector<double>> vectors_;  // unit-normalized
    std::size_t dim_ = 0;
};

// Embeds every window text through the gateway, optionally restricted to
// a grade subset. Insertion order follows the store.
VectorIndex build_dense_index(const WindowStore& store,
                              const std::optional<std::set<EvidenceGrade>>& grades,
                              ModelGateway& gateway);

ChannelRanking dense_search(
    std::span<const double> query_embedding, const VectorIndex& index,
    int top_k,
    const std::optional<std::set<EvidenceGrade>>& grade_filter = {});

// Lexical tree search: entity-name matches against L2 heads/tails, token
// overlap with triple surface forms, and community filtering by keyword
// overlap. Matches map to source windows; duplicates keep the best rank.
ChannelRanking graph_search(
    const std::string& query, const KnowledgeGraph& graph, int top_k,
    const WindowStore* store = nullptr,
    const std::optional<std::set<EvidenceGrade>>& grade_filter = {});

// Gateway-backed anchor extraction with the no-invention audit; gateway
// failure degrades to all-absent anchors.
PicotAnchors extract_picot_anchors(const std::string& query_text,
                                   ModelGateway& gateway);

// n hypothetical passages; each present anchor must appear verbatim in
// each passage. Non-conforming passages are regenerated once, then
// dropped. May return fewer than n (empty when everything failed).
std::vector<std::string> generate_hypotheticals(const std::string& query,
                                                const PicotAnchors& anchors,
                                                int n, double temperature,
                                                ModelGateway& gateway);

// Each passage is embedded and searched individually; a window keeps its
// best rank across passages.
ChannelRanking hyde_search(
    std::span<const std::string> passages, const VectorIndex& index, int top_k,
    ModelGateway& gateway,
    const std::optional<std::set<EvidenceGrade>>& grade_filter = {});

// score(d) = sum over channels containing d of 1 / (k + rank_c(d)),
// sorted descending; ties broken by window id ascending.
std::vector<std::pair<std::string, double>> rrf_fuse(
    std::span<const ChannelRanking> rankings, int k);

struct TrackTrace {
    std::vector<ChannelRanking> channels;
    std::vector<std::pair<std::string, double>> fused;
};

struct DualTrackResult {
    struct Candidate {
        std::string window_id;
        double rrf_score = 0.0;
        char track = 'B';  // 'A' = grade-A track, 'B' = grades B-E track
    };
    PicotAnchors anchors;
    std::vector<std::string> hyde_passages;
    TrackTrace track_a;
    TrackTrace track_be;
    std::vector<Candidate> merged;  // union, rrf descending then id
};

struct RetrievalInputs {
    const VectorIndex* index_a = nullptr;   // grade-A windows
    const VectorIndex* index_be = nullptr;  // grades B-E windows
    const KnowledgeGraph* graph = nullptr;  // optional graph channel
    const WindowStore* store = nullptr;     // grade lookup for the graph channel
};

// Runs the three-channel + RRF pipeline independently on the grade-A and
// grades B-E tracks with the same per-channel quotas, then merges by
// union. Grade determines the track uniquely, so no dedup conflicts.
DualTrackResult dual_track_candidates(const std::string& query,
                                      const RetrievalInputs& inputs,
                                      const FusionConfig& config,
                                      ModelGateway& gateway);

struct IrcotStep {
    int iteration = 0;
    std::string query;
    std::vector<std::string> retrieved;
    bool sufficient = false;
    std::string followup;
};

struct IrcotResult {
    std::vector<std::string> accumulated;  // union, first-retrieval order
    std::vector<IrcotStep> trace;
};

// Bounded retrieve-reflect loop: retrieve, ask the gateway whether the
// evidence suffices, follow up with the gateway's subquery (or the next
// provided one) until sufficiency or max_iters. A gateway failure mid-
// loop returns the accumulation so far.
IrcotResult ircot_loop(
    const std::string& query, std::span<const std::string> subqueries,
    const std::function<std::vector<std::string>(const std::string&)>&
        retrieve_fn,
    ModelGateway& gateway, int max_iters);

enum class SubqueryLevel { Node, Triple, Community };

struct Subquery {
    std::string text;
    SubqueryLevel level = SubqueryLevel::Node;
};

// Schema-aware decomposition into typed subqueries; invalid level tags
// are coerced to node-level, and any failure falls back to a single
// node-level subquery equal to the original query.
std::vector<Subquery> decompose_query(const std::string& query,
                                      const Schema& schema,
                                      ModelGateway& gateway);

}  // namespace tierrank
