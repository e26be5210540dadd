#include "tierrank/retrieval.hpp"

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tierrank/prompts.hpp"
#include "tierrank/text.hpp"
#include "tierrank/vec.hpp"

namespace tierrank {

using json = nlohmann::json;

std::string_view channel_label(Channel c) {
    switch (c) {
        case Channel::Dense: return "dense";
        case Channel::Graph: return "graph";
        case Channel::Hyde: return "hyde";
    }
    return "?";
}

bool PicotAnchors::any() const {
    return population || intervention || comparator || outcome || timeframe;
}

std::vector<std::pair<char, std::string>> PicotAnchors::present() const {
    std::vector<std::pair<char, std::string>> out;
    if (population) out.emplace_back('P', *population);
    if (intervention) out.emplace_back('I', *intervention);
    if (comparator) out.emplace_back('C', *comparator);
    if (outcome) out.emplace_back('O', *outcome);
    if (timeframe) out.emplace_back('T', *timeframe);
    return out;
}

// ---------------------------------------------------------------------------
// Dense channel

void VectorIndex::add(const std::string& id, EvidenceGrade grade,
                      std::span<const double> embedding) {
    if (dim_ == 0) {
        dim_ = embedding.size();
    } else if (embedding.size() != dim_) {
        throw FormatError("index dimension mismatch for '" + id + "'");
    }
    ids_.push_back(id);
    grades_.push_back(grade);
    vectors_.push_back(normalized(embedding));
}

std::vector<std::pair<std::string, double>> VectorIndex::search(
    std::span<const double> query, int top_k,
    const std::optional<std::set<EvidenceGrade>>& grade_filter) const {
    if (empty() || top_k < 1) return {};
    if (query.size() != dim_) {
        throw FormatError("query embedding dimension mismatch");
    }
    const auto q = normalized(query);
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (grade_filter && !grade_filter->count(grades_[i])) continue;
        scored.emplace_back(ids_[i], dot(q, vectors_[i]));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > static_cast<std::size_t>(top_k)) {
        scored.resize(static_cast<std::size_t>(top_k));
    }
    return scored;
}

VectorIndex build_dense_index(
    const WindowStore& store,
    const std::optional<std::set<EvidenceGrade>>& grades,
    ModelGateway& gateway) {
    VectorIndex index;
    std::vector<const EvidenceWindow*> selected;
    for (const auto& w : store.windows()) {
        if (!grades || grades->count(w.grade)) selected.push_back(&w);
    }
    if (selected.empty()) return index;
    std::vector<std::string> texts;
    texts.reserve(selected.size());
    for (const auto* w : selected) texts.push_back(w->text);
    const auto vectors = gateway.embed(texts);
    for (std::size_t i = 0; i < selected.size(); ++i) {
        index.add(selected[i]->id, selected[i]->grade, vectors[i]);
    }
    return index;
}

namespace {

ChannelRanking to_ranking(Channel channel,
                          std::vector<std::pair<std::string, double>> scored) {
    ChannelRanking ranking;
    ranking.channel = channel;
    int rank = 1;
    for (auto& [id, score] : scored) {
        ranking.entries.push_back({std::move(id), rank++, score});
    }
    return ranking;
}

}  // namespace

ChannelRanking dense_search(
    std::span<const double> query_embedding, const VectorIndex& index,
    int top_k, const std::optional<std::set<EvidenceGrade>>& grade_filter) {
    return to_ranking(Channel::Dense,
                      index.search(query_embedding, top_k, grade_filter));
}

// ---------------------------------------------------------------------------
// Graph channel (lexical)

namespace {

struct SubHit {
    int rank;
    double score;
};

// Rank a score map descending (score, then id) and record best ranks.
void fold_ranked(const std::map<std::string, double>& scores,
                 std::map<std::string, SubHit>& best) {
    std::vector<std::pair<std::string, double>> ordered(scores.begin(),
                                                        scores.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    int rank = 1;
    for (const auto& [id, score] : ordered) {
        auto it = best.find(id);
        if (it == best.end() || rank < it->second.rank) {
            best[id] = {rank, score};
        }
        ++rank;
    }
}

}  // namespace

ChannelRanking graph_search(
    const std::string& query, const KnowledgeGraph& graph, int top_k,
    const WindowStore* store,
    const std::optional<std::set<EvidenceGrade>>& grade_filter) {
    ChannelRanking ranking;
    ranking.channel = Channel::Graph;
    if (graph.tree.triples.empty() || top_k < 1) return ranking;

    const std::string norm_query = normalize_text(query);
    const auto query_tokens_vec = content_tokens(query);
    const std::set<std::string> query_tokens(query_tokens_vec.begin(),
                                             query_tokens_vec.end());

    auto window_allowed = [&](const std::string& window_id) {
        if (!grade_filter) return true;
        if (!store) return true;
        const auto grade = store->grade_of(window_id);
        return grade && grade_filter->count(*grade) > 0;
    };

    std::map<std::string, double> entity_scores;  // window -> matched entities
    std::map<std::string, double> triple_scores;  // window -> token overlap
    for (const auto& entry : graph.tree.triples) {
        const auto& t =
            graph.triples[static_cast<std::size_t>(entry.triple_index)];
        if (!window_allowed(t.source_window_id)) continue;

        int matched_entities = 0;
        for (const auto* ref : {&t.head, &t.tail}) {
            const std::string name = normalize_text(ref->name);
            if (!name.empty() && norm_query.find(name) != std::string::npos) {
                ++matched_entities;
            }
        }
        if (matched_entities > 0) {
            entity_scores[t.source_window_id] += matched_entities;
        }

        const auto surface =
            content_tokens(t.head.name + " " + t.relation + " " + t.tail.name);
        int overlap = 0;
        std::set<std::string> seen;
        for (const auto& token : surface) {
            if (query_tokens.count(token) && seen.insert(token).second) {
                ++overlap;
            }
        }
        if (overlap > 0) {
            auto& cell = triple_scores[t.source_window_id];
            cell = std::max(cell, static_cast<double>(overlap));
        }
    }

    // Community filter: communities ranked by keyword-token overlap with
    // the query; windows of triples headed in the top communities.
    std::map<std::string, double> community_scores;
    {
        std::map<int, double> per_community;
        std::map<int, int> keyword_community;
        for (const auto& k : graph.tree.keywords) {
            keyword_community[k.id] = k.community_id;
            int overlap = 0;
            for (const auto& token : content_tokens(k.text)) {
                if (query_tokens.count(token)) ++overlap;
            }
            if (overlap > 0) per_community[k.community_id] += overlap;
        }
        std::vector<std::pair<int, double>> ranked(per_community.begin(),
                                                   per_community.end());
        std::sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        constexpr std::size_t kTopCommunities = 3;
        if (ranked.size() > kTopCommunities) ranked.resize(kTopCommunities);
        std::map<int, double> selected(ranked.begin(), ranked.end());
        if (!selected.empty()) {
            for (const auto& entry : graph.tree.triples) {
                const auto& t =
                    graph.triples[static_cast<std::size_t>(entry.triple_index)];
                auto kc = keyword_community.find(entry.keyword_id);
                if (kc == keyword_community.end()) continue;
                auto sel = selected.find(kc->second);
                if (sel == selected.end()) continue;
                if (!window_allowed(t.source_window_id)) continue;
                auto& cell = community_scores[t.source_window_id];
                cell = std::max(cell, sel->second);
            }
        }
    }

    std::map<std::string, SubHit> best;
    fold_ranked(entity_scores, best);
    fold_ranked(triple_scores, best);
    fold_ranked(community_scores, best);
    if (best.empty()) return ranking;

    std::vector<std::pair<std::string, SubHit>> merged(best.begin(), best.end());
    std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
        if (a.second.rank != b.second.rank) return a.second.rank < b.second.rank;
        return a.first < b.first;
    });
    int rank = 1;
    for (const auto& [id, hit] : merged) {
        if (rank > top_k) break;
        ranking.entries.push_back({id, rank++, hit.score});
    }
    return ranking;
}

// ---------------------------------------------------------------------------
// PICO-guided HyDE channel

namespace {

// A field survives only when its surface form can be traced back to the
// query (normalized substring, or all content tokens present).
bool traceable(const std::string& value, const std::string& query) {
    if (value.empty()) return false;
    if (contains_normalized(query, value)) return true;
    const auto value_tokens = content_tokens(value);
    if (value_tokens.empty()) return false;
    const auto query_tokens_vec = content_tokens(query);
    const std::set<std::string> query_tokens(query_tokens_vec.begin(),
                                             query_tokens_vec.end());
    for (const auto& token : value_tokens) {
        if (!query_tokens.count(token)) return false;
    }
    return true;
}

std::optional<std::string> audit_field(const json& j, const char* key,
                                       const std::string& query) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) return std::nullopt;
    const auto value = j[key].get<std::string>();
    if (value.empty()) return std::nullopt;
    if (!traceable(value, query)) {
        spdlog::warn("PICOT anchor '{}' = '{}' not traceable to query; stripped",
                     key, value);
        return std::nullopt;
    }
    return value;
}

}  // namespace

PicotAnchors extract_picot_anchors(const std::string& query_text,
                                   ModelGateway& gateway) {
    PicotAnchors anchors;
    if (query_text.empty()) return anchors;
    const std::string prompt =
        prompts::fill(prompts::kPicotExtractTemplate, "question", query_text);
    try {
        const json j = json::parse(gateway.complete(prompt, 0.0));
        anchors.population = audit_field(j, "P", query_text);
        anchors.intervention = audit_field(j, "I", query_text);
        anchors.comparator = audit_field(j, "C", query_text);
        anchors.outcome = audit_field(j, "O", query_text);
        anchors.timeframe = audit_field(j, "T", query_text);
    } catch (const std::exception& e) {
        spdlog::warn("PICOT anchor extraction failed: {}", e.what());
        return PicotAnchors{};
    }
    return anchors;
}

namespace {

bool passage_conforms(const std::string& passage, const PicotAnchors& anchors) {
    for (const auto& [_, value] : anchors.present()) {
        if (!contains_normalized(passage, value)) return false;
    }
    return true;
}

}  // namespace

std::vector<std::string> generate_hypotheticals(const std::string& query,
                                                const PicotAnchors& anchors,
                                                int n, double temperature,
                                                ModelGateway& gateway) {
    if (n < 1) throw Error("hypothetical passage count must be >= 1");
    std::string prompt =
        prompts::fill(prompts::kHydeTemplate, "question", query);
    prompt = prompts::fill(std::move(prompt), "anchors",
                           prompts::render_anchor_lines(anchors));

    std::vector<std::string> passages;
    for (int i = 0; i < n; ++i) {
        try {
            std::string passage = gateway.complete(prompt, temperature);
            if (!passage_conforms(passage, anchors)) {
                // One retry, then drop.
                passage = gateway.complete(prompt, temperature);
                if (!passage_conforms(passage, anchors)) {
                    spdlog::warn(
                        "hypothetical passage {} dropped: missing anchors", i + 1);
                    continue;
                }
            }
            passages.push_back(std::move(passage));
        } catch (const std::exception& e) {
            spdlog::warn("hypothetical generation failed: {}", e.what());
        }
    }
    return passages;
}

ChannelRanking hyde_search(
    std::span<const std::string> passages, const VectorIndex& index, int top_k,
    ModelGateway& gateway,
    const std::optional<std::set<EvidenceGrade>>& grade_filter) {
    ChannelRanking ranking;
    ranking.channel = Channel::Hyde;
    if (passages.empty() || index.empty() || top_k < 1) return ranking;

    const auto embeddings =
        gateway.embed({passages.begin(), passages.end()});

    struct Best {
        int rank;
        double score;
    };
    std::map<std::string, Best> best;
    for (const auto& embedding : embeddings) {
        const auto hits = index.search(embedding, top_k, grade_filter);
        for (std::size_t i = 0; i < hits.size(); ++i) {
            const int rank = static_cast<int>(i) + 1;
            auto it = best.find(hits[i].first);
            if (it == best.end() || rank < it->second.rank) {
                best[hits[i].first] = {rank, hits[i].second};
            }
        }
    }

    std::vector<std::pair<std::string, Best>> merged(best.begin(), best.end());
    std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
        if (a.second.rank != b.second.rank) return a.second.rank < b.second.rank;
        if (a.second.score != b.second.score) return a.second.score > b.second.score;
        return a.first < b.first;
    });
    int rank = 1;
    for (const auto& [id, hit] : merged) {
        if (rank > top_k) break;
        ranking.entries.push_back({id, rank++, hit.score});
    }
    return ranking;
}

// ---------------------------------------------------------------------------
// Fusion and dual-track candidate generation

std::vector<std::pair<std::string, double>> rrf_fuse(
    std::span<const ChannelRanking> rankings, int k) {
    if (k < 1) throw Error("rrf k must be >= 1");
    std::map<std::string, double> scores;
    for (const auto& ranking : rankings) {
        for (const auto& entry : ranking.entries) {
            scores[entry.window_id] +=
                1.0 / static_cast<double>(k + entry.rank);
        }
    }
    std::vector<std::pair<std::string, double>> fused(scores.begin(),
                                                      scores.end());
    std::sort(fused.begin(), fused.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return fused;
}

namespace {

TrackTrace run_track(const std::string& query,
                     std::span<const double> query_embedding,
                     std::span<const std::string> hyde_passages,
                     const VectorIndex& index, const KnowledgeGraph* graph,
                     const WindowStore* store,
                     const std::set<EvidenceGrade>& track_grades,
                     const FusionConfig& config, ModelGateway& gateway) {
    TrackTrace trace;
    if (!index.empty()) {
        trace.channels.push_back(
            dense_search(query_embedding, index, config.dense_top_k));
    } else {
        trace.channels.push_back(ChannelRanking{Channel::Dense, {}});
    }
    if (graph) {
        trace.channels.push_back(graph_search(query, *graph, config.graph_top_k,
                                              store, track_grades));
    } else {
        trace.channels.push_back(ChannelRanking{Channel::Graph, {}});
    }
    if (!hyde_passages.empty() && !index.empty()) {
        trace.channels.push_back(
            hyde_search(hyde_passages, index, config.hyde_top_k, gateway));
    } else {
        trace.channels.push_back(ChannelRanking{Channel::Hyde, {}});
    }
    trace.fused = rrf_fuse(trace.channels, config.rrf_k);
    return trace;
}

}  // namespace

DualTrackResult dual_track_candidates(const std::string& query,
                                      const RetrievalInputs& inputs,
                                      const FusionConfig& config,
                                      ModelGateway& gateway) {
    if (!inputs.index_a || !inputs.index_be) {
        throw Error("dual_track_candidates requires both track indices");
    }
    DualTrackResult result;
    result.anchors = extract_picot_anchors(query, gateway);
    result.hyde_passages =
        generate_hypotheticals(query, result.anchors, config.hyde_passages,
                               config.hyde_temperature, gateway);

    const auto query_embedding = gateway.embed({query}).front();

    const std::set<EvidenceGrade> grades_a = {EvidenceGrade::A};
    const std::set<EvidenceGrade> grades_be = {EvidenceGrade::B, EvidenceGrade::C,
                                               EvidenceGrade::D, EvidenceGrade::E};
    result.track_a =
        run_track(query, query_embedding, result.hyde_passages, *inputs.index_a,
                  inputs.graph, inputs.store, grades_a, config, gateway);
    result.track_be =
        run_track(query, query_embedding, result.hyde_passages, *inputs.index_be,
                  inputs.graph, inputs.store, grades_be, config, gateway);

    for (const auto& [id, score] : result.track_a.fused) {
        result.merged.push_back({id, score, 'A'});
    }
    for (const auto& [id, score] : result.track_be.fused) {
        result.merged.push_back({id, score, 'B'});
    }
    std::sort(result.merged.begin(), result.merged.end(),
              [](const auto& a, const auto& b) {
                  if (a.rrf_score != b.rrf_score) return a.rrf_score > b.rrf_score;
                  return a.window_id < b.window_id;
              });
    return result;
}

// ---------------------------------------------------------------------------
// Iterative retrieve-reflect loop

IrcotResult ircot_loop(
    const std::string& query, std::span<const std::string> subqueries,
    const std::function<std::vector<std::string>(const std::string&)>&
        retrieve_fn,
    ModelGateway& gateway, int max_iters) {
    if (max_iters < 1) throw Error("max_iters must be >= 1");
    IrcotResult result;
    std::set<std::string> seen;
    std::string current = query;
    std::size_t next_subquery = 0;

    for (int iter = 1; iter <= max_iters; ++iter) {
        IrcotStep step;
        step.iteration = iter;
        step.query = current;
        step.retrieved = retrieve_fn(current);
        for (const auto& id : step.retrieved) {
            if (seen.insert(id).second) result.accumulated.push_back(id);
        }

        if (iter == max_iters) {
            result.trace.push_back(std::move(step));
            break;
        }

        std::string evidence;
        for (const auto& id : result.accumulated) {
            evidence += id;
            evidence += '\n';
        }
        std::string prompt =
            prompts::fill(prompts::kSufficiencyTemplate, "question", query);
        prompt = prompts::fill(std::move(prompt), "evidence", evidence);
        try {
            const json j = json::parse(gateway.complete(prompt, 0.0));
            step.sufficient = j.value("sufficient", false);
            step.followup = j.value("subquery", "");
        } catch (const std::exception& e) {
            spdlog::warn("ircot reflection failed at iter {}: {}", iter,
                         e.what());
            result.trace.push_back(std::move(step));
            return result;
        }

        const bool done = step.sufficient;
        std::string followup = step.followup;
        result.trace.push_back(std::move(step));
        if (done) break;

        if (!followup.empty()) {
            current = followup;
        } else if (next_subquery < subqueries.size()) {
            current = subqueries[next_subquery++];
        }  // otherwise re-query with the current text
    }
    return result;
}

namespace {

std::string schema_brief(const Schema& schema) {
    json j = {{"entity_types", schema.entity_types},
              {"relation_types", schema.relation_types}};
    return j.dump();
}

}  // namespace

std::vector<Subquery> decompose_query(const std::string& query,
                                      const Schema& schema,
                                      ModelGateway& gateway) {
    const std::vector<Subquery> fallback = {{query, SubqueryLevel::Node}};
    if (query.empty()) return fallback;

    std::string prompt =
        prompts::fill(prompts::kDecomposeTemplate, "question", query);
    prompt = prompts::fill(std::move(prompt), "schema", schema_brief(schema));
    try {
        const json j = json::parse(gateway.complete(prompt, 0.0));
        std::vector<Subquery> out;
        for (const auto& entry : j) {
            Subquery sq;
            sq.text = entry.at("text").get<std::string>();
            const std::string level = entry.value("level", "node");
            if (level == "triple") {
                sq.level = SubqueryLevel::Triple;
            } else if (level == "community") {
                sq.level = SubqueryLevel::Community;
            } else if (level == "node") {
                sq.level = SubqueryLevel::Node;
            } else {
                spdlog::warn("unknown subquery level '{}'; coerced to node",
                             level);
                sq.level = SubqueryLevel::Node;
            }
            if (!sq.text.empty()) out.push_back(std::move(sq));
        }
        if (out.empty()) return fallback;
        return out;
    } catch (const std::exception& e) {
        spdlog::warn("query decomposition failed: {}", e.what());
        return fallback;
    }
}

}  // namespace tierrank
