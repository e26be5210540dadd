#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tierrank/gateway.hpp"
#include "tierrank/retrieval.hpp"

namespace tierrank {

struct BenchmarkItem {
    std::string id;
    std::string question;
    std::string exact_answer;
    std::vector<std::string> nuggets;
    PicotAnchors gold_picot;
    std::vector<std::string> gold_window_ids;
    std::string evidence_certainty = "sufficient";  // or "uncertain"
    std::string split = "main";                     // or "challenge"
    std::string condition_code;
};

struct BenchmarkLoadResult {
    std::vector<BenchmarkItem> items;
    struct LineError {
        int line = 0;
        std::string message;
    };
    std::vector<LineError> errors;

    std::map<std::string, int> counts_by_condition() const;
    std::map<std::string, int> counts_by_split() const;
};

// JSONL, one item per line. Invalid lines (schema violations, main-split
// items without nuggets) are reported per line, not fatal.
BenchmarkLoadResult load_benchmark(const std::string& path);

struct JudgeVerdict {
    bool covered = false;
    std::string reason;
    bool parse_flag = false;  // judge reply was not strict JSON
};

// LLM-as-judge for one nugget. Anything other than a well-formed boolean
// reply is conservatively scored as not covered with the parse flag set.
JudgeVerdict judge_nugget(const std::string& question,
                          const std::string& answer,
                          const std::string& nugget, ModelGateway& gateway);

struct CoverageResult {
    double fraction = 0.0;
    int covered = 0;
    int total = 0;
    int parse_flags = 0;
};

CoverageResult nugget_coverage(const BenchmarkItem& item,
                               const std::string& answer,
                               ModelGateway& gateway);

struct PicotMatchResult {
    std::map<char, int> field_scores;  // present gold fields only, 0/1
    std::optional<double> rate;        // absent when no gold field present
    int parse_flags = 0;
};

// Field-by-field judge match over the present gold PICOT fields; absent
// gold fields never enter the denominator.
PicotMatchResult picot_match(const BenchmarkItem& item,
                             const std::string& answer,
                             ModelGateway& gateway);

struct SimilarityResult {
    double cosine = 0.0;
    bool zero_vector_flag = false;
};

SimilarityResult semantic_similarity(const std::string& answer,
                                     const std::string& exact_answer,
                                     ModelGateway& gateway);

// main when the seed window is recalled at rank <= top_k (inclusive),
// challenge otherwise.
std::string accessibility_check(
    const std::string& question, const std::string& seed_window_id,
    const std::function<std::vector<std::string>(const std::string&)>&
        retrieve_fn,
    int top_k);

// Atomic-fact decomposition of an exact answer; gateway failure degrades
// to a single nugget equal to the whole answer.
std::vector<std::string> decompose_nuggets(const std::string& exact_answer,
                                           ModelGateway& gateway);

struct ItemEvaluation {
    std::string id;
    std::string split;
    std::string condition_code;
    std::optional<double> nugget_coverage;
    std::optional<double> picot_match_rate;
    std::optional<double> semantic_similarity;
    int judge_parse_flags = 0;
    std::string error;  // non-empty when this item failed
};

struct EvalReport {
    std::vector<ItemEvaluation> items;  // ordered by item id
    std::optional<double> mean_nugget_coverage;   // macro over scored items
    std::optional<double> mean_picot_match;
    std::optional<double> mean_semantic_similarity;
    std::map<std::string, int> count_by_split;
    std::map<std::string, int> count_by_condition;
    int failed_items = 0;
    std::uint64_t seed = 0;  // recorded in the saved report
};

// Runs answer_fn over every item, computes the per-item metrics and the
// macro aggregates. Per-item failures are recorded, never fatal.
EvalReport evaluate_run(
    std::span<const BenchmarkItem> benchmark,
    const std::function<std::string(const BenchmarkItem&)>& answer_fn,
    ModelGateway& gateway);

void save_report(const EvalReport& report, const std::string& path);

}  // namespace tierrank
