#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tierrank/betr.hpp"
#include "tierrank/gateway.hpp"
#include "tierrank/grades.hpp"

namespace tierrank {

struct RerankConfig {
    int coarse_top_k = 64;
    int final_top_k = 12;
    double quota_margin = 0.10;  // calibrated-score units
    bool betr_at_merge = false;  // extra calibration pass at candidate merge
};

// Late-interaction score: sum over query tokens of the maximum cosine
// similarity against any window token. Throws FormatError on mismatched
// embedding dimensions.
double maxsim_score(const TokenEmbeddingMatrix& query,
                    const TokenEmbeddingMatrix& window);

struct CoarseCandidate {
    std::string window_id;
    TokenEmbeddingMatrix tokens;
};

// Top coarse_top_k by maxsim_score, ties broken by window id; everything
// is returned when the pool is smaller.
std::vector<std::pair<std::string, double>> coarse_rank(
    const TokenEmbeddingMatrix& query_tokens,
    std::span<const CoarseCandidate> candidates, int coarse_top_k);

struct FineInput {
    std::string window_id;
    std::string text;
};

// One cross-encoder logit per candidate, input order preserved; a failing
// candidate is dropped with a warning.
std::vector<std::pair<std::string, double>> fine_rank(
    const std::string& query, std::span<const FineInput> candidates,
    ModelGateway& gateway);

struct GradedScore {
    std::string window_id;
    double score = 0.0;  // cross-encoder logit s
    EvidenceGrade grade = EvidenceGrade::E;
};

struct CalibratedCandidate {
    std::string window_id;
    double calibrated = 0.0;  // r = exp(alpha) * s + u_grade
    EvidenceGrade grade = EvidenceGrade::E;
};

// BETR calibration and descending sort (ties by window id).
std::vector<CalibratedCandidate> apply_betr(std::span<const GradedScore> scored,
                                            const CalibratorParams& params);

struct QuotaDecision {
    bool applied = false;       // a grade-A window was promoted
    bool small_pool = false;    // pool smaller than final_top_k
    bool already_present = false;  // top-K already contains grade A
    std::string promoted_id;
    std::string displaced_id;
};

// Global top-K with the soft grade-A quota: when no grade-A window made
// the cut but the best one scores within quota_margin of the K-th item,
// it replaces the last selected item. Pools smaller than K are returned
// whole.
std::pair<std::vector<CalibratedCandidate>, QuotaDecision> soft_quota_select(
    std::span<const CalibratedCandidate> calibrated, int final_top_k,
    double quota_margin);

}  // namespace tierrank
