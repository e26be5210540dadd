#include "tierrank/rerank.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "tierrank/errors.hpp"
#include "tierrank/vec.hpp"

namespace tierrank {

double maxsim_score(const TokenEmbeddingMatrix& query,
                    const TokenEmbeddingMatrix& window) {
    if (query.rows.empty() || window.rows.empty()) {
        throw FormatError("maxsim_score: empty token matrix");
    }
    if (query.dim() != window.dim()) {
        throw FormatError("maxsim_score: embedding dimension mismatch");
    }
    double total = 0.0;
    for (const auto& q : query.rows) {
        double best = -1.0;  // cosine lower bound
        for (const auto& d : window.rows) {
            best = std::max(best, cosine(q, d));
        }
        total += best;
    }
    return total;
}

std::vector<std::pair<std::string, double>> coarse_rank(
    const TokenEmbeddingMatrix& query_tokens,
    std::span<const CoarseCandidate> candidates, int coarse_top_k) {
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(candidates.size());
    for (const auto& c : candidates) {
        scored.emplace_back(c.window_id, maxsim_score(query_tokens, c.tokens));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (coarse_top_k >= 0 &&
        scored.size() > static_cast<std::size_t>(coarse_top_k)) {
        scored.resize(static_cast<std::size_t>(coarse_top_k));
    }
    return scored;
}

std::vector<std::pair<std::string, double>> fine_rank(
    const std::string& query, std::span<const FineInput> candidates,
    ModelGateway& gateway) {
    std::vector<std::pair<std::string, double>> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        try {
            out.emplace_back(c.window_id, gateway.cross_score(query, c.text));
        } catch (const std::exception& e) {
            spdlog::warn("cross scoring failed for '{}'; dropped: {}",
                         c.window_id, e.what());
        }
    }
    return out;
}

std::vector<CalibratedCandidate> apply_betr(std::span<const GradedScore> scored,
                                            const CalibratorParams& params) {
    std::vector<CalibratedCandidate> out;
    out.reserve(scored.size());
    for (const auto& s : scored) {
        out.push_back(
            {s.window_id, calibrate_score(s.score, s.grade, params), s.grade});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.calibrated != b.calibrated) return a.calibrated > b.calibrated;
        return a.window_id < b.window_id;
    });
    return out;
}

std::pair<std::vector<CalibratedCandidate>, QuotaDecision> soft_quota_select(
    std::span<const CalibratedCandidate> calibrated, int final_top_k,
    double quota_margin) {
    if (final_top_k < 1) throw Error("final_top_k must be >= 1");
    QuotaDecision decision;

    std::vector<CalibratedCandidate> pool(calibrated.begin(), calibrated.end());
    if (pool.size() <= static_cast<std::size_t>(final_top_k)) {
        decision.small_pool = true;
        return {pool, decision};
    }

    std::vector<CalibratedCandidate> selection(
        pool.begin(), pool.begin() + final_top_k);

    const bool has_grade_a = std::any_of(
        selection.begin(), selection.end(),
        [](const auto& c) { return c.grade == EvidenceGrade::A; });
    if (has_grade_a) {
        decision.already_present = true;
        return {selection, decision};
    }

    // Best grade-A candidate outside the top-K (pool is sorted).
    const CalibratedCandidate* best_a = nullptr;
    for (std::size_t i = static_cast<std::size_t>(final_top_k);
         i < pool.size(); ++i) {
        if (pool[i].grade == EvidenceGrade::A) {
            best_a = &pool[i];
            break;
        }
    }
    if (!best_a) return {selection, decision};

    const double threshold = selection.back().calibrated - quota_margin;
    if (best_a->calibrated >= threshold) {
        decision.applied = true;
        decision.promoted_id = best_a->window_id;
        decision.displaced_id = selection.back().window_id;
        selection.back() = *best_a;
    }
    return {selection, decision};
}

}  // namespace tierrank
