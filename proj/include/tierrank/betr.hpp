#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tierrank/grades.hpp"

namespace tierrank {

// Calibrator parameters. The semantic scale is a = exp(alpha) > 0 and the
// grade biases are cumulative non-positive offsets:
//   u_A = 0, u_B = -d_B, u_C = -(d_B+d_C), u_D = -(d_B+d_C+d_D),
//   u_E = -(d_B+d_C+d_D+d_E),  with every delta >= 0,
// which guarantees u_A >= u_B >= u_C >= u_D >= u_E by construction.
struct CalibratorParams {
    double alpha = 0.0;
    std::array<double, 4> deltas = {0.0, 0.0, 0.0, 0.0};  // d_B, d_C, d_D, d_E

    double scale() const;  // exp(alpha)

    bool operator==(const CalibratorParams&) const = default;
};

// u_A .. u_E, indexed by grade_rank.
std::array<double, 5> grade_biases(const CalibratorParams& params);

struct BetrHyper {
    double tau = 1.0;                  // shrinkage scale for the deltas
    double sigma_a = 5.0;              // prior scale for alpha
    int negatives_per_positive = 20;   // K
    double learning_rate = 0.05;
    int epochs = 80;
    std::uint64_t seed = 42;
    int patience = 10;                 // early stop on stalled validation
};

// One (d+, d-) training comparison.
struct PairwiseRecord {
    std::string query_id;
    double delta_s = 0.0;  // s(q,d+) - s(q,d-)
    EvidenceGrade grade_pos = EvidenceGrade::A;
    EvidenceGrade grade_neg = EvidenceGrade::A;
};

// Scored candidates plus the gold set for one query. Golds absent from
// the candidate list have no score and are ignored for pairing.
struct LabeledCandidateSet {
    struct Candidate {
        std::string window_id;
        double score = 0.0;  // reranker logit s(q,d)
        EvidenceGrade grade = EvidenceGrade::E;
    };
    std::string query_id;
    std::vector<Candidate> candidates;
    std::set<std::string> gold_ids;
};

struct QueryGroup {
    std::string query_id;
    std::vector<PairwiseRecord> records;
};

// One group per input set, in input order; a query whose positive or
// negative pool is empty yields an empty group. Each positive is paired
// with min(K, #negatives) distinct negatives sampled uniformly without
// replacement; deterministic under `seed`.
std::vector<QueryGroup> build_query_groups(
    std::span<const LabeledCandidateSet> sets, int negatives_per_positive,
    std::uint64_t seed);

// Flattened convenience form of build_query_groups.
std::vector<PairwiseRecord> build_pairwise_records(
    std::span<const LabeledCandidateSet> sets, int negatives_per_positive,
    std::uint64_t seed);

// Regroup a flat record list by query id (insertion order of first use).
std::vector<QueryGroup> group_records(std::span<const PairwiseRecord> records);

// Bradley-Terry preference probability
//   sigma(a * delta_s + u_{t+} - u_{t-})  in (0, 1).
double preference_probability(double delta_s, EvidenceGrade grade_pos,
                              EvidenceGrade grade_neg,
                              const CalibratorParams& params);

// Query-normalized mean pairwise log-likelihood minus the quadratic
// shrinkage penalties:
//   (1/|Q|) sum_q (1/max(1,|P_q|)) sum_pairs log sigma(z)
//     - (1/2 tau^2) sum delta^2 - (1/2 sigma_a^2) alpha^2.
// Empty groups count toward |Q| and contribute zero. Throws Error when
// no group has any records.
double map_objective(const CalibratorParams& params,
                     std::span<const QueryGroup> groups,
                     const BetrHyper& hyper);

struct BetrGradient {
    double d_alpha = 0.0;
    std::array<double, 4> d_deltas = {0.0, 0.0, 0.0, 0.0};
};

// Analytic gradient of map_objective over (alpha, d_B..d_E), chain rule
// through a = exp(alpha) and the cumulative bias parameterization.
BetrGradient map_gradient(const CalibratorParams& params,
                          std::span<const QueryGroup> groups,
                          const BetrHyper& hyper);

struct FitCurvePoint {
    int epoch = 0;          // 0 is the pre-training evaluation
    double train_nll = 0.0; // negative map_objective on the train groups
    double val_nll = 0.0;   // NaN when no validation groups were given
};

struct FitResult {
    CalibratorParams params;        // best validation epoch (or final)
    std::vector<FitCurvePoint> curve;
    int best_epoch = 0;
    BetrHyper hyper;                // settings the fit ran with
};

// MAP fit by full-batch Adam ascent (beta1=0.9, beta2=0.999, eps=1e-8,
// bias-corrected); delta non-negativity kept by projection onto [0, inf)
// after every step. Deterministic under hyper.seed. Throws Error if the
// objective turns non-finite.
FitResult fit_calibrator(std::span<const LabeledCandidateSet> train_sets,
                         std::span<const LabeledCandidateSet> val_sets,
                         const BetrHyper& hyper);

// Same optimizer over pre-built pairwise groups.
FitResult fit_calibrator_groups(std::span<const QueryGroup> train_groups,
                                std::span<const QueryGroup> val_groups,
                                const BetrHyper& hyper);

// Online score: exp(alpha) * s + u_grade.
double calibrate_score(double s, EvidenceGrade grade,
                       const CalibratorParams& params);

// Versioned JSON round-trip; load rejects negative deltas and missing
// fields. The derived bias vector is written for human inspection only.
void save_params(const CalibratorParams& params, const std::string& path);
CalibratorParams load_params(const std::string& path);

// CSV `epoch,train_nll,val_nll` preceded by a comment line recording the
// optimizer settings.
void save_training_curve(const FitResult& fit, const std::string& path);

}  // namespace tierrank
