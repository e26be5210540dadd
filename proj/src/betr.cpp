#include "tierrank/betr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

#include "tierrank/errors.hpp"

// The calibrator learns, from pairwise preference data, how much an
// evidence grade should shift a reranker logit. With a = exp(alpha) and
// cumulative biases u (see grade_biases), a preferred/non-preferred pair
// (d+, d-) contributes
//
//     log sigma(a * delta_s + u_{t+} - u_{t-})
//
// and the MAP objective is the per-query mean of those terms averaged
// over queries, minus Gaussian shrinkage penalties:
//
//     (1/|Q|) sum_q (1/max(1,|P_q|)) sum_pairs log sigma(z)
//       - (1/(2 tau^2)) sum_k delta_k^2 - (1/(2 sigma_a^2)) alpha^2.
//
// The truncated-prior normalization constant is parameter-independent on
// delta >= 0 and is dropped. Gradients use d/dz log sigma(z) = sigma(-z),
// dz/dalpha = a * delta_s, and dz/ddelta_k = -[t+ at or below k] +
// [t- at or below k].

namespace tierrank {

using json = nlohmann::json;

namespace {

double stable_log_sigmoid(double z) {
    if (z >= 0.0) return -std::log1p(std::exp(-z));
    return z - std::log1p(std::exp(z));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// 1 when grade t includes -delta_k in its bias (k = 0..3 for B..E).
double delta_indicator(EvidenceGrade t, int k) {
    return grade_rank(t) >= k + 1 ? 1.0 : 0.0;
}

}  // namespace

double CalibratorParams::scale() const { return std::exp(alpha); }

std::array<double, 5> grade_biases(const CalibratorParams& params) {
    std::array<double, 5> u{};
    u[0] = 0.0;
    double cumulative = 0.0;
    for (int k = 0; k < 4; ++k) {
        cumulative += params.deltas[static_cast<std::size_t>(k)];
        u[static_cast<std::size_t>(k) + 1] = -cumulative;
    }
    return u;
}

std::vector<QueryGroup> build_query_groups(
    std::span<const LabeledCandidateSet> sets, int negatives_per_positive,
    std::uint64_t seed) {
    if (negatives_per_positive < 1) {
        throw Error("negatives_per_positive must be >= 1");
    }
    std::mt19937_64 rng(seed);
    std::vector<QueryGroup> groups;
    groups.reserve(sets.size());
    for (const auto& set : sets) {
        QueryGroup group;
        group.query_id = set.query_id;

        std::vector<const LabeledCandidateSet::Candidate*> positives;
        std::vector<const LabeledCandidateSet::Candidate*> negatives;
        for (const auto& c : set.candidates) {
            if (set.gold_ids.count(c.window_id)) {
                positives.push_back(&c);
            } else {
                negatives.push_back(&c);
            }
        }

        if (!positives.empty() && !negatives.empty()) {
            const std::size_t k = std::min<std::size_t>(
                static_cast<std::size_t>(negatives_per_positive),
                negatives.size());
            for (const auto* pos : positives) {
                // Partial Fisher-Yates over a fresh index vector: uniform
                // sampling without replacement.
                std::vector<std::size_t> idx(negatives.size());
                for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
                for (std::size_t i = 0; i < k; ++i) {
                    std::uniform_int_distribution<std::size_t> pick(
                        i, idx.size() - 1);
                    std::swap(idx[i], idx[pick(rng)]);
                }
                for (std::size_t i = 0; i < k; ++i) {
                    const auto* neg = negatives[idx[i]];
                    group.records.push_back({set.query_id,
                                             pos->score - neg->score,
                                             pos->grade, neg->grade});
                }
            }
        }
        groups.push_back(std::move(group));
    }
    return groups;
}

std::vector<PairwiseRecord> build_pairwise_records(
    std::span<const LabeledCandidateSet> sets, int negatives_per_positive,
    std::uint64_t seed) {
    std::vector<PairwiseRecord> records;
    for (auto& group :
         build_query_groups(sets, negatives_per_positive, seed)) {
        records.insert(records.end(), group.records.begin(),
                       group.records.end());
    }
    return records;
}

std::vector<QueryGroup> group_records(
    std::span<const PairwiseRecord> records) {
    std::vector<QueryGroup> groups;
    std::map<std::string, std::size_t> index;
    for (const auto& r : records) {
        auto it = index.find(r.query_id);
        if (it == index.end()) {
            index[r.query_id] = groups.size();
            groups.push_back({r.query_id, {r}});
        } else {
            groups[it->second].records.push_back(r);
        }
    }
    return groups;
}

double preference_probability(double delta_s, EvidenceGrade grade_pos,
                              EvidenceGrade grade_neg,
                              const CalibratorParams& params) {
    const auto u = grade_biases(params);
    const double z = params.scale() * delta_s +
                     u[static_cast<std::size_t>(grade_rank(grade_pos))] -
                     u[static_cast<std::size_t>(grade_rank(grade_neg))];
    return sigmoid(z);
}

namespace {

std::size_t total_records(std::span<const QueryGroup> groups) {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.records.size();
    return n;
}

}  // namespace

double map_objective(const CalibratorParams& params,
                     std::span<const QueryGroup> groups,
                     const BetrHyper& hyper) {
    if (groups.empty() || total_records(groups) == 0) {
        throw Error("no training pairs");
    }
    const double a = params.scale();
    const auto u = grade_biases(params);

    double likelihood = 0.0;
    for (const auto& group : groups) {
        double group_sum = 0.0;
        for (const auto& r : group.records) {
            const double z =
                a * r.delta_s +
                u[static_cast<std::size_t>(grade_rank(r.grade_pos))] -
                u[static_cast<std::size_t>(grade_rank(r.grade_neg))];
            group_sum += stable_log_sigmoid(z);
        }
        likelihood +=
            group_sum / std::max<std::size_t>(1, group.records.size());
    }
    likelihood /= static_cast<double>(groups.size());

    double delta_sq = 0.0;
    for (double d : params.deltas) delta_sq += d * d;

    return likelihood - delta_sq / (2.0 * hyper.tau * hyper.tau) -
           params.alpha * params.alpha / (2.0 * hyper.sigma_a * hyper.sigma_a);
}

BetrGradient map_gradient(const CalibratorParams& params,
                          std::span<const QueryGroup> groups,
                          const BetrHyper& hyper) {
    if (groups.empty() || total_records(groups) == 0) {
        throw Error("no training pairs");
    }
    const double a = params.scale();
    const auto u = grade_biases(params);

    BetrGradient grad;
    for (const auto& group : groups) {
        double g_alpha = 0.0;
        std::array<double, 4> g_delta{};
        for (const auto& r : group.records) {
            const double z =
                a * r.delta_s +
                u[static_cast<std::size_t>(grade_rank(r.grade_pos))] -
                u[static_cast<std::size_t>(grade_rank(r.grade_neg))];
            const double w = sigmoid(-z);  // d log sigma(z) / dz
            g_alpha += w * a * r.delta_s;
            for (int k = 0; k < 4; ++k) {
                const double dz = -delta_indicator(r.grade_pos, k) +
                                  delta_indicator(r.grade_neg, k);
                g_delta[static_cast<std::size_t>(k)] += w * dz;
            }
        }
        const double scale =
            1.0 / std::max<std::size_t>(1, group.records.size());
        grad.d_alpha += g_alpha * scale;
        for (int k = 0; k < 4; ++k) {
            grad.d_deltas[static_cast<std::size_t>(k)] +=
                g_delta[static_cast<std::size_t>(k)] * scale;
        }
    }
    const double inv_q = 1.0 / static_cast<double>(groups.size());
    grad.d_alpha *= inv_q;
    for (auto& g : grad.d_deltas) g *= inv_q;

    grad.d_alpha -= params.alpha / (hyper.sigma_a * hyper.sigma_a);
    for (int k = 0; k < 4; ++k) {
        grad.d_deltas[static_cast<std::size_t>(k)] -=
            params.deltas[static_cast<std::size_t>(k)] /
            (hyper.tau * hyper.tau);
    }
    return grad;
}

namespace {

void require_monotone_biases(const CalibratorParams& params) {
    const auto u = grade_biases(params);
    for (std::size_t i = 1; i < u.size(); ++i) {
        if (u[i] > u[i - 1]) {
            throw Error("grade bias monotonicity violated after update");
        }
    }
}

}  // namespace

FitResult fit_calibrator_groups(std::span<const QueryGroup> train_groups,
                                std::span<const QueryGroup> val_groups,
                                const BetrHyper& hyper) {
    if (train_groups.empty() || total_records(train_groups) == 0) {
        throw Error("no training pairs");
    }
    const bool has_val =
        !val_groups.empty() && total_records(val_groups) > 0;

    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;

    CalibratorParams params;  // alpha = 0, deltas = 0: the prior mode
    std::array<double, 5> m{};
    std::array<double, 5> v{};

    auto evaluate = [&](const CalibratorParams& p) {
        FitCurvePoint point;
        point.train_nll = -map_objective(p, train_groups, hyper);
        point.val_nll = has_val
                            ? -map_objective(p, val_groups, hyper)
                            : std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(point.train_nll) ||
            (has_val && !std::isfinite(point.val_nll))) {
            throw Error("objective became non-finite (train_nll=" +
                        std::to_string(point.train_nll) + ")");
        }
        return point;
    };

    FitResult result;
    FitCurvePoint point = evaluate(params);
    point.epoch = 0;
    result.curve.push_back(point);

    CalibratorParams best = params;
    double best_metric = has_val ? point.val_nll : point.train_nll;
    int best_epoch = 0;
    int stale = 0;

    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        const BetrGradient grad = map_gradient(params, train_groups, hyper);
        const std::array<double, 5> g = {
            grad.d_alpha, grad.d_deltas[0], grad.d_deltas[1],
            grad.d_deltas[2], grad.d_deltas[3]};

        const double t = static_cast<double>(epoch);
        for (std::size_t i = 0; i < 5; ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
            const double m_hat = m[i] / (1.0 - std::pow(kBeta1, t));
            const double v_hat = v[i] / (1.0 - std::pow(kBeta2, t));
            const double step =
                hyper.learning_rate * m_hat / (std::sqrt(v_hat) + kEps);
            if (i == 0) {
                params.alpha += step;  // ascent
            } else {
                params.deltas[i - 1] += step;
            }
        }
        // Projection keeps the truncated prior's support.
        for (auto& d : params.deltas) d = std::max(0.0, d);
        require_monotone_biases(params);

        point = evaluate(params);
        point.epoch = epoch;
        result.curve.push_back(point);

        const double metric = has_val ? point.val_nll : point.train_nll;
        if (metric < best_metric) {
            best_metric = metric;
            best = params;
            best_epoch = epoch;
            stale = 0;
        } else {
            ++stale;
            if (has_val && stale >= hyper.patience) break;
        }
    }

    result.params = best;
    result.best_epoch = best_epoch;
    result.hyper = hyper;
    return result;
}

FitResult fit_calibrator(std::span<const LabeledCandidateSet> train_sets,
                         std::span<const LabeledCandidateSet> val_sets,
                         const BetrHyper& hyper) {
    const auto train_groups =
        build_query_groups(train_sets, hyper.negatives_per_positive, hyper.seed);
    const auto val_groups =
        build_query_groups(val_sets, hyper.negatives_per_positive, hyper.seed);
    return fit_calibrator_groups(train_groups, val_groups, hyper);
}

double calibrate_score(double s, EvidenceGrade grade,
                       const CalibratorParams& params) {
    const auto u = grade_biases(params);
    return params.scale() * s + u[static_cast<std::size_t>(grade_rank(grade))];
}

namespace {
constexpr const char* kParamsFormat = "tierrank-betr-params";
constexpr int kParamsVersion = 1;
}  // namespace

void save_params(const CalibratorParams& params, const std::string& path) {
    const auto u = grade_biases(params);
    json j = {{"format", kParamsFormat},
              {"version", kParamsVersion},
              {"alpha", params.alpha},
              {"deltas", params.deltas},
              {"scale", params.scale()},
              {"grade_biases",
               {{"A", u[0]}, {"B", u[1]}, {"C", u[2]}, {"D", u[3]}, {"E", u[4]}}}};
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write params file: " + path);
    out << j.dump(2) << "\n";
}

CalibratorParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open params file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("params parse error in " + path + ": " + e.what());
    }
    if (j.value("format", "") != kParamsFormat ||
        j.value("version", -1) != kParamsVersion) {
        throw FormatError("not a calibrator params file: " + path);
    }
    CalibratorParams params;
    try {
        params.alpha = j.at("alpha").get<double>();
        const auto deltas = j.at("deltas").get<std::vector<double>>();
        if (deltas.size() != 4) {
            throw FormatError("expected 4 deltas in " + path);
        }
        std::copy(deltas.begin(), deltas.end(), params.deltas.begin());
    } catch (const json::exception& e) {
        throw FormatError("invalid params file " + path + ": " + e.what());
    }
    for (double d : params.deltas) {
        if (!std::isfinite(d) || d < 0.0) {
            throw FormatError("params file has negative or non-finite delta");
        }
    }
    if (!std::isfinite(params.alpha)) {
        throw FormatError("params file has non-finite alpha");
    }
    return params;
}

void save_training_curve(const FitResult& fit, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write curve file: " + path);
    out << "# optimizer=adam beta1=0.9 beta2=0.999 eps=1e-8 "
           "bias_correction=true projection=nonneg-deltas"
        << " lr=" << fit.hyper.learning_rate << " tau=" << fit.hyper.tau
        << " sigma_a=" << fit.hyper.sigma_a << " k="
        << fit.hyper.negatives_per_positive << " seed=" << fit.hyper.seed
        << " best_epoch=" << fit.best_epoch << "\n";
    out << "epoch,train_nll,val_nll\n";
    char buf[128];
    for (const auto& p : fit.curve) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", p.epoch,
                      p.train_nll, p.val_nll);
        out << buf;
    }
}

}  // namespace tierrank
