#include <doctest.h>

#include <cmath>
#include <random>

#include "testutil.hpp"
#include "tierrank/errors.hpp"
#include "tierrank/rerank.hpp"

using namespace tierrank;
using testutil::naive_maxsim;
using testutil::random_matrix;

namespace {

CalibratorParams table2_params() {
    CalibratorParams p;
    p.alpha = std::log(1.0348);
    p.deltas = {0.1287, 0.1288, 0.1288, 0.1288};
    return p;
}

TokenEmbeddingMatrix matrix(std::vector<std::vector<double>> rows) {
    TokenEmbeddingMatrix m;
    m.rows = std::move(rows);
    return m;
}

}  // namespace

TEST_SUITE("rerank") {

TEST_CASE("maxsim worked values") {
    SUBCASE("self-match of two orthonormal rows scores 2") {
        const auto q = matrix({{1, 0}, {0, 1}});
        CHECK(maxsim_score(q, q) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("orthogonal query token scores 0") {
        const auto q = matrix({{1, 0, 0}});
        const auto d = matrix({{0, 1, 0}, {0, 0, 1}});
        CHECK(maxsim_score(q, d) == doctest::Approx(0.0));
    }
    SUBCASE("dimension mismatch throws") {
        CHECK_THROWS_AS(maxsim_score(matrix({{1, 0}}), matrix({{1, 0, 0}})),
                        FormatError);
    }
    SUBCASE("empty matrix throws") {
        CHECK_THROWS_AS(maxsim_score(matrix({}), matrix({{1.0}})), FormatError);
    }
}

TEST_CASE("maxsim equals the double-loop oracle on random matrices") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const auto q = random_matrix(rng, 5, 8);
        const auto d = random_matrix(rng, 7, 8);
        CHECK(maxsim_score(q, d) ==
              doctest::Approx(naive_maxsim(q, d)).epsilon(1e-9));
    }
}

TEST_CASE("maxsim is invariant to positive token rescaling") {
    std::mt19937_64 rng(78);
    std::uniform_real_distribution<double> scale_pick(0.1, 9.0);
    for (int trial = 0; trial < 30; ++trial) {
        const auto q = random_matrix(rng, 4, 6);
        auto d = random_matrix(rng, 6, 6);
        const double base = maxsim_score(q, d);
        for (auto& row : d.rows) {
            const double c = scale_pick(rng);
            for (auto& x : row) x *= c;
        }
        CHECK(maxsim_score(q, d) == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("coarse rank") {
    const auto q = matrix({{1, 0}});
    std::vector<CoarseCandidate> candidates;
    candidates.push_back({"far", matrix({{0, 1}})});
    candidates.push_back({"near", matrix({{1, 0}})});
    candidates.push_back({"mid", matrix({{1, 1}})});

    SUBCASE("keeps the best k by score") {
        const auto top = coarse_rank(q, candidates, 2);
        REQUIRE(top.size() == 2);
        CHECK(top[0].first == "near");
        CHECK(top[1].first == "mid");
    }
    SUBCASE("single candidate returns itself") {
        const auto top = coarse_rank(q, {candidates.data(), 1}, 5);
        REQUIRE(top.size() == 1);
        CHECK(top[0].first == "far");
    }
    SUBCASE("equal scores order by window id") {
        std::vector<CoarseCandidate> tied;
        tied.push_back({"zeta", matrix({{1, 0}})});
        tied.push_back({"beta", matrix({{1, 0}})});
        const auto top = coarse_rank(q, tied, 2);
        CHECK(top[0].first == "beta");
        CHECK(top[1].first == "zeta");
    }
}

TEST_CASE("fine rank") {
    SUBCASE("scripted logits pass through in input order") {
        MockScript script;
        script.cross_rules.push_back({"", "w1-text", 2.5, 0});
        script.cross_rules.push_back({"", "w2-text", -0.5, 0});
        MockGateway gw(std::move(script));
        const std::vector<FineInput> inputs = {{"w1", "w1-text"},
                                               {"w2", "w2-text"}};
        const auto scored = fine_rank("q", inputs, gw);
        REQUIRE(scored.size() == 2);
        CHECK(scored[0] == std::pair<std::string, double>{"w1", 2.5});
        CHECK(scored[1] == std::pair<std::string, double>{"w2", -0.5});
    }
    SUBCASE("empty candidate list gives an empty result") {
        MockGateway gw(MockScript{});
        CHECK(fine_rank("q", {}, gw).empty());
    }
    SUBCASE("a failing candidate is dropped, the rest survive") {
        MockScript script;
        script.cross_rules.push_back({"", "bad", 0.0, 1000});
        script.cross_rules.push_back({"", "", 1.0, 0});
        MockGateway gw(std::move(script));
        const std::vector<FineInput> inputs = {{"w1", "good text"},
                                               {"w2", "bad text"},
                                               {"w3", "more good"}};
        const auto scored = fine_rank("q", inputs, gw);
        REQUIRE(scored.size() == 2);
        CHECK(scored[0].first == "w1");
        CHECK(scored[1].first == "w3");
    }
}

TEST_CASE("betr application") {
    const auto params = table2_params();
    SUBCASE("published worked example: grades split equal logits") {
        const std::vector<GradedScore> scored = {
            {"e", 1.0, EvidenceGrade::E}, {"a", 1.0, EvidenceGrade::A}};
        const auto calibrated = apply_betr(scored, params);
        REQUIRE(calibrated.size() == 2);
        CHECK(calibrated[0].window_id == "a");
        CHECK(calibrated[0].calibrated == doctest::Approx(1.0348).epsilon(1e-9));
        CHECK(calibrated[1].calibrated == doctest::Approx(0.5197).epsilon(1e-9));
    }
    SUBCASE("same grade preserves the raw-score order") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<GradedScore> scored;
        for (int i = 0; i < 20; ++i) {
            scored.push_back({"w" + std::to_string(i), normal(rng),
                              EvidenceGrade::C});
        }
        const auto calibrated = apply_betr(scored, params);
        for (std::size_t i = 1; i < calibrated.size(); ++i) {
            CHECK(calibrated[i - 1].calibrated >= calibrated[i].calibrated);
        }
        std::sort(scored.begin(), scored.end(), [](auto& a, auto& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.window_id < b.window_id;
        });
        for (std::size_t i = 0; i < scored.size(); ++i) {
            CHECK(calibrated[i].window_id == scored[i].window_id);
        }
    }
    SUBCASE("a large enough semantic gap lets grade E beat grade A") {
        // E wins once a * (s_E - s_A) exceeds u_A - u_E = 0.5151.
        const double gap = 0.5151 / 1.0348;
        const std::vector<GradedScore> close = {
            {"a", 1.0, EvidenceGrade::A},
            {"e", 1.0 + gap - 0.01, EvidenceGrade::E}};
        CHECK(apply_betr(close, params)[0].window_id == "a");

        const std::vector<GradedScore> wide = {
            {"a", 1.0, EvidenceGrade::A},
            {"e", 1.0 + gap + 0.01, EvidenceGrade::E}};
        CHECK(apply_betr(wide, params)[0].window_id == "e");
    }
}

TEST_CASE("soft quota selection") {
    auto pool_without_a = [](int n) {
        std::vector<CalibratedCandidate> pool;
        for (int i = 0; i < n; ++i) {
            pool.push_back({"b" + std::to_string(100 + i), 2.0 - 0.1 * i,
                            EvidenceGrade::B});
        }
        return pool;
    };

    SUBCASE("grade-A within margin replaces the last selected item") {
        auto pool = pool_without_a(12);
        // 12th item score: 2.0 - 1.1 = 0.9; grade A at 0.85 is within 0.10.
        pool.push_back({"a1", 0.85, EvidenceGrade::A});
        const auto [selection, decision] = soft_quota_select(pool, 12, 0.10);
        REQUIRE(selection.size() == 12);
        CHECK(decision.applied);
        CHECK(selection.back().window_id == "a1");
        CHECK(decision.displaced_id == "b111");
        bool displaced_present = false;
        for (const auto& s : selection) {
            if (s.window_id == "b111") displaced_present = true;
        }
        CHECK_FALSE(displaced_present);
    }
    SUBCASE("grade-A far below margin leaves the plain top-K") {
        auto pool = pool_without_a(12);
        pool.push_back({"a1", 0.5, EvidenceGrade::A});  // 0.9 - 0.10 > 0.5
        const auto [selection, decision] = soft_quota_select(pool, 12, 0.10);
        CHECK_FALSE(decision.applied);
        for (const auto& s : selection) CHECK(s.grade != EvidenceGrade::A);
    }
    SUBCASE("small pools pass through whole") {
        const auto pool = pool_without_a(5);
        const auto [selection, decision] = soft_quota_select(pool, 12, 0.10);
        CHECK(selection.size() == 5);
        CHECK(decision.small_pool);
    }
    SUBCASE("grade-A already inside the top-K is never displaced") {
        std::vector<CalibratedCandidate> pool;
        pool.push_back({"a1", 3.0, EvidenceGrade::A});
        for (int i = 0; i < 15; ++i) {
            pool.push_back({"b" + std::to_string(100 + i), 2.0 - 0.1 * i,
                            EvidenceGrade::B});
        }
        pool.push_back({"a2", 0.0, EvidenceGrade::A});
        std::sort(pool.begin(), pool.end(), [](auto& a, auto& b) {
            return a.calibrated > b.calibrated;
        });
        const auto [selection, decision] = soft_quota_select(pool, 12, 0.10);
        CHECK(decision.already_present);
        CHECK(selection.size() == 12);
        CHECK(selection[0].window_id == "a1");
    }
    SUBCASE("selection size is min(pool, K) across random pools") {
        std::mt19937_64 rng(9);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_int_distribution<int> size_pick(1, 30);
        std::uniform_int_distribution<int> grade_pick(0, 4);
        for (int trial = 0; trial < 50; ++trial) {
            const int n = size_pick(rng);
            std::vector<CalibratedCandidate> pool;
            for (int i = 0; i < n; ++i) {
                pool.push_back({"w" + std::to_string(i), normal(rng),
                                static_cast<EvidenceGrade>(grade_pick(rng))});
            }
            std::sort(pool.begin(), pool.end(), [](auto& a, auto& b) {
                if (a.calibrated != b.calibrated) {
                    return a.calibrated > b.calibrated;
                }
                return a.window_id < b.window_id;
            });
            const auto [selection, decision] = soft_quota_select(pool, 12, 0.1);
            CHECK(selection.size() ==
                  std::min<std::size_t>(pool.size(), 12));
        }
    }
}

}  // TEST_SUITE
