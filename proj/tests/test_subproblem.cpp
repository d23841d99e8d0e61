#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "pmgeo/subproblem.hpp"
#include "pmgeo/testkit/oracle.hpp"
#include "test_util.hpp"

namespace pmgeo {
namespace {

using testkit::oracle_subproblem;

WeightedResiduals make(std::vector<double> p, std::vector<double> t, std::vector<double> w) {
    return {std::move(p), std::move(t), std::move(w)};
}

TEST(Subproblem, IdentityFit) {
    const auto sol = solve_subproblem_untruncated(make({1, 2, 3}, {1, 2, 3}, {1, 1, 1}));
    EXPECT_EQ(sol.scale, 1.0);
    EXPECT_EQ(sol.objective, 0.0);
}

TEST(Subproblem, ExactScaling) {
    const auto sol = solve_subproblem_untruncated(make({1, 2}, {2, 4}, {1, 1}));
    EXPECT_EQ(sol.scale, 2.0);
    EXPECT_EQ(sol.objective, 0.0);
}

TEST(Subproblem, WeightedMedianAgainstOracle) {
    const auto r = make({1, 1, 1}, {1, 2, 4}, {1, 1, 1});
    // brute force over breakpoints {1, 2, 4}: objectives 4, 3, 5
    const auto ref = oracle_subproblem(r, Truncation::none());
    EXPECT_EQ(ref.scale, 2.0);
    EXPECT_EQ(ref.objective, 3.0);
    const auto sol = solve_subproblem_untruncated(r);
    EXPECT_EQ(sol.scale, 2.0);
    EXPECT_EQ(sol.objective, 3.0);
    EXPECT_EQ(sol.breakpoint_index, 1u);
}

TEST(Subproblem, LargeTauMatchesUntruncated) {
    const auto r = make({1, 1, 1}, {1, 2, 4}, {1, 1, 1});
    const auto sol = solve_subproblem_truncated(r, Truncation::at(1e6));
    EXPECT_EQ(sol.scale, 2.0);
    EXPECT_EQ(sol.objective, 3.0);
}

TEST(Subproblem, TruncationCapsOutlier) {
    const auto r = make({1, 1, 1, 1}, {1, 1.1, 0.9, 100}, {1, 1, 1, 1});
    const auto ref = oracle_subproblem(r, Truncation::at(1.0));
    const auto sol = solve_subproblem_truncated(r, Truncation::at(1.0));
    EXPECT_EQ(ref.scale, 1.0);
    EXPECT_NEAR(ref.objective, 1.2, 1e-12);
    EXPECT_EQ(sol.scale, ref.scale);
    EXPECT_EQ(sol.objective, ref.objective);
}

TEST(Subproblem, SinglePoint) {
    for (double w : {0.1, 1.0, 7.0}) {
        const auto sol = solve_subproblem_truncated(make({2}, {6}, {w}), Truncation::at(1.0));
        EXPECT_EQ(sol.scale, 3.0);
        EXPECT_EQ(sol.objective, 0.0);
    }
    const auto ref = oracle_subproblem(make({2}, {6}, {1}), Truncation::none());
    EXPECT_EQ(ref.scale, 3.0);
}

TEST(Subproblem, NegativeAndZeroPredictions) {
    // -1 * s vs -2 is the same residual as s vs 2; the zero row is constant.
    const auto r = make({-1, 1, 0}, {-2, 2, 5}, {1, 1, 1});
    const auto sol = solve_subproblem_untruncated(r);
    EXPECT_EQ(sol.scale, 2.0);
    EXPECT_EQ(sol.objective, 5.0);
    const auto tr = solve_subproblem_truncated(r, Truncation::at(1.0));
    EXPECT_EQ(tr.scale, 2.0);
    EXPECT_EQ(tr.objective, 1.0);
}

TEST(Subproblem, AllZeroPredictionsIsDegenerate) {
    const auto sol = solve_subproblem_untruncated(make({0, 0}, {1, -3}, {1, 2}));
    EXPECT_TRUE(sol.degenerate);
    EXPECT_EQ(sol.scale, 1.0);
    EXPECT_EQ(sol.objective, 7.0);
}

TEST(Subproblem, RejectsBadInput) {
    EXPECT_THROW(solve_subproblem_untruncated(make({}, {}, {})), Error);
    EXPECT_THROW(solve_subproblem_untruncated(make({1}, {1}, {0})), Error);
    EXPECT_THROW(solve_subproblem_untruncated(make({1}, {1}, {-1})), Error);
    EXPECT_THROW(solve_subproblem_untruncated(make({1, 2}, {1}, {1})), Error);
    EXPECT_THROW(Truncation::at(0.0), Error);
    EXPECT_THROW(Truncation::at(-1.0), Error);
    EXPECT_THROW(solve_subproblem_truncated(make({1}, {1}, {1}), Truncation::none()), Error);
}

TEST(Subproblem, ObjectiveMatchesReevaluation) {
    Rng rng(11);
    for (int rep = 0; rep < 200; ++rep) {
        const auto r = test::random_residuals(rng, 1 + rng.index(64));
        const Truncation tau = Truncation::at(rng.uniform(0.1, 3.0));
        for (Truncation t : {Truncation::none(), tau}) {
            const auto sol = t.enabled() ? solve_subproblem_truncated(r, t) : solve_subproblem_untruncated(r);
            EXPECT_TRUE(test::ulp_close(sol.objective, subproblem_objective(r, t, sol.scale), 8));
            if (t.enabled()) {
                EXPECT_LE(sol.objective, double(r.size()) * t.tau());
            }
        }
    }
}

TEST(Subproblem, DuplicateBreakpointsKeepSmallestIndex) {
    const auto r = make({1, 1, 1, 1, 1}, {2, 2, 2, 5, 9}, {1, 1, 1, 1, 1});
    const auto sol = solve_subproblem_untruncated(r);
    EXPECT_EQ(sol.scale, 2.0);
    EXPECT_EQ(sol.breakpoint_index, 0u);
}

TEST(Subproblem, RandomizedOracleEquivalence) {
    Rng rng(2024);
    for (int rep = 0; rep < 500; ++rep) {
        const auto r = test::random_residuals(rng, 1 + rng.index(64));
        const Truncation tau = Truncation::at(rng.uniform(0.05, 3.0));
        for (Truncation t : {Truncation::none(), tau}) {
            const auto sol = t.enabled() ? solve_subproblem_truncated(r, t) : solve_subproblem_untruncated(r);
            const auto ref = oracle_subproblem(r, t);
            ASSERT_TRUE(test::ulp_close(sol.objective, ref.objective, 8))
                << "rep " << rep << " fast " << sol.objective << " oracle " << ref.objective;
        }
    }
}

TEST(Subproblem, ScaleEquivariance) {
    Rng rng(5);
    for (int rep = 0; rep < 100; ++rep) {
        auto r = test::random_residuals(rng, 3 + rng.index(30));
        const auto base = solve_subproblem_untruncated(r);
        // powers of two keep every ratio exact
        for (double c : {0.25, 2.0, 8.0}) {
            auto scaled = r;
            for (auto& t : scaled.target) t *= c;
            EXPECT_EQ(solve_subproblem_untruncated(scaled).scale, base.scale * c);
            auto shrunk = r;
            for (auto& p : shrunk.pred) p *= c;
            EXPECT_EQ(solve_subproblem_untruncated(shrunk).scale, base.scale / c);
            const Truncation tau = Truncation::at(1.0);
            const auto tb = solve_subproblem_truncated(r, tau);
            EXPECT_EQ(solve_subproblem_truncated(shrunk, tau).scale, tb.scale / c);
            // scaling targets by c leaves residuals unchanged once weights shrink by c
            for (auto& w : scaled.weight) w /= c;
            EXPECT_EQ(solve_subproblem_truncated(scaled, tau).scale, tb.scale * c);
        }
    }
}

TEST(Subproblem, OutlierChangesObjectiveByAtMostTau) {
    const Truncation tau = Truncation::at(1.0);
    const auto clean = make({1, 1, 1, 1}, {1, 1.1, 0.9, 1.05}, {1, 1, 1, 1});
    auto dirty = clean;
    dirty.target[3] = 100.0;
    const auto a = solve_subproblem_truncated(clean, tau);
    const auto b = solve_subproblem_truncated(dirty, tau);
    EXPECT_LE(std::abs(b.objective - a.objective), 1.0 + 1e-12);
    const std::set<double> inliers{1.0, 1.1, 0.9};
    EXPECT_TRUE(inliers.count(b.scale));
}

}  // namespace
}  // namespace pmgeo
