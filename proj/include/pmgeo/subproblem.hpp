#pragma once

// One-dimensional weighted L1 scale fitting, with and without truncated
// residuals:
//
//     l(s) = sum_i min(tau, w_i |s * pred_i - target_i|)
//
// The optimum always sits at a ratio breakpoint target_k / pred_k. The
// solvers sort the breakpoints, evaluate one-sided derivatives from prefix
// sums of w_i * |pred_i|, and evaluate the objective exactly at every point
// where the derivative changes sign.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pmgeo/error.hpp"

namespace pmgeo {

/// Residual cap tau applied as min(tau, w|r|), or none.
class Truncation {
public:
    constexpr Truncation() = default;

    static constexpr Truncation none() { return {}; }

    static Truncation at(double tau) {
        require(tau > 0.0 && std::isfinite(tau), "truncation: tau must be positive and finite");
        Truncation t;
        t.tau_ = tau;
        return t;
    }

    constexpr bool enabled() const noexcept { return tau_ > 0.0; }
    constexpr double tau() const noexcept { return tau_; }

    /// Applies the cap to an already-weighted absolute residual.
    constexpr double cap(double weighted_abs) const noexcept {
        return enabled() ? std::min(tau_, weighted_abs) : weighted_abs;
    }

private:
    double tau_ = 0.0;
};

/// Default truncation used for training-time alignment.
inline constexpr double kDefaultTau = 1.0;

struct WeightedResiduals {
    std::vector<double> pred;
    std::vector<double> target;
    std::vector<double> weight;

    std::size_t size() const noexcept { return pred.size(); }

    void validate() const {
        require(!pred.empty(), "subproblem: at least one residual is required");
        require(pred.size() == target.size() && pred.size() == weight.size(),
                "subproblem: pred, target and weight must have equal length");
        for (double w : weight) require(w > 0.0, "subproblem: weights must be strictly positive");
    }
};

struct SubproblemSolution {
    double scale = 1.0;
    double objective = 0.0;
    /// Residual index whose ratio breakpoint is the returned scale.
    std::size_t breakpoint_index = 0;
    /// Breakpoints at which the objective was evaluated.
    std::size_t extrema_count = 0;
    /// Every pred entry was zero; the objective does not depend on s.
    bool degenerate = false;
};

/// Objective evaluated directly in index order.
inline double subproblem_objective(std::span<const double> pred, std::span<const double> target,
                                   std::span<const double> weight, Truncation tau, double s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += tau.cap(weight[i] * std::abs(s * pred[i] - target[i]));
    return acc;
}

inline double subproblem_objective(const WeightedResiduals& r, Truncation tau, double s) {
    return subproblem_objective(r.pred, r.target, r.weight, tau, s);
}

namespace detail {

/// Order-preserving unsigned image of a double; -0.0 and +0.0 map together.
inline std::uint64_t radix_key(double x) noexcept {
    const std::uint64_t u = std::bit_cast<std::uint64_t>(x + 0.0);
    return (u >> 63) ? ~u : (u | (std::uint64_t{1} << 63));
}

struct RadixScratch {
    std::vector<std::uint64_t> keys, keys_tmp;
    std::vector<std::uint32_t> order, order_tmp;
    std::vector<std::uint32_t> count;
};

/// Stable sort permutation of `values` (ascending); equal values keep their
/// input order. LSD radix passes on the upper 33 key bits, then an insertion
/// pass on the full key, which only moves values agreeing in those bits.
inline const std::vector<std::uint32_t>& sort_order(std::span<const double> values, RadixScratch& rs) {
    constexpr int kBits = 11;
    constexpr int kLow = 31;
    constexpr int kPasses = (64 - kLow + kBits - 1) / kBits;
    constexpr std::size_t kBuckets = std::size_t{1} << kBits;
    const std::size_t n = values.size();
    rs.keys.resize(n);
    rs.order.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        rs.keys[i] = radix_key(values[i]);
        rs.order[i] = static_cast<std::uint32_t>(i);
    }
    if (n < 2) return rs.order;
    rs.count.assign(kPasses * kBuckets, 0u);
    for (std::uint64_t key : rs.keys)
        for (int p = 0; p < kPasses; ++p) ++rs.count[p * kBuckets + ((key >> (kLow + p * kBits)) & (kBuckets - 1))];
    rs.keys_tmp.resize(n);
    rs.order_tmp.resize(n);
    for (int p = 0; p < kPasses; ++p) {
        std::uint32_t* c = rs.count.data() + p * kBuckets;
        const int shift = kLow + p * kBits;
        if (c[(rs.keys[0] >> shift) & (kBuckets - 1)] == n) continue;
        std::uint32_t sum = 0;
        for (std::size_t b = 0; b < kBuckets; ++b) {
            const std::uint32_t here = c[b];
            c[b] = sum;
            sum += here;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t dst = c[(rs.keys[i] >> shift) & (kBuckets - 1)]++;
            rs.keys_tmp[dst] = rs.keys[i];
            rs.order_tmp[dst] = rs.order[i];
        }
        rs.keys.swap(rs.keys_tmp);
        rs.order.swap(rs.order_tmp);
    }
    for (std::size_t i = 1; i < n; ++i) {
        const std::uint64_t key = rs.keys[i];
        if (rs.keys[i - 1] <= key) continue;
        const std::uint32_t idx = rs.order[i];
        std::size_t j = i;
        for (; j > 0 && rs.keys[j - 1] > key; --j) {
            rs.keys[j] = rs.keys[j - 1];
            rs.order[j] = rs.order[j - 1];
        }
        rs.keys[j] = key;
        rs.order[j] = idx;
    }
    return rs.order;
}

/// Knots at positions `at`, each changing the slope by `slope` and owned by
/// residual `term`, plus the prefix sums of slope once sorted.
struct KnotArray {
    std::vector<double> at, slope, prefix;
    std::vector<std::uint32_t> term;

    std::size_t size() const noexcept { return at.size(); }

    void clear() {
        at.clear();
        slope.clear();
        term.clear();
    }

    void push(double a, double s, std::uint32_t t) {
        at.push_back(a);
        slope.push_back(s);
        term.push_back(t);
    }

    /// Sorts by position (stable, so insertion order breaks ties) and builds
    /// the prefix sums.
    void finalize(RadixScratch& rs, std::vector<double>& tmp_d, std::vector<std::uint32_t>& tmp_u) {
        const std::size_t n = at.size();
        const auto& order = sort_order(at, rs);
        auto gather = [&](auto& v, auto& tmp) {
            tmp.resize(n);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = v[order[i]];
            v.swap(tmp);
        };
        gather(at, tmp_d);
        gather(slope, tmp_d);
        gather(term, tmp_u);
        prefix.resize(n + 1);
        prefix[0] = 0.0;
        for (std::size_t j = 0; j < n; ++j) prefix[j + 1] = prefix[j] + slope[j];
    }
};

/// Breakpoint arrays: ratio x/x̂ and, when truncated, the lower and upper
/// truncation boundaries (w x -/+ tau) / (w x̂). Every knot carries w|x̂|.
class KnotSet {
public:
    KnotArray ratio, lower, upper;

    void clear() {
        ratio.clear();
        lower.clear();
        upper.clear();
    }

    void reserve(std::size_t n, bool truncated) {
        for (KnotArray* a : {&ratio, &lower, &upper}) {
            if (a != &ratio && !truncated) break;
            a->at.reserve(n);
            a->slope.reserve(n);
            a->term.reserve(n);
        }
    }

    /// Adds one residual after sign canonicalization (pred > 0). Terms with
    /// pred == 0 are constant in s and carry no knot. Terms must be added in
    /// ascending order so that equal positions sort by term.
    void add(double pred, double target, double weight, std::uint32_t term, Truncation tau) {
        if (pred == 0.0) return;
        if (pred < 0.0) {
            pred = -pred;
            target = -target;
        }
        const double wp = weight * pred;
        ratio.push(target / pred, wp, term);
        if (tau.enabled()) {
            const double wt = weight * target;
            lower.push((wt - tau.tau()) / wp, wp, term);
            upper.push((wt + tau.tau()) / wp, wp, term);
        }
    }

    void finalize() {
        for (KnotArray* a : {&ratio, &lower, &upper}) a->finalize(radix_, tmp_d_, tmp_u_);
    }

    bool empty() const noexcept { return ratio.size() == 0; }

    /// Precomputes the slope contribution of this set as a step function over
    /// its distinct knot positions, for sets scanned many times.
    void build_profile(bool truncated) {
        profile_at_.clear();
        profile_right_.clear();
        std::vector<double> pos(ratio.at);
        if (truncated) {
            pos.insert(pos.end(), lower.at.begin(), lower.at.end());
            pos.insert(pos.end(), upper.at.begin(), upper.at.end());
        }
        std::sort(pos.begin(), pos.end());
        pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
        std::size_t a = 0, b = 0, c = 0;
        for (double s : pos) {
            while (a < ratio.size() && ratio.at[a] <= s) ++a;
            double right = 2.0 * ratio.prefix[a];
            if (truncated) {
                while (b < lower.size() && lower.at[b] <= s) ++b;
                while (c < upper.size() && upper.at[c] <= s) ++c;
                right -= lower.prefix[b] + upper.prefix[c];
            }
            profile_at_.push_back(s);
            profile_right_.push_back(right);
        }
        has_profile_ = true;
    }

    bool has_profile() const noexcept { return has_profile_; }
    const std::vector<double>& profile_at() const noexcept { return profile_at_; }
    /// Slope contribution just right of (and at, for d+) each profile position.
    const std::vector<double>& profile_right() const noexcept { return profile_right_; }

private:
    std::vector<double> profile_at_, profile_right_;
    bool has_profile_ = false;
    RadixScratch radix_;
    std::vector<double> tmp_d_;
    std::vector<std::uint32_t> tmp_u_;
};

/// A ratio breakpoint worth evaluating.
struct Candidate {
    double at;
    std::uint32_t term;
};

namespace scan {

// Number of knots strictly below (lt) and at or below (le) the position.
struct Cursor {
    std::size_t lt = 0, le = 0;

    void advance(const std::vector<double>& at, double s) {
        const std::size_t n = at.size();
        while (lt < n && at[lt] < s) ++lt;
        if (le < lt) le = lt;
        while (le < n && at[le] <= s) ++le;
    }
};

}  // namespace scan

/// Ratio knots (over the union of one or two finalized sets) where the left
/// derivative is negative and the right derivative non-negative, each up to
/// prefix-sum rounding. One candidate per distinct position, carrying the
/// smallest term at that position.
///
/// Derivatives at s, with Q* the prefix sums of w|x̂| in each sorted order:
///   untruncated  d(s) = 2 Q_ratio(s) - Q_ratio(total)
///   truncated    d(s) = 2 Q_ratio(s) - Q_lower(s) - Q_upper(s)
/// where Q(s) counts knots strictly below s for d- and at or below s for d+.
inline void find_extrema(std::span<const KnotSet* const> sets, bool truncated, std::vector<Candidate>& candidates) {
    require(!sets.empty() && sets.size() <= 2, "extrema search: expected one or two knot sets");
    candidates.clear();
    const KnotSet& a = *sets[0];
    const KnotSet* b = sets.size() > 1 ? sets[1] : nullptr;
    const std::size_t na = a.ratio.size(), nb = b ? b->ratio.size() : 0;
    const double total = a.ratio.prefix[na] + (b ? b->ratio.prefix[nb] : 0.0);
    const double tol = 4.0 * double(na + nb + 1) * std::numeric_limits<double>::epsilon() * total;

    scan::Cursor ca[3], cb[3];
    auto slopes = [&](const KnotSet& ks, scan::Cursor* c, double s, double& dm, double& dp) {
        if (ks.has_profile()) {
            // counts strictly below s are the counts at the previous position
            const auto& at = ks.profile_at();
            const auto& right = ks.profile_right();
            std::size_t& j = c[0].lt;
            while (j < at.size() && at[j] < s) ++j;
            const double below = j == 0 ? 0.0 : right[j - 1];
            dm += below;
            dp += j < at.size() && at[j] == s ? right[j] : below;
            return;
        }
        c[0].advance(ks.ratio.at, s);
        dm += 2.0 * ks.ratio.prefix[c[0].lt];
        dp += 2.0 * ks.ratio.prefix[c[0].le];
        if (truncated) {
            c[1].advance(ks.lower.at, s);
            c[2].advance(ks.upper.at, s);
            dm -= ks.lower.prefix[c[1].lt] + ks.upper.prefix[c[2].lt];
            dp -= ks.lower.prefix[c[1].le] + ks.upper.prefix[c[2].le];
        }
    };

    auto visit = [&](bool all) {
        std::size_t ia = 0, ib = 0;
        while (ia < na || ib < nb) {
            // next distinct position and its smallest term
            double s;
            std::uint32_t term;
            if (ib >= nb || (ia < na && (a.ratio.at[ia] < b->ratio.at[ib] ||
                                         (a.ratio.at[ia] == b->ratio.at[ib] && a.ratio.term[ia] < b->ratio.term[ib])))) {
                s = a.ratio.at[ia];
                term = a.ratio.term[ia];
            } else {
                s = b->ratio.at[ib];
                term = b->ratio.term[ib];
            }
            while (ia < na && a.ratio.at[ia] == s) ++ia;
            while (ib < nb && b->ratio.at[ib] == s) ++ib;
            if (all) {
                candidates.push_back({s, term});
                continue;
            }
            double dm = 0.0, dp = 0.0;
            slopes(a, ca, s, dm, dp);
            if (b) slopes(*b, cb, s, dm, dp);
            if (!truncated) {
                dm -= total;
                dp -= total;
            }
            if (dm < tol && dp >= -tol) candidates.push_back({s, term});
        }
    };
    visit(false);
    // Unreachable in exact arithmetic; fall back to every distinct breakpoint.
    if (candidates.empty()) visit(true);
}

/// Evaluates `objective(s)` at every candidate and keeps the smallest value;
/// candidates arrive in ascending position order so ties resolve to the
/// smallest scale.
template <class Objective>
SubproblemSolution select_minimum(const std::vector<Candidate>& candidates, Objective&& objective) {
    SubproblemSolution best;
    best.objective = std::numeric_limits<double>::infinity();
    for (const Candidate& c : candidates) {
        const double value = objective(c.at);
        if (value < best.objective) {
            best.objective = value;
            best.scale = c.at;
            best.breakpoint_index = c.term;
        }
    }
    best.extrema_count = candidates.size();
    return best;
}

inline SubproblemSolution solve_subproblem(const WeightedResiduals& r, Truncation tau) {
    r.validate();
    KnotSet ks;
    ks.reserve(r.size(), tau.enabled());
    for (std::size_t i = 0; i < r.size(); ++i)
        ks.add(r.pred[i], r.target[i], r.weight[i], static_cast<std::uint32_t>(i), tau);
    auto objective = [&](double s) { return subproblem_objective(r, tau, s); };
    if (ks.empty()) {
        SubproblemSolution sol;
        sol.scale = 1.0;
        sol.objective = objective(1.0);
        sol.degenerate = true;
        return sol;
    }
    ks.finalize();
    std::vector<Candidate> candidates;
    const KnotSet* sets[] = {&ks};
    find_extrema(sets, tau.enabled(), candidates);
    return select_minimum(candidates, objective);
}

}  // namespace detail

/// Global minimizer of sum_i w_i |s pred_i - target_i|.
inline SubproblemSolution solve_subproblem_untruncated(const WeightedResiduals& r) {
    return detail::solve_subproblem(r, Truncation::none());
}

/// A global minimizer of sum_i min(tau, w_i |s pred_i - target_i|).
inline SubproblemSolution solve_subproblem_truncated(const WeightedResiduals& r, Truncation tau) {
    require(tau.enabled(), "truncated subproblem: tau must be present and positive");
    return detail::solve_subproblem(r, tau);
}

}  // namespace pmgeo
