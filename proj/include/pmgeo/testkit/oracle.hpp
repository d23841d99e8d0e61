#pragma once

// Brute-force reference solvers.
//
// These evaluate the objective directly at every candidate breakpoint and
// share no sorting, prefix-sum or extremum-detection code with the fast
// solvers in subproblem.hpp / align.hpp. They only rely on the fact that an
// optimum sits at a ratio breakpoint, so they are O(N^2) for a subproblem,
// O(N^3) for anchored alignment and O(N^5) for the unrestricted 3-D shift.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "pmgeo/align.hpp"
#include "pmgeo/error.hpp"
#include "pmgeo/subproblem.hpp"
#include "pmgeo/types.hpp"

namespace pmgeo::testkit {

namespace oracle_detail {

inline double term(double w, double s, double p, double t, Truncation tau) {
    const double r = w * std::abs(s * p - t);
    return tau.enabled() ? std::min(tau.tau(), r) : r;
}

struct Best {
    double value = std::numeric_limits<double>::infinity();
    double scale = 1.0;
    std::size_t index = 0;
    bool found = false;

    // lexicographic (value, scale, index)
    void offer(double v, double s, std::size_t i) {
        if (!found || v < value || (v == value && (s < scale || (s == scale && i < index)))) {
            value = v;
            scale = s;
            index = i;
            found = true;
        }
    }
};

}  // namespace oracle_detail

inline SubproblemSolution oracle_subproblem(const WeightedResiduals& r, Truncation tau) {
    r.validate();
    require(r.size() <= 4096, "oracle: subproblem too large");
    auto eval = [&](double s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) acc += oracle_detail::term(r.weight[i], s, r.pred[i], r.target[i], tau);
        return acc;
    };
    oracle_detail::Best best;
    for (std::size_t j = 0; j < r.size(); ++j) {
        if (r.pred[j] == 0.0) continue;
        const double p = r.pred[j] < 0.0 ? -r.pred[j] : r.pred[j];
        const double t = r.pred[j] < 0.0 ? -r.target[j] : r.target[j];
        const double s = t / p;
        best.offer(eval(s), s, j);
    }
    SubproblemSolution out;
    if (!best.found) {
        out.scale = 1.0;
        out.objective = eval(1.0);
        out.degenerate = true;
        return out;
    }
    out.scale = best.scale;
    out.objective = best.value;
    out.breakpoint_index = best.index;
    return out;
}

/// Full objective for per-axis anchors (k_x, k_y, k_z); an axis with no
/// anchor (npos) is unshifted. Point-major, axis-minor summation order.
inline double anchored_objective(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const double> w,
                                 const std::array<std::size_t, 3>& anchor, double s, Truncation tau) {
    constexpr std::size_t npos = std::size_t(-1);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            double p = pred[i][c], t = gt[i][c];
            if (anchor[c] != npos) {
                p -= pred[anchor[c]][c];
                t -= gt[anchor[c]][c];
            }
            acc += oracle_detail::term(w[i], s, p, t, tau);
        }
    return acc;
}

namespace oracle_detail {

// Minimum over every ratio breakpoint for fixed per-axis anchors.
inline Best best_for_anchors(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const double> w,
                             const std::array<std::size_t, 3>& anchor, Truncation tau) {
    constexpr std::size_t npos = std::size_t(-1);
    Best best;
    for (std::size_t j = 0; j < pred.size(); ++j)
        for (int c = 0; c < 3; ++c) {
            double p = pred[j][c], t = gt[j][c];
            if (anchor[c] != npos) {
                p -= pred[anchor[c]][c];
                t -= gt[anchor[c]][c];
            }
            if (p == 0.0) continue;
            if (p < 0.0) {
                p = -p;
                t = -t;
            }
            const double s = t / p;
            best.offer(anchored_objective(pred, gt, w, anchor, s, tau), s, j * 3 + c);
        }
    if (!best.found) {
        best.value = anchored_objective(pred, gt, w, anchor, 1.0, tau);
        best.scale = 1.0;
        best.found = true;
    }
    return best;
}

inline AlignResult to_result(std::span<const Vec3> pred, std::span<const Vec3> gt, const Best& b,
                             const std::array<std::size_t, 3>& anchor, ShiftMode mode) {
    constexpr std::size_t npos = std::size_t(-1);
    AlignResult r;
    r.align.scale = b.scale;
    r.align.shift_mode = mode;
    r.objective = b.value;
    for (int c = 0; c < 3; ++c)
        if (anchor[c] != npos) r.align.shift[c] = gt[anchor[c]][c] - b.scale * pred[anchor[c]][c];
    r.anchor_index = anchor[2] != npos ? anchor[2] : b.index / 3;
    return r;
}

inline void check(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const double> w, std::size_t limit) {
    require(!pred.empty() && pred.size() == gt.size() && w.size() == pred.size(), "oracle: bad input lengths");
    require(pred.size() <= limit, "oracle: instance too large for brute force");
    for (double x : w) require(x > 0.0, "oracle: weights must be positive");
}

template <class AnchorFor>
AlignResult enumerate_anchors(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const double> w,
                              Truncation tau, ShiftMode mode, AnchorFor anchor_for) {
    Best overall;
    std::array<std::size_t, 3> best_anchor{};
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const auto anchor = anchor_for(k);
        const Best b = best_for_anchors(pred, gt, w, anchor, tau);
        if (!overall.found || b.value < overall.value) {
            overall = b;
            best_anchor = anchor;
        }
    }
    AlignResult r = to_result(pred, gt, overall, best_anchor, mode);
    r.anchor_index = best_anchor[2];
    return r;
}

}  // namespace oracle_detail

/// Exact 1-D-shift alignment by enumerating every (anchor, breakpoint) pair.
inline AlignResult oracle_align_1d(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const double> w,
                                   Truncation tau) {
    oracle_detail::check(pred, gt, w, 64);
    constexpr std::size_t npos = std::size_t(-1);
    return oracle_detail::enumerate_anchors(pred, gt, w, tau, ShiftMode::one_dimensional, [](std::size_t k) {
        return std::array<std::size_t, 3>{npos, npos, k};
    });
}

/// Exact optimum of the single-anchor (k1 = k2 = k3) 3-D-shift problem.
inline AlignResult oracle_align_3d_restricted(std::span<const Vec3> pred, std::span<const Vec3> gt,
                                              std::span<const double> w, Truncation tau) {
    oracle_detail::check(pred, gt, w, 64);
    return oracle_detail::enumerate_anchors(pred, gt, w, tau, ShiftMode::three_dimensional,
                                            [](std::size_t k) { return std::array<std::size_t, 3>{k, k, k}; });
}

/// Exact scale-only alignment (no shift) over every coordinate breakpoint.
inline AlignResult oracle_align_scale_only(std::span<const Vec3> pred, std::span<const Vec3> gt,
                                           std::span<const double> w, Truncation tau) {
    oracle_detail::check(pred, gt, w, 4096);
    constexpr std::size_t npos = std::size_t(-1);
    const std::array<std::size_t, 3> none{npos, npos, npos};
    return oracle_detail::to_result(pred, gt, oracle_detail::best_for_anchors(pred, gt, w, none, tau), none,
                                    ShiftMode::one_dimensional);
}

struct FullAlignResult {
    AlignResult result;
    std::array<std::size_t, 3> anchors{};
};

/// Unrestricted 3-D-shift optimum over independent per-axis anchors.
inline FullAlignResult oracle_align_3d_full(std::span<const Vec3> pred, std::span<const Vec3> gt,
                                            std::span<const double> w, Truncation tau) {
    oracle_detail::check(pred, gt, w, 10);
    const std::size_t n = pred.size();
    oracle_detail::Best overall;
    std::array<std::size_t, 3> best_anchor{};
    for (std::size_t kx = 0; kx < n; ++kx)
        for (std::size_t ky = 0; ky < n; ++ky)
            for (std::size_t kz = 0; kz < n; ++kz) {
                const std::array<std::size_t, 3> anchor{kx, ky, kz};
                const auto b = oracle_detail::best_for_anchors(pred, gt, w, anchor, tau);
                if (!overall.found || b.value < overall.value) {
                    overall = b;
                    best_anchor = anchor;
                }
            }
    FullAlignResult out;
    out.result = oracle_detail::to_result(pred, gt, overall, best_anchor, ShiftMode::three_dimensional);
    out.anchors = best_anchor;
    return out;
}

/// Weighted objective sum_i w_i sum_c cap(|s p̂_ic + t_c - p_ic|) at an
/// arbitrary transform, evaluated directly.
inline double alignment_objective(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const double> w,
                                  const SimilarityAlign& a, Truncation tau) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            const double r = w[i] * std::abs(a.scale * pred[i][c] + a.shift[c] - gt[i][c]);
            acc += tau.enabled() ? std::min(tau.tau(), r) : r;
        }
    return acc;
}

}  // namespace pmgeo::testkit
