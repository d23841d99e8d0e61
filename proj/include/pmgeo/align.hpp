#pragma once

// Scale + shift alignment by anchor enumeration.
//
// For a fixed anchor k the shift on every anchored axis is pinned to
// t = target_k - s * pred_k, which turns the two-parameter problem into a 1-D
// subproblem in s over the differenced residuals
//     (pred_i - pred_k, target_i - target_k).
// Solving that subproblem for every k and keeping the best gives the exact
// optimum for a single shifted axis, and the k1 = k2 = k3 restriction when all
// three axes are shifted.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pmgeo/error.hpp"
#include "pmgeo/parallel.hpp"
#include "pmgeo/subproblem.hpp"
#include "pmgeo/types.hpp"

namespace pmgeo {

struct AlignResult {
    SimilarityAlign align;
    double objective = 0.0;
    /// Index (point index, or pixel index for map inputs) of the anchor whose
    /// prediction coincides with its target under `align`. For scale-only
    /// alignment, the point owning the optimal ratio breakpoint.
    std::size_t anchor_index = 0;
    /// All predicted coordinates were zero after anchoring.
    bool degenerate = false;
};

/// Residual channels sharing one weight per point. A shifted channel is
/// differenced against the anchor point before solving for the scale.
class AnchoredProblem {
public:
    struct Channel {
        std::vector<double> pred;
        std::vector<double> target;
        bool shifted = false;
    };

    AnchoredProblem(std::vector<Channel> channels, std::vector<double> weight, Truncation tau)
        : channels_(std::move(channels)), weight_(std::move(weight)), tau_(tau) {
        require(!weight_.empty(), "alignment: at least one point is required");
        require(!channels_.empty(), "alignment: at least one channel is required");
        for (const auto& c : channels_)
            require(c.pred.size() == weight_.size() && c.target.size() == weight_.size(),
                    "alignment: channel lengths must match the weight count");
        for (double w : weight_) require(w > 0.0, "alignment: weights must be strictly positive");
        const std::size_t terms = weight_.size() * channels_.size();
        require(terms < std::numeric_limits<std::uint32_t>::max(), "alignment: too many residuals");

        for (std::size_t i = 0; i < weight_.size(); ++i)
            for (std::size_t c = 0; c < channels_.size(); ++c)
                if (!channels_[c].shifted)
                    fixed_.add(channels_[c].pred[i], channels_[c].target[i], weight_[i], term_id(i, c), tau_);
        fixed_.finalize();
        fixed_.build_profile(tau_.enabled());
        for (const auto& c : channels_) any_shifted_ = any_shifted_ || c.shifted;
    }

    std::size_t points() const noexcept { return weight_.size(); }
    std::size_t channel_count() const noexcept { return channels_.size(); }
    bool any_shifted() const noexcept { return any_shifted_; }
    const Channel& channel(std::size_t c) const { return channels_[c]; }
    Truncation truncation() const noexcept { return tau_; }

    /// Objective at scale s with shifted channels anchored at point k, summed
    /// point-major then channel in index order.
    double objective(std::size_t k, double s) const {
        double acc = 0.0;
        const std::size_t nc = channels_.size();
        for (std::size_t i = 0; i < weight_.size(); ++i) {
            const double w = weight_[i];
            for (std::size_t c = 0; c < nc; ++c) {
                const Channel& ch = channels_[c];
                double p = ch.pred[i], t = ch.target[i];
                if (ch.shifted) {
                    p -= ch.pred[k];
                    t -= ch.target[k];
                }
                acc += tau_.cap(w * std::abs(s * p - t));
            }
        }
        return acc;
    }

    struct Workspace {
        detail::KnotSet anchored;
        std::vector<detail::Candidate> candidates;
    };

    /// Best scale for anchor k; breakpoint_index is a flattened residual id
    /// (point * channel_count + channel).
    SubproblemSolution solve_anchor(std::size_t k, Workspace& ws) const {
        const detail::KnotSet* sets[2] = {&fixed_, &ws.anchored};
        std::size_t count = 0;
        if (!fixed_.empty()) sets[count++] = &fixed_;
        if (any_shifted_) {
            ws.anchored.clear();
            for (std::size_t i = 0; i < weight_.size(); ++i)
                for (std::size_t c = 0; c < channels_.size(); ++c) {
                    const Channel& ch = channels_[c];
                    if (!ch.shifted) continue;
                    ws.anchored.add(ch.pred[i] - ch.pred[k], ch.target[i] - ch.target[k], weight_[i], term_id(i, c),
                                    tau_);
                }
            if (!ws.anchored.empty()) {
                ws.anchored.finalize();
                sets[count++] = &ws.anchored;
            }
        }
        auto eval = [&](double s) { return objective(k, s); };
        if (count == 0) {
            SubproblemSolution sol;
            sol.objective = eval(1.0);
            sol.degenerate = true;
            return sol;
        }
        detail::find_extrema(std::span<const detail::KnotSet* const>(sets, count), tau_.enabled(), ws.candidates);
        return detail::select_minimum(ws.candidates, eval);
    }

    /// Solves every anchor (in parallel) and keeps the smallest objective;
    /// ties resolve to the smallest anchor index.
    AlignResult solve(ShiftMode mode, Execution exec = {}) const {
        const std::size_t n = any_shifted_ ? weight_.size() : 1;
        std::vector<SubproblemSolution> per_anchor(n);
        parallel_chunks(n, exec, [&](std::size_t, std::size_t begin, std::size_t end) {
            Workspace ws;
            for (std::size_t k = begin; k < end; ++k) per_anchor[k] = solve_anchor(k, ws);
        });
        std::size_t best = 0;
        for (std::size_t k = 1; k < n; ++k)
            if (per_anchor[k].objective < per_anchor[best].objective) best = k;

        const SubproblemSolution& sol = per_anchor[best];
        AlignResult out;
        out.align.scale = sol.scale;
        out.align.shift_mode = mode;
        out.objective = sol.objective;
        out.degenerate = sol.degenerate;
        if (any_shifted_) {
            out.anchor_index = best;
            for (std::size_t c = 0; c < channels_.size() && c < 3; ++c)
                if (channels_[c].shifted)
                    out.align.shift[c] = channels_[c].target[best] - sol.scale * channels_[c].pred[best];
        } else {
            out.anchor_index = sol.breakpoint_index / channels_.size();
        }
        return out;
    }

private:
    std::uint32_t term_id(std::size_t i, std::size_t c) const {
        return static_cast<std::uint32_t>(i * channels_.size() + c);
    }

    std::vector<Channel> channels_;
    std::vector<double> weight_;
    Truncation tau_;
    detail::KnotSet fixed_;
    bool any_shifted_ = false;
};

namespace detail {

inline void check_point_inputs(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const double> w) {
    require(!pred.empty(), "alignment: at least one point is required");
    require(pred.size() == gt.size(), "alignment: pred and gt lengths differ");
    require(w.size() == pred.size(), "alignment: weight count differs from point count");
}

inline AnchoredProblem point_problem(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const double> w,
                                     Truncation tau, bool shift_xy, bool shift_z) {
    check_point_inputs(pred, gt, w);
    std::vector<AnchoredProblem::Channel> ch(3);
    for (int c = 0; c < 3; ++c) {
        ch[c].pred.resize(pred.size());
        ch[c].target.resize(pred.size());
        ch[c].shifted = c == 2 ? shift_z : shift_xy;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            ch[c].pred[i] = pred[i][c];
            ch[c].target[i] = gt[i][c];
        }
    }
    return AnchoredProblem(std::move(ch), std::vector<double>(w.begin(), w.end()), tau);
}

}  // namespace detail

/// Scale only: min_s sum_i w_i ||s p̂_i - p_i||_1 (optionally truncated per
/// coordinate), shift zero.
inline AlignResult align_scale_only(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const double> w,
                                    Truncation tau) {
    return detail::point_problem(pred, gt, w, tau, false, false).solve(ShiftMode::one_dimensional);
}

/// Scale plus z shift (tx = ty = 0), exact optimum over all anchors.
inline AlignResult align_scale_shift_1d(std::span<const Vec3> pred, std::span<const Vec3> gt,
                                        std::span<const double> w, Truncation tau, Execution exec = {}) {
    return detail::point_problem(pred, gt, w, tau, false, true).solve(ShiftMode::one_dimensional, exec);
}

/// Scale plus full 3-D shift under the single-anchor restriction.
inline AlignResult align_scale_shift_3d(std::span<const Vec3> pred, std::span<const Vec3> gt,
                                        std::span<const double> w, Truncation tau, Execution exec = {}) {
    return detail::point_problem(pred, gt, w, tau, true, true).solve(ShiftMode::three_dimensional, exec);
}

/// Scalar (depth) alignment: scale only, or scale + shift.
inline AlignResult align_scalar(std::span<const double> pred, std::span<const double> gt, std::span<const double> w,
                                Truncation tau, bool with_shift, Execution exec = {}) {
    require(!pred.empty(), "alignment: at least one value is required");
    require(pred.size() == gt.size() && w.size() == pred.size(), "alignment: input lengths differ");
    std::vector<AnchoredProblem::Channel> ch(1);
    ch[0].pred.assign(pred.begin(), pred.end());
    ch[0].target.assign(gt.begin(), gt.end());
    ch[0].shifted = with_shift;
    AlignResult r = AnchoredProblem(std::move(ch), std::vector<double>(w.begin(), w.end()), tau)
                        .solve(ShiftMode::one_dimensional, exec);
    // the single channel is z
    if (with_shift) {
        r.align.shift.z() = r.align.shift.x();
        r.align.shift.x() = 0.0;
    }
    return r;
}

/// sum_i sum_c min(tau, w_i |s p̂_ic + t_c - p_ic|) at an arbitrary transform.
inline double l1_alignment_objective(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const double> w,
                                     const SimilarityAlign& a, Truncation tau) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        for (int c = 0; c < 3; ++c) acc += tau.cap(w[i] * std::abs(a.scale * pred[i][c] + a.shift[c] - gt[i][c]));
    return acc;
}

/// Pixels valid in both maps, with inverse ground-truth depth weights.
struct JointSamples {
    std::vector<Vec3> pred, gt;
    std::vector<double> weight;
    std::vector<std::size_t> pixel;

    std::size_t size() const noexcept { return pixel.size(); }
};

/// Collects joint-valid pixels. With `drop_shallow`, pixels whose ground-truth
/// depth is <= kDepthEpsilon are skipped; otherwise they are rejected.
inline JointSamples joint_samples(const PointMap& pred, const PointMap& gt, bool drop_shallow) {
    require(pred.height() == gt.height() && pred.width() == gt.width(), "alignment: maps are not co-registered");
    JointSamples s;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!pred.valid(i) || !gt.valid(i)) continue;
        const double z = gt[i].z();
        if (!(z > kDepthEpsilon)) {
            if (drop_shallow) continue;
            fail(ErrorCode::invalid_input,
                 "alignment: ground-truth depth at pixel " + std::to_string(i) + " is not positive");
        }
        s.pred.push_back(pred[i]);
        s.gt.push_back(gt[i]);
        s.weight.push_back(1.0 / z);
        s.pixel.push_back(i);
    }
    require(s.size() > 0, "alignment: no jointly valid pixels");
    return s;
}

inline AlignResult align_scale_only(const PointMap& pred, const PointMap& gt, Truncation tau) {
    const JointSamples s = joint_samples(pred, gt, false);
    AlignResult r = align_scale_only(s.pred, s.gt, s.weight, tau);
    r.anchor_index = s.pixel[r.anchor_index];
    return r;
}

inline AlignResult align_scale_shift_1d(const PointMap& pred, const PointMap& gt, Truncation tau,
                                        Execution exec = {}) {
    const JointSamples s = joint_samples(pred, gt, false);
    AlignResult r = align_scale_shift_1d(s.pred, s.gt, s.weight, tau, exec);
    r.anchor_index = s.pixel[r.anchor_index];
    return r;
}

inline AlignResult align_scale_shift_3d(const PointMap& pred, const PointMap& gt, Truncation tau,
                                        Execution exec = {}) {
    const JointSamples s = joint_samples(pred, gt, false);
    AlignResult r = align_scale_shift_3d(s.pred, s.gt, s.weight, tau, exec);
    r.anchor_index = s.pixel[r.anchor_index];
    return r;
}

}  // namespace pmgeo
