#pragma once

// Reference alignments used for comparison against the L1 anchor solver:
// median normalization and weighted least squares.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "pmgeo/align.hpp"
#include "pmgeo/error.hpp"
#include "pmgeo/stats.hpp"
#include "pmgeo/types.hpp"

namespace pmgeo {

/// Normalizer (p - t) / s of one cloud: t = (0, 0, median z) and
/// s = mean ||p - t||_1. Stored as SimilarityAlign{scale = s, shift = t}.
inline SimilarityAlign median_normalizer(std::span<const Vec3> pts) {
    require(!pts.empty(), "median baseline: no points");
    std::vector<double> z(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) z[i] = pts[i].z();
    SimilarityAlign n;
    n.shift = Vec3(0.0, 0.0, median(std::move(z)));
    double acc = 0.0;
    for (const Vec3& p : pts) acc += (p - n.shift).lpNorm<1>();
    n.scale = acc / double(pts.size());
    require(n.scale > 0.0, "median baseline: degenerate cloud (zero spread)");
    return n;
}

struct MedianNormalizers {
    SimilarityAlign pred;
    SimilarityAlign gt;

    /// The induced map pred -> gt: p ↦ s_gt (p - t_pred) / s_pred + t_gt.
    SimilarityAlign composed() const {
        SimilarityAlign a;
        a.scale = gt.scale / pred.scale;
        a.shift = gt.shift - a.scale * pred.shift;
        a.shift_mode = ShiftMode::one_dimensional;
        return a;
    }
};

/// Per-map median normalizers over jointly valid pixels.
inline MedianNormalizers align_median_baseline(const PointMap& pred, const PointMap& gt) {
    require(pred.height() == gt.height() && pred.width() == gt.width(), "median baseline: maps are not co-registered");
    std::vector<Vec3> a, b;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!pred.valid(i) || !gt.valid(i)) continue;
        a.push_back(pred[i]);
        b.push_back(gt[i]);
    }
    require(!a.empty(), "median baseline: no jointly valid pixels");
    return {median_normalizer(a), median_normalizer(b)};
}

/// Weighted least-squares objective sum_i w_i ||s p̂_i + t - p_i||_2^2.
inline double least_squares_objective(std::span<const Vec3> pred, std::span<const Vec3> gt,
                                      std::span<const double> w, const SimilarityAlign& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += w[i] * (a.apply(pred[i]) - gt[i]).squaredNorm();
    return acc;
}

/// Closed-form minimizer of the weighted squared error, solving the normal
/// equations in (s, tz) or (s, tx, ty, tz).
inline AlignResult align_least_squares(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const double> w,
                                       ShiftMode mode) {
    detail::check_point_inputs(pred, gt, w);
    require(pred.size() >= 2, "least squares: at least two points are required");
    AlignResult out;
    out.align.shift_mode = mode;
    if (mode == ShiftMode::one_dimensional) {
        Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
        Eigen::Vector2d b = Eigen::Vector2d::Zero();
        for (std::size_t i = 0; i < pred.size(); ++i) {
            A(0, 0) += w[i] * pred[i].squaredNorm();
            A(0, 1) += w[i] * pred[i].z();
            A(1, 1) += w[i];
            b(0) += w[i] * pred[i].dot(gt[i]);
            b(1) += w[i] * gt[i].z();
        }
        A(1, 0) = A(0, 1);
        Eigen::FullPivLU<Eigen::Matrix2d> lu(A);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) fail(ErrorCode::numerical_failure, "least squares: singular normal equations");
        const Eigen::Vector2d x = lu.solve(b);
        out.align.scale = x(0);
        out.align.shift = Vec3(0.0, 0.0, x(1));
    } else {
        Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
        Eigen::Vector4d b = Eigen::Vector4d::Zero();
        for (std::size_t i = 0; i < pred.size(); ++i) {
            A(0, 0) += w[i] * pred[i].squaredNorm();
            for (int c = 0; c < 3; ++c) {
                A(0, c + 1) += w[i] * pred[i][c];
                A(c + 1, c + 1) += w[i];
                b(c + 1) += w[i] * gt[i][c];
            }
            b(0) += w[i] * pred[i].dot(gt[i]);
        }
        for (int c = 1; c < 4; ++c) A(c, 0) = A(0, c);
        Eigen::FullPivLU<Eigen::Matrix4d> lu(A);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) fail(ErrorCode::numerical_failure, "least squares: singular normal equations");
        const Eigen::Vector4d x = lu.solve(b);
        out.align.scale = x(0);
        out.align.shift = x.tail<3>();
    }
    out.objective = least_squares_objective(pred, gt, w, out.align);
    return out;
}

inline AlignResult align_least_squares(const PointMap& pred, const PointMap& gt, ShiftMode mode) {
    const JointSamples s = joint_samples(pred, gt, false);
    return align_least_squares(s.pred, s.gt, s.weight, mode);
}

}  // namespace pmgeo
