#pragma once

// Evaluation metrics. Every representation is aligned to the ground truth
// with untruncated inverse-depth-weighted L1 before scoring, so the metrics
// are invariant to the ambiguity the representation carries.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmgeo/align.hpp"
#include "pmgeo/camera.hpp"
#include "pmgeo/error.hpp"
#include "pmgeo/stats.hpp"
#include "pmgeo/types.hpp"

namespace pmgeo {

enum class Representation {
    point_scale,
    point_affine,
    point_local,
    depth_scale,
    depth_affine,
    disparity_affine,
};

inline std::string_view to_string(Representation r) {
    switch (r) {
        case Representation::point_scale: return "point-scale";
        case Representation::point_affine: return "point-affine";
        case Representation::point_local: return "point-local";
        case Representation::depth_scale: return "depth-scale";
        case Representation::depth_affine: return "depth-affine";
        case Representation::disparity_affine: return "disparity-affine";
    }
    return "unknown";
}

inline Representation parse_representation(std::string_view s) {
    for (auto r : {Representation::point_scale, Representation::point_affine, Representation::point_local,
                   Representation::depth_scale, Representation::depth_affine, Representation::disparity_affine})
        if (to_string(r) == s) return r;
    fail(ErrorCode::invalid_input, "unknown representation '" + std::string(s) + "'");
}

/// Rel and delta are percentages.
struct MetricReport {
    Representation representation = Representation::point_affine;
    double rel = 0.0;
    double delta1 = 0.0;
    std::size_t pixels = 0;
    /// Pixels dropped for a zero-norm ground-truth point or non-positive depth.
    std::size_t excluded = 0;
    /// Local regions without a usable pixel.
    std::size_t skipped_regions = 0;
    SimilarityAlign alignment;
};

inline constexpr double kPointInlierThreshold = 0.25;
inline constexpr double kDepthInlierThreshold = 1.25;

/// Options shared by the evaluators. `align_size` bounds the alignment to a
/// nearest-neighbour lattice of at most that many rows and columns (0 aligns
/// on every pixel); metrics are always computed on every pixel.
struct EvalOptions {
    std::size_t align_size = 0;
    double point_threshold = kPointInlierThreshold;
    double depth_threshold = kDepthInlierThreshold;
    Execution exec{};
};

namespace metric_detail {

struct Accumulator {
    double rel = 0.0;
    std::size_t inliers = 0;
    std::size_t n = 0;

    MetricReport report(Representation r, std::size_t excluded) const {
        MetricReport m;
        m.representation = r;
        m.pixels = n;
        m.excluded = excluded;
        if (n > 0) {
            m.rel = 100.0 * rel / double(n);
            m.delta1 = 100.0 * double(inliers) / double(n);
        }
        return m;
    }
};

// Usable point pixels: jointly valid, positive ground-truth depth and
// nonzero ground-truth norm.
inline std::vector<std::size_t> point_pixels(const PointMap& pred, const PointMap& gt, std::size_t& excluded) {
    require(pred.height() == gt.height() && pred.width() == gt.width(), "evaluation: maps are not co-registered");
    std::vector<std::size_t> px;
    excluded = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!pred.valid(i) || !gt.valid(i)) continue;
        if (!(gt[i].z() > kDepthEpsilon) || gt[i].norm() == 0.0) {
            ++excluded;
            continue;
        }
        px.push_back(i);
    }
    return px;
}

inline AlignResult align_points(const PointMap& pred, const PointMap& gt, std::span<const std::size_t> px,
                                bool with_shift, const EvalOptions& opt) {
    const auto on = sampling_lattice(gt.height(), gt.width(), opt.align_size);
    std::vector<std::size_t> src;
    for (std::size_t i : px)
        if (on[i]) src.push_back(i);
    if (src.empty()) src.assign(px.begin(), px.end());
    std::vector<Vec3> p, g;
    std::vector<double> w;
    for (std::size_t i : src) {
        p.push_back(pred[i]);
        g.push_back(gt[i]);
        w.push_back(1.0 / gt[i].z());
    }
    AlignResult r = with_shift ? align_scale_shift_3d(p, g, w, Truncation::none(), opt.exec)
                               : align_scale_only(p, g, w, Truncation::none());
    r.anchor_index = src[r.anchor_index];
    return r;
}

// Aligned prediction. With a shift it is evaluated as s (p̂_i - p̂_k) + p_k
// around the anchor k, which cancels any exactly representable affine
// change of the prediction bit for bit.
inline Vec3 aligned(const PointMap& pred, const PointMap& gt, std::size_t i, const AlignResult& a, bool with_shift) {
    if (!with_shift) return a.align.scale * pred[i];
    const std::size_t k = a.anchor_index;
    return a.align.scale * (pred[i] - pred[k]) + gt[k];
}

inline void score_points(const PointMap& pred, const PointMap& gt, std::span<const std::size_t> px,
                         const AlignResult& a, bool with_shift, double threshold, Accumulator& acc) {
    for (std::size_t i : px) {
        const Vec3 q = aligned(pred, gt, i, a, with_shift);
        const double err = (q - gt[i]).norm();
        const double gn = gt[i].norm();
        acc.rel += err / gn;
        if (err / std::min(gn, q.norm()) < threshold) ++acc.inliers;
        ++acc.n;
    }
}

inline MetricReport eval_points(const PointMap& pred, const PointMap& gt, bool with_shift, Representation r,
                                const EvalOptions& opt) {
    std::size_t excluded = 0;
    const auto px = point_pixels(pred, gt, excluded);
    require(!px.empty(), "evaluation: no usable pixels");
    const AlignResult a = align_points(pred, gt, px, with_shift, opt);
    Accumulator acc;
    score_points(pred, gt, px, a, with_shift, opt.point_threshold, acc);
    MetricReport m = acc.report(r, excluded);
    m.alignment = a.align;
    return m;
}

}  // namespace metric_detail

/// Scale-only alignment, then Rel^p and delta^p (||err|| / min(||p||, ||p*||) < 0.25).
inline MetricReport eval_point_scale(const PointMap& pred, const PointMap& gt, const EvalOptions& opt = {}) {
    return metric_detail::eval_points(pred, gt, false, Representation::point_scale, opt);
}

/// Scale and 3-D shift alignment, then Rel^p and delta^p.
inline MetricReport eval_point_affine(const PointMap& pred, const PointMap& gt, const EvalOptions& opt = {}) {
    return metric_detail::eval_points(pred, gt, true, Representation::point_affine, opt);
}

/// Independent scale + 3-D shift alignment per region, metrics pooled over
/// every region pixel.
inline MetricReport eval_point_local(const PointMap& pred, const PointMap& gt,
                                     std::span<const std::vector<std::size_t>> regions, const EvalOptions& opt = {}) {
    std::size_t excluded = 0;
    const auto all = metric_detail::point_pixels(pred, gt, excluded);
    std::vector<std::uint8_t> usable(gt.size(), 0);
    for (std::size_t i : all) usable[i] = 1;
    metric_detail::Accumulator acc;
    std::size_t skipped = 0;
    for (const auto& region : regions) {
        std::vector<std::size_t> px;
        for (std::size_t i : region) {
            require(i < gt.size(), "evaluation: region pixel outside the map");
            if (usable[i]) px.push_back(i);
        }
        if (px.empty()) {
            ++skipped;
            continue;
        }
        const AlignResult a = metric_detail::align_points(pred, gt, px, true, opt);
        metric_detail::score_points(pred, gt, px, a, true, opt.point_threshold, acc);
    }
    require(acc.n > 0, "evaluation: no usable pixels in any region");
    MetricReport m = acc.report(Representation::point_local, excluded);
    m.skipped_regions = skipped;
    return m;
}

enum class DepthMode { scale, affine };

/// 1-D alignment of depth values, then Rel^d = |z* - z| / z and
/// delta = max(z/z*, z*/z) < 1.25; non-positive aligned depths are never inliers.
inline MetricReport eval_depth(const DepthMap& pred, const DepthMap& gt, DepthMode mode, const EvalOptions& opt = {}) {
    require(pred.height() == gt.height() && pred.width() == gt.width(), "evaluation: maps are not co-registered");
    std::vector<std::size_t> px;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!pred.valid(i) || !gt.valid(i)) continue;
        if (!(gt[i] > kDepthEpsilon)) {
            ++excluded;
            continue;
        }
        px.push_back(i);
    }
    require(!px.empty(), "evaluation: no usable pixels");
    const auto on = sampling_lattice(gt.height(), gt.width(), opt.align_size);
    std::vector<double> p, g, w;
    for (int pass = 0; pass < 2 && p.empty(); ++pass)
        for (std::size_t i : px) {
            if (pass == 0 && !on[i]) continue;
            p.push_back(pred[i]);
            g.push_back(gt[i]);
            w.push_back(1.0 / gt[i]);
        }
    const AlignResult a = align_scalar(p, g, w, Truncation::none(), mode == DepthMode::affine, opt.exec);
    metric_detail::Accumulator acc;
    for (std::size_t i : px) {
        const double z = gt[i];
        const double zs = a.align.scale * pred[i] + a.align.shift.z();
        acc.rel += std::abs(zs - z) / z;
        if (zs > 0.0 && std::max(z / zs, zs / z) < opt.depth_threshold) ++acc.inliers;
        ++acc.n;
    }
    MetricReport m = acc.report(mode == DepthMode::scale ? Representation::depth_scale : Representation::depth_affine,
                                excluded);
    m.alignment = a.align;
    return m;
}

struct DisparityFit {
    double a = 0.0;
    double b = 0.0;
    double z_max = 0.0;
};

/// Least-squares fit of a * d̂ + b to the ground-truth disparity 1/z.
inline DisparityFit fit_disparity(std::span<const double> pred_disp, std::span<const double> gt_depth) {
    require(!pred_disp.empty() && pred_disp.size() == gt_depth.size(), "disparity fit: bad input lengths");
    const double n = double(pred_disp.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < pred_disp.size(); ++i) {
        mx += pred_disp[i];
        my += 1.0 / gt_depth[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < pred_disp.size(); ++i) {
        const double dx = pred_disp[i] - mx;
        sxx += dx * dx;
        sxy += dx * (1.0 / gt_depth[i] - my);
    }
    if (!(sxx > 1e-24 * std::max(1.0, mx * mx) * n))
        fail(ErrorCode::numerical_failure, "disparity fit: predicted disparity has no variation");
    DisparityFit f;
    f.a = sxy / sxx;
    f.b = my - f.a * mx;
    return f;
}

struct DisparityReport {
    MetricReport metrics;
    DisparityFit fit;
};

/// Affine disparity fit, depth z* = min(1 / max(a d̂ + b, 1/z_max), z_max),
/// then the depth metrics. z_max <= 0 uses the largest valid ground-truth depth.
inline DisparityReport eval_disparity_affine(const DisparityMap& pred, const DepthMap& gt, double z_max = 0.0,
                                             const EvalOptions& opt = {}) {
    require(pred.height() == gt.height() && pred.width() == gt.width(), "evaluation: maps are not co-registered");
    std::vector<std::size_t> px;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!pred.valid(i) || !gt.valid(i)) continue;
        if (!(gt[i] > kDepthEpsilon)) {
            ++excluded;
            continue;
        }
        px.push_back(i);
    }
    require(!px.empty(), "evaluation: no usable pixels");
    std::vector<double> d, z;
    for (std::size_t i : px) {
        d.push_back(pred[i]);
        z.push_back(gt[i]);
    }
    if (!(z_max > 0.0)) z_max = *std::max_element(z.begin(), z.end());
    DisparityReport out;
    out.fit = fit_disparity(d, z);
    out.fit.z_max = z_max;
    metric_detail::Accumulator acc;
    for (std::size_t k = 0; k < px.size(); ++k) {
        const double zs = std::min(1.0 / std::max(out.fit.a * d[k] + out.fit.b, 1.0 / z_max), z_max);
        acc.rel += std::abs(zs - z[k]) / z[k];
        if (std::max(z[k] / zs, zs / z[k]) < opt.depth_threshold) ++acc.inliers;
        ++acc.n;
    }
    out.metrics = acc.report(Representation::disparity_affine, excluded);
    return out;
}

/// Absolute field-of-view errors in degrees.
struct FovErrorReport {
    double mean = 0.0;
    double median = 0.0;
    std::size_t n = 0;
};

inline FovErrorReport eval_fov(std::span<const double> pred_deg, std::span<const double> gt_deg) {
    require(!pred_deg.empty() && pred_deg.size() == gt_deg.size(), "fov evaluation: bad input lengths");
    std::vector<double> err;
    err.reserve(pred_deg.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred_deg.size(); ++i) {
        err.push_back(std::abs(pred_deg[i] - gt_deg[i]));
        sum += err.back();
    }
    FovErrorReport r;
    r.n = err.size();
    r.mean = sum / double(r.n);
    r.median = median(std::move(err));
    return r;
}

/// Unweighted mean of per-dataset Rel and delta.
inline MetricReport macro_average(std::span<const MetricReport> reports) {
    require(!reports.empty(), "macro average: no reports");
    MetricReport m;
    m.representation = reports.front().representation;
    for (const auto& r : reports) {
        m.rel += r.rel;
        m.delta1 += r.delta1;
        m.pixels += r.pixels;
        m.excluded += r.excluded;
        m.skipped_regions += r.skipped_regions;
    }
    m.rel /= double(reports.size());
    m.delta1 /= double(reports.size());
    return m;
}

}  // namespace pmgeo
