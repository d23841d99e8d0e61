#pragma once

// Geometry losses over point maps: global affine-aligned L1, multi-scale
// local sphere losses with independent alignment, surface normal angle and
// validity mask. Values are means (per kept pixel, per sphere member, per
// pixel) so they do not depend on resolution.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Geometry>

#include "pmgeo/align.hpp"
#include "pmgeo/camera.hpp"
#include "pmgeo/error.hpp"
#include "pmgeo/random.hpp"
#include "pmgeo/types.hpp"

namespace pmgeo {

namespace loss_detail {

inline void check_pair(const PointMap& pred, const PointMap& gt) {
    require(pred.height() == gt.height() && pred.width() == gt.width(), "loss: maps are not co-registered");
}

// Pixels valid in both maps with ground-truth depth above kDepthEpsilon.
inline std::vector<std::size_t> usable_pixels(const PointMap& pred, const PointMap& gt) {
    std::vector<std::size_t> px;
    for (std::size_t i = 0; i < gt.size(); ++i)
        if (pred.valid(i) && gt.valid(i) && gt[i].z() > kDepthEpsilon) px.push_back(i);
    return px;
}

inline double weighted_l1(const SimilarityAlign& a, const Vec3& pred, const Vec3& gt) {
    return (a.apply(pred) - gt).lpNorm<1>() / gt.z();
}

}  // namespace loss_detail

struct GlobalLossResult {
    double value = 0.0;
    AlignResult alignment;
    std::size_t pixels = 0;  // usable pixels
    std::size_t kept = 0;    // after trimming
};

/// Mean of the smallest values after dropping floor(trim * n) of the largest.
inline double trimmed_mean(std::vector<double> values, double trim_fraction, std::size_t* kept = nullptr) {
    require(!values.empty(), "trimmed mean: no values");
    require(trim_fraction >= 0.0 && trim_fraction <= 0.5, "trimmed mean: trim fraction must lie in [0, 0.5]");
    std::sort(values.begin(), values.end());
    const std::size_t drop = static_cast<std::size_t>(std::floor(trim_fraction * double(values.size())));
    const std::size_t keep = values.size() - drop;
    double acc = 0.0;
    for (std::size_t i = 0; i < keep; ++i) acc += values[i];
    if (kept) *kept = keep;
    return acc / double(keep);
}

/// 1-D-shift alignment (on the working lattice when the maps exceed
/// `align_size`), then the trimmed mean of per-pixel (1/z) ||s p̂ + t - p||_1.
inline GlobalLossResult global_loss_detail(const PointMap& pred, const PointMap& gt, Truncation tau,
                                           double trim_fraction, std::size_t align_size = kDefaultWorkingSize,
                                           Execution exec = {}) {
    loss_detail::check_pair(pred, gt);
    const auto px = loss_detail::usable_pixels(pred, gt);
    require(!px.empty(), "global loss: no jointly valid pixels");
    const auto lattice = sampling_lattice(gt.height(), gt.width(), align_size);

    std::vector<Vec3> p, g;
    std::vector<double> w;
    std::vector<std::size_t> src;
    for (std::size_t i : px) {
        if (!lattice[i]) continue;
        p.push_back(pred[i]);
        g.push_back(gt[i]);
        w.push_back(1.0 / gt[i].z());
        src.push_back(i);
    }
    // a sparse mask can leave the lattice empty
    if (p.empty())
        for (std::size_t i : px) {
            p.push_back(pred[i]);
            g.push_back(gt[i]);
            w.push_back(1.0 / gt[i].z());
            src.push_back(i);
        }

    GlobalLossResult out;
    out.alignment = align_scale_shift_1d(p, g, w, tau, exec);
    out.alignment.anchor_index = src[out.alignment.anchor_index];
    std::vector<double> per_pixel;
    per_pixel.reserve(px.size());
    for (std::size_t i : px) per_pixel.push_back(loss_detail::weighted_l1(out.alignment.align, pred[i], gt[i]));
    out.pixels = px.size();
    out.value = trimmed_mean(std::move(per_pixel), trim_fraction, &out.kept);
    return out;
}

inline double global_loss(const PointMap& pred, const PointMap& gt, Truncation tau, double trim_fraction,
                          std::size_t align_size = kDefaultWorkingSize) {
    return global_loss_detail(pred, gt, tau, trim_fraction, align_size).value;
}

struct SphereRegion {
    std::size_t anchor_index = 0;
    double radius = 0.0;
    std::vector<std::size_t> members;
};

/// r = alpha * z_anchor * sqrt(W^2 + H^2) / (2 f), with W, H the map size.
inline double sphere_radius(double alpha, double z_anchor, std::size_t height, std::size_t width, double focal) {
    return alpha * z_anchor * std::hypot(double(width), double(height)) / (2.0 * focal);
}

/// Valid ground-truth pixels within the sphere around the anchor's point.
inline SphereRegion select_sphere(const PointMap& gt, std::size_t anchor, double alpha, double focal) {
    require(anchor < gt.size(), "sphere: anchor outside the map");
    require(gt.valid(anchor), "sphere: anchor pixel is not valid");
    require(alpha > 0.0 && alpha < 1.0, "sphere: alpha must lie in (0, 1)");
    require(focal > 0.0, "sphere: focal must be positive");
    SphereRegion r;
    r.anchor_index = anchor;
    r.radius = sphere_radius(alpha, gt[anchor].z(), gt.height(), gt.width(), focal);
    const Vec3 c = gt[anchor];
    for (std::size_t i = 0; i < gt.size(); ++i)
        if (gt.valid(i) && (gt[i] - c).norm() <= r.radius) r.members.push_back(i);
    return r;
}

struct LocalScaleLoss {
    double alpha = 0.0;
    double value = 0.0;
    std::size_t spheres = 0;
    std::size_t members = 0;
};

struct LocalLossResult {
    std::vector<LocalScaleLoss> scales;
    /// Spheres with no usable member after intersecting with the prediction mask.
    std::size_t skipped_spheres = 0;
};

inline constexpr double kDefaultScales[] = {1.0 / 4.0, 1.0 / 16.0, 1.0 / 64.0};
inline constexpr std::size_t kDefaultAnchorsPerScale = 4;

/// Up to `count` distinct elements drawn uniformly without replacement
/// (partial Fisher-Yates), in draw order.
inline std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t count, Rng& rng) {
    const std::size_t k = std::min(count, pool.size());
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
    pool.resize(k);
    return pool;
}

/// Per scale alpha: draws anchors from the usable pixels, aligns each sphere
/// independently with the 3-D-shift solver (on the working lattice for large
/// maps) and reports sum of (1/z)||s p̂ + t - p||_1 over all members divided
/// by the total member count.
inline LocalLossResult multiscale_local_loss(const PointMap& pred, const PointMap& gt, double focal,
                                             std::span<const double> scales, std::size_t anchors_per_scale,
                                             Truncation tau, std::uint64_t seed,
                                             std::size_t align_size = kDefaultWorkingSize, Execution exec = {}) {
    loss_detail::check_pair(pred, gt);
    require(focal > 0.0, "local loss: focal must be positive");
    const auto px = loss_detail::usable_pixels(pred, gt);
    require(!px.empty(), "local loss: no jointly valid pixels");
    std::vector<std::uint8_t> usable(gt.size(), 0);
    for (std::size_t i : px) usable[i] = 1;
    const auto lattice = sampling_lattice(gt.height(), gt.width(), align_size);

    Rng rng(seed);
    LocalLossResult out;
    for (double alpha : scales) {
        LocalScaleLoss scale;
        scale.alpha = alpha;
        double acc = 0.0;
        for (std::size_t anchor : sample_without_replacement(px, anchors_per_scale, rng)) {
            const SphereRegion sphere = select_sphere(gt, anchor, alpha, focal);
            std::vector<std::size_t> members;
            for (std::size_t i : sphere.members)
                if (usable[i]) members.push_back(i);
            if (members.empty()) {
                ++out.skipped_spheres;
                continue;
            }
            std::vector<Vec3> p, g;
            std::vector<double> w;
            for (int pass = 0; pass < 2 && p.empty(); ++pass)
                for (std::size_t i : members) {
                    if (pass == 0 && !lattice[i]) continue;
                    p.push_back(pred[i]);
                    g.push_back(gt[i]);
                    w.push_back(1.0 / gt[i].z());
                }
            const AlignResult a = align_scale_shift_3d(p, g, w, tau, exec);
            for (std::size_t i : members) acc += loss_detail::weighted_l1(a.align, pred[i], gt[i]);
            ++scale.spheres;
            scale.members += members.size();
        }
        scale.value = scale.members > 0 ? acc / double(scale.members) : 0.0;
        out.scales.push_back(scale);
    }
    return out;
}

struct NormalLossResult {
    double value = 0.0;       // mean angle in radians
    std::size_t pixels = 0;   // pixels contributing
    std::size_t skipped = 0;  // zero-length cross products
};

/// Angle between two nonzero vectors, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Normal of pixel (r, c) from (down - self) x (right - self); faces the
/// camera (negative z) for surfaces seen from the origin with y down.
inline std::optional<Vec3> grid_normal(const PointMap& pm, std::size_t r, std::size_t c) {
    const Vec3& self = pm.at(r, c);
    const Vec3 n = (pm.at(r + 1, c) - self).cross(pm.at(r, c + 1) - self);
    const double len = n.norm();
    if (!(len > 0.0)) return std::nullopt;
    return n / len;
}

/// Mean angle between grid normals of `pred` and `gt_normals` over pixels
/// whose right and down neighbours are valid in both `pred` and `valid`.
inline NormalLossResult normal_loss(const PointMap& pred, std::span<const Vec3> gt_normals, const Mask& valid) {
    require(gt_normals.size() == pred.size() && valid.size() == pred.size(), "normal loss: size mismatch");
    const std::size_t H = pred.height(), W = pred.width();
    auto ok = [&](std::size_t i) { return pred.valid(i) && valid[i] != 0; };
    NormalLossResult out;
    double acc = 0.0;
    for (std::size_t r = 0; r + 1 < H; ++r)
        for (std::size_t c = 0; c + 1 < W; ++c) {
            const std::size_t i = r * W + c;
            if (!ok(i) || !ok(i + 1) || !ok(i + W)) continue;
            const auto n = grid_normal(pred, r, c);
            if (!n) {
                ++out.skipped;
                continue;
            }
            acc += angle_between(*n, gt_normals[i]);
            ++out.pixels;
        }
    out.value = out.pixels > 0 ? acc / double(out.pixels) : 0.0;
    return out;
}

/// Grid normals of a whole map; pixels without a usable neighbourhood are
/// marked invalid in `valid_out`.
inline std::vector<Vec3> grid_normals(const PointMap& pm, Mask& valid_out) {
    const std::size_t H = pm.height(), W = pm.width();
    std::vector<Vec3> n(pm.size(), Vec3::Zero());
    valid_out.assign(pm.size(), 0);
    for (std::size_t r = 0; r + 1 < H; ++r)
        for (std::size_t c = 0; c + 1 < W; ++c) {
            const std::size_t i = r * W + c;
            if (!pm.valid(i) || !pm.valid(i + 1) || !pm.valid(i + W)) continue;
            if (auto v = grid_normal(pm, r, c)) {
                n[i] = *v;
                valid_out[i] = 1;
            }
        }
    return n;
}

inline constexpr double kMaskThreshold = 0.5;

/// Mean of (m̂ - (1 - m_inf))^2 over all pixels.
inline double mask_loss(std::span<const double> pred_mask, std::span<const std::uint8_t> inf_mask) {
    require(pred_mask.size() == inf_mask.size(), "mask loss: size mismatch");
    require(!pred_mask.empty(), "mask loss: empty mask");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred_mask.size(); ++i) {
        const double m = pred_mask[i];
        require(m >= 0.0 && m <= 1.0, "mask loss: predicted mask values must lie in [0, 1]");
        const double e = m - (inf_mask[i] ? 0.0 : 1.0);
        acc += e * e;
    }
    return acc / double(pred_mask.size());
}

/// Valid where the predicted probability exceeds 0.5.
inline Mask binarize_mask(std::span<const double> pred_mask) {
    Mask out(pred_mask.size());
    for (std::size_t i = 0; i < pred_mask.size(); ++i) out[i] = pred_mask[i] > kMaskThreshold ? 1 : 0;
    return out;
}

/// Loss combination per training-label quality tier.
enum class LossPreset { A, B, C, D };

inline LossPreset parse_preset(std::string_view s) {
    if (s == "A" || s == "a") return LossPreset::A;
    if (s == "B" || s == "b") return LossPreset::B;
    if (s == "C" || s == "c") return LossPreset::C;
    if (s == "D" || s == "d") return LossPreset::D;
    fail(ErrorCode::invalid_input, "unknown loss preset '" + std::string(s) + "'");
}

struct LossWeights {
    double global = 1.0;
    double local = 1.0;  // per scale
    double normal = 1.0;
    double mask = 1.0;
};

struct LossConfig {
    Truncation tau = Truncation::at(kDefaultTau);
    double trim_fraction = 0.05;
    std::vector<double> scales{std::begin(kDefaultScales), std::end(kDefaultScales)};
    std::size_t anchors_per_scale = kDefaultAnchorsPerScale;
    std::uint64_t seed = 0;
    std::size_t align_size = kDefaultWorkingSize;
    bool use_normal = true;
    bool use_mask = true;
    LossWeights weights;

    /// A: global, three local scales, normal, mask. B: global, two local
    /// scales, mask. C: global, one local scale, mask. D: global, mask.
    static LossConfig preset(LossPreset p) {
        LossConfig c;
        const std::size_t local = p == LossPreset::A ? 3 : p == LossPreset::B ? 2 : p == LossPreset::C ? 1 : 0;
        c.scales.resize(local);
        c.use_normal = p == LossPreset::A;
        return c;
    }
};

struct LossInputs {
    const PointMap* pred = nullptr;
    const PointMap* gt = nullptr;
    double focal = 0.0;  // ground-truth focal, needed for local scales
    const std::vector<Vec3>* gt_normals = nullptr;
    const Mask* gt_normals_valid = nullptr;
    const std::vector<double>* pred_mask = nullptr;
    const Mask* inf_mask = nullptr;
};

struct LossBreakdown {
    double global = 0.0;
    std::size_t global_pixels = 0;
    std::size_t global_kept = 0;
    SimilarityAlign global_alignment;
    std::vector<LocalScaleLoss> local;
    std::size_t skipped_spheres = 0;
    std::optional<double> normal;
    std::size_t normal_skipped = 0;
    std::optional<double> mask;
    double total = 0.0;
};

/// Evaluates every configured component whose inputs are present and the
/// weighted total.
inline LossBreakdown compute_losses(const LossInputs& in, const LossConfig& cfg, Execution exec = {}) {
    require(in.pred && in.gt, "losses: prediction and ground truth are required");
    LossBreakdown out;
    const auto g = global_loss_detail(*in.pred, *in.gt, cfg.tau, cfg.trim_fraction, cfg.align_size, exec);
    out.global = g.value;
    out.global_pixels = g.pixels;
    out.global_kept = g.kept;
    out.global_alignment = g.alignment.align;
    out.total = cfg.weights.global * out.global;

    if (!cfg.scales.empty()) {
        require(in.focal > 0.0, "losses: a positive ground-truth focal is required for local losses");
        auto local = multiscale_local_loss(*in.pred, *in.gt, in.focal, cfg.scales, cfg.anchors_per_scale, cfg.tau,
                                           cfg.seed, cfg.align_size, exec);
        out.local = std::move(local.scales);
        out.skipped_spheres = local.skipped_spheres;
        for (const auto& s : out.local) out.total += cfg.weights.local * s.value;
    }
    if (cfg.use_normal && in.gt_normals) {
        const Mask all(in.pred->size(), 1);
        const auto n = normal_loss(*in.pred, *in.gt_normals, in.gt_normals_valid ? *in.gt_normals_valid : all);
        out.normal = n.value;
        out.normal_skipped = n.skipped;
        out.total += cfg.weights.normal * n.value;
    }
    if (cfg.use_mask && in.pred_mask && in.inf_mask) {
        out.mask = mask_loss(*in.pred_mask, *in.inf_mask);
        out.total += cfg.weights.mask * *out.mask;
    }
    return out;
}

}  // namespace pmgeo
