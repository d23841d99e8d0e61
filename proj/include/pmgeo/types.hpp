#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmgeo/error.hpp"

namespace pmgeo {

using Vec3 = Eigen::Vector3d;
using Mask = std::vector<std::uint8_t>;

/// Pixels whose depth does not exceed this value (in the map's own units)
/// are treated as invalid wherever a positive depth is required.
inline constexpr double kDepthEpsilon = 1e-6;

/// Row-major H x W grid of 3D points with a per-pixel validity mask.
class PointMap {
public:
    PointMap() = default;

    PointMap(std::size_t height, std::size_t width)
        : height_(height), width_(width), points_(height * width, Vec3::Zero()), valid_(height * width, 1) {}

    PointMap(std::size_t height, std::size_t width, std::vector<Vec3> points, Mask valid)
        : height_(height), width_(width), points_(std::move(points)), valid_(std::move(valid)) {
        require(points_.size() == height_ * width_, "point map: points grid must hold height*width entries");
        require(valid_.size() == height_ * width_, "point map: mask must hold height*width entries");
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return points_.size(); }

    const Vec3& operator[](std::size_t i) const { return points_[i]; }
    Vec3& operator[](std::size_t i) { return points_[i]; }
    const Vec3& at(std::size_t row, std::size_t col) const { return points_[row * width_ + col]; }
    Vec3& at(std::size_t row, std::size_t col) { return points_[row * width_ + col]; }

    bool valid(std::size_t i) const { return valid_[i] != 0; }
    void set_valid(std::size_t i, bool v) { valid_[i] = v ? 1 : 0; }

    std::span<const Vec3> points() const noexcept { return points_; }
    const Mask& mask() const noexcept { return valid_; }

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto v : valid_) n += v != 0;
        return n;
    }

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<Vec3> points_;
    Mask valid_;
};

/// Scalar-per-pixel grid shared by depth and disparity maps.
template <class Tag>
class ScalarMap {
public:
    ScalarMap() = default;

    ScalarMap(std::size_t height, std::size_t width)
        : height_(height), width_(width), values_(height * width, 0.0), valid_(height * width, 1) {}

    ScalarMap(std::size_t height, std::size_t width, std::vector<double> values, Mask valid)
        : height_(height), width_(width), values_(std::move(values)), valid_(std::move(valid)) {
        require(values_.size() == height_ * width_, "scalar map: values must hold height*width entries");
        require(valid_.size() == height_ * width_, "scalar map: mask must hold height*width entries");
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return values_.size(); }

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    bool valid(std::size_t i) const { return valid_[i] != 0; }
    void set_valid(std::size_t i, bool v) { valid_[i] = v ? 1 : 0; }

    std::span<const double> values() const noexcept { return values_; }
    const Mask& mask() const noexcept { return valid_; }

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> values_;
    Mask valid_;
};

struct DepthTag {};
struct DisparityTag {};
using DepthMap = ScalarMap<DepthTag>;
using DisparityMap = ScalarMap<DisparityTag>;

/// Image-plane coordinates of every pixel of a map, with the principal point
/// at the image center and pixel centers at half-integer offsets (y down).
///
/// `height`/`width` describe the image plane the coordinates live in. For a
/// map downsampled from a larger image they stay the source dimensions, and
/// each entry holds the coordinate of the source pixel that was sampled.
class ImageGrid {
public:
    static ImageGrid centered(std::size_t height, std::size_t width) {
        return resampled(height, width, height, width);
    }

    /// Coordinates of a nearest-neighbour `target_h x target_w` sampling of a
    /// `height x width` image (see downsample_pointmap for the index map).
    static ImageGrid resampled(std::size_t height, std::size_t width, std::size_t target_h, std::size_t target_w);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return u_.size(); }

    double u(std::size_t i) const { return u_[i]; }
    double v(std::size_t i) const { return v_[i]; }

    double diagonal() const { return std::hypot(double(width_), double(height_)); }

private:
    std::size_t height_ = 0, width_ = 0, rows_ = 0, cols_ = 0;
    std::vector<double> u_, v_;
};

enum class ShiftMode { one_dimensional, three_dimensional };

/// Scale plus shift mapping a prediction into the target frame: s * p + t.
struct SimilarityAlign {
    double scale = 1.0;
    Vec3 shift = Vec3::Zero();
    ShiftMode shift_mode = ShiftMode::one_dimensional;

    Vec3 apply(const Vec3& p) const { return scale * p + shift; }

    /// scale > 0 and, for the 1-D mode, tx = ty = 0.
    bool admissible() const {
        if (!(scale > 0.0)) return false;
        return shift_mode == ShiftMode::three_dimensional || (shift.x() == 0.0 && shift.y() == 0.0);
    }
};

PointMap apply(const SimilarityAlign& a, const PointMap& pm);

// Nearest-neighbour source index for target index `i` when resampling `src`
// cells onto `dst` cells (dst <= src): floor((i + 0.5) * src / dst).
inline std::size_t nearest_source_index(std::size_t i, std::size_t src, std::size_t dst) {
    return ((2 * i + 1) * src) / (2 * dst);
}

/// Marks the pixels of an h x w grid that a nearest-neighbour resampling to
/// at most size x size reads; every pixel when size is 0 or the grid fits.
inline Mask sampling_lattice(std::size_t h, std::size_t w, std::size_t size) {
    Mask on(h * w, 0);
    const std::size_t th = size == 0 ? h : std::min(size, h);
    const std::size_t tw = size == 0 ? w : std::min(size, w);
    for (std::size_t r = 0; r < th; ++r)
        for (std::size_t c = 0; c < tw; ++c) on[nearest_source_index(r, h, th) * w + nearest_source_index(c, w, tw)] = 1;
    return on;
}

inline ImageGrid ImageGrid::resampled(std::size_t height, std::size_t width, std::size_t target_h,
                                      std::size_t target_w) {
    require(target_h > 0 && target_w > 0, "image grid: target dimensions must be positive");
    require(target_h <= height && target_w <= width, "image grid: target dimensions exceed source");
    ImageGrid g;
    g.height_ = height;
    g.width_ = width;
    g.rows_ = target_h;
    g.cols_ = target_w;
    g.u_.resize(target_h * target_w);
    g.v_.resize(target_h * target_w);
    for (std::size_t r = 0; r < target_h; ++r) {
        const std::size_t sr = nearest_source_index(r, height, target_h);
        for (std::size_t c = 0; c < target_w; ++c) {
            const std::size_t sc = nearest_source_index(c, width, target_w);
            g.u_[r * target_w + c] = (double(sc) + 0.5) - double(width) / 2.0;
            g.v_[r * target_w + c] = (double(sr) + 0.5) - double(height) / 2.0;
        }
    }
    return g;
}

inline PointMap apply(const SimilarityAlign& a, const PointMap& pm) {
    std::vector<Vec3> pts(pm.size());
    for (std::size_t i = 0; i < pm.size(); ++i) pts[i] = a.apply(pm[i]);
    return PointMap(pm.height(), pm.width(), std::move(pts), pm.mask());
}

/// Adds `shift_z` to every z; pixels whose shifted depth is <= kDepthEpsilon
/// become invalid.
inline DepthMap pointmap_to_depth(const PointMap& pm, double shift_z) {
    std::vector<double> z(pm.size());
    Mask valid(pm.size());
    for (std::size_t i = 0; i < pm.size(); ++i) {
        z[i] = pm[i].z() + shift_z;
        valid[i] = pm.valid(i) && z[i] > kDepthEpsilon;
    }
    return DepthMap(pm.height(), pm.width(), std::move(z), std::move(valid));
}

inline DisparityMap depth_to_disparity(const DepthMap& dm) {
    std::vector<double> d(dm.size(), 0.0);
    for (std::size_t i = 0; i < dm.size(); ++i) {
        if (!dm.valid(i)) continue;
        require(dm[i] > 0.0, "depth_to_disparity: valid pixel " + std::to_string(i) + " has non-positive depth");
        d[i] = 1.0 / dm[i];
    }
    return DisparityMap(dm.height(), dm.width(), std::move(d), dm.mask());
}

/// Nearest-neighbour resampling on a uniform grid; no interpolation across
/// points, validity follows the sampled source pixel.
inline PointMap downsample_pointmap(const PointMap& pm, std::size_t target_h, std::size_t target_w) {
    require(target_h > 0 && target_w > 0, "downsample: target dimensions must be positive");
    require(target_h <= pm.height() && target_w <= pm.width(), "downsample: target dimensions exceed source");
    std::vector<Vec3> pts(target_h * target_w);
    Mask valid(target_h * target_w);
    for (std::size_t r = 0; r < target_h; ++r) {
        const std::size_t sr = nearest_source_index(r, pm.height(), target_h);
        for (std::size_t c = 0; c < target_w; ++c) {
            const std::size_t sc = nearest_source_index(c, pm.width(), target_w);
            const std::size_t s = sr * pm.width() + sc;
            pts[r * target_w + c] = pm[s];
            valid[r * target_w + c] = pm.mask()[s];
        }
    }
    return PointMap(target_h, target_w, std::move(pts), std::move(valid));
}

/// Scalar-map counterpart of downsample_pointmap.
template <class Tag>
ScalarMap<Tag> downsample(const ScalarMap<Tag>& m, std::size_t target_h, std::size_t target_w) {
    require(target_h > 0 && target_w > 0, "downsample: target dimensions must be positive");
    require(target_h <= m.height() && target_w <= m.width(), "downsample: target dimensions exceed source");
    std::vector<double> vals(target_h * target_w);
    Mask valid(target_h * target_w);
    for (std::size_t r = 0; r < target_h; ++r) {
        const std::size_t sr = nearest_source_index(r, m.height(), target_h);
        for (std::size_t c = 0; c < target_w; ++c) {
            const std::size_t s = sr * m.width() + nearest_source_index(c, m.width(), target_w);
            vals[r * target_w + c] = m[s];
            valid[r * target_w + c] = m.mask()[s];
        }
    }
    return ScalarMap<Tag>(target_h, target_w, std::move(vals), std::move(valid));
}

/// Depth channel of a point map, validity preserved (no shift, no epsilon).
inline DepthMap depth_of(const PointMap& pm) {
    std::vector<double> z(pm.size());
    for (std::size_t i = 0; i < pm.size(); ++i) z[i] = pm[i].z();
    return DepthMap(pm.height(), pm.width(), std::move(z), pm.mask());
}

}  // namespace pmgeo
