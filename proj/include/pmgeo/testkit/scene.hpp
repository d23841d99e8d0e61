#pragma once

// Deterministic synthetic scenes with analytic depth, normals, focal and
// shift, rendered through a centered pinhole camera.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "pmgeo/camera.hpp"
#include "pmgeo/error.hpp"
#include "pmgeo/random.hpp"
#include "pmgeo/types.hpp"

namespace pmgeo::testkit {

enum class SceneFamily { plane, two_plane, sphere_patch, two_cluster };

inline std::string_view to_string(SceneFamily f) {
    switch (f) {
        case SceneFamily::plane: return "plane";
        case SceneFamily::two_plane: return "two-plane";
        case SceneFamily::sphere_patch: return "sphere-patch";
        case SceneFamily::two_cluster: return "two-cluster";
    }
    return "unknown";
}

inline SceneFamily parse_family(std::string_view tag) {
    for (auto f : {SceneFamily::plane, SceneFamily::two_plane, SceneFamily::sphere_patch, SceneFamily::two_cluster})
        if (to_string(f) == tag) return f;
    fail(ErrorCode::invalid_input, "unknown scene family '" + std::string(tag) + "'");
}

struct SceneParams {
    std::size_t height = 64;
    std::size_t width = 64;
    double focal = 500.0;
    /// Subtracted from every rendered z, so recovery should return +shift.
    double shift = 0.0;
    /// Characteristic depth of the scene (distance of the main surface).
    double depth = 4.0;
};

struct SyntheticScene {
    SceneFamily family = SceneFamily::plane;
    DepthMap depth;
    double focal = 0.0;
    double shift_true = 0.0;
    PointMap pointmap;
    std::vector<Vec3> normals;
    /// Per-pixel object label (0 background / first object, 1 second object).
    std::vector<int> label;

    ImageGrid grid() const { return ImageGrid::centered(depth.height(), depth.width()); }
    /// Camera-space points, i.e. the point map with the shift added back.
    PointMap camera_points() const {
        return unproject(depth, focal, grid());
    }
};

namespace scene_detail {

struct Plane {
    Vec3 normal;  // unit, facing the camera (negative z)
    double offset;  // normal . p = offset
};

inline Plane tilted_plane(Rng& rng, double depth, double min_tilt_deg, double max_tilt_deg) {
    const double tilt = rng.uniform(min_tilt_deg, max_tilt_deg) * std::numbers::pi / 180.0;
    const double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Vec3 n(std::sin(tilt) * std::cos(azimuth), std::sin(tilt) * std::sin(azimuth), -std::cos(tilt));
    return {n, n.dot(Vec3(0.0, 0.0, depth))};
}

// Depth along the pixel ray (u/f, v/f, 1), or NaN when the ray misses.
inline double intersect(const Plane& p, double u, double v, double f) {
    const double denom = p.normal.dot(Vec3(u / f, v / f, 1.0));
    if (denom == 0.0) return std::nan("");
    const double z = p.offset / denom;
    return z > 0.0 ? z : std::nan("");
}

inline double intersect_sphere(const Vec3& c, double radius, double u, double v, double f) {
    const Vec3 d(u / f, v / f, 1.0);
    const double a = d.squaredNorm();
    const double b = d.dot(c);
    const double disc = b * b - a * (c.squaredNorm() - radius * radius);
    if (disc < 0.0) return std::nan("");
    const double z = (b - std::sqrt(disc)) / a;
    return z > 0.0 ? z : std::nan("");
}

}  // namespace scene_detail

inline SyntheticScene make_scene(SceneFamily family, const SceneParams& params, std::uint64_t seed) {
    require(params.height > 0 && params.width > 0, "scene: dimensions must be positive");
    require(params.focal > 0.0, "scene: focal must be positive");
    require(params.depth > 0.0, "scene: depth must be positive");
    using namespace scene_detail;

    Rng rng(seed);
    const std::size_t H = params.height, W = params.width;
    const ImageGrid grid = ImageGrid::centered(H, W);
    const double f = params.focal;

    SyntheticScene sc;
    sc.family = family;
    sc.focal = f;
    sc.shift_true = params.shift;
    std::vector<double> z(H * W, 0.0);
    Mask valid(H * W, 0);
    sc.normals.assign(H * W, Vec3(0.0, 0.0, -1.0));
    sc.label.assign(H * W, 0);

    auto put = [&](std::size_t i, double depth, const Vec3& n, int label) {
        if (!std::isfinite(depth)) return;
        z[i] = depth;
        valid[i] = 1;
        sc.normals[i] = n;
        sc.label[i] = label;
    };

    switch (family) {
        case SceneFamily::plane: {
            const Plane p = tilted_plane(rng, params.depth, 20.0, 40.0);
            for (std::size_t i = 0; i < H * W; ++i) put(i, intersect(p, grid.u(i), grid.v(i), f), p.normal, 0);
            break;
        }
        case SceneFamily::two_plane: {
            const Plane back = tilted_plane(rng, params.depth * rng.uniform(1.3, 1.7), 15.0, 35.0);
            const Plane front = tilted_plane(rng, params.depth * rng.uniform(0.6, 0.8), 25.0, 45.0);
            const std::size_t c0 = std::size_t(double(W) * rng.uniform(0.1, 0.3));
            const std::size_t c1 = std::size_t(double(W) * rng.uniform(0.55, 0.75));
            const std::size_t r0 = std::size_t(double(H) * rng.uniform(0.1, 0.3));
            const std::size_t r1 = std::size_t(double(H) * rng.uniform(0.6, 0.9));
            for (std::size_t r = 0; r < H; ++r)
                for (std::size_t c = 0; c < W; ++c) {
                    const std::size_t i = r * W + c;
                    const bool in_front = r >= r0 && r < r1 && c >= c0 && c < c1;
                    const Plane& p = in_front ? front : back;
                    put(i, intersect(p, grid.u(i), grid.v(i), f), p.normal, in_front ? 1 : 0);
                }
            break;
        }
        case SceneFamily::sphere_patch: {
            const double dist = params.depth * rng.uniform(1.0, 1.5);
            const double radius = dist * rng.uniform(0.5, 0.7);
            const double half_diag = grid.diagonal() / 2.0;
            // lateral offset small enough that the sphere stays in view
            const Vec3 center(rng.uniform(-0.1, 0.1) * dist * half_diag / f,
                              rng.uniform(-0.1, 0.1) * dist * half_diag / f, dist);
            for (std::size_t i = 0; i < H * W; ++i) {
                const double depth = intersect_sphere(center, radius, grid.u(i), grid.v(i), f);
                if (!std::isfinite(depth)) continue;
                const Vec3 p(grid.u(i) * depth / f, grid.v(i) * depth / f, depth);
                put(i, depth, (p - center).normalized(), 0);
            }
            break;
        }
        case SceneFamily::two_cluster: {
            const std::size_t patch = std::max<std::size_t>(2, std::min(H, W) / 8);
            require(W >= 4 * patch && H >= 2 * patch, "scene: two-cluster needs at least 16x16 pixels");
            const double near = params.depth * rng.uniform(0.5, 0.7);
            const double far = params.depth * rng.uniform(2.5, 3.5);
            const std::size_t ra = rng.index(H - patch + 1), rb = rng.index(H - patch + 1);
            const std::size_t ca = rng.index(W / 4 - patch + 1);
            const std::size_t cb = W - W / 4 + rng.index(W / 4 - patch + 1);
            const Plane pa = tilted_plane(rng, near, 10.0, 30.0);
            const Plane pb = tilted_plane(rng, far, 10.0, 30.0);
            for (std::size_t r = 0; r < patch; ++r)
                for (std::size_t c = 0; c < patch; ++c) {
                    std::size_t i = (ra + r) * W + (ca + c);
                    // each patch is a small plane through its own depth
                    Plane a = pa;
                    a.offset = a.normal.dot(Vec3(grid.u((ra + patch / 2) * W + ca + patch / 2) * near / f,
                                                 grid.v((ra + patch / 2) * W + ca + patch / 2) * near / f, near));
                    put(i, intersect(a, grid.u(i), grid.v(i), f), a.normal, 0);
                    i = (rb + r) * W + (cb + c);
                    Plane b = pb;
                    b.offset = b.normal.dot(Vec3(grid.u((rb + patch / 2) * W + cb + patch / 2) * far / f,
                                                 grid.v((rb + patch / 2) * W + cb + patch / 2) * far / f, far));
                    put(i, intersect(b, grid.u(i), grid.v(i), f), b.normal, 1);
                }
            break;
        }
    }

    sc.depth = DepthMap(H, W, std::move(z), std::move(valid));
    PointMap pm = unproject(sc.depth, f, grid);
    for (std::size_t i = 0; i < pm.size(); ++i) pm[i].z() -= params.shift;
    sc.pointmap = std::move(pm);
    return sc;
}

}  // namespace pmgeo::testkit
