#pragma once

// Pinhole focal length and z-shift recovery from an affine-invariant point map.
//
// Minimizes the reprojection error
//     sum_i (f x_i / (z_i + t) - u_i)^2 + (f y_i / (z_i + t) - v_i)^2
// with f replaced by its closed-form optimum for each t, leaving a 1-D
// nonlinear least-squares problem in t solved by damped Gauss-Newton.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "pmgeo/error.hpp"
#include "pmgeo/stats.hpp"
#include "pmgeo/types.hpp"

namespace pmgeo {

struct CameraSolution {
    double focal = 0.0;    // pixels of the grid's image plane
    double shift_z = 0.0;  // point-map units
    int iterations = 0;
    double final_residual = 0.0;  // mean squared projection error per point
};

struct FovDegrees {
    double vertical = 0.0;
    double horizontal = 0.0;
};

/// Thrown when the iteration budget runs out; carries the last iterate.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, CameraSolution last)
        : Error(ErrorCode::numerical_failure, what), last_(last) {}

    const CameraSolution& last() const noexcept { return last_; }

private:
    CameraSolution last_;
};

struct CameraOptions {
    int max_iterations = 100;
    double initial_damping = 1e-3;
    double step_tolerance = 1e-6;       // times median |z|
    double residual_tolerance = 1e-9;   // relative cost change
    double barrier_margin = 1e-4;       // times median |z|
};

/// Default working resolution for camera recovery and alignment.
inline constexpr std::size_t kDefaultWorkingSize = 64;

namespace detail {

struct ProjectionSamples {
    std::vector<double> x, y, z, u, v;
    std::size_t size() const noexcept { return x.size(); }
};

inline ProjectionSamples projection_samples(const PointMap& pm, const ImageGrid& grid) {
    require(grid.rows() == pm.height() && grid.cols() == pm.width(), "camera: grid does not match the point map");
    ProjectionSamples s;
    for (std::size_t i = 0; i < pm.size(); ++i) {
        if (!pm.valid(i)) continue;
        s.x.push_back(pm[i].x());
        s.y.push_back(pm[i].y());
        s.z.push_back(pm[i].z());
        s.u.push_back(grid.u(i));
        s.v.push_back(grid.v(i));
    }
    return s;
}

/// Reduced problem state at one shift value.
struct FocalFit {
    double focal = 0.0;
    double cost = 0.0;
    double gradient = 0.0;  // d cost / d t with f at its optimum
    double jtj = 0.0;       // Gauss-Newton curvature of the reduced residuals
    bool ok = false;
};

inline FocalFit fit_focal(const ProjectionSamples& s, double t, bool with_derivatives) {
    FocalFit out;
    CompensatedSum nsum, dsum;
    double dnum = 0.0, dden = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double inv = 1.0 / (s.z[i] + t);
        const double q = s.x[i] * inv, r = s.y[i] * inv;
        nsum.add(q * s.u[i]);
        nsum.add(r * s.v[i]);
        dsum.add(q * q);
        dsum.add(r * r);
        // dq/dt = -q * inv
        dnum -= (q * s.u[i] + r * s.v[i]) * inv;
        dden -= 2.0 * (q * q + r * r) * inv;
    }
    const double num = nsum.value(), den = dsum.value();
    if (!(den > 0.0)) return out;
    out.ok = true;
    out.focal = num / den;
    const double dfocal = (dnum * den - num * dden) / (den * den);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double inv = 1.0 / (s.z[i] + t);
        const double q = s.x[i] * inv, r = s.y[i] * inv;
        const double eu = out.focal * q - s.u[i], ev = out.focal * r - s.v[i];
        out.cost += eu * eu + ev * ev;
        if (with_derivatives) {
            const double ju = dfocal * q - out.focal * q * inv;
            const double jv = dfocal * r - out.focal * r * inv;
            out.gradient += 2.0 * (ju * eu + jv * ev);
            out.jtj += ju * ju + jv * jv;
        }
    }
    return out;
}

}  // namespace detail

/// f = sum(q u + r v) / sum(q^2 + r^2) with q = x/(z+t), r = y/(z+t).
inline double closed_form_focal(const PointMap& pm, const ImageGrid& grid, double shift_z) {
    const auto s = detail::projection_samples(pm, grid);
    require(s.size() > 0, "closed-form focal: no valid pixels");
    for (std::size_t i = 0; i < s.size(); ++i)
        require(s.z[i] + shift_z > 0.0, "closed-form focal: shifted depth is not positive");
    const auto fit = detail::fit_focal(s, shift_z, false);
    if (!fit.ok) fail(ErrorCode::numerical_failure, "closed-form focal: all projected coordinates are zero");
    return fit.focal;
}

/// Reprojection cost with f at its closed-form optimum; exposed for gradient checks.
inline double reduced_reprojection_cost(const PointMap& pm, const ImageGrid& grid, double shift_z) {
    const auto s = detail::projection_samples(pm, grid);
    return detail::fit_focal(s, shift_z, false).cost;
}

inline CameraSolution recover_focal_shift(const PointMap& pm, const ImageGrid& grid, const CameraOptions& opt = {}) {
    const auto s = detail::projection_samples(pm, grid);
    require(s.size() >= 2, "camera recovery: at least two valid pixels are required");

    std::vector<double> absz(s.size());
    double zmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i) {
        absz[i] = std::abs(s.z[i]);
        zmin = std::min(zmin, s.z[i]);
    }
    const double zscale = median(absz);
    require(zscale > 0.0, "camera recovery: point map has zero depth scale");
    const double margin = opt.barrier_margin * zscale;
    const double step_tol = opt.step_tolerance * zscale;

    // t = theta directly, or t = exp(theta) - zmin + margin once the barrier
    // zmin + t > margin would otherwise be crossed.
    bool reparam = !(zmin + 0.0 > margin);
    double theta = reparam ? std::log(zscale) : 0.0;
    auto shift_of = [&](double th) { return reparam ? std::exp(th) - zmin + margin : th; };
    auto dshift = [&](double th) { return reparam ? std::exp(th) : 1.0; };

    double t = shift_of(theta);
    auto fit = detail::fit_focal(s, t, true);
    if (!fit.ok) fail(ErrorCode::numerical_failure, "camera recovery: degenerate point configuration");

    double lambda = opt.initial_damping;
    bool converged = fit.cost == 0.0;
    int iter = 0;
    while (!converged && iter < opt.max_iterations) {
        ++iter;
        const double dt = dshift(theta);
        const double grad = fit.gradient * dt;
        const double curv = fit.jtj * dt * dt;
        if (!(curv > 0.0)) break;
        const double step = -0.5 * grad / (curv * (1.0 + lambda));
        double next_theta = theta + step;
        double next_t = shift_of(next_theta);
        if (!reparam && !(zmin + next_t > margin)) {
            reparam = true;
            theta = std::log(t + zmin - margin);
            --iter;
            continue;
        }
        const auto trial = detail::fit_focal(s, next_t, true);
        const bool small_step = std::abs(next_t - t) < step_tol;
        if (trial.ok && trial.cost <= fit.cost) {
            const double rel = fit.cost > 0.0 ? (fit.cost - trial.cost) / fit.cost : 0.0;
            theta = next_theta;
            t = next_t;
            fit = trial;
            lambda *= 0.1;
            converged = small_step || rel < opt.residual_tolerance || fit.cost == 0.0;
        } else {
            lambda *= 10.0;
            converged = small_step;
        }
    }

    CameraSolution out;
    out.focal = fit.focal;
    out.shift_z = t;
    out.iterations = iter;
    out.final_residual = fit.cost / double(s.size());
    if (!converged) throw ConvergenceError("camera recovery: no convergence within the iteration budget", out);
    if (!(out.focal > 0.0)) fail(ErrorCode::numerical_failure, "camera recovery: recovered focal is not positive");
    return out;
}

/// Downsamples to at most `size x size` (nearest neighbour) and recovers the
/// camera; the focal is expressed in pixels of the full-resolution image.
inline CameraSolution recover_camera(const PointMap& pm, std::size_t target_h = kDefaultWorkingSize,
                                     std::size_t target_w = kDefaultWorkingSize, const CameraOptions& opt = {}) {
    const std::size_t h = std::min(target_h, pm.height());
    const std::size_t w = std::min(target_w, pm.width());
    return recover_focal_shift(downsample_pointmap(pm, h, w), ImageGrid::resampled(pm.height(), pm.width(), h, w), opt);
}

inline FovDegrees fov_from_focal(double focal, const ImageGrid& grid) {
    require(focal > 0.0, "fov: focal must be positive");
    const double deg = 180.0 / std::numbers::pi;
    return {2.0 * std::atan(double(grid.height()) / (2.0 * focal)) * deg,
            2.0 * std::atan(double(grid.width()) / (2.0 * focal)) * deg};
}

struct PixelCoord {
    double u = 0.0;
    double v = 0.0;
};

inline std::vector<PixelCoord> project(std::span<const Vec3> points, double focal) {
    std::vector<PixelCoord> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3& p = points[i];
        if (!(p.z() > 0.0)) fail(ErrorCode::invalid_input, "project: point " + std::to_string(i) + " has z <= 0");
        out[i] = {focal * p.x() / p.z(), focal * p.y() / p.z()};
    }
    return out;
}

/// p_i = (u_i z_i / f, v_i z_i / f, z_i); validity follows the depth map.
inline PointMap unproject(const DepthMap& dm, double focal, const ImageGrid& grid) {
    require(focal > 0.0, "unproject: focal must be positive");
    require(grid.rows() == dm.height() && grid.cols() == dm.width(), "unproject: grid does not match the depth map");
    std::vector<Vec3> pts(dm.size(), Vec3::Zero());
    for (std::size_t i = 0; i < dm.size(); ++i) {
        const double z = dm[i];
        pts[i] = Vec3(grid.u(i) * z / focal, grid.v(i) * z / focal, z);
    }
    return PointMap(dm.height(), dm.width(), std::move(pts), dm.mask());
}

}  // namespace pmgeo
