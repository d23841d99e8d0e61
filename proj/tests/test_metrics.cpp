#include <gtest/gtest.h>

#include <cmath>

#include "pmgeo/metrics.hpp"
#include "pmgeo/testkit/scene.hpp"

namespace pmgeo {
namespace {

using testkit::make_scene;
using testkit::SceneFamily;
using testkit::SceneParams;

PointMap transformed(const PointMap& pm, double s, const Vec3& t) {
    PointMap out = pm;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * pm[i] + t;
    return out;
}

// Dyadic coordinates keep every difference and power-of-two scaling exact.
PointMap dyadic_cloud(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    PointMap pm(n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            pm.at(r, c) = Vec3((double(c) - double(n) / 2) / 8.0, (double(r) - double(n) / 2) / 8.0,
                               2.0 + double(r + c) / 16.0);
        }
    return pm;
}

PointMap dyadic_noise(const PointMap& pm, std::uint64_t seed) {
    Rng rng(seed);
    PointMap out = pm;
    for (std::size_t i = 0; i < out.size(); ++i)
        for (int k = 0; k < 3; ++k) out[i][k] += double(int(rng.index(17)) - 8) / 64.0;
    return out;
}

TEST(PointMetrics, ExactScaleModel) {
    const auto sc = make_scene(SceneFamily::two_plane, SceneParams{.height = 16, .width = 16}, 1);
    const auto m = eval_point_scale(transformed(sc.pointmap, 7.0, Vec3::Zero()), sc.pointmap);
    EXPECT_NEAR(m.rel, 0.0, 1e-12);
    EXPECT_EQ(m.delta1, 100.0);
    EXPECT_EQ(m.pixels, sc.pointmap.valid_count());
    EXPECT_EQ(m.representation, Representation::point_scale);
}

TEST(PointMetrics, ExactAffineModel) {
    const auto sc = make_scene(SceneFamily::sphere_patch, SceneParams{.height = 16, .width = 16}, 2);
    const auto m = eval_point_affine(transformed(sc.pointmap, 2.0, Vec3(1, 1, 1)), sc.pointmap);
    EXPECT_NEAR(m.rel, 0.0, 1e-12);
    EXPECT_EQ(m.delta1, 100.0);
}

TEST(PointMetrics, AffineInvarianceIsBitwise) {
    const PointMap gt = dyadic_cloud(12, 0);
    const PointMap pred = dyadic_noise(transformed(gt, 0.5, Vec3(0.25, -0.5, 1.0)), 3);
    const auto base = eval_point_affine(pred, gt);
    EXPECT_GT(base.rel, 0.0);
    for (double s : {0.25, 2.0, 16.0})
        for (const Vec3& t : {Vec3(0, 0, 0), Vec3(0.5, -1.0, 3.0), Vec3(-2.0, 0.125, -0.75)}) {
            const auto m = eval_point_affine(transformed(pred, s, t), gt);
            EXPECT_EQ(m.rel, base.rel) << s;
            EXPECT_EQ(m.delta1, base.delta1);
        }
}

TEST(PointMetrics, AffineInvarianceGeneralTransform) {
    const auto sc = make_scene(SceneFamily::two_plane, SceneParams{.height = 12, .width = 12}, 4);
    Rng rng(1);
    PointMap pred = sc.pointmap;
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] *= rng.uniform(0.9, 1.1);
    const auto base = eval_point_affine(pred, sc.pointmap);
    const auto m = eval_point_affine(transformed(pred, 3.7, Vec3(0.3, -1.1, 2.9)), sc.pointmap);
    EXPECT_NEAR(m.rel, base.rel, 1e-10 * base.rel);
    EXPECT_EQ(m.delta1, base.delta1);
}

TEST(PointMetrics, InlierThresholdIsStrict) {
    PointMap gt(1, 9), pred(1, 9);
    for (std::size_t i = 0; i < 9; ++i) gt[i] = pred[i] = Vec3(0.0, 0.0, 4.0 + double(i));
    pred[4] = Vec3(0.0, 0.0, 10.0);  // err 2, min(8, 10) = 8 -> ratio 0.25 exactly
    for (auto eval : {&eval_point_scale, &eval_point_affine}) {
        const auto m = eval(pred, gt, EvalOptions{});
        EXPECT_EQ(m.alignment.scale, 1.0);
        EXPECT_DOUBLE_EQ(m.delta1, 100.0 * 8.0 / 9.0);
    }
    pred[4] = Vec3(0.0, 0.0, std::nextafter(10.0, 0.0));
    EXPECT_EQ(eval_point_scale(pred, gt).delta1, 100.0);
}

TEST(PointMetrics, DeltaMonotoneInThreshold) {
    const auto sc = make_scene(SceneFamily::two_plane, SceneParams{.height = 16, .width = 16}, 5);
    Rng rng(3);
    PointMap pred = sc.pointmap;
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] *= rng.uniform(0.6, 1.4);
    double prev = -1.0;
    for (double th : {0.1, 0.25, 0.5}) {
        EvalOptions opt;
        opt.point_threshold = th;
        const double d = eval_point_affine(pred, sc.pointmap, opt).delta1;
        EXPECT_GE(d, prev);
        prev = d;
    }
}

TEST(PointMetrics, ValidityIntersection) {
    const auto sc = make_scene(SceneFamily::plane, SceneParams{.height = 8, .width = 8}, 6);
    PointMap pred = sc.pointmap;
    pred.set_valid(3, false);
    pred[3] = Vec3(1e9, 1e9, 1e9);
    const auto m = eval_point_affine(pred, sc.pointmap);
    EXPECT_EQ(m.pixels, sc.pointmap.valid_count() - 1);
    EXPECT_NEAR(m.rel, 0.0, 1e-12);
}

TEST(LocalMetrics, IndependentAffinePerRegion) {
    const auto sc = make_scene(SceneFamily::two_plane, SceneParams{.height = 16, .width = 16}, 7);
    PointMap pred = sc.pointmap;
    std::vector<std::vector<std::size_t>> regions(2);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        regions[sc.label[i]].push_back(i);
        pred[i] = sc.label[i] ? Vec3(3.0 * pred[i] + Vec3(1, 2, 3)) : Vec3(0.5 * pred[i] - Vec3(0.1, 0.0, 2.0));
    }
    const auto m = eval_point_local(pred, sc.pointmap, regions);
    EXPECT_NEAR(m.rel, 0.0, 1e-12);
    EXPECT_EQ(m.delta1, 100.0);
    EXPECT_GT(eval_point_affine(pred, sc.pointmap).rel, 1.0);
}

TEST(LocalMetrics, WholeImageRegionMatchesAffine) {
    const auto sc = make_scene(SceneFamily::sphere_patch, SceneParams{.height = 16, .width = 16}, 8);
    Rng rng(4);
    PointMap pred = sc.pointmap;
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] *= rng.uniform(0.8, 1.2);
    std::vector<std::vector<std::size_t>> regions(2);
    for (std::size_t i = 0; i < pred.size(); ++i) regions[0].push_back(i);
    const auto local = eval_point_local(pred, sc.pointmap, regions);
    const auto global = eval_point_affine(pred, sc.pointmap);
    EXPECT_EQ(local.rel, global.rel);
    EXPECT_EQ(local.delta1, global.delta1);
    EXPECT_EQ(local.skipped_regions, 1u);
}

TEST(DepthMetrics, ScaleModel) {
    const auto sc = make_scene(SceneFamily::two_plane, SceneParams{.height = 16, .width = 16}, 9);
    DepthMap pred = sc.depth;
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] *= 3.0;
    const auto m = eval_depth(pred, sc.depth, DepthMode::scale);
    EXPECT_NEAR(m.rel, 0.0, 1e-12);
    EXPECT_EQ(m.delta1, 100.0);
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = 0.5 * sc.depth[i] - 1.0;
    const auto a = eval_depth(pred, sc.depth, DepthMode::affine);
    EXPECT_NEAR(a.rel, 0.0, 1e-12);
    EXPECT_EQ(a.delta1, 100.0);
}

TEST(DepthMetrics, InlierThresholdIsStrictAndNegativeDepthFails) {
    std::vector<double> z{4, 4, 4, 4, 4}, zh{4, 4, 4, 5, 4};
    const DepthMap gt(1, 5, z, Mask(5, 1));
    const auto m = eval_depth(DepthMap(1, 5, zh, Mask(5, 1)), gt, DepthMode::scale);
    EXPECT_DOUBLE_EQ(m.delta1, 80.0);  // 5/4 = 1.25 is not an inlier
    EXPECT_DOUBLE_EQ(m.rel, 100.0 * 0.25 / 5.0);
    zh[3] = -4.0;
    const auto n = eval_depth(DepthMap(1, 5, zh, Mask(5, 1)), gt, DepthMode::scale);
    EXPECT_DOUBLE_EQ(n.delta1, 80.0);
    EXPECT_DOUBLE_EQ(n.rel, 100.0 * 2.0 / 5.0);
}

DisparityMap disparity_of(const DepthMap& dm, double a, double b) {
    DisparityMap d(dm.height(), dm.width(), std::vector<double>(dm.size(), 0.0), dm.mask());
    for (std::size_t i = 0; i < dm.size(); ++i)
        if (dm.valid(i)) d[i] = a / dm[i] + b;
    return d;
}

TEST(DisparityMetrics, RecoversPlantedAffine) {
    const auto sc = make_scene(SceneFamily::two_plane, SceneParams{.height = 16, .width = 16}, 10);
    const auto id = eval_disparity_affine(disparity_of(sc.depth, 1.0, 0.0), sc.depth);
    EXPECT_NEAR(id.fit.a, 1.0, 1e-12);
    EXPECT_NEAR(id.fit.b, 0.0, 1e-12);
    EXPECT_NEAR(id.metrics.rel, 0.0, 1e-10);
    const auto r = eval_disparity_affine(disparity_of(sc.depth, 0.5, 0.2), sc.depth);
    EXPECT_NEAR(r.fit.a, 2.0, 1e-12);
    EXPECT_NEAR(r.fit.b, -0.4, 1e-12);
    EXPECT_NEAR(r.metrics.rel, 0.0, 1e-10);
    EXPECT_EQ(r.metrics.delta1, 100.0);
}

TEST(DisparityMetrics, ClampsOutOfRangeDisparity) {
    // 40 exact pixels plus one whose aligned disparity goes negative
    const std::size_t n = 41;
    std::vector<double> z, d;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        z.push_back(1.0 + double(i) / 5.0);
        d.push_back(1.0 / z.back());
    }
    z.push_back(2.0);
    d.push_back(-1.0);
    const DepthMap gt(1, n, z, Mask(n, 1));
    const auto r = eval_disparity_affine(DisparityMap(1, n, d, Mask(n, 1)), gt, 10.0);
    ASSERT_LT(r.fit.a * d.back() + r.fit.b, 0.0);
    EXPECT_EQ(r.fit.z_max, 10.0);
    // hand evaluation: the clamped pixel has z* = z_max = 10 against z = 2
    double rel = 0.0;
    std::size_t inliers = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double zs = std::min(1.0 / std::max(r.fit.a * d[i] + r.fit.b, 0.1), 10.0);
        EXPECT_LE(zs, 10.0);
        if (i + 1 == n) EXPECT_EQ(zs, 10.0);
        rel += std::abs(zs - z[i]) / z[i];
        inliers += std::max(zs / z[i], z[i] / zs) < 1.25;
    }
    EXPECT_DOUBLE_EQ(r.metrics.rel, 100.0 * rel / double(n));
    EXPECT_DOUBLE_EQ(r.metrics.delta1, 100.0 * double(inliers) / double(n));
    EXPECT_LT(r.metrics.delta1, 100.0);
}

TEST(DisparityMetrics, ConstantPredictionIsSingular) {
    const DepthMap gt(1, 3, {1, 2, 3}, Mask(3, 1));
    const DisparityMap d(1, 3, {0.5, 0.5, 0.5}, Mask(3, 1));
    try {
        eval_disparity_affine(d, gt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::numerical_failure);
    }
}

TEST(FovMetrics, Examples) {
    const std::vector<double> a{30, 40, 50};
    auto r = eval_fov(a, a);
    EXPECT_EQ(r.mean, 0.0);
    EXPECT_EQ(r.median, 0.0);
    r = eval_fov(std::vector<double>{31, 37}, std::vector<double>{30, 40});
    EXPECT_EQ(r.mean, 2.0);
    EXPECT_EQ(r.median, 2.0);
    r = eval_fov(std::vector<double>{50, 51, 60}, std::vector<double>{50, 50, 50});
    EXPECT_NEAR(r.mean, 11.0 / 3.0, 1e-12);
    EXPECT_EQ(r.median, 1.0);
    EXPECT_THROW(eval_fov(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST(MacroAverage, UnweightedAcrossReports) {
    MetricReport a, b;
    a.rel = 2.0;
    a.delta1 = 90.0;
    a.pixels = 10;
    b.rel = 4.0;
    b.delta1 = 70.0;
    b.pixels = 1000;
    const std::vector<MetricReport> rs{a, b};
    const auto m = macro_average(rs);
    EXPECT_EQ(m.rel, 3.0);
    EXPECT_EQ(m.delta1, 80.0);
    EXPECT_EQ(m.pixels, 1010u);
}

TEST(Representation, ParseRoundTrip) {
    for (auto r : {Representation::point_scale, Representation::point_affine, Representation::point_local,
                   Representation::depth_scale, Representation::depth_affine, Representation::disparity_affine})
        EXPECT_EQ(parse_representation(to_string(r)), r);
    EXPECT_THROW(parse_representation("points"), Error);
}

}  // namespace
}  // namespace pmgeo
