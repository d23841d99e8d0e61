#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "pmgeo/losses.hpp"
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

TEST(GlobalLoss, ZeroOnExactAffine) {
    const auto sc = make_scene(SceneFamily::two_plane, SceneParams{.height = 32, .width = 32}, 3);
    const PointMap& gt = sc.pointmap;
    const PointMap pred = transformed(gt, 0.5, Vec3(0.0, 0.0, -0.75));
    EXPECT_NEAR(global_loss(pred, gt, Truncation::at(1.0), 0.05), 0.0, 1e-12);
    EXPECT_NEAR(global_loss(pred, gt, Truncation::none(), 0.0), 0.0, 1e-12);
}

TEST(GlobalLoss, TrimmingDropsCorruptedPixel) {
    const auto sc = make_scene(SceneFamily::plane, SceneParams{.height = 10, .width = 10}, 1);
    const PointMap& gt = sc.pointmap;
    PointMap pred = gt;
    pred[37].z() *= 2.0;
    const auto untrimmed = global_loss_detail(pred, gt, Truncation::at(1.0), 0.0);
    const auto trimmed = global_loss_detail(pred, gt, Truncation::at(1.0), 0.05);
    EXPECT_EQ(untrimmed.alignment.align.scale, 1.0);
    EXPECT_GT(untrimmed.value, 0.0);
    EXPECT_EQ(trimmed.value, 0.0);
    EXPECT_EQ(trimmed.pixels, 100u);
    EXPECT_EQ(trimmed.kept, 95u);
}

TEST(GlobalLoss, TrimmingIsMonotone) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto sc = make_scene(SceneFamily::sphere_patch, SceneParams{.height = 24, .width = 24}, seed);
        Rng rng(seed + 100);
        PointMap pred = sc.pointmap;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            pred[i] *= rng.uniform(0.9, 1.1);
            if (rng.uniform() < 0.05) pred[i].z() *= 3.0;
        }
        double prev = std::numeric_limits<double>::infinity();
        for (double trim : {0.0, 0.05, 0.2}) {
            const double l = global_loss(pred, sc.pointmap, Truncation::at(1.0), trim);
            EXPECT_LE(l, prev) << "seed " << seed << " trim " << trim;
            prev = l;
        }
    }
}

TEST(GlobalLoss, WorkingLatticeBoundsAlignmentSize) {
    const auto sc = make_scene(SceneFamily::plane, SceneParams{.height = 96, .width = 80}, 2);
    const PointMap pred = transformed(sc.pointmap, 2.0, Vec3(0.0, 0.0, 0.5));
    const auto r = global_loss_detail(pred, sc.pointmap, Truncation::at(1.0), 0.05, 16);
    EXPECT_NEAR(r.value, 0.0, 1e-12);
    EXPECT_EQ(r.pixels, sc.pointmap.valid_count());
    EXPECT_LT(r.alignment.anchor_index, sc.pointmap.size());
}

TEST(GlobalLoss, RejectsBadTrim) {
    const auto sc = make_scene(SceneFamily::plane, SceneParams{.height = 8, .width = 8}, 0);
    EXPECT_THROW(global_loss(sc.pointmap, sc.pointmap, Truncation::at(1.0), 0.6), Error);
    EXPECT_THROW(global_loss(sc.pointmap, sc.pointmap, Truncation::at(1.0), -0.1), Error);
}

TEST(Sphere, RadiusExample) {
    EXPECT_NEAR(sphere_radius(0.25, 2.0, 512, 512, 512.0), 0.353553, 1e-6);
}

TEST(Sphere, MembersAreValidAndWithinRadius) {
    auto sc = make_scene(SceneFamily::sphere_patch, SceneParams{.height = 32, .width = 32}, 4);
    PointMap gt = sc.pointmap;
    std::size_t anchor = 0;
    while (!gt.valid(anchor)) ++anchor;
    for (double alpha : kDefaultScales) {
        const auto s = select_sphere(gt, anchor, alpha, sc.focal);
        ASSERT_FALSE(s.members.empty());
        for (std::size_t i : s.members) {
            EXPECT_TRUE(gt.valid(i));
            EXPECT_LE((gt[i] - gt[anchor]).norm(), s.radius);
        }
        EXPECT_TRUE(std::set<std::size_t>(s.members.begin(), s.members.end()).count(anchor));
    }
    EXPECT_THROW(select_sphere(gt, anchor, 1.5, sc.focal), Error);
}

TEST(LocalLoss, ZeroOnPerObjectAffineWhileGlobalIsNot) {
    const auto sc = make_scene(SceneFamily::two_cluster, SceneParams{.height = 64, .width = 64}, 7);
    const PointMap& gt = sc.pointmap;
    PointMap pred = gt;
    for (std::size_t i = 0; i < pred.size(); ++i)
        pred[i] = sc.label[i] == 0 ? (gt[i] - Vec3(0.1, -0.2, 0.3)) / 0.5 : (gt[i] - Vec3(-1.0, 0.4, 2.0)) / 3.0;
    const auto local = multiscale_local_loss(pred, gt, sc.focal, kDefaultScales, 8, Truncation::at(1.0), 42);
    ASSERT_EQ(local.scales.size(), 3u);
    for (const auto& s : local.scales) {
        EXPECT_GT(s.spheres, 0u);
        EXPECT_NEAR(s.value, 0.0, 1e-12) << "alpha " << s.alpha;
    }
    EXPECT_EQ(local.skipped_spheres, 0u);
    EXPECT_GT(global_loss(pred, gt, Truncation::at(1.0), 0.05), 1e-3);
}

TEST(LocalLoss, DeterministicForSeed) {
    const auto sc = make_scene(SceneFamily::two_plane, SceneParams{.height = 32, .width = 32}, 5);
    Rng rng(9);
    PointMap pred = sc.pointmap;
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] *= rng.uniform(0.8, 1.2);
    const auto a = multiscale_local_loss(pred, sc.pointmap, sc.focal, kDefaultScales, 4, Truncation::at(1.0), 11);
    const auto b = multiscale_local_loss(pred, sc.pointmap, sc.focal, kDefaultScales, 4, Truncation::at(1.0), 11,
                                         kDefaultWorkingSize, Execution{3});
    ASSERT_EQ(a.scales.size(), b.scales.size());
    for (std::size_t k = 0; k < a.scales.size(); ++k) {
        EXPECT_EQ(a.scales[k].value, b.scales[k].value);
        EXPECT_EQ(a.scales[k].members, b.scales[k].members);
    }
    EXPECT_GT(a.scales[0].value, 0.0);
}

TEST(LocalLoss, SamplingWithoutReplacement) {
    Rng rng(1);
    std::vector<std::size_t> pool(50);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i * 3;
    const auto s = sample_without_replacement(pool, 20, rng);
    EXPECT_EQ(s.size(), 20u);
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 20u);
    EXPECT_EQ(sample_without_replacement(pool, 80, rng).size(), 50u);
}

TEST(NormalLoss, TiltedPlaneGivesQuarterPi) {
    const std::size_t H = 6, W = 7;
    PointMap pred(H, W);
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c) {
            const double x = 0.1 * double(c), y = 0.1 * double(r);
            pred.at(r, c) = Vec3(x, y, 5.0 + x);
        }
    const std::vector<Vec3> gt(H * W, Vec3(0.0, 0.0, -1.0));
    const auto l = normal_loss(pred, gt, Mask(H * W, 1));
    EXPECT_NEAR(l.value, std::numbers::pi / 4.0, 1e-9);
    EXPECT_EQ(l.pixels, (H - 1) * (W - 1));
    EXPECT_EQ(l.skipped, 0u);
}

TEST(NormalLoss, MatchesAnalyticNormalsOnScene) {
    const auto sc = make_scene(SceneFamily::plane, SceneParams{.height = 24, .width = 24}, 8);
    const auto l = normal_loss(sc.pointmap, sc.normals, sc.depth.mask());
    EXPECT_LT(l.value, 1e-6);
    EXPECT_GT(l.pixels, 0u);
}

TEST(NormalLoss, CountsDegeneratePixels) {
    PointMap pred(3, 3);  // all points at the origin
    const auto l = normal_loss(pred, std::vector<Vec3>(9, Vec3(0, 0, -1)), Mask(9, 1));
    EXPECT_EQ(l.pixels, 0u);
    EXPECT_EQ(l.skipped, 4u);
    EXPECT_EQ(l.value, 0.0);
}

TEST(MaskLoss, ConstantHalf) {
    const std::vector<double> m(16, 0.5);
    std::vector<std::uint8_t> inf(16, 0);
    for (std::size_t i = 0; i < 16; i += 3) inf[i] = 1;
    EXPECT_DOUBLE_EQ(mask_loss(m, inf), 0.25);
}

TEST(MaskLoss, PerfectPrediction) {
    const std::vector<double> m{1.0, 0.0, 1.0};
    const std::vector<std::uint8_t> inf{0, 1, 0};
    EXPECT_EQ(mask_loss(m, inf), 0.0);
    EXPECT_THROW(mask_loss(std::vector<double>{1.5}, std::vector<std::uint8_t>{0}), Error);
}

TEST(MaskLoss, Binarize) {
    const std::vector<double> m{0.0, 0.5, 0.5000001, 1.0};
    EXPECT_EQ(binarize_mask(m), (Mask{0, 0, 1, 1}));
}

TEST(LossConfig, Presets) {
    const auto a = LossConfig::preset(LossPreset::A);
    EXPECT_EQ(a.scales.size(), 3u);
    EXPECT_TRUE(a.use_normal);
    EXPECT_TRUE(a.use_mask);
    const auto b = LossConfig::preset(LossPreset::B);
    EXPECT_EQ(b.scales.size(), 2u);
    EXPECT_FALSE(b.use_normal);
    EXPECT_EQ(LossConfig::preset(LossPreset::C).scales.size(), 1u);
    const auto d = LossConfig::preset(LossPreset::D);
    EXPECT_TRUE(d.scales.empty());
    EXPECT_TRUE(d.use_mask);
    EXPECT_EQ(parse_preset("c"), LossPreset::C);
    EXPECT_THROW(parse_preset("E"), Error);
}

TEST(LossBreakdown, TotalIsWeightedSum) {
    const auto sc = make_scene(SceneFamily::two_plane, SceneParams{.height = 24, .width = 24}, 6);
    Rng rng(2);
    PointMap pred = sc.pointmap;
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] *= rng.uniform(0.9, 1.1);
    std::vector<double> m(pred.size(), 0.75);
    const Mask inf(pred.size(), 0);
    LossInputs in{&pred, &sc.pointmap, sc.focal, &sc.normals, &sc.depth.mask(), &m, &inf};
    LossConfig cfg = LossConfig::preset(LossPreset::A);
    cfg.weights.local = 0.5;
    const auto out = compute_losses(in, cfg);
    ASSERT_TRUE(out.normal && out.mask);
    EXPECT_EQ(out.local.size(), 3u);
    double expect = out.global + *out.normal + *out.mask;
    for (const auto& s : out.local) expect += 0.5 * s.value;
    EXPECT_DOUBLE_EQ(out.total, expect);
    EXPECT_DOUBLE_EQ(*out.mask, 0.0625);

    const auto d = compute_losses(in, LossConfig::preset(LossPreset::D));
    EXPECT_TRUE(d.local.empty());
    EXPECT_FALSE(d.normal);
    EXPECT_DOUBLE_EQ(d.total, d.global + *d.mask);
}

}  // namespace
}  // namespace pmgeo
