#include <gtest/gtest.h>

#include <cstring>

#include "pmgeo/types.hpp"
#include "pmgeo/stats.hpp"

namespace pmgeo {
namespace {

PointMap constant_map(std::size_t h, std::size_t w, double z) {
    return PointMap(h, w, std::vector<Vec3>(h * w, Vec3(0.5, -0.5, z)), Mask(h * w, 1));
}

TEST(PointmapToDepth, IdentityAndOffset) {
    const auto pm = constant_map(3, 3, 3.0);
    const auto d0 = pointmap_to_depth(pm, 0.0);
    const auto d2 = pointmap_to_depth(pm, 2.0);
    for (std::size_t i = 0; i < pm.size(); ++i) {
        EXPECT_EQ(d0[i], 3.0);
        EXPECT_EQ(d2[i], 5.0);
        EXPECT_TRUE(d2.valid(i));
    }
}

TEST(PointmapToDepth, InvalidatesNonPositiveDepth) {
    auto pm = constant_map(2, 2, 1.0);
    pm[3].z() = -2.0;
    const auto d = pointmap_to_depth(pm, 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_TRUE(d.valid(i));
        EXPECT_EQ(d[i], 2.0);
    }
    EXPECT_FALSE(d.valid(3));
}

TEST(PointmapToDepth, ShiftsCompose) {
    auto pm = constant_map(2, 3, 1.0);
    for (std::size_t i = 0; i < pm.size(); ++i) pm[i].z() = 0.25 * double(i) - 0.5;
    const auto a = pointmap_to_depth(pm, 0.5);
    const auto ab = pointmap_to_depth(pm, 0.75);
    for (std::size_t i = 0; i < pm.size(); ++i)
        if (a.valid(i) && ab.valid(i)) EXPECT_EQ(a[i] + 0.25, ab[i]);
}

TEST(DepthToDisparity, Reciprocal) {
    DepthMap dm(1, 2, {1.0, 4.0}, {1, 1});
    const auto d = depth_to_disparity(dm);
    EXPECT_EQ(d[0], 1.0);
    EXPECT_EQ(d[1], 0.25);
    DepthMap two(2, 2, std::vector<double>(4, 2.0), Mask(4, 1));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(depth_to_disparity(two)[i], 0.5);
}

TEST(DepthToDisparity, RejectsNonPositiveValidDepth) {
    DepthMap dm(1, 2, {1.0, 0.0}, {1, 1});
    EXPECT_THROW(depth_to_disparity(dm), Error);
    dm.set_valid(1, false);
    EXPECT_NO_THROW(depth_to_disparity(dm));
}

TEST(DepthToDisparity, RoundTrip) {
    std::vector<double> z{0.5, 1.0, 2.0, 3.0, 7.0, 1e-3};
    DepthMap dm(2, 3, z, Mask(6, 1));
    const auto d = depth_to_disparity(dm);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double back = 1.0 / d[i];
        EXPECT_LE(std::abs(back - z[i]), std::abs(std::nextafter(z[i], 1e300) - z[i]));
    }
    EXPECT_EQ(1.0 / d[0], 0.5);
    EXPECT_EQ(1.0 / d[2], 2.0);
}

TEST(Downsample, IdentityIsBitwise) {
    PointMap pm(64, 64);
    for (std::size_t i = 0; i < pm.size(); ++i) pm[i] = Vec3(double(i) * 0.1, -double(i), 1.0 / (1.0 + double(i)));
    pm.set_valid(17, false);
    const auto out = downsample_pointmap(pm, 64, 64);
    ASSERT_EQ(out.size(), pm.size());
    EXPECT_EQ(std::memcmp(out.points().data(), pm.points().data(), pm.size() * sizeof(Vec3)), 0);
    EXPECT_EQ(out.mask(), pm.mask());
}

TEST(Downsample, ConstantField) {
    const auto out = downsample_pointmap(constant_map(128, 128, 2.0), 64, 64);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], Vec3(0.5, -0.5, 2.0));
}

TEST(Downsample, CheckerboardValidityFollowsSampledPixel) {
    PointMap pm(4, 4);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) pm.set_valid(r * 4 + c, (r + c) % 2 == 0);
    // target i samples source (2i+1)*4/4 = 1 or 3
    const auto out = downsample_pointmap(pm, 2, 2);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 2; ++c) {
            const std::size_t sr = 2 * r + 1, sc = 2 * c + 1;
            EXPECT_EQ(out.valid(r * 2 + c), pm.valid(sr * 4 + sc));
        }
}

TEST(Downsample, RejectsBadTargets) {
    const auto pm = constant_map(4, 4, 1.0);
    EXPECT_THROW(downsample_pointmap(pm, 0, 2), Error);
    EXPECT_THROW(downsample_pointmap(pm, 8, 2), Error);
}

TEST(ImageGrid, CenteredCoordinates) {
    const auto g = ImageGrid::centered(4, 6);
    EXPECT_EQ(g.u(0), -2.5);
    EXPECT_EQ(g.v(0), -1.5);
    EXPECT_EQ(g.u(5), 2.5);
    EXPECT_EQ(g.v(23), 1.5);
    const auto odd = ImageGrid::centered(3, 3);
    EXPECT_EQ(odd.u(4), 0.0);
    EXPECT_EQ(odd.v(4), 0.0);
}

TEST(ImageGrid, ResampledKeepsSourceCoordinates) {
    const auto g = ImageGrid::resampled(128, 128, 64, 64);
    EXPECT_EQ(g.height(), 128u);
    EXPECT_EQ(g.rows(), 64u);
    // target 0 samples source 1
    EXPECT_EQ(g.u(0), 1.5 - 64.0);
}

TEST(SimilarityAlign, Admissibility) {
    SimilarityAlign a;
    EXPECT_TRUE(a.admissible());
    a.shift.x() = 1.0;
    EXPECT_FALSE(a.admissible());
    a.shift_mode = ShiftMode::three_dimensional;
    EXPECT_TRUE(a.admissible());
    a.scale = 0.0;
    EXPECT_FALSE(a.admissible());
}

TEST(Stats, Median) {
    EXPECT_EQ(median({3.0}), 3.0);
    EXPECT_EQ(median({1.0, 3.0}), 2.0);
    EXPECT_EQ(median({10.0, 0.0, 1.0}), 1.0);
    EXPECT_THROW(median({}), Error);
}

}  // namespace
}  // namespace pmgeo
