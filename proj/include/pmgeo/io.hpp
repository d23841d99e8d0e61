#pragma once

// PMAP grid files and ASCII PLY export.
//
// PMAP layout (all integers and floats little-endian):
//   bytes 0-4   'P' 'M' 'A' 'P' 0x01
//   u32         height
//   u32         width
//   u32         channels (3 = points, 1 = scalar)
//   u8          flags (bit 0: validity mask follows the payload)
//   f32[H*W*C]  row-major payload, channel-minor
//   u8[H*W]     mask, 0 or 1 (only when flag bit 0 is set)

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pmgeo/error.hpp"
#include "pmgeo/types.hpp"

namespace pmgeo {

inline constexpr std::array<std::uint8_t, 4> kPmapTag{'P', 'M', 'A', 'P'};
inline constexpr std::uint8_t kPmapVersion = 0x01;
inline constexpr std::uint8_t kPmapHasMask = 0x01;
inline constexpr std::size_t kPmapHeaderSize = 5 + 3 * 4 + 1;

struct PmapFile {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t channels = 0;
    std::vector<float> payload;
    std::optional<Mask> mask;

    std::size_t pixels() const { return std::size_t(height) * width; }
    bool valid(std::size_t i) const { return !mask || (*mask)[i] != 0; }
};

namespace io_detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(std::uint8_t(v >> (8 * k)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

inline std::vector<std::uint8_t> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_failure, "cannot open '" + path + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_all(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_failure, "cannot open '" + path + "' for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) fail(ErrorCode::io_failure, "write to '" + path + "' failed");
}

}  // namespace io_detail

inline std::vector<std::uint8_t> encode_pmap(const PmapFile& f) {
    require(f.channels == 1 || f.channels == 3, "pmap: channels must be 1 or 3");
    require(f.payload.size() == f.pixels() * f.channels, "pmap: payload size does not match the header");
    require(!f.mask || f.mask->size() == f.pixels(), "pmap: mask size does not match the header");
    std::vector<std::uint8_t> out(kPmapTag.begin(), kPmapTag.end());
    out.push_back(kPmapVersion);
    io_detail::put_u32(out, f.height);
    io_detail::put_u32(out, f.width);
    io_detail::put_u32(out, f.channels);
    out.push_back(f.mask ? kPmapHasMask : 0);
    out.reserve(out.size() + 4 * f.payload.size() + (f.mask ? f.pixels() : 0));
    for (float v : f.payload) io_detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
    if (f.mask)
        for (auto m : *f.mask) out.push_back(m ? 1 : 0);
    return out;
}

inline PmapFile decode_pmap(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || !std::equal(kPmapTag.begin(), kPmapTag.end(), bytes.begin()))
        fail(ErrorCode::bad_magic, "pmap: bad magic");
    if (bytes.size() < 5) fail(ErrorCode::truncated_payload, "pmap: truncated header");
    if (bytes[4] != kPmapVersion)
        fail(ErrorCode::unsupported_version, "pmap: unsupported version " + std::to_string(int(bytes[4])));
    if (bytes.size() < kPmapHeaderSize) fail(ErrorCode::truncated_payload, "pmap: truncated header");

    PmapFile f;
    f.height = io_detail::get_u32(&bytes[5]);
    f.width = io_detail::get_u32(&bytes[9]);
    f.channels = io_detail::get_u32(&bytes[13]);
    const std::uint8_t flags = bytes[17];
    require(f.channels == 1 || f.channels == 3, "pmap: channels must be 1 or 3");
    require((flags & ~kPmapHasMask) == 0, "pmap: unknown flag bits");

    const std::size_t n = f.pixels();
    // also keeps the size arithmetic below from overflowing
    if (n > bytes.size()) fail(ErrorCode::truncated_payload, "pmap: truncated payload");
    const std::size_t values = n * f.channels;
    const std::size_t expect = kPmapHeaderSize + 4 * values + ((flags & kPmapHasMask) ? n : 0);
    if (bytes.size() < expect) fail(ErrorCode::truncated_payload, "pmap: truncated payload");
    require(bytes.size() == expect, "pmap: trailing bytes after the payload");

    const std::uint8_t* p = bytes.data() + kPmapHeaderSize;
    f.payload.resize(values);
    for (std::size_t i = 0; i < values; ++i) f.payload[i] = std::bit_cast<float>(io_detail::get_u32(p + 4 * i));
    if (flags & kPmapHasMask) {
        const std::uint8_t* m = p + 4 * values;
        f.mask.emplace(m, m + n);
        for (auto v : *f.mask) require(v <= 1, "pmap: mask bytes must be 0 or 1");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!f.valid(i)) continue;
        for (std::size_t c = 0; c < f.channels; ++c)
            if (!std::isfinite(f.payload[i * f.channels + c]))
                fail(ErrorCode::nan_in_valid, "pmap: non-finite value at valid pixel " + std::to_string(i));
    }
    return f;
}

inline PmapFile read_pmap(const std::string& path) { return decode_pmap(io_detail::read_all(path)); }

inline void write_pmap(const std::string& path, const PmapFile& f) {
    const auto bytes = encode_pmap(f);
    io_detail::write_all(path, std::string(bytes.begin(), bytes.end()));
}

/// Points from a 3-channel file; all pixels valid when the file has no mask.
inline PointMap to_pointmap(const PmapFile& f) {
    require(f.channels == 3, "pmap: expected a 3-channel point map");
    std::vector<Vec3> pts(f.pixels());
    for (std::size_t i = 0; i < pts.size(); ++i)
        pts[i] = Vec3(f.payload[3 * i], f.payload[3 * i + 1], f.payload[3 * i + 2]);
    return PointMap(f.height, f.width, std::move(pts), f.mask ? *f.mask : Mask(f.pixels(), 1));
}

/// Per-pixel scalars: the single channel, or z of a point map.
inline std::vector<double> scalar_channel(const PmapFile& f) {
    std::vector<double> v(f.pixels());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f.payload[i * f.channels + (f.channels - 1)];
    return v;
}

template <class Tag>
ScalarMap<Tag> to_scalar_map(const PmapFile& f) {
    return ScalarMap<Tag>(f.height, f.width, scalar_channel(f), f.mask ? *f.mask : Mask(f.pixels(), 1));
}

inline DepthMap to_depth(const PmapFile& f) { return to_scalar_map<DepthTag>(f); }
inline DisparityMap to_disparity(const PmapFile& f) { return to_scalar_map<DisparityTag>(f); }

namespace io_detail {

inline std::uint32_t dim(std::size_t v) {
    require(v <= std::numeric_limits<std::uint32_t>::max(), "pmap: dimension too large");
    return std::uint32_t(v);
}

}  // namespace io_detail

/// Rounds to float32; invalid pixels are written as zero.
inline PmapFile from_pointmap(const PointMap& pm) {
    PmapFile f;
    f.height = io_detail::dim(pm.height());
    f.width = io_detail::dim(pm.width());
    f.channels = 3;
    f.payload.assign(3 * pm.size(), 0.0f);
    for (std::size_t i = 0; i < pm.size(); ++i)
        if (pm.valid(i))
            for (int c = 0; c < 3; ++c) f.payload[3 * i + c] = float(pm[i][c]);
    f.mask = pm.mask();
    return f;
}

template <class Tag>
PmapFile from_scalar_map(const ScalarMap<Tag>& m) {
    PmapFile f;
    f.height = io_detail::dim(m.height());
    f.width = io_detail::dim(m.width());
    f.channels = 1;
    f.payload.assign(m.size(), 0.0f);
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m.valid(i)) f.payload[i] = float(m[i]);
    f.mask = m.mask();
    return f;
}

/// Single-channel file without a mask, e.g. mask probabilities.
inline PmapFile from_values(std::size_t height, std::size_t width, const std::vector<double>& values) {
    require(values.size() == height * width, "pmap: value count does not match the dimensions");
    PmapFile f;
    f.height = io_detail::dim(height);
    f.width = io_detail::dim(width);
    f.channels = 1;
    f.payload.assign(values.begin(), values.end());
    return f;
}

/// ASCII PLY with one vertex per valid pixel, in pixel order.
inline void write_ply(std::ostream& out, const PointMap& pm) {
    out << "ply\nformat ascii 1.0\nelement vertex " << pm.valid_count()
        << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    out.precision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < pm.size(); ++i)
        if (pm.valid(i)) out << pm[i].x() << ' ' << pm[i].y() << ' ' << pm[i].z() << '\n';
}

inline void export_ply(const PointMap& pm, const std::string& path) {
    std::ostringstream s;
    write_ply(s, pm);
    io_detail::write_all(path, s.str());
}

}  // namespace pmgeo
