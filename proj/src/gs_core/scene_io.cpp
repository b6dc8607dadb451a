// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/scene_io.hpp"

#include "fsplat/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace fsplat {

namespace le {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint8_t Reader::u8() { return bytes_[pos_++]; }

std::uint32_t Reader::u32() {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t(bytes_[pos_++]) << (8 * k);
    return v;
}

std::uint64_t Reader::u64() {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t(bytes_[pos_++]) << (8 * k);
    return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

}  // namespace le

namespace {

constexpr char kMagic[4] = {'F', 'S', 'P', 'L'};

template <typename M>
void put_block(std::vector<std::uint8_t>& out, const M& m) {
    for (Eigen::Index k = 0; k < m.size(); ++k) le::put_f64(out, m.data()[k]);
}

template <typename M>
void get_block(le::Reader& in, M& m) {
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = in.f64();
}

}  // namespace

std::vector<std::uint8_t> encode_scene(const GaussianScene& scene) {
    check(scene.consistent(), Errc::ShapeMismatch, "inconsistent scene");
    std::vector<std::uint8_t> out;
    const auto n = static_cast<std::size_t>(scene.size());
    out.reserve(kSceneHeaderBytes + n * 8 * (11 + scene.sh.cols()));
    out.insert(out.end(), kMagic, kMagic + 4);
    le::put_u32(out, kSceneFormatVersion);
    le::put_u64(out, n);
    le::put_u32(out, static_cast<std::uint32_t>(scene.sh_degree));
    out.insert(out.end(), 12, 0);
    put_block(out, scene.means);
    put_block(out, scene.raw_scales);
    put_block(out, scene.raw_rotations);
    put_block(out, scene.raw_opacities);
    put_block(out, scene.sh);
    return out;
}

GaussianScene decode_scene(const std::vector<std::uint8_t>& bytes) {
    le::Reader in(bytes);
    check(in.has(kSceneHeaderBytes), Errc::CorruptHeader, "file shorter than the 32-byte header");
    check(std::equal(kMagic, kMagic + 4, bytes.begin()), Errc::CorruptHeader, "bad magic");
    in.skip(4);
    const auto version = in.u32();
    check(version == kSceneFormatVersion, Errc::FormatVersionMismatch,
          "version " + std::to_string(version));
    const auto n = in.u64();
    const auto degree = in.u32();
    in.skip(12);
    check(degree <= static_cast<std::uint32_t>(kMaxShDegree), Errc::CorruptHeader, "sh_degree");
    const std::uint64_t per = 11 + 3 * static_cast<std::uint64_t>(sh_basis_count(int(degree)));
    check(n <= in.remaining() / 8 / per && in.remaining() == n * per * 8, Errc::CorruptHeader,
          "payload size does not match header");
    GaussianScene s = GaussianScene::zeros(static_cast<Eigen::Index>(n), static_cast<int>(degree));
    get_block(in, s.means);
    get_block(in, s.raw_scales);
    get_block(in, s.raw_rotations);
    get_block(in, s.raw_opacities);
    get_block(in, s.sh);
    return s;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    check(bool(f), Errc::IoFailure, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    check(!f.bad(), Errc::IoFailure, "read failed: " + path.string());
    return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    check(bool(f), Errc::IoFailure, "cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    check(bool(f), Errc::IoFailure, "write failed: " + path.string());
}

void save_scene(const std::filesystem::path& path, const GaussianScene& scene) {
    write_file(path, encode_scene(scene));
}

GaussianScene load_scene(const std::filesystem::path& path) { return decode_scene(read_file(path)); }

void write_ppm(const std::filesystem::path& path, const Image& image) {
    std::vector<std::uint8_t> out;
    const std::string header =
        "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.insert(out.end(), header.begin(), header.end());
    for (Eigen::Index k = 0; k < image.pixels.size(); ++k) {
        const double v = std::clamp(image.pixels[k], 0.0, 1.0);
        out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
    write_file(path, out);
}

}  // namespace fsplat
