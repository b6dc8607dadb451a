// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "fsplat/camera.hpp"
#include "fsplat/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fsplat {

constexpr std::uint32_t kSceneFormatVersion = 1;
constexpr std::size_t kSceneHeaderBytes = 32;

/// Little-endian scene file: "FSPL", u32 version, u64 N, u32 sh_degree,
/// 12 reserved bytes, then means, raw_scales, raw_rotations, raw_opacities
/// and sh as f64.
std::vector<std::uint8_t> encode_scene(const GaussianScene& scene);
GaussianScene decode_scene(const std::vector<std::uint8_t>& bytes);

void save_scene(const std::filesystem::path& path, const GaussianScene& scene);
GaussianScene load_scene(const std::filesystem::path& path);

/// Binary P6 dump, values clamped to [0,1] and quantized to 8 bits.
void write_ppm(const std::filesystem::path& path, const Image& image);

// Little-endian helpers shared with the checkpoint format.
namespace le {
void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v);
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
    bool has(std::size_t n) const { return pos_ + n <= bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    void skip(std::size_t n) { pos_ += n; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};
}  // namespace le

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace fsplat
