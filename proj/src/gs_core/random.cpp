// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/random.hpp"

#include <numbers>

namespace fsplat {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t id) { return Rng(splitmix64(splitmix64(seed) ^ id)); }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = std::uint64_t(hi - lo) + 1;
    if (span == 0) return std::int64_t(engine_());
    const std::uint64_t limit = std::uint64_t(-span) % span;  // 2^64 mod span
    std::uint64_t r;
    do {
        r = engine_();
    } while (r < limit);
    return lo + std::int64_t(r % span);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace fsplat
