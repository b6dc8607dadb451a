// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fsplat {

struct CheckReport {
    std::string name;
    bool passed = false;
    int checked = 0;      // coordinates or cases compared
    int failed = 0;
    double worst = 0.0;   // largest relative error seen
    std::string note;
};

// Finite-difference suites. Relative error is |a - f| / max(|a|, |f|) over
// coordinates whose central difference exceeds 1e-8 in magnitude.
CheckReport gradcheck_activation(std::uint64_t seed, int points = 100);
/// 16x16 views of 8 Gaussians at SH degree 1, tolerance 1e-3. Five-point
/// differences; the step starts at 1e-3 and is divided by 10 while any stencil
/// point changes which Gaussians contribute to a pixel.
CheckReport gradcheck_renderer(std::uint64_t seed, int scenes = 20);
CheckReport gradcheck_photometric(std::uint64_t seed, int pairs = 5);
CheckReport gradcheck_predictor(std::uint64_t seed, int trials = 3);

// Quadratic-task suites with closed-form answers.
CheckReport selftest_second_order(std::uint64_t seed, int tasks = 10);
CheckReport selftest_first_order(std::uint64_t seed, int tasks = 10);
CheckReport selftest_anchor_sets();

std::vector<CheckReport> run_gradcheck(std::uint64_t seed);
std::vector<CheckReport> run_selftest(std::uint64_t seed);

}  // namespace fsplat
