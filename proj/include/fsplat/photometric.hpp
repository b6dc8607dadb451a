// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "fsplat/camera.hpp"

namespace fsplat {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;
constexpr double kPsnrCap = 99.0;
constexpr double kDefaultSsimWeight = 0.2;

struct LossBreakdown {
    double l1 = 0.0;
    double dssim = 0.0;
    double total = 0.0;
    Image grad_image;  // d total / d rendered
};

/// total = (1 - w_ssim) * mean|r - t| + w_ssim * (1 - SSIM(r, t)) / 2.
/// SSIM uses an 11x11 Gaussian window (sigma 1.5) over valid positions only,
/// averaged per channel. Images must be at least 11x11.
LossBreakdown photometric_loss(const Image& rendered, const Image& target, double w_ssim = kDefaultSsimWeight);

/// -10 log10(MSE) with peak 1; identical images (or anything above the cap) report 99 dB.
double psnr(const Image& rendered, const Image& target);

double ssim(const Image& rendered, const Image& target);

}  // namespace fsplat
