// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/error.hpp"
#include "fsplat/photometric.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fsplat;
using fsplat::testing::random_image;

namespace {

// Windowed statistics computed directly at every valid window position.
double reference_ssim(const Image& a, const Image& b) {
    const int r = kSsimWindow / 2;
    double w[kSsimWindow][kSsimWindow], wsum = 0;
    for (int i = 0; i < kSsimWindow; ++i)
        for (int j = 0; j < kSsimWindow; ++j) {
            w[i][j] = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2 * kSsimSigma * kSsimSigma));
            wsum += w[i][j];
        }
    double total = 0;
    int count = 0;
    for (int ch = 0; ch < 3; ++ch)
        for (int y = r; y < a.height - r; ++y)
            for (int x = r; x < a.width - r; ++x) {
                double mx = 0, my = 0;
                for (int i = 0; i < kSsimWindow; ++i)
                    for (int j = 0; j < kSsimWindow; ++j) {
                        mx += w[i][j] / wsum * a.at(y - r + i, x - r + j, ch);
                        my += w[i][j] / wsum * b.at(y - r + i, x - r + j, ch);
                    }
                double vx = 0, vy = 0, cxy = 0;
                for (int i = 0; i < kSsimWindow; ++i)
                    for (int j = 0; j < kSsimWindow; ++j) {
                        const double dx = a.at(y - r + i, x - r + j, ch) - mx;
                        const double dy = b.at(y - r + i, x - r + j, ch) - my;
                        vx += w[i][j] / wsum * dx * dx;
                        vy += w[i][j] / wsum * dy * dy;
                        cxy += w[i][j] / wsum * dx * dy;
                    }
                total += (2 * mx * my + kSsimC1) * (2 * cxy + kSsimC2) /
                         ((mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2));
                ++count;
            }
    return total / count;
}

double reference_mse(const Image& a, const Image& b) {
    return (a.pixels - b.pixels).square().mean();
}

}  // namespace

TEST(Photometric, IdenticalImagesGiveZeroLossAndGradient) {
    Rng rng(1);
    const Image x = random_image(rng, 16, 16, 0, 1);
    const LossBreakdown lb = photometric_loss(x, x, 0.2);
    EXPECT_EQ(lb.l1, 0.0);
    EXPECT_EQ(lb.dssim, 0.0);
    EXPECT_EQ(lb.total, 0.0);
    EXPECT_EQ(lb.grad_image.pixels.abs().maxCoeff(), 0.0);
}

TEST(Photometric, ConstantOffsetGivesL1OfOffset) {
    Rng rng(2);
    const Image r = random_image(rng, 16, 16, 0, 0.9);
    Image t = r;
    t.pixels += 0.1;
    EXPECT_NEAR(photometric_loss(r, t, 0.2).l1, 0.1, 1e-15);
}

TEST(Photometric, TotalIsWeightedSum) {
    Rng rng(3);
    const Image a = random_image(rng, 16, 16, 0, 1), b = random_image(rng, 16, 16, 0, 1);
    for (double w : {0.0, 0.2, 0.7, 1.0}) {
        const LossBreakdown lb = photometric_loss(a, b, w);
        EXPECT_NEAR(lb.total, (1 - w) * lb.l1 + w * lb.dssim, 1e-15);
    }
    const LossBreakdown pure = photometric_loss(a, b, 0.0);
    EXPECT_EQ(pure.total, pure.l1);
}

TEST(Photometric, SsimMatchesDirectWindowOracle) {
    Rng rng(4);
    for (int t = 0; t < 3; ++t) {
        const Image a = random_image(rng, 16, 16, 0, 1);
        Image b = a;
        for (Eigen::Index k = 0; k < b.pixels.size(); ++k) b.pixels[k] = std::clamp(b.pixels[k] + 0.3 * rng.normal(), 0.0, 1.0);
        EXPECT_NEAR(ssim(a, b), reference_ssim(a, b), 1e-6);
        EXPECT_NEAR(photometric_loss(a, b, 0.5).dssim, (1 - reference_ssim(a, b)) / 2, 1e-6);
    }
}

TEST(Photometric, SsimIsSymmetricAndOneOnIdentity) {
    Rng rng(5);
    const Image a = random_image(rng, 20, 14, 0, 1), b = random_image(rng, 20, 14, 0, 1);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-15);
}

TEST(Photometric, PsnrOfKnownMse) {
    Image a(8, 8), b(8, 8);
    b.pixels.setConstant(0.1);  // MSE 0.01
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-12);
}

TEST(Photometric, PsnrMatchesMseOracleAndCapsIdentity) {
    Rng rng(6);
    const Image a = random_image(rng, 16, 16, 0, 1), b = random_image(rng, 16, 16, 0, 1);
    EXPECT_NEAR(psnr(a, b), -10 * std::log10(reference_mse(a, b)), 1e-10);
    EXPECT_EQ(psnr(a, a), kPsnrCap);
}

TEST(Photometric, GradientMatchesFiniteDifferences) {
    Rng rng(7);
    for (double w : {0.0, 0.2, 1.0}) {
        const Image a = random_image(rng, 16, 16, 0, 1), b = random_image(rng, 16, 16, 0, 1);
        const LossBreakdown lb = photometric_loss(a, b, w);
        Image p = a;
        const double h = 1e-4;
        auto f = [&](Eigen::Index k, double off) {
            p.pixels[k] = a.pixels[k] + off;
            const double v = photometric_loss(p, b, w).total;
            p.pixels[k] = a.pixels[k];
            return v;
        };
        for (Eigen::Index k = 0; k < a.pixels.size(); ++k) {
            if (std::abs(a.pixels[k] - b.pixels[k]) < 3 * h) continue;  // L1 kink inside the stencil
            const double fd = (f(k, -2 * h) - 8 * f(k, -h) + 8 * f(k, h) - f(k, 2 * h)) / (12 * h);
            if (std::abs(fd) < 1e-8) continue;
            const double g = lb.grad_image.pixels[k];
            ASSERT_LT(std::abs(g - fd) / std::max(std::abs(g), std::abs(fd)), 1e-4) << "w " << w << " k " << k;
        }
    }
}

TEST(Photometric, ShapeMismatchThrows) {
    const Image a(8, 8), b(8, 9);
    for (auto fn : {+[](const Image& x, const Image& y) { photometric_loss(x, y, 0.2); },
                    +[](const Image& x, const Image& y) { psnr(x, y); },
                    +[](const Image& x, const Image& y) { ssim(x, y); }}) {
        try {
            fn(a, b);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::ShapeMismatch);
        }
    }
}
