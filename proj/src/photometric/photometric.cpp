// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/photometric.hpp"

#include "fsplat/error.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>

namespace fsplat {

namespace {

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const std::array<double, kSsimWindow>& gauss_window() {
    static const std::array<double, kSsimWindow> w = [] {
        std::array<double, kSsimWindow> g{};
        double sum = 0.0;
        for (int k = 0; k < kSsimWindow; ++k) {
            const double d = k - kSsimWindow / 2;
            g[k] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
            sum += g[k];
        }
        for (auto& v : g) v /= sum;
        return g;
    }();
    return w;
}

Plane channel(const Image& img, int ch) {
    Plane p(img.height, img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) p(r, c) = img.at(r, c, ch);
    return p;
}

// Separable correlation with the window, valid positions only.
Plane filter_valid(const Plane& in) {
    const auto& g = gauss_window();
    const Eigen::Index ho = in.rows() - kSsimWindow + 1, wo = in.cols() - kSsimWindow + 1;
    Plane tmp = Plane::Zero(in.rows(), wo);
    for (int k = 0; k < kSsimWindow; ++k) tmp += g[k] * in.middleCols(k, wo);
    Plane out = Plane::Zero(ho, wo);
    for (int k = 0; k < kSsimWindow; ++k) out += g[k] * tmp.middleRows(k, ho);
    return out;
}

// Adjoint of filter_valid: scatters a valid-size map back to full size.
Plane filter_valid_adjoint(const Plane& in, Eigen::Index rows, Eigen::Index cols) {
    const auto& g = gauss_window();
    const Eigen::Index ho = in.rows(), wo = in.cols();
    Plane tmp = Plane::Zero(rows, wo);
    for (int k = 0; k < kSsimWindow; ++k) tmp.middleRows(k, ho) += g[k] * in;
    Plane out = Plane::Zero(rows, cols);
    for (int k = 0; k < kSsimWindow; ++k) out.middleCols(k, wo) += g[k] * tmp;
    return out;
}

struct SsimChannel {
    double mean = 0.0;
    Plane grad;  // d mean / d x, filled only on request
};

SsimChannel ssim_channel(const Plane& x, const Plane& y, bool want_grad) {
    const Plane mx = filter_valid(x), my = filter_valid(y);
    const Plane exx = filter_valid(x * x), eyy = filter_valid(y * y), exy = filter_valid(x * y);
    const Plane vx = exx - mx * mx, vy = eyy - my * my, cxy = exy - mx * my;
    const Plane a1 = 2.0 * mx * my + kSsimC1, a2 = 2.0 * cxy + kSsimC2;
    const Plane b1 = mx * mx + my * my + kSsimC1, b2 = vx + vy + kSsimC2;
    const Plane r1 = a1 / b1, r2 = a2 / b2;
    const Plane map = r1 * r2;

    SsimChannel out;
    const double count = double(map.size());
    out.mean = map.sum() / count;
    if (!want_grad) return out;

    // Partials with respect to the raw moments (mx, E[x^2], E[xy]). Written in
    // terms of r1, r2 so that x == y yields an exactly zero gradient.
    const Plane d_mu = (2.0 * my * r2 - 2.0 * mx * map) / b1;
    const Plane d_var = -map / b2;
    const Plane d_cov = 2.0 * r1 / b2;
    const Plane d_mx = (d_mu - 2.0 * mx * d_var - my * d_cov) / count;
    const Plane d_exx = d_var / count;
    const Plane d_exy = d_cov / count;
    out.grad = filter_valid_adjoint(d_mx, x.rows(), x.cols()) +
               2.0 * x * filter_valid_adjoint(d_exx, x.rows(), x.cols()) +
               y * filter_valid_adjoint(d_exy, x.rows(), x.cols());
    return out;
}

void check_pair(const Image& a, const Image& b) {
    check(a.same_shape(b) && a.pixels.size() == b.pixels.size(), Errc::ShapeMismatch, "image sizes differ");
}

void check_ssim_size(const Image& a) {
    check(a.width >= kSsimWindow && a.height >= kSsimWindow, Errc::ShapeMismatch,
          "SSIM needs images of at least 11x11");
}

}  // namespace

LossBreakdown photometric_loss(const Image& rendered, const Image& target, double w_ssim) {
    check_pair(rendered, target);
    check_ssim_size(rendered);
    check(w_ssim >= 0.0 && w_ssim <= 1.0, Errc::BadConfig, "w_ssim must lie in [0,1]");

    LossBreakdown out;
    const double n = double(rendered.pixels.size());
    const Eigen::ArrayXd diff = rendered.pixels - target.pixels;
    out.l1 = diff.abs().sum() / n;
    out.grad_image = Image(rendered.width, rendered.height);
    out.grad_image.pixels = (1.0 - w_ssim) / n * diff.sign();

    double ssim_sum = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        const Plane x = channel(rendered, ch), y = channel(target, ch);
        const SsimChannel s = ssim_channel(x, y, w_ssim > 0.0);
        ssim_sum += s.mean;
        if (w_ssim > 0.0) {
            // d/dx of w * (1 - mean_c ssim_c) / 2
            const double scale = -0.5 * w_ssim / 3.0;
            for (int r = 0; r < rendered.height; ++r)
                for (int c = 0; c < rendered.width; ++c) out.grad_image.at(r, c, ch) += scale * s.grad(r, c);
        }
    }
    out.dssim = 0.5 * (1.0 - ssim_sum / 3.0);
    out.total = (1.0 - w_ssim) * out.l1 + w_ssim * out.dssim;
    return out;
}

double psnr(const Image& rendered, const Image& target) {
    check_pair(rendered, target);
    const double mse = (rendered.pixels - target.pixels).square().mean();
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double ssim(const Image& rendered, const Image& target) {
    check_pair(rendered, target);
    check_ssim_size(rendered);
    double sum = 0.0;
    for (int ch = 0; ch < 3; ++ch) sum += ssim_channel(channel(rendered, ch), channel(target, ch), false).mean;
    return sum / 3.0;
}

}  // namespace fsplat
