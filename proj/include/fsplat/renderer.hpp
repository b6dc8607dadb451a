// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "fsplat/camera.hpp"
#include "fsplat/scene.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace fsplat {

/// Rasterizer constants inherited from the reference 3DGS implementation.
struct RasterConstants {
    static constexpr double kDilation = 0.3;          // px^2 added to the 2D covariance diagonal
    static constexpr double kAlphaMax = 0.99;
    static constexpr double kAlphaMin = 1.0 / 255.0;
    static constexpr double kTransmittanceMin = 1e-4;
    static constexpr double kCullSigma = 3.0;
};

struct ProjectedGaussian {
    Eigen::Index index = 0;   // row in the source scene
    Eigen::Vector2d mean2d;   // pixels
    Eigen::Matrix2d cov2d;    // pixels^2, dilated
    Eigen::Matrix2d conic;    // inverse of cov2d
    double depth = 0.0;       // camera-space z
    Eigen::Vector3d color;    // view-evaluated SH
    double opacity = 0.0;
    // Pixel rectangle [x0, x1) x [y0, y1) that can receive alpha >= kAlphaMin.
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
};

/// Projects, culls and depth-sorts (ties by index). Culls primitives with
/// depth <= near or whose 3-sigma footprint misses the image.
std::vector<ProjectedGaussian> project(const GaussianScene& scene, const Camera& camera);

/// Cached per-pixel state for the backward pass.
struct RenderAux {
    std::vector<ProjectedGaussian> splats;   // sorted front to back
    std::vector<std::int32_t> pixel_offsets; // CSR over pixels into pixel_splats
    std::vector<std::int32_t> pixel_splats;  // positions into `splats`, front to back
    std::vector<std::int32_t> processed;     // candidates visited per pixel
    Eigen::ArrayXd final_transmittance;      // per pixel
    std::uint64_t fingerprint = 0;
};

struct RenderOutput {
    Image image;
    RenderAux aux;
};

RenderOutput render_forward(const GaussianScene& scene, const Camera& camera, const Eigen::Vector3d& background);

/// Vector-Jacobian product of `render_forward` with respect to every raw scene
/// field. Throws StaleAux when `aux` was produced for different inputs.
SceneGradient render_backward(const GaussianScene& scene, const Camera& camera, const Eigen::Vector3d& background,
                              const RenderAux& aux, const Image& upstream);

/// Expected camera-space depth normalised by accumulated alpha; `fallback`
/// where the accumulated alpha is below 0.5.
/// Per-pixel contributing Gaussian indices (2 * index + saturated, -1 after each
/// pixel). Two scenes with equal patterns lie on the same smooth piece of render_forward.
std::vector<std::int64_t> contribution_pattern(const GaussianScene& scene, const Camera& camera);

Eigen::ArrayXXd render_depth(const GaussianScene& scene, const Camera& camera, double fallback);

}  // namespace fsplat
