// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace fsplat {

using RowsX3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using RowsX4 = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;
using RowsXX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kMaxShDegree = 3;

/// Number of SH basis functions for degree L, i.e. (L+1)^2.
constexpr int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

/// Raw (pre-activation) parameters of N anisotropic Gaussians.
///
/// The same type carries gradients with respect to those raw fields, since
/// the shapes are identical. SH coefficients are stored per Gaussian as a row
/// of B*3 values laid out basis-major: sh(i, b*3 + channel).
struct GaussianScene {
    int sh_degree = 1;
    RowsX3 means;
    RowsX3 raw_scales;
    RowsX4 raw_rotations;  // (w, x, y, z), unnormalized
    Eigen::VectorXd raw_opacities;
    RowsXX sh;

    GaussianScene() : sh(0, 3 * sh_basis_count(1)) {}

    static GaussianScene zeros(Eigen::Index count, int sh_degree);

    Eigen::Index size() const { return means.rows(); }
    int basis_count() const { return sh_basis_count(sh_degree); }

    /// True when every block has `size()` rows and the SH block has 3B columns.
    bool consistent() const;
    bool all_finite() const;

    GaussianScene& operator+=(const GaussianScene& other);
    GaussianScene& operator*=(double s);

    bool operator==(const GaussianScene& other) const;
};

/// Gradient of a scalar with respect to every raw field of a GaussianScene.
using SceneGradient = GaussianScene;

/// Activated attributes: positive clamped scales, unit quaternions, opacities in (0,1).
struct PhysicalAttributes {
    RowsX3 scales;
    RowsX4 rotations;
    Eigen::VectorXd opacities;
};

constexpr double kScaleFactor = 0.001;
constexpr double kScaleClamp = 0.3;
constexpr double kMinQuaternionNorm = 1e-8;

double sigmoid(double x);
double softplus(double x);

/// scale = min(0.001 * softplus(raw), 0.3); opacity = sigmoid(raw); rotation = q / |q|.
/// Throws DegenerateQuaternion when a raw quaternion has norm <= 1e-8.
PhysicalAttributes activate(const GaussianScene& scene);

/// Chain rule through `activate`. Means and SH gradients are zero in the result;
/// the caller adds them directly. The clamp boundary has zero subgradient.
SceneGradient activate_backward(const GaussianScene& scene, const PhysicalAttributes& upstream);

}  // namespace fsplat
