// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

#include <array>

namespace fsplat {

constexpr double kShC0 = 0.28209479177387814;

/// Real SH basis values (Condon-Shortley phase, 3DGS ordering) at `dir` for
/// degrees 0..degree. Writes sh_basis_count(degree) entries.
void sh_basis(int degree, const Eigen::Vector3d& dir, double* out);

/// Basis values plus their Jacobian with respect to the (unnormalized) direction
/// components; jac has sh_basis_count(degree) rows.
void sh_basis_jacobian(int degree, const Eigen::Vector3d& dir, double* basis, Eigen::Matrix<double, 16, 3>& jac);

/// color = max(SH(dir) + 0.5, 0) per channel. `coeffs` is B x 3.
/// Throws BadDirection unless |dir| = 1 within 1e-6.
Eigen::Vector3d eval_sh(const Eigen::Ref<const Eigen::MatrixXd>& coeffs, const Eigen::Vector3d& dir);

}  // namespace fsplat
