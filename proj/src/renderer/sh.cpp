// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/sh.hpp"

#include "fsplat/error.hpp"
#include "fsplat/scene.hpp"

#include <cmath>

namespace fsplat {

namespace {

constexpr double C1 = 0.4886025119029199;
constexpr double C2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                         0.5462742152960396};
constexpr double C3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                         -0.4570457994644658, 1.445305721320277,  -0.5900435899266435};

}  // namespace

void sh_basis_jacobian(int degree, const Eigen::Vector3d& d, double* b, Eigen::Matrix<double, 16, 3>& J) {
    const double x = d.x(), y = d.y(), z = d.z();
    J.setZero();
    b[0] = kShC0;
    if (degree < 1) return;
    b[1] = -C1 * y;
    b[2] = C1 * z;
    b[3] = -C1 * x;
    J(1, 1) = -C1;
    J(2, 2) = C1;
    J(3, 0) = -C1;
    if (degree < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    b[4] = C2[0] * x * y;
    b[5] = C2[1] * y * z;
    b[6] = C2[2] * (2 * zz - xx - yy);
    b[7] = C2[3] * x * z;
    b[8] = C2[4] * (xx - yy);
    J.row(4) << C2[0] * y, C2[0] * x, 0;
    J.row(5) << 0, C2[1] * z, C2[1] * y;
    J.row(6) << -2 * C2[2] * x, -2 * C2[2] * y, 4 * C2[2] * z;
    J.row(7) << C2[3] * z, 0, C2[3] * x;
    J.row(8) << 2 * C2[4] * x, -2 * C2[4] * y, 0;
    if (degree < 3) return;
    b[9] = C3[0] * y * (3 * xx - yy);
    b[10] = C3[1] * x * y * z;
    b[11] = C3[2] * y * (4 * zz - xx - yy);
    b[12] = C3[3] * z * (2 * zz - 3 * xx - 3 * yy);
    b[13] = C3[4] * x * (4 * zz - xx - yy);
    b[14] = C3[5] * z * (xx - yy);
    b[15] = C3[6] * x * (xx - 3 * yy);
    J.row(9) << C3[0] * 6 * x * y, C3[0] * (3 * xx - 3 * yy), 0;
    J.row(10) << C3[1] * y * z, C3[1] * x * z, C3[1] * x * y;
    J.row(11) << -2 * C3[2] * x * y, C3[2] * (4 * zz - xx - 3 * yy), 8 * C3[2] * y * z;
    J.row(12) << -6 * C3[3] * x * z, -6 * C3[3] * y * z, C3[3] * (6 * zz - 3 * xx - 3 * yy);
    J.row(13) << C3[4] * (4 * zz - 3 * xx - yy), -2 * C3[4] * x * y, 8 * C3[4] * x * z;
    J.row(14) << 2 * C3[5] * x * z, -2 * C3[5] * y * z, C3[5] * (xx - yy);
    J.row(15) << C3[6] * (3 * xx - 3 * yy), -6 * C3[6] * x * y, 0;
}

void sh_basis(int degree, const Eigen::Vector3d& dir, double* out) {
    Eigen::Matrix<double, 16, 3> unused;
    sh_basis_jacobian(degree, dir, out, unused);
}

Eigen::Vector3d eval_sh(const Eigen::Ref<const Eigen::MatrixXd>& coeffs, const Eigen::Vector3d& dir) {
    check(std::abs(dir.norm() - 1.0) <= 1e-6, Errc::BadDirection, "view direction is not unit length");
    int degree = 0;
    while (degree < kMaxShDegree && sh_basis_count(degree) < coeffs.rows()) ++degree;
    check(sh_basis_count(degree) == coeffs.rows() && coeffs.cols() == 3, Errc::ShapeMismatch,
          "coefficients must be (L+1)^2 x 3");
    double basis[16];
    sh_basis(degree, dir, basis);
    Eigen::Vector3d c = Eigen::Vector3d::Constant(0.5);
    for (int b = 0; b < coeffs.rows(); ++b) c += basis[b] * coeffs.row(b).transpose();
    return c.cwiseMax(0.0);
}

}  // namespace fsplat
