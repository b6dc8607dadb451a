// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/error.hpp"
#include "fsplat/random.hpp"
#include "fsplat/sh.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fsplat;

namespace {

Eigen::Vector3d random_dir(Rng& rng) {
    return Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
}

// Real SH from the associated Legendre definition, independent of the polynomial tables.
double reference_basis(int l, int m, const Eigen::Vector3d& d) {
    const double theta = std::acos(std::clamp(d.z(), -1.0, 1.0));
    const double phi = std::atan2(d.y(), d.x());
    const int am = std::abs(m);
    auto fact = [](int n) {
        double f = 1;
        for (int i = 2; i <= n; ++i) f *= i;
        return f;
    };
    const double k = std::sqrt((2 * l + 1) / (4 * M_PI) * fact(l - am) / fact(l + am));
    // std::assoc_legendre omits the Condon-Shortley phase; put it back
    const double p = std::assoc_legendre(unsigned(l), unsigned(am), std::cos(theta)) * ((am % 2) ? -1.0 : 1.0);
    if (m == 0) return k * p;
    if (m > 0) return std::sqrt(2.0) * k * std::cos(am * phi) * p;
    return std::sqrt(2.0) * k * std::sin(am * phi) * p;
}

}  // namespace

TEST(Sh, DegreeZeroZeroCoeffsIsHalfGray) {
    const Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, 3);
    EXPECT_TRUE(eval_sh(c, Eigen::Vector3d::UnitZ()).isApprox(Eigen::Vector3d::Constant(0.5)));
}

TEST(Sh, DegreeZeroIsViewIndependent) {
    Rng rng(1);
    Eigen::MatrixXd c(1, 3);
    c << 0.3, -0.2, 0.7;
    const Eigen::Vector3d a = eval_sh(c, random_dir(rng));
    const Eigen::Vector3d b = eval_sh(c, random_dir(rng));
    EXPECT_EQ(a, b);
    EXPECT_NEAR(a.x(), 0.5 + kShC0 * 0.3, 1e-15);
}

TEST(Sh, ClampsNegativeColorToZero) {
    Eigen::MatrixXd c(1, 3);
    c << -10, 0, 10;
    const Eigen::Vector3d col = eval_sh(c, Eigen::Vector3d::UnitX());
    EXPECT_EQ(col.x(), 0.0);
    EXPECT_GT(col.z(), 1.0);
}

TEST(Sh, BasisMatchesLegendreReference) {
    Rng rng(7);
    double basis[16];
    for (int t = 0; t < 50; ++t) {
        const Eigen::Vector3d d = random_dir(rng);
        sh_basis(3, d, basis);
        for (int l = 0; l <= 3; ++l)
            for (int m = -l; m <= l; ++m)
                EXPECT_NEAR(basis[l * l + l + m], reference_basis(l, m, d), 1e-12) << "l " << l << " m " << m;
    }
}

TEST(Sh, DegreeOneMatchesReferenceEvaluation) {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        Eigen::MatrixXd c(4, 3);
        for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] = rng.uniform(-0.3, 0.3);
        const Eigen::Vector3d d = random_dir(rng);
        Eigen::Vector3d expect = Eigen::Vector3d::Constant(0.5);
        for (int b = 0; b < 4; ++b) {
            const int l = b == 0 ? 0 : 1;
            const int m = b - (l * l + l);
            expect += reference_basis(l, m, d) * c.row(b).transpose();
        }
        expect = expect.cwiseMax(0.0);
        EXPECT_LT((eval_sh(c, d) - expect).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Sh, JacobianMatchesFiniteDifferences) {
    Rng rng(5);
    double basis[16], bp[16], bm[16];
    Eigen::Matrix<double, 16, 3> jac;
    for (int t = 0; t < 10; ++t) {
        const Eigen::Vector3d d = random_dir(rng);
        sh_basis_jacobian(3, d, basis, jac);
        for (int k = 0; k < 3; ++k) {
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e[k] = 1e-6;
            sh_basis(3, d + e, bp);
            sh_basis(3, d - e, bm);
            for (int b = 0; b < 16; ++b) EXPECT_NEAR(jac(b, k), (bp[b] - bm[b]) / 2e-6, 1e-7);
        }
    }
}

TEST(Sh, NonUnitDirectionThrows) {
    const Eigen::MatrixXd c = Eigen::MatrixXd::Zero(4, 3);
    try {
        eval_sh(c, Eigen::Vector3d(1, 1, 0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::BadDirection);
    }
}
