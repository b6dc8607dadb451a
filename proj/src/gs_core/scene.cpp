// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/scene.hpp"

#include "fsplat/error.hpp"

#include <cmath>
#include <cstring>

namespace fsplat {

GaussianScene GaussianScene::zeros(Eigen::Index count, int sh_degree) {
    check(sh_degree >= 0 && sh_degree <= kMaxShDegree, Errc::LayoutMismatch, "sh_degree out of range");
    GaussianScene s;
    s.sh_degree = sh_degree;
    s.means = RowsX3::Zero(count, 3);
    s.raw_scales = RowsX3::Zero(count, 3);
    s.raw_rotations = RowsX4::Zero(count, 4);
    s.raw_opacities = Eigen::VectorXd::Zero(count);
    s.sh = RowsXX::Zero(count, 3 * sh_basis_count(sh_degree));
    return s;
}

bool GaussianScene::consistent() const {
    const auto n = size();
    return sh_degree >= 0 && sh_degree <= kMaxShDegree && raw_scales.rows() == n &&
           raw_rotations.rows() == n && raw_opacities.size() == n && sh.rows() == n &&
           sh.cols() == 3 * basis_count();
}

bool GaussianScene::all_finite() const {
    return means.allFinite() && raw_scales.allFinite() && raw_rotations.allFinite() &&
           raw_opacities.allFinite() && sh.allFinite();
}

GaussianScene& GaussianScene::operator+=(const GaussianScene& o) {
    check(size() == o.size() && sh_degree == o.sh_degree, Errc::ShapeMismatch, "scene += scene");
    means += o.means;
    raw_scales += o.raw_scales;
    raw_rotations += o.raw_rotations;
    raw_opacities += o.raw_opacities;
    sh += o.sh;
    return *this;
}

GaussianScene& GaussianScene::operator*=(double s) {
    means *= s;
    raw_scales *= s;
    raw_rotations *= s;
    raw_opacities *= s;
    sh *= s;
    return *this;
}

namespace {
template <typename M>
bool bitwise_equal(const M& a, const M& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return a.size() == 0 || std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}
}  // namespace

bool GaussianScene::operator==(const GaussianScene& o) const {
    return sh_degree == o.sh_degree && bitwise_equal(means, o.means) &&
           bitwise_equal(raw_scales, o.raw_scales) && bitwise_equal(raw_rotations, o.raw_rotations) &&
           bitwise_equal(raw_opacities, o.raw_opacities) && bitwise_equal(sh, o.sh);
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    // log(1 + e^x) without overflow
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

namespace {
bool scale_clamped(double raw) { return kScaleFactor * softplus(raw) >= kScaleClamp; }
}  // namespace

PhysicalAttributes activate(const GaussianScene& scene) {
    check(scene.consistent(), Errc::ShapeMismatch, "inconsistent scene");
    const auto n = scene.size();
    PhysicalAttributes out;
    out.scales.resize(n, 3);
    out.rotations.resize(n, 4);
    out.opacities.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k)
            out.scales(i, k) = std::min(kScaleFactor * softplus(scene.raw_scales(i, k)), kScaleClamp);
        const double norm = scene.raw_rotations.row(i).norm();
        if (!(norm > kMinQuaternionNorm))
            throw Error(Errc::DegenerateQuaternion,
                        "quaternion " + std::to_string(i) + " has norm " + std::to_string(norm));
        out.rotations.row(i) = scene.raw_rotations.row(i) / norm;
        out.opacities[i] = sigmoid(scene.raw_opacities[i]);
    }
    return out;
}

SceneGradient activate_backward(const GaussianScene& scene, const PhysicalAttributes& upstream) {
    const auto n = scene.size();
    check(upstream.scales.rows() == n && upstream.rotations.rows() == n && upstream.opacities.size() == n,
          Errc::ShapeMismatch, "upstream gradient does not match scene");
    SceneGradient g = SceneGradient::zeros(n, scene.sh_degree);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
            const double r = scene.raw_scales(i, k);
            g.raw_scales(i, k) = scale_clamped(r) ? 0.0 : upstream.scales(i, k) * kScaleFactor * sigmoid(r);
        }
        // d(v/|v|)/dv = (I - q q^T) / |v|
        const Eigen::RowVector4d v = scene.raw_rotations.row(i);
        const double norm = v.norm();
        if (!(norm > kMinQuaternionNorm))
            throw Error(Errc::DegenerateQuaternion, "quaternion " + std::to_string(i));
        const Eigen::RowVector4d q = v / norm;
        const Eigen::RowVector4d up = upstream.rotations.row(i);
        g.raw_rotations.row(i) = (up - up.dot(q) * q) / norm;
        const double o = sigmoid(scene.raw_opacities[i]);
        g.raw_opacities[i] = upstream.opacities[i] * o * (1.0 - o);
    }
    return g;
}

}  // namespace fsplat
