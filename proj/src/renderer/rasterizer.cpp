// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/renderer.hpp"

#include "fsplat/error.hpp"
#include "fsplat/sh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace fsplat {

namespace {

using RC = RasterConstants;

Eigen::Matrix3d quat_to_matrix(const Eigen::Vector4d& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

// Gradient of a scalar w.r.t. (w, x, y, z) given its gradient w.r.t. quat_to_matrix(q).
Eigen::Vector4d quat_to_matrix_backward(const Eigen::Vector4d& q, const Eigen::Matrix3d& G) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Vector4d d;
    d[0] = 2 * (-z * G(0, 1) + y * G(0, 2) + z * G(1, 0) - x * G(1, 2) - y * G(2, 0) + x * G(2, 1));
    d[1] = 2 * (y * G(0, 1) + z * G(0, 2) + y * G(1, 0) - 2 * x * G(1, 1) - w * G(1, 2) + z * G(2, 0) +
                w * G(2, 1) - 2 * x * G(2, 2));
    d[2] = 2 * (-2 * y * G(0, 0) + x * G(0, 1) + w * G(0, 2) + x * G(1, 0) + z * G(1, 2) - w * G(2, 0) +
                z * G(2, 1) - 2 * y * G(2, 2));
    d[3] = 2 * (-2 * z * G(0, 0) - w * G(0, 1) + x * G(0, 2) + w * G(1, 0) - 2 * z * G(1, 1) + y * G(1, 2) +
                x * G(2, 0) + y * G(2, 1));
    return d;
}

// Jacobian of the perspective projection at camera-space point p.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& cam, const Eigen::Vector3d& p) {
    const double z = p.z(), z2 = z * z;
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx / z, 0, -cam.fx * p.x() / z2,
         0, cam.fy / z, -cam.fy * p.y() / z2;
    return J;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h * 0x100000001b3ULL;
}

template <typename M>
std::uint64_t mix_block(std::uint64_t h, const M& m) {
    for (Eigen::Index k = 0; k < m.size(); ++k) h = mix(h, std::bit_cast<std::uint64_t>(m.data()[k]));
    return h;
}

std::uint64_t fingerprint(const GaussianScene& s, const Camera& c, const Eigen::Vector3d& bg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = mix(h, static_cast<std::uint64_t>(s.size()));
    h = mix(h, static_cast<std::uint64_t>(s.sh_degree));
    h = mix_block(h, s.means);
    h = mix_block(h, s.raw_scales);
    h = mix_block(h, s.raw_rotations);
    h = mix_block(h, s.raw_opacities);
    h = mix_block(h, s.sh);
    h = mix_block(h, c.rotation);
    h = mix_block(h, c.translation);
    const Eigen::Vector4d intr(c.fx, c.fy, c.cx, c.cy);
    h = mix_block(h, intr);
    h = mix(h, std::bit_cast<std::uint64_t>(c.near));
    h = mix(h, (std::uint64_t(c.width) << 32) | std::uint64_t(c.height));
    return mix_block(h, bg);
}

// Pixel-center column range [lo, hi) whose centers lie within `radius` of `center`.
std::pair<int, int> covered_range(double center, double radius, int extent) {
    const int lo = std::max(0, static_cast<int>(std::ceil(center - radius - 0.5)));
    const int hi = std::min(extent, static_cast<int>(std::floor(center + radius - 0.5)) + 1);
    return {lo, std::max(lo, hi)};
}

struct Contribution {
    std::int32_t splat;
    double alpha;
    double gauss;     // exp(power)
    double trans;     // transmittance in front of this splat
    double dx, dy;    // mean2d - pixel center
    bool saturated;   // alpha hit kAlphaMax
};

// Composites pixel `pix` front to back over candidate slots [begin, end),
// calling `visit` for every contribution. Returns the final transmittance and
// the number of candidates examined before early termination.
template <typename Visit>
std::pair<double, std::int32_t> composite_pixel(const RenderAux& aux, int width, std::size_t pix, std::int32_t end,
                                                Visit&& visit) {
    const double px = double(pix % std::size_t(width)) + 0.5;
    const double py = double(pix / std::size_t(width)) + 0.5;
    const std::int32_t begin = aux.pixel_offsets[pix];
    double T = 1.0;
    for (std::int32_t slot = begin; slot < end; ++slot) {
        const std::int32_t s = aux.pixel_splats[std::size_t(slot)];
        const ProjectedGaussian& g = aux.splats[std::size_t(s)];
        const double dx = g.mean2d.x() - px, dy = g.mean2d.y() - py;
        const double power = -0.5 * (g.conic(0, 0) * dx * dx + g.conic(1, 1) * dy * dy) - g.conic(0, 1) * dx * dy;
        if (power > 0.0) continue;
        const double gauss = std::exp(power);
        const double raw_alpha = g.opacity * gauss;
        const bool saturated = raw_alpha >= RC::kAlphaMax;
        const double alpha = saturated ? RC::kAlphaMax : raw_alpha;
        if (alpha < RC::kAlphaMin) continue;
        const double next_T = T * (1.0 - alpha);
        if (next_T < RC::kTransmittanceMin) return {T, slot - begin};
        visit(Contribution{s, alpha, gauss, T, dx, dy, saturated});
        T = next_T;
    }
    return {T, end - begin};
}

}  // namespace

std::vector<ProjectedGaussian> project(const GaussianScene& scene, const Camera& camera) {
    check(scene.consistent(), Errc::ShapeMismatch, "inconsistent scene");
    const PhysicalAttributes act = activate(scene);
    const Eigen::Vector3d campos = camera.center();
    const int B = scene.basis_count();

    std::vector<ProjectedGaussian> out;
    out.reserve(static_cast<std::size_t>(scene.size()));
    double basis[16];
    for (Eigen::Index i = 0; i < scene.size(); ++i) {
        const Eigen::Vector3d mu = scene.means.row(i).transpose();
        const Eigen::Vector3d pc = camera.rotation * mu + camera.translation;
        if (pc.z() <= camera.near) continue;

        const Eigen::Matrix3d Rq = quat_to_matrix(act.rotations.row(i).transpose());
        const Eigen::Matrix3d M = Rq * act.scales.row(i).transpose().asDiagonal();
        const Eigen::Matrix3d sigma = M * M.transpose();
        const Eigen::Matrix<double, 2, 3> T = projection_jacobian(camera, pc) * camera.rotation;

        ProjectedGaussian g;
        g.index = i;
        g.depth = pc.z();
        g.cov2d = T * sigma * T.transpose();
        g.cov2d.diagonal().array() += RC::kDilation;
        g.mean2d = Eigen::Vector2d(camera.fx * pc.x() / pc.z() + camera.cx, camera.fy * pc.y() / pc.z() + camera.cy);

        const double a = g.cov2d(0, 0), b = g.cov2d(0, 1), c = g.cov2d(1, 1);
        const double det = a * c - b * b;
        const double mid = 0.5 * (a + c);
        const double lambda_max = mid + std::sqrt(std::max(mid * mid - det, 0.0));
        const double r3 = RC::kCullSigma * std::sqrt(lambda_max);
        if (g.mean2d.x() + r3 < 0 || g.mean2d.x() - r3 > camera.width || g.mean2d.y() + r3 < 0 ||
            g.mean2d.y() - r3 > camera.height)
            continue;
        g.conic << c / det, -b / det, -b / det, a / det;

        g.opacity = act.opacities[i];
        // Tight bounding box of { d : o * exp(-d^T conic d / 2) >= kAlphaMin }.
        const double kappa = 2.0 * std::log(g.opacity / RC::kAlphaMin);
        if (kappa > 0) {
            std::tie(g.x0, g.x1) = covered_range(g.mean2d.x(), std::sqrt(kappa * a), camera.width);
            std::tie(g.y0, g.y1) = covered_range(g.mean2d.y(), std::sqrt(kappa * c), camera.height);
        }

        const Eigen::Vector3d dir = (mu - campos).normalized();
        sh_basis(scene.sh_degree, dir, basis);
        Eigen::Vector3d color = Eigen::Vector3d::Constant(0.5);
        for (int k = 0; k < B; ++k)
            color += basis[k] * scene.sh.block<1, 3>(i, 3 * k).transpose();
        g.color = color.cwiseMax(0.0);
        out.push_back(g);
    }
    std::stable_sort(out.begin(), out.end(), [](const ProjectedGaussian& l, const ProjectedGaussian& r) {
        return l.depth < r.depth || (l.depth == r.depth && l.index < r.index);
    });
    return out;
}

namespace {

RenderAux build_aux(const GaussianScene& scene, const Camera& camera) {
    RenderAux aux;
    aux.splats = project(scene, camera);
    const std::size_t npix = std::size_t(camera.width) * std::size_t(camera.height);
    aux.pixel_offsets.assign(npix + 1, 0);
    for (const auto& g : aux.splats)
        for (int y = g.y0; y < g.y1; ++y)
            for (int x = g.x0; x < g.x1; ++x) ++aux.pixel_offsets[std::size_t(y) * camera.width + x + 1];
    for (std::size_t p = 0; p < npix; ++p) aux.pixel_offsets[p + 1] += aux.pixel_offsets[p];
    aux.pixel_splats.resize(std::size_t(aux.pixel_offsets[npix]));
    std::vector<std::int32_t> cursor(aux.pixel_offsets.begin(), aux.pixel_offsets.end() - 1);
    // Splats are visited in depth order, so each pixel's list is front to back.
    for (std::size_t s = 0; s < aux.splats.size(); ++s) {
        const auto& g = aux.splats[s];
        for (int y = g.y0; y < g.y1; ++y)
            for (int x = g.x0; x < g.x1; ++x)
                aux.pixel_splats[std::size_t(cursor[std::size_t(y) * camera.width + x]++)] = std::int32_t(s);
    }
    return aux;
}

}  // namespace

RenderOutput render_forward(const GaussianScene& scene, const Camera& camera, const Eigen::Vector3d& background) {
    RenderOutput out;
    out.aux = build_aux(scene, camera);
    out.aux.fingerprint = fingerprint(scene, camera, background);
    RenderAux& aux = out.aux;
    out.image = Image(camera.width, camera.height);
    const std::size_t npix = std::size_t(camera.width) * std::size_t(camera.height);
    aux.processed.resize(npix);
    aux.final_transmittance.resize(Eigen::Index(npix));
    for (std::size_t p = 0; p < npix; ++p) {
        Eigen::Vector3d c = Eigen::Vector3d::Zero();
        const auto [T, n] = composite_pixel(aux, camera.width, p, aux.pixel_offsets[p + 1], [&](const Contribution& k) {
            c += aux.splats[std::size_t(k.splat)].color * (k.alpha * k.trans);
        });
        c += T * background;
        aux.processed[p] = n;
        aux.final_transmittance[Eigen::Index(p)] = T;
        out.image.pixels.segment<3>(Eigen::Index(p) * 3) = c.array();
    }
    return out;
}

SceneGradient render_backward(const GaussianScene& scene, const Camera& camera, const Eigen::Vector3d& background,
                              const RenderAux& aux, const Image& upstream) {
    check(aux.fingerprint == fingerprint(scene, camera, background), Errc::StaleAux,
          "aux does not belong to this scene/camera/background");
    check(upstream.width == camera.width && upstream.height == camera.height, Errc::ShapeMismatch,
          "upstream gradient has the wrong resolution");

    const std::size_t ns = aux.splats.size();
    std::vector<Eigen::Vector2d> d_mean2d(ns, Eigen::Vector2d::Zero());
    std::vector<Eigen::Vector3d> d_conic(ns, Eigen::Vector3d::Zero());  // (a, b, c)
    std::vector<Eigen::Vector3d> d_color(ns, Eigen::Vector3d::Zero());
    std::vector<double> d_opacity(ns, 0.0);

    const std::size_t npix = std::size_t(camera.width) * std::size_t(camera.height);
    std::vector<Contribution> contribs;
    for (std::size_t p = 0; p < npix; ++p) {
        const Eigen::Vector3d g = upstream.pixels.segment<3>(Eigen::Index(p) * 3).matrix();
        if (g.isZero(0.0)) continue;
        contribs.clear();
        const std::int32_t end = aux.pixel_offsets[p] + aux.processed[p];
        composite_pixel(aux, camera.width, p, end, [&](const Contribution& k) { contribs.push_back(k); });

        // C = sum_j c_j a_j T_j + T_final * bg, with dT_j/da_i = -T_j / (1 - a_i) for j > i.
        double behind = aux.final_transmittance[Eigen::Index(p)] * background.dot(g);
        for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
            const Contribution& k = *it;
            const ProjectedGaussian& sp = aux.splats[std::size_t(k.splat)];
            const double cg = sp.color.dot(g);
            const double d_alpha = k.trans * cg - behind / (1.0 - k.alpha);
            behind += cg * k.alpha * k.trans;
            d_color[std::size_t(k.splat)] += (k.alpha * k.trans) * g;
            if (k.saturated) continue;
            d_opacity[std::size_t(k.splat)] += k.gauss * d_alpha;
            const double d_power = sp.opacity * k.gauss * d_alpha;
            const double a = sp.conic(0, 0), b = sp.conic(0, 1), c = sp.conic(1, 1);
            d_mean2d[std::size_t(k.splat)] += d_power * Eigen::Vector2d(-a * k.dx - b * k.dy, -c * k.dy - b * k.dx);
            d_conic[std::size_t(k.splat)] +=
                d_power * Eigen::Vector3d(-0.5 * k.dx * k.dx, -k.dx * k.dy, -0.5 * k.dy * k.dy);
        }
    }

    const PhysicalAttributes act = activate(scene);
    const Eigen::Index n = scene.size();
    PhysicalAttributes d_act{RowsX3::Zero(n, 3), RowsX4::Zero(n, 4), Eigen::VectorXd::Zero(n)};
    RowsX3 d_means = RowsX3::Zero(n, 3);
    RowsXX d_sh = RowsXX::Zero(n, scene.sh.cols());
    const Eigen::Vector3d campos = camera.center();
    const int B = scene.basis_count();
    double basis[16];
    Eigen::Matrix<double, 16, 3> basis_jac;

    for (std::size_t s = 0; s < ns; ++s) {
        const ProjectedGaussian& sp = aux.splats[s];
        const Eigen::Index i = sp.index;
        const Eigen::Vector3d mu = scene.means.row(i).transpose();
        const Eigen::Vector3d pc = camera.rotation * mu + camera.translation;
        const double x = pc.x(), y = pc.y(), z = pc.z();

        // Color: view-dependent SH, clamped at zero per channel.
        const Eigen::Vector3d u = mu - campos;
        const double unorm = u.norm();
        const Eigen::Vector3d dir = u / unorm;
        sh_basis_jacobian(scene.sh_degree, dir, basis, basis_jac);
        Eigen::Vector3d raw_color = Eigen::Vector3d::Constant(0.5);
        for (int k = 0; k < B; ++k) raw_color += basis[k] * scene.sh.block<1, 3>(i, 3 * k).transpose();
        Eigen::Vector3d d_raw = d_color[s];
        for (int ch = 0; ch < 3; ++ch)
            if (raw_color[ch] < 0.0) d_raw[ch] = 0.0;
        Eigen::Vector3d d_dir = Eigen::Vector3d::Zero();
        for (int k = 0; k < B; ++k) {
            const Eigen::Vector3d coef = scene.sh.block<1, 3>(i, 3 * k).transpose();
            d_sh.block<1, 3>(i, 3 * k) = basis[k] * d_raw.transpose();
            d_dir += coef.dot(d_raw) * basis_jac.row(k).transpose();
        }
        Eigen::Vector3d d_mu = (d_dir - dir * dir.dot(d_dir)) / unorm;

        // Conic -> 2D covariance: dL/dCov = -conic * G * conic.
        Eigen::Matrix2d G_conic;
        G_conic << d_conic[s][0], 0.5 * d_conic[s][1], 0.5 * d_conic[s][1], d_conic[s][2];
        const Eigen::Matrix2d G_cov = -sp.conic * G_conic * sp.conic;

        // 2D covariance -> 3D covariance and projection Jacobian.
        const Eigen::Matrix3d Rq = quat_to_matrix(act.rotations.row(i).transpose());
        const Eigen::Vector3d scale = act.scales.row(i).transpose();
        const Eigen::Matrix3d M = Rq * scale.asDiagonal();
        const Eigen::Matrix3d sigma = M * M.transpose();
        const Eigen::Matrix<double, 2, 3> J = projection_jacobian(camera, pc);
        const Eigen::Matrix<double, 2, 3> T = J * camera.rotation;
        const Eigen::Matrix3d G_sigma = T.transpose() * G_cov * T;
        const Eigen::Matrix<double, 2, 3> G_T = 2.0 * G_cov * T * sigma;
        const Eigen::Matrix<double, 2, 3> G_J = G_T * camera.rotation.transpose();

        Eigen::Vector3d d_pc;
        const double fx = camera.fx, fy = camera.fy, z2 = z * z, z3 = z2 * z;
        d_pc.x() = d_mean2d[s].x() * fx / z - G_J(0, 2) * fx / z2;
        d_pc.y() = d_mean2d[s].y() * fy / z - G_J(1, 2) * fy / z2;
        d_pc.z() = -d_mean2d[s].x() * fx * x / z2 - d_mean2d[s].y() * fy * y / z2 - G_J(0, 0) * fx / z2 +
                   G_J(0, 2) * 2 * fx * x / z3 - G_J(1, 1) * fy / z2 + G_J(1, 2) * 2 * fy * y / z3;
        d_mu += camera.rotation.transpose() * d_pc;
        d_means.row(i) = d_mu.transpose();

        // Sigma = M M^T with M = Rq diag(scale).
        const Eigen::Matrix3d G_M = 2.0 * G_sigma * M;
        const Eigen::Matrix3d G_R = G_M * scale.asDiagonal();
        d_act.scales.row(i) = (G_M.cwiseProduct(Rq)).colwise().sum();
        d_act.rotations.row(i) = quat_to_matrix_backward(act.rotations.row(i).transpose(), G_R).transpose();
        d_act.opacities[i] = d_opacity[s];
    }

    SceneGradient grad = activate_backward(scene, d_act);
    grad.means = std::move(d_means);
    grad.sh = std::move(d_sh);
    return grad;
}

std::vector<std::int64_t> contribution_pattern(const GaussianScene& scene, const Camera& camera) {
    RenderAux aux = build_aux(scene, camera);
    std::vector<std::int64_t> out;
    const std::size_t npix = std::size_t(camera.width) * std::size_t(camera.height);
    for (std::size_t p = 0; p < npix; ++p) {
        composite_pixel(aux, camera.width, p, aux.pixel_offsets[p + 1], [&](const Contribution& k) {
            out.push_back(2 * aux.splats[std::size_t(k.splat)].index + (k.saturated ? 1 : 0));
        });
        out.push_back(-1);
    }
    return out;
}

Eigen::ArrayXXd render_depth(const GaussianScene& scene, const Camera& camera, double fallback) {
    RenderAux aux = build_aux(scene, camera);
    Eigen::ArrayXXd depth(camera.height, camera.width);
    const std::size_t npix = std::size_t(camera.width) * std::size_t(camera.height);
    for (std::size_t p = 0; p < npix; ++p) {
        double acc = 0.0, weighted = 0.0;
        composite_pixel(aux, camera.width, p, aux.pixel_offsets[p + 1], [&](const Contribution& k) {
            const double w = k.alpha * k.trans;
            acc += w;
            weighted += w * aux.splats[std::size_t(k.splat)].depth;
        });
        depth(Eigen::Index(p) / camera.width, Eigen::Index(p) % camera.width) =
            acc >= 0.5 ? weighted / acc : fallback;
    }
    return depth;
}

}  // namespace fsplat
