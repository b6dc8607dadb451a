// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/checks.hpp"

#include "fsplat/flat_params.hpp"
#include "fsplat/inner_opt.hpp"
#include "fsplat/metagrad.hpp"
#include "fsplat/photometric.hpp"
#include "fsplat/predictor.hpp"
#include "fsplat/renderer.hpp"

#include <cmath>
#include <cstdio>

namespace fsplat {

namespace {

constexpr double kFdFloor = 1e-8;
constexpr double kFirstStep = 1e-3;
constexpr double kLastStep = 1e-9;

struct Tally {
    CheckReport report;
    double tolerance;

    void compare(double analytic, double fd) {
        if (std::abs(fd) <= kFdFloor) return;
        const double rel = std::abs(analytic - fd) / std::max(std::abs(analytic), std::abs(fd));
        ++report.checked;
        report.worst = std::max(report.worst, rel);
        if (!(rel < tolerance)) ++report.failed;
    }

    CheckReport done() {
        report.passed = report.failed == 0 && report.checked > 0;
        return report;
    }
};

double raw_for_scale(double s) {
    const double y = s / kScaleFactor;
    return y + std::log(-std::expm1(-y));
}

GaussianScene small_scene(Rng& rng, Eigen::Index n, int degree) {
    GaussianScene s = GaussianScene::zeros(n, degree);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) s.means(i, k) = rng.uniform(-0.5, 0.5);
        for (int k = 0; k < 3; ++k) s.raw_scales(i, k) = raw_for_scale(rng.uniform(0.05, 0.2));
        for (int k = 0; k < 4; ++k) s.raw_rotations(i, k) = rng.normal();
        s.raw_opacities[i] = rng.uniform(-1.5, 1.5);
        for (Eigen::Index k = 0; k < s.sh.cols(); ++k) s.sh(i, k) = rng.uniform(-0.4, 0.4);
    }
    return s;
}

Camera small_camera(int size) {
    return Camera::look_at(Eigen::Vector3d(0.3, -0.2, -3.0), Eigen::Vector3d::Zero(), Eigen::Vector3d(0, -1, 0), 0.9,
                           size, size);
}

Image random_image(Rng& rng, int w, int h, double lo, double hi) {
    Image img(w, h);
    for (Eigen::Index k = 0; k < img.pixels.size(); ++k) img.pixels[k] = rng.uniform(lo, hi);
    return img;
}

}  // namespace

CheckReport gradcheck_activation(std::uint64_t seed, int points) {
    Tally t{{"activation", false, 0, 0, 0.0, ""}, 1e-5};
    Rng rng = Rng::stream(seed, 11);
    const double h = 1e-6;
    for (int p = 0; p < points; ++p) {
        GaussianScene s = small_scene(rng, 1, 0);
        s.raw_scales(0, 0) = rng.uniform(-3.0, 250.0);
        PhysicalAttributes up{RowsX3(1, 3), RowsX4(1, 4), Eigen::VectorXd(1)};
        for (int k = 0; k < 3; ++k) up.scales(0, k) = rng.normal();
        for (int k = 0; k < 4; ++k) up.rotations(0, k) = rng.normal();
        up.opacities[0] = rng.normal();
        auto f = [&](const GaussianScene& x) {
            const PhysicalAttributes a = activate(x);
            return (a.scales.array() * up.scales.array()).sum() + (a.rotations.array() * up.rotations.array()).sum() +
                   a.opacities.dot(up.opacities);
        };
        const GaussianScene g = activate_backward(s, up);
        auto probe = [&](double& field, double analytic, bool skip) {
            if (skip) return;
            const double keep = field;
            const double step = h * std::max(1.0, std::abs(keep));
            field = keep + step;
            const double fp = f(s);
            field = keep - step;
            const double fm = f(s);
            field = keep;
            t.compare(analytic, (fp - fm) / (2 * step));
        };
        for (int k = 0; k < 3; ++k) {
            const double r = s.raw_scales(0, k);
            const bool near_clamp = std::abs(kScaleFactor * softplus(r) - kScaleClamp) < 1e-6 * std::max(1.0, r);
            probe(s.raw_scales(0, k), g.raw_scales(0, k), near_clamp);
        }
        for (int k = 0; k < 4; ++k) probe(s.raw_rotations(0, k), g.raw_rotations(0, k), false);
        probe(s.raw_opacities[0], g.raw_opacities[0], false);
    }
    return t.done();
}

CheckReport gradcheck_renderer(std::uint64_t seed, int scenes) {
    Tally t{{"renderer", false, 0, 0, 0.0, ""}, 1e-3};
    int shrunk = 0, unresolved = 0;
    for (int sc = 0; sc < scenes; ++sc) {
        Rng rng = Rng::stream(seed, 100 + std::uint64_t(sc));
        const Camera cam = small_camera(16);
        const GaussianScene s = small_scene(rng, 8, 1);
        const Eigen::Vector3d bg(rng.uniform(), rng.uniform(), rng.uniform());
        const Image w = random_image(rng, 16, 16, -1.0, 1.0);
        const ParamLayout layout = ParamLayout::of(s);
        const Eigen::VectorXd x = flatten(s).data;
        const RenderOutput r = render_forward(s, cam, bg);
        const Eigen::VectorXd g = flatten(render_backward(s, cam, bg, r.aux, w)).data;
        const auto pattern = contribution_pattern(s, cam);

        for (Eigen::Index k = 0; k < x.size(); ++k) {
            // five-point stencil; every sample must composite the same Gaussians as x
            double h = kFirstStep;
            Eigen::VectorXd probe = x;
            auto at = [&](double off) {
                probe[k] = x[k] + off;
                return unflatten(probe, layout);
            };
            for (; h >= kLastStep; h *= 0.1) {
                bool same = true;
                for (double off : {-2 * h, -h, h, 2 * h}) same = same && contribution_pattern(at(off), cam) == pattern;
                if (same) break;
            }
            if (h < kLastStep) {
                ++unresolved;
                continue;
            }
            if (h < kFirstStep) ++shrunk;
            auto f = [&](double off) { return (render_forward(at(off), cam, bg).image.pixels * w.pixels).sum(); };
            t.compare(g[k], (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h));
        }
    }
    t.report.note = std::to_string(shrunk) + " steps shrunk at compositing thresholds, " + std::to_string(unresolved) +
                    " coordinates on a threshold";
    return t.done();
}

CheckReport gradcheck_photometric(std::uint64_t seed, int pairs) {
    Tally t{{"photometric", false, 0, 0, 0.0, ""}, 1e-4};
    for (int p = 0; p < pairs; ++p) {
        Rng rng = Rng::stream(seed, 200 + std::uint64_t(p));
        const Image a = random_image(rng, 16, 16, 0.0, 1.0);
        const Image b = random_image(rng, 16, 16, 0.0, 1.0);
        const double w = p == 0 ? 0.0 : rng.uniform(0.1, 1.0);
        const LossBreakdown lb = photometric_loss(a, b, w);
        Image probe = a;
        const double h = 1e-4;
        auto f = [&](Eigen::Index k, double off) {
            probe.pixels[k] = a.pixels[k] + off;
            const double v = photometric_loss(probe, b, w).total;
            probe.pixels[k] = a.pixels[k];
            return v;
        };
        for (Eigen::Index k = 0; k < a.pixels.size(); ++k) {
            // L1 kink inside the stencil
            if (std::abs(a.pixels[k] - b.pixels[k]) < 3 * h) continue;
            const double fd = (f(k, -2 * h) - 8 * f(k, -h) + 8 * f(k, h) - f(k, 2 * h)) / (12 * h);
            t.compare(lb.grad_image.pixels[k], fd);
        }
    }
    return t.done();
}

CheckReport gradcheck_predictor(std::uint64_t seed, int trials) {
    Tally t{{"predictor", false, 0, 0, 0.0, ""}, 1e-4};
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng = Rng::stream(seed, 300 + std::uint64_t(trial));
        SceneInput in;
        for (int v = 0; v < 2; ++v) {
            const Camera cam = Camera::look_at(Eigen::Vector3d(2.0 * std::cos(v), 0.5, 2.0 * std::sin(v)),
                                               Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY(), 0.9, 8, 8);
            in.views.push_back(View{cam, random_image(rng, 8, 8, 0.0, 1.0)});
            Eigen::ArrayXXd d(8, 8);
            for (Eigen::Index k = 0; k < d.size(); ++k) d.data()[k] = rng.uniform(1.5, 2.5);
            in.seed_depths.push_back(d);
        }
        const int stride = 2;
        PredictorShape shape;
        shape.sh_degree = 1;
        shape.hidden = 6;
        shape.gain = {1.0, 3.0, 1.0, 1.0, 1.0};
        PredictorParams p = init_params(rng, PredictorMode::ConditionalHead, shape);
        Eigen::VectorXd theta = p.pack();
        for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] = 0.5 * rng.normal();
        p.unpack(theta);
        const Eigen::Index total = ParamLayout{predicted_count(in, stride), 1}.total();
        Eigen::VectorXd surrogate(total);
        for (Eigen::Index k = 0; k < total; ++k) surrogate[k] = rng.normal();
        const Eigen::VectorXd g = predict_backward(p, in, stride, surrogate);
        PredictorParams q = p;
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
            const double h = 1e-6;
            Eigen::VectorXd tp = theta, tm = theta;
            tp[k] += h;
            tm[k] -= h;
            q.unpack(tp);
            const double fp = surrogate.dot(flatten(predict(q, in, stride)).data);
            q.unpack(tm);
            const double fm = surrogate.dot(flatten(predict(q, in, stride)).data);
            t.compare(g[k], (fp - fm) / (2 * h));
        }
    }
    return t.done();
}

namespace {

Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& m, int k) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Identity(m.rows(), m.cols());
    for (int i = 0; i < k; ++i) out = out * m;
    return out;
}

double relative(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double denom = std::max(a.norm(), b.norm());
    return denom == 0.0 ? 0.0 : (a - b).norm() / denom;
}

}  // namespace

CheckReport selftest_second_order(std::uint64_t seed, int tasks) {
    CheckReport r{"second-order oracle", false, 0, 0, 0.0, ""};
    for (int t = 0; t < tasks; ++t) {
        Rng rng = Rng::stream(seed, 400 + std::uint64_t(t));
        const Eigen::Index dim = rng.uniform_int(2, 64);
        const QuadraticTask task = QuadraticTask::random(rng, dim, 1.0);
        const double eta = rng.uniform(0.05, 0.49);
        const int steps = int(rng.uniform_int(1, 3));
        Eigen::VectorXd g0(dim);
        for (Eigen::Index k = 0; k < dim; ++k) g0[k] = rng.normal();
        const Eigen::MatrixXd step = Eigen::MatrixXd::Identity(dim, dim) - eta * task.a;
        const Eigen::VectorXd gk = task.target + matrix_power(step, steps) * (g0 - task.target);
        const Eigen::VectorXd closed = matrix_power(step, steps) * task.a * (gk - task.target);
        const Eigen::VectorXd oracle =
            second_order_oracle(g0, [&](const Eigen::VectorXd& x) { return task.grad(x); }, eta, steps);
        const double rel = relative(oracle, closed);
        ++r.checked;
        r.worst = std::max(r.worst, rel);
        if (!(rel < 1e-6)) ++r.failed;
    }
    r.passed = r.failed == 0;
    return r;
}

CheckReport selftest_first_order(std::uint64_t seed, int tasks) {
    CheckReport r{"first-order surrogates", false, 0, 0, 0.0, ""};
    for (int t = 0; t < tasks; ++t) {
        Rng rng = Rng::stream(seed, 500 + std::uint64_t(t));
        const Eigen::Index dim = rng.uniform_int(2, 64);
        const QuadraticTask task = QuadraticTask::random(rng, dim, 1.0);
        const double eta = rng.uniform(0.05, 0.49);
        const int steps = int(rng.uniform_int(1, 3));
        Eigen::VectorXd g0(dim);
        for (Eigen::Index k = 0; k < dim; ++k) g0[k] = rng.normal();

        RefinementOptions ro;
        ro.optimizer = InnerOptimizer::Sgd;
        ro.sgd_eta = eta;
        ro.horizon = steps;
        ro.delta = steps;
        const RefinementTrajectory traj = run_refinement(g0, task.objective(), ro);
        const Eigen::MatrixXd pk = matrix_power(Eigen::MatrixXd::Identity(dim, dim) - eta * task.a, steps);
        const Eigen::VectorXd gk = task.target + pk * (g0 - task.target);

        const double fomaml = relative(metagrad_surrogate(traj), task.a * (gk - task.target));
        const double reptile = relative(reptile_surrogate(g0, traj.final_state),
                                        (Eigen::MatrixXd::Identity(dim, dim) - pk) * (g0 - task.target));
        r.checked += 2;
        r.worst = std::max({r.worst, fomaml, reptile});
        if (!(fomaml < 1e-10)) ++r.failed;
        if (!(reptile < 1e-10)) ++r.failed;
    }
    r.passed = r.failed == 0;
    return r;
}

CheckReport selftest_anchor_sets() {
    CheckReport r{"anchor sets", false, 0, 0, 0.0, ""};
    for (int delta = 1; delta <= 100; ++delta) {
        for (int k = delta; k <= 1000; ++k) {
            const auto a = anchor_set(k, delta);
            ++r.checked;
            bool ok = int(a.size()) == k / delta;
            for (std::size_t i = 0; ok && i < a.size(); ++i) ok = a[i] == int(i + 1) * delta;
            if (!ok) ++r.failed;
        }
    }
    r.passed = r.failed == 0 && anchor_set(200, 40) == std::vector<int>{40, 80, 120, 160, 200};
    return r;
}

std::vector<CheckReport> run_gradcheck(std::uint64_t seed) {
    return {gradcheck_activation(seed), gradcheck_renderer(seed), gradcheck_photometric(seed), gradcheck_predictor(seed)};
}

std::vector<CheckReport> run_selftest(std::uint64_t seed) {
    return {selftest_second_order(seed), selftest_first_order(seed), selftest_anchor_sets()};
}

}  // namespace fsplat
