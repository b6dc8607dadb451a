// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/metagrad.hpp"

#include "fsplat/error.hpp"

#include <Eigen/QR>

#include <cmath>

namespace fsplat {

namespace {

double pairwise_sum(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return v[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

Eigen::VectorXd pairwise_sum(const std::vector<Eigen::VectorXd>& v, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return v[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

}  // namespace

double meta_loss(const std::vector<double>& anchor_losses) {
    check(!anchor_losses.empty(), Errc::EmptyAnchorSet, "meta_loss of an empty anchor list");
    return pairwise_sum(anchor_losses, 0, anchor_losses.size()) / double(anchor_losses.size());
}

Eigen::VectorXd pairwise_mean(const std::vector<Eigen::VectorXd>& vectors) {
    check(!vectors.empty(), Errc::EmptyAnchorSet, "mean of an empty gradient list");
    for (const auto& v : vectors)
        check(v.size() == vectors.front().size(), Errc::ShapeMismatch, "gradients differ in length");
    return pairwise_sum(vectors, 0, vectors.size()) / double(vectors.size());
}

Eigen::VectorXd metagrad_surrogate(const RefinementTrajectory& trajectory) {
    return pairwise_mean(trajectory.anchor_grads);
}

Eigen::VectorXd reptile_surrogate(const Eigen::VectorXd& g0, const Eigen::VectorXd& gk) {
    check(g0.size() == gk.size(), Errc::ShapeMismatch, "reptile_surrogate: layouts differ");
    return g0 - gk;
}

Eigen::VectorXd second_order_oracle(const Eigen::VectorXd& g0, const GradientFn& grad, double eta, int steps) {
    check(steps >= 0 && steps <= kOracleMaxSteps && g0.size() <= kOracleMaxDim, Errc::TooLarge,
          "second-order oracle limited to K <= 5 and 512 parameters");
    std::vector<Eigen::VectorXd> states{g0};
    for (int k = 0; k < steps; ++k) states.push_back(states.back() - eta * grad(states.back()));

    Eigen::VectorXd v = grad(states.back());
    for (int k = steps - 1; k >= 0; --k) {
        const Eigen::VectorXd& g = states[std::size_t(k)];
        const double norm = v.norm();
        if (norm == 0.0) break;
        const double eps = 1e-4 * (1.0 + g.cwiseAbs().maxCoeff());
        const Eigen::VectorXd u = v / norm;
        const Eigen::VectorXd hv = (grad(g + eps * u) - grad(g - eps * u)) * (norm / (2.0 * eps));
        if (!hv.allFinite()) throw Error(Errc::NonFiniteHvp, "non-finite Hessian-vector product at step " + std::to_string(k));
        v -= eta * hv;
    }
    return v;
}

double QuadraticTask::loss(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd d = x - target;
    return 0.5 * d.dot(a * d);
}

Eigen::VectorXd QuadraticTask::grad(const Eigen::VectorXd& x) const { return a * (x - target); }

Objective QuadraticTask::objective() const {
    const QuadraticTask task = *this;
    auto eval = [task](const Eigen::VectorXd& x) {
        Evaluation e;
        e.total = e.l1 = task.loss(x);
        e.grad = task.grad(x);
        return e;
    };
    Objective obj;
    obj.full = eval;
    obj.step = [eval](const Eigen::VectorXd& x, int) { return eval(x); };
    return obj;
}

QuadraticTask QuadraticTask::random(Rng& rng, Eigen::Index dim, double lambda_max) {
    Eigen::MatrixXd m(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r)
        for (Eigen::Index c = 0; c < dim; ++c) m(r, c) = rng.normal();
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
    Eigen::VectorXd eig(dim);
    for (Eigen::Index k = 0; k < dim; ++k) eig[k] = lambda_max * rng.uniform(0.05, 1.0);
    eig[0] = lambda_max;
    QuadraticTask task;
    task.a = q * eig.asDiagonal() * q.transpose();
    task.a = 0.5 * (task.a + task.a.transpose()).eval();
    task.target.resize(dim);
    for (Eigen::Index k = 0; k < dim; ++k) task.target[k] = rng.normal();
    return task;
}

const char* to_string(MetaRule rule) {
    switch (rule) {
        case MetaRule::MetaGrad: return "metagrad";
        case MetaRule::Reptile: return "reptile";
        case MetaRule::Vanilla: return "vanilla";
    }
    return "?";
}

MetaRule parse_rule(const std::string& text) {
    if (text == "metagrad") return MetaRule::MetaGrad;
    if (text == "reptile") return MetaRule::Reptile;
    if (text == "vanilla") return MetaRule::Vanilla;
    throw Error(Errc::BadConfig, "unknown rule '" + text + "'");
}

OuterGradients outer_gradients(const PredictorParams& params, const SceneInput& input, const OuterConfig& config,
                               Rng& horizon_rng, std::uint64_t view_seed) {
    check(config.lambda >= 0.0 && config.lambda <= 1.0, Errc::BadConfig, "lambda must lie in [0, 1]");
    OuterGradients out;
    OuterStepReport& report = out.report;

    const GaussianScene g0 = predict(params, input, config.stride);
    const ParamLayout layout = ParamLayout::of(g0);
    const Eigen::VectorXd x0 = flatten(g0).data;

    SplatObjectiveOptions so;
    so.background = config.background;
    so.w_ssim = config.w_ssim;
    so.views_per_step = config.views_per_step;
    so.seed = view_seed;
    const Objective objective = make_splat_objective(layout, input.views, so);

    // Immediate term: L_A(G_0) back through the renderer and the predictor.
    const Evaluation e0 = objective.full(x0);
    if (!std::isfinite(e0.total) || !e0.grad.allFinite())
        throw Error(Errc::NonFiniteLoss, "non-finite loss at inner step 0");
    report.loss_immediate = e0.total;
    out.immediate = predict_backward(params, input, config.stride, e0.grad);
    report.grad_norm_immediate = out.immediate.norm();

    const bool meta_weighted = config.rule != MetaRule::Vanilla && config.lambda < 1.0;
    const bool run_inner = config.rule != MetaRule::Vanilla && (meta_weighted || !config.skip_inner);
    if (run_inner) {
        RefinementOptions ro;
        ro.optimizer = InnerOptimizer::Adam;
        ro.adam_lr = expand_rates(layout, config.inner_rates);
        ro.horizon = sample_horizon(horizon_rng, config.k_min, config.k_max, config.delta);
        // Reptile only needs the end point; one anchor there keeps the report meaningful.
        ro.delta = config.rule == MetaRule::Reptile ? ro.horizon : config.delta;
        out.trajectory = run_refinement(x0, objective, ro);
        report.horizon = ro.horizon;
        report.anchors = int(out.trajectory.anchor_count());
        report.loss_meta = meta_loss(out.trajectory.anchor_losses);
        out.surrogate = config.rule == MetaRule::Reptile ? reptile_surrogate(x0, out.trajectory.final_state)
                                                         : metagrad_surrogate(out.trajectory);
        out.meta = predict_backward(params, input, config.stride, out.surrogate);
        report.grad_norm_meta = out.meta.norm();
    }

    if (config.rule == MetaRule::Vanilla || config.lambda == 1.0)
        out.combined = out.immediate;
    else if (config.lambda == 0.0)
        out.combined = out.meta;
    else
        out.combined = config.lambda * out.immediate + (1.0 - config.lambda) * out.meta;
    report.grad_norm_combined = out.combined.norm();
    return out;
}

OuterStepReport outer_iteration(PredictorParams& params, AdamState& outer, const SceneInput& input,
                                const OuterConfig& config, Rng& horizon_rng, std::uint64_t view_seed,
                                OuterGradients* inspect) {
    OuterGradients grads;
    try {
        grads = outer_gradients(params, input, config, horizon_rng, view_seed);
    } catch (const Error& e) {
        if (config.strict || e.code() != Errc::NonFiniteLoss) throw;
        OuterStepReport report;
        report.skipped = true;
        report.error = e.what();
        return report;
    }
    Eigen::VectorXd theta = params.pack();
    adam_step(theta, grads.combined, outer);
    params.unpack(theta);
    const OuterStepReport report = grads.report;
    if (inspect) *inspect = std::move(grads);
    return report;
}

}  // namespace fsplat
