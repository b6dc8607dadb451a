// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/inner_opt.hpp"

#include "fsplat/error.hpp"
#include "fsplat/photometric.hpp"
#include "fsplat/renderer.hpp"

#include <cmath>
#include <memory>
#include <numeric>

namespace fsplat {

double BlockRates::of(Block b) const {
    switch (b) {
        case Block::Means: return means;
        case Block::Scales: return scales;
        case Block::Rotations: return rotations;
        case Block::Opacities: return opacities;
        case Block::Sh: return sh;
    }
    return 0.0;
}

Eigen::VectorXd expand_rates(const ParamLayout& layout, const BlockRates& rates) {
    Eigen::VectorXd lr(layout.total());
    for (int k = 0; k < kBlockCount; ++k) {
        const auto b = static_cast<Block>(k);
        lr.segment(layout.offset(b), layout.length(b)).setConstant(rates.of(b));
    }
    return lr;
}

AdamState AdamState::zeros(Eigen::VectorXd lr) {
    AdamState s;
    s.m = Eigen::VectorXd::Zero(lr.size());
    s.v = Eigen::VectorXd::Zero(lr.size());
    s.lr = std::move(lr);
    return s;
}

void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad, AdamState& s) {
    check(params.size() == grad.size() && s.m.size() == grad.size() && s.v.size() == grad.size() &&
              s.lr.size() == grad.size(),
          Errc::ShapeMismatch, "adam_step: parameter, gradient and state sizes differ");
    ++s.t;
    s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
    s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(s.beta1, double(s.t));
    const double bc2 = 1.0 - std::pow(s.beta2, double(s.t));
    params.array() -= s.lr.array() * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + s.eps);
}

Eigen::VectorXd sgd_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grad, double eta) {
    check(params.size() == grad.size(), Errc::ShapeMismatch, "sgd_step: sizes differ");
    check(eta > 0.0, Errc::BadRange, "sgd_step: eta must be positive");
    return params - eta * grad;
}

int sample_horizon(Rng& rng, int k_min, int k_max, int delta) {
    check(k_min <= k_max, Errc::BadRange,
          "k_min " + std::to_string(k_min) + " > k_max " + std::to_string(k_max));
    check(delta >= 1 && k_min >= delta, Errc::BadRange,
          "k_min " + std::to_string(k_min) + " < anchor stride " + std::to_string(delta));
    return static_cast<int>(rng.uniform_int(k_min, k_max));
}

std::vector<int> anchor_set(int horizon, int delta) {
    check(delta >= 1, Errc::BadRange, "anchor stride must be >= 1");
    check(horizon >= delta, Errc::EmptyAnchorSet,
          "horizon " + std::to_string(horizon) + " < stride " + std::to_string(delta));
    std::vector<int> out;
    out.reserve(std::size_t(horizon / delta));
    for (int k = delta; k <= horizon; k += delta) out.push_back(k);
    return out;
}

namespace {

void require_finite(const Evaluation& e, int step) {
    if (!std::isfinite(e.total) || !e.grad.allFinite())
        throw Error(Errc::NonFiniteLoss, "non-finite loss or gradient at inner step " + std::to_string(step));
}

class InnerStepper {
public:
    InnerStepper(Eigen::Index n, const RefinementOptions& o) : options_(o) {
        if (o.optimizer == InnerOptimizer::Adam) {
            check(o.adam_lr.size() == n, Errc::ShapeMismatch, "adam learning rates do not match parameter count");
            adam_ = AdamState::zeros(o.adam_lr);
        } else {
            check(o.sgd_eta > 0.0, Errc::BadRange, "sgd eta must be positive");
        }
    }

    void apply(Eigen::VectorXd& state, const Eigen::VectorXd& grad) {
        if (options_.optimizer == InnerOptimizer::Adam)
            adam_step(state, grad, adam_);
        else
            state = sgd_step(state, grad, options_.sgd_eta);
    }

private:
    const RefinementOptions& options_;
    AdamState adam_;
};

}  // namespace

RefinementTrajectory run_refinement(const Eigen::VectorXd& initial, const Objective& objective,
                                    const RefinementOptions& options) {
    RefinementTrajectory traj;
    traj.horizon = options.horizon;
    traj.anchor_steps = anchor_set(options.horizon, options.delta);
    traj.per_step_loss.reserve(std::size_t(options.horizon));

    Eigen::VectorXd state = initial;  // detached: only values flow into the inner loop
    InnerStepper stepper(state.size(), options);
    std::size_t next_anchor = 0;
    for (int k = 1; k <= options.horizon; ++k) {
        const Evaluation e = objective.step(state, k);
        require_finite(e, k);
        traj.per_step_loss.push_back({e.l1, e.dssim, e.total});
        stepper.apply(state, e.grad);
        if (next_anchor < traj.anchor_steps.size() && traj.anchor_steps[next_anchor] == k) {
            Evaluation a = objective.full(state);
            require_finite(a, k);
            traj.anchor_states.push_back(state);
            traj.anchor_grads.push_back(std::move(a.grad));
            traj.anchor_losses.push_back(a.total);
            ++next_anchor;
        }
    }
    traj.final_state = std::move(state);
    return traj;
}

Eigen::VectorXd refine(const Eigen::VectorXd& initial, const Objective& objective, const RefinementOptions& options,
                       int steps, const std::function<void(int, const Eigen::VectorXd&)>& on_step) {
    Eigen::VectorXd state = initial;
    InnerStepper stepper(state.size(), options);
    if (on_step) on_step(0, state);
    for (int k = 1; k <= steps; ++k) {
        const Evaluation e = objective.step(state, k);
        require_finite(e, k);
        stepper.apply(state, e.grad);
        if (on_step) on_step(k, state);
    }
    return state;
}

Evaluation evaluate_views(const GaussianScene& scene, const std::vector<View>& views, const std::vector<int>& which,
                          const Eigen::Vector3d& background, double w_ssim) {
    check(!which.empty(), Errc::ShapeMismatch, "no views to evaluate");
    Evaluation out;
    SceneGradient grad = SceneGradient::zeros(scene.size(), scene.sh_degree);
    for (int v : which) {
        const View& view = views[std::size_t(v)];
        RenderOutput r = render_forward(scene, view.camera, background);
        const LossBreakdown loss = photometric_loss(r.image, view.image, w_ssim);
        out.l1 += loss.l1;
        out.dssim += loss.dssim;
        out.total += loss.total;
        grad += render_backward(scene, view.camera, background, r.aux, loss.grad_image);
    }
    const double inv = 1.0 / double(which.size());
    out.l1 *= inv;
    out.dssim *= inv;
    out.total *= inv;
    grad *= inv;
    out.grad = flatten(grad).data;
    return out;
}

Objective make_splat_objective(const ParamLayout& layout, const std::vector<View>& views,
                               const SplatObjectiveOptions& options) {
    check(!views.empty(), Errc::ShapeMismatch, "objective needs at least one view");
    auto shared = std::make_shared<const std::vector<View>>(views);
    const int nviews = int(views.size());
    const int per_step = options.views_per_step <= 0 ? nviews : std::min(options.views_per_step, nviews);

    Objective obj;
    obj.full = [shared, layout, options, nviews](const Eigen::VectorXd& x) {
        std::vector<int> all(static_cast<std::size_t>(nviews));
        std::iota(all.begin(), all.end(), 0);
        return evaluate_views(unflatten(x, layout), *shared, all, options.background, options.w_ssim);
    };
    obj.step = [shared, layout, options, nviews, per_step](const Eigen::VectorXd& x, int step) {
        // Slots (step-1)*per_step ... step*per_step-1 of a stream of per-epoch permutations.
        std::vector<int> which;
        for (int j = 0; j < per_step; ++j) {
            const std::int64_t slot = std::int64_t(step - 1) * per_step + j;
            const std::int64_t epoch = slot / nviews;
            std::vector<int> perm(static_cast<std::size_t>(nviews));
            std::iota(perm.begin(), perm.end(), 0);
            Rng rng = Rng::stream(options.seed, std::uint64_t(epoch));
            for (int i = nviews - 1; i > 0; --i) std::swap(perm[std::size_t(i)], perm[std::size_t(rng.uniform_int(0, i))]);
            which.push_back(perm[std::size_t(slot % nviews)]);
        }
        return evaluate_views(unflatten(x, layout), *shared, which, options.background, options.w_ssim);
    };
    return obj;
}

}  // namespace fsplat
