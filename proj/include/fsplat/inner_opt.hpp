// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "fsplat/camera.hpp"
#include "fsplat/flat_params.hpp"
#include "fsplat/random.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace fsplat {

/// Per-attribute-block Adam learning rates for raw scene parameters.
struct BlockRates {
    double means = 1.6e-4;  // multiplied by the scene extent by the caller
    double scales = 5e-3;
    double rotations = 1e-3;
    double opacities = 5e-2;
    double sh = 2.5e-3;

    double of(Block b) const;
};

/// Expands block rates into one learning rate per flattened coordinate.
Eigen::VectorXd expand_rates(const ParamLayout& layout, const BlockRates& rates);

struct AdamState {
    Eigen::VectorXd m, v;
    Eigen::VectorXd lr;  // per coordinate
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    /// Fresh state with zero moments.
    static AdamState zeros(Eigen::VectorXd lr);
    static AdamState zeros(Eigen::Index n, double lr) { return zeros(Eigen::VectorXd::Constant(n, lr)); }
};

/// Bias-corrected Adam: params_i -= lr_i * m_hat_i / (sqrt(v_hat_i) + eps).
void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad, AdamState& state);

/// params - eta * grad. Throws BadRange when eta <= 0.
Eigen::VectorXd sgd_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grad, double eta);

/// K ~ U{k_min..k_max}. Throws BadRange when k_min > k_max or k_min < delta.
int sample_horizon(Rng& rng, int k_min, int k_max, int delta);

/// { k in [1, horizon] : k mod delta == 0 }. Throws EmptyAnchorSet when horizon < delta.
std::vector<int> anchor_set(int horizon, int delta);

/// Loss value and gradient at one parameter vector.
struct Evaluation {
    double l1 = 0.0;
    double dssim = 0.0;
    double total = 0.0;
    Eigen::VectorXd grad;
};

/// The host loss seen by the inner loop. `step` drives the update at step k
/// (1-based, possibly a minibatch); `full` is the loss sampled at anchors.
struct Objective {
    std::function<Evaluation(const Eigen::VectorXd&, int step)> step;
    std::function<Evaluation(const Eigen::VectorXd&)> full;
};

enum class InnerOptimizer { Adam, Sgd };

struct RefinementOptions {
    InnerOptimizer optimizer = InnerOptimizer::Adam;
    Eigen::VectorXd adam_lr;  // per coordinate (Adam)
    double sgd_eta = 1e-2;    // (SGD)
    int horizon = 0;
    int delta = 40;
};

struct StepLoss {
    double l1 = 0.0;
    double dssim = 0.0;
    double total = 0.0;
};

struct RefinementTrajectory {
    int horizon = 0;
    std::vector<int> anchor_steps;
    std::vector<Eigen::VectorXd> anchor_states;  // G_k, detached copies
    std::vector<Eigen::VectorXd> anchor_grads;   // grad of the full loss at G_k
    std::vector<double> anchor_losses;
    std::vector<StepLoss> per_step_loss;         // loss driving step k, k = 1..horizon
    Eigen::VectorXd final_state;                 // G_horizon

    std::size_t anchor_count() const { return anchor_steps.size(); }
};

/// Unrolls `options.horizon` inner steps from a copy of `initial`, with fresh
/// optimizer moments, caching state and full-loss gradient at every anchor.
/// Throws NonFiniteLoss (with the step index) on a non-finite loss.
RefinementTrajectory run_refinement(const Eigen::VectorXd& initial, const Objective& objective,
                                    const RefinementOptions& options);

/// Runs `steps` inner steps and returns only the final state. `on_step(k, state)`
/// is called before the first step (k = 0) and after every step.
Eigen::VectorXd refine(const Eigen::VectorXd& initial, const Objective& objective, const RefinementOptions& options,
                       int steps, const std::function<void(int, const Eigen::VectorXd&)>& on_step = {});

/// Photometric objective over a set of views for scenes with a fixed layout.
/// Step k renders `views_per_step` views (0 = all) drawn from a seeded
/// per-epoch permutation; `full` averages over every view.
struct SplatObjectiveOptions {
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    double w_ssim = 0.2;
    int views_per_step = 1;
    std::uint64_t seed = 0;
};

Objective make_splat_objective(const ParamLayout& layout, const std::vector<View>& views,
                               const SplatObjectiveOptions& options);

/// Mean photometric loss and raw-parameter gradient over `views`.
Evaluation evaluate_views(const GaussianScene& scene, const std::vector<View>& views, const std::vector<int>& which,
                          const Eigen::Vector3d& background, double w_ssim);

}  // namespace fsplat
