// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "fsplat/inner_opt.hpp"
#include "fsplat/predictor.hpp"
#include "fsplat/random.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace fsplat {

/// Mean of the anchor losses. Throws EmptyAnchorSet on an empty list.
double meta_loss(const std::vector<double>& anchor_losses);

/// Mean of equally shaped vectors, summed pairwise in list order.
Eigen::VectorXd pairwise_mean(const std::vector<Eigen::VectorXd>& vectors);

/// Mean of the anchor gradients of a trajectory, to be attached at G_0.
Eigen::VectorXd metagrad_surrogate(const RefinementTrajectory& trajectory);

/// G_0 - G_K.
Eigen::VectorXd reptile_surrogate(const Eigen::VectorXd& g0, const Eigen::VectorXd& gk);

using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// d L(G_K) / d G_0 for K plain gradient steps of size eta, propagated back
/// through every step with finite-difference Hessian-vector products.
/// Test fixture only: throws TooLarge for K > 5 or more than 512 parameters.
Eigen::VectorXd second_order_oracle(const Eigen::VectorXd& g0, const GradientFn& grad, double eta, int steps);

constexpr int kOracleMaxSteps = 5;
constexpr Eigen::Index kOracleMaxDim = 512;

/// L(G) = 1/2 (G - g*)^T A (G - g*) with A symmetric positive definite.
struct QuadraticTask {
    Eigen::MatrixXd a;
    Eigen::VectorXd target;

    double loss(const Eigen::VectorXd& x) const;
    Eigen::VectorXd grad(const Eigen::VectorXd& x) const;
    /// Both step and full evaluate the exact loss.
    Objective objective() const;

    /// Random SPD task whose largest eigenvalue is `lambda_max`.
    static QuadraticTask random(Rng& rng, Eigen::Index dim, double lambda_max);
};

enum class MetaRule { MetaGrad, Reptile, Vanilla };

const char* to_string(MetaRule rule);
MetaRule parse_rule(const std::string& text);

struct OuterConfig {
    MetaRule rule = MetaRule::MetaGrad;
    double lambda = 0.0;
    int k_min = 50;
    int k_max = 500;
    int delta = 40;
    BlockRates inner_rates;  // means rate already scaled by the scene extent
    int stride = 4;
    double w_ssim = 0.2;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    int views_per_step = 1;
    bool skip_inner = false;  // only honoured when the meta term has zero weight
    bool strict = true;
};

struct OuterStepReport {
    double loss_immediate = 0.0;  // L_A(G_0) over the supervision views
    double loss_meta = 0.0;       // mean anchor loss (final loss for Reptile)
    int horizon = 0;
    int anchors = 0;
    double grad_norm_immediate = 0.0;
    double grad_norm_meta = 0.0;
    double grad_norm_combined = 0.0;
    bool skipped = false;
    std::string error;
};

struct OuterGradients {
    Eigen::VectorXd immediate;  // g_imm
    Eigen::VectorXd surrogate;  // on G_0 (empty for vanilla / skipped inner loop)
    Eigen::VectorXd meta;       // g_meta
    Eigen::VectorXd combined;   // g_Theta
    RefinementTrajectory trajectory;
    OuterStepReport report;
};

/// Everything one training iteration computes before the outer update, for one scene.
/// `horizon_rng` supplies K; `view_seed` drives the inner minibatch order.
OuterGradients outer_gradients(const PredictorParams& params, const SceneInput& input, const OuterConfig& config,
                               Rng& horizon_rng, std::uint64_t view_seed);

/// One outer iteration: gradients, then a single Adam step on the packed weights.
/// In lenient mode a NonFiniteLoss is recorded in the report and the update skipped.
OuterStepReport outer_iteration(PredictorParams& params, AdamState& outer, const SceneInput& input,
                                const OuterConfig& config, Rng& horizon_rng, std::uint64_t view_seed,
                                OuterGradients* inspect = nullptr);

}  // namespace fsplat
