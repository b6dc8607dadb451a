// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "fsplat/camera.hpp"
#include "fsplat/flat_params.hpp"
#include "fsplat/random.hpp"
#include "fsplat/scene.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace fsplat {

/// Input views for one scene plus a per-pixel seed depth for each view.
struct SceneInput {
    std::vector<View> views;
    std::vector<Eigen::ArrayXXd> seed_depths;  // height x width per view

    bool consistent() const;
};

enum class PredictorMode : std::uint8_t { ConditionalHead = 0, SharedInit = 1 };

constexpr int kPixelFeatures = 7;  // rgb, world ray direction, seed depth

/// Weights of the feed-forward head.
///
/// ConditionalHead: per-pixel two-layer MLP, out = gain * (W2 tanh(W1 f + b1) + b2),
/// producing a residual on top of the default Gaussian for that pixel.
/// SharedInit: one raw-attribute vector per Gaussian slot, independent of the input.
struct PredictorParams {
    PredictorMode mode = PredictorMode::ConditionalHead;
    int sh_degree = 1;
    int hidden = 32;
    std::int64_t slots = 0;  // SharedInit only

    Eigen::MatrixXd w1;  // hidden x 7
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // output x hidden
    Eigen::VectorXd b2;
    /// Fixed (non-trained) output multipliers per attribute block.
    std::array<double, kBlockCount> gain{1.0, 1.0, 1.0, 1.0, 1.0};

    Eigen::VectorXd shared;  // SharedInit: flattened scene of `slots` Gaussians

    int output_width() const { return 11 + 3 * sh_basis_count(sh_degree); }

    /// Trainable weights as one vector (w1, b1, w2, b2 row-major, or the shared scene).
    Eigen::VectorXd pack() const;
    void unpack(const Eigen::VectorXd& theta);
    Eigen::Index parameter_count() const;

    bool operator==(const PredictorParams& other) const;
};

struct PredictorShape {
    int sh_degree = 1;
    int hidden = 32;
    std::int64_t slots = 0;
    std::array<double, kBlockCount> gain{1.0, 1.0, 1.0, 1.0, 1.0};
};

/// Hidden weights ~ U(+-sqrt(6 / (7 + hidden))), hidden bias and output layer zero.
/// SharedInit slots start as near-identity Gaussians spread in the unit ball.
PredictorParams init_params(Rng& rng, PredictorMode mode, const PredictorShape& shape);

/// Number of Gaussians predicted for `input` at `stride`.
Eigen::Index predicted_count(const SceneInput& input, int stride);

/// Default Gaussian for a pixel: unprojected at the seed depth, raw scale 0,
/// identity quaternion, opacity logit 0, DC color equal to the pixel RGB.
GaussianScene default_construction(const SceneInput& input, int stride, int sh_degree);

/// One Gaussian per pixel at `stride` in every view. Throws BadStride for stride < 1.
GaussianScene predict(const PredictorParams& params, const SceneInput& input, int stride);

/// surrogate_grad . d predict / d theta, returned in `pack()` order.
Eigen::VectorXd predict_backward(const PredictorParams& params, const SceneInput& input, int stride,
                                 const Eigen::VectorXd& surrogate_grad);

/// "FSPP" checkpoint: u32 version, u8 mode, u32 input/hidden/output widths,
/// u32 sh_degree, u64 slots, 5 x f64 gains, u64 weight count, f64 weights.
std::vector<std::uint8_t> encode_checkpoint(const PredictorParams& params);
PredictorParams decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const PredictorParams& params);
PredictorParams load_checkpoint(const std::filesystem::path& path);

}  // namespace fsplat
