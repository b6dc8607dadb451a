// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "fsplat/scene.hpp"

#include <Eigen/Core>

#include <array>

namespace fsplat {

enum class Block : int { Means = 0, Scales = 1, Rotations = 2, Opacities = 3, Sh = 4 };
constexpr int kBlockCount = 5;

/// Block-contiguous layout of a flattened scene: all means, then all raw scales,
/// raw rotations, raw opacities and SH coefficients.
struct ParamLayout {
    Eigen::Index count = 0;
    int sh_degree = 1;

    static ParamLayout of(const GaussianScene& scene) { return {scene.size(), scene.sh_degree}; }

    Eigen::Index width(Block b) const;
    Eigen::Index offset(Block b) const;
    Eigen::Index length(Block b) const { return count * width(b); }
    Eigen::Index total() const { return offset(Block::Sh) + length(Block::Sh); }
    Eigen::Index per_gaussian() const { return 11 + 3 * sh_basis_count(sh_degree); }

    bool operator==(const ParamLayout&) const = default;
};

struct FlatParams {
    Eigen::VectorXd data;
    ParamLayout layout;
};

FlatParams flatten(const GaussianScene& scene);

/// Throws LayoutMismatch when `data.size()` disagrees with `layout`.
GaussianScene unflatten(const Eigen::VectorXd& data, const ParamLayout& layout);
inline GaussianScene unflatten(const FlatParams& flat) { return unflatten(flat.data, flat.layout); }

}  // namespace fsplat
