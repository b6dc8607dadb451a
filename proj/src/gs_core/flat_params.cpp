// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/flat_params.hpp"

#include "fsplat/error.hpp"

namespace fsplat {

Eigen::Index ParamLayout::width(Block b) const {
    switch (b) {
        case Block::Means: return 3;
        case Block::Scales: return 3;
        case Block::Rotations: return 4;
        case Block::Opacities: return 1;
        case Block::Sh: return 3 * sh_basis_count(sh_degree);
    }
    return 0;
}

Eigen::Index ParamLayout::offset(Block b) const {
    Eigen::Index off = 0;
    for (int k = 0; k < static_cast<int>(b); ++k) off += length(static_cast<Block>(k));
    return off;
}

FlatParams flatten(const GaussianScene& scene) {
    check(scene.consistent(), Errc::LayoutMismatch, "inconsistent scene");
    FlatParams flat;
    flat.layout = ParamLayout::of(scene);
    const auto& L = flat.layout;
    flat.data.resize(L.total());
    // Row-major storage makes each block a contiguous copy.
    auto put = [&](Block b, const double* src) {
        std::copy(src, src + L.length(b), flat.data.data() + L.offset(b));
    };
    put(Block::Means, scene.means.data());
    put(Block::Scales, scene.raw_scales.data());
    put(Block::Rotations, scene.raw_rotations.data());
    put(Block::Opacities, scene.raw_opacities.data());
    put(Block::Sh, scene.sh.data());
    return flat;
}

GaussianScene unflatten(const Eigen::VectorXd& data, const ParamLayout& L) {
    check(L.count >= 0 && L.sh_degree >= 0 && L.sh_degree <= kMaxShDegree, Errc::LayoutMismatch,
          "invalid layout");
    check(data.size() == L.total(), Errc::LayoutMismatch,
          "vector length " + std::to_string(data.size()) + " != layout total " + std::to_string(L.total()));
    GaussianScene s = GaussianScene::zeros(L.count, L.sh_degree);
    auto get = [&](Block b, double* dst) {
        const double* src = data.data() + L.offset(b);
        std::copy(src, src + L.length(b), dst);
    };
    get(Block::Means, s.means.data());
    get(Block::Scales, s.raw_scales.data());
    get(Block::Rotations, s.raw_rotations.data());
    get(Block::Opacities, s.raw_opacities.data());
    get(Block::Sh, s.sh.data());
    return s;
}

}  // namespace fsplat
