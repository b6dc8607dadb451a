// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/error.hpp"
#include "fsplat/harness.hpp"
#include "fsplat/renderer.hpp"
#include "fsplat/scene_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace fsplat {

namespace {

constexpr double kRingHeight = 0.3;  // times ring radius

double inverse_softplus(double y) { return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

std::string scene_file_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%05d.fspl", id);
    return buf;
}

}  // namespace

std::vector<Camera> ring_cameras(const TrainConfig& config) {
    std::vector<Camera> cams;
    for (int i = 0; i < config.views; ++i) {
        const double theta = 2.0 * std::numbers::pi * i / config.views;
        const Eigen::Vector3d eye(config.ring_radius * std::cos(theta), kRingHeight * config.ring_radius,
                                  config.ring_radius * std::sin(theta));
        cams.push_back(Camera::look_at(eye.normalized() * config.ring_radius, Eigen::Vector3d::Zero(),
                                       Eigen::Vector3d::UnitY(), config.fov, config.image_size, config.image_size));
    }
    return cams;
}

GaussianScene synthetic_truth(const TrainConfig& config, int id) {
    Rng rng = Rng::stream(config.data_seed, 2 * std::uint64_t(id));
    GaussianScene s = GaussianScene::zeros(config.gaussians, config.sh_degree);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        Eigen::Vector3d m;
        do {
            m = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        } while (m.squaredNorm() > 1.0);
        s.means.row(i) = config.extent * m.transpose();
        for (int k = 0; k < 3; ++k) s.raw_scales(i, k) = inverse_softplus(rng.uniform(0.01, 0.08) / kScaleFactor);
        Eigen::Vector4d q;
        do {
            q = Eigen::Vector4d(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        } while (q.norm() < 1e-3);
        s.raw_rotations.row(i) = q.normalized().transpose();
        s.raw_opacities[i] = logit(rng.uniform(0.3, 0.95));
        for (Eigen::Index k = 0; k < s.sh.cols(); ++k) s.sh(i, k) = rng.uniform(-0.5, 0.5);
    }
    return s;
}

SyntheticScene make_scene(const TrainConfig& config, int id, GaussianScene truth) {
    SyntheticScene out;
    out.id = id;
    out.truth = std::move(truth);
    const Eigen::Vector3d bg = Eigen::Vector3d::Constant(config.background);
    const auto cams = ring_cameras(config);
    for (std::size_t v = 0; v < cams.size(); ++v) {
        out.views.push_back(View{cams[v], render_forward(out.truth, cams[v], bg).image});
        out.depths.push_back(render_depth(out.truth, cams[v], config.ring_radius));
        (v % 4 == 0 ? out.test : out.train).push_back(int(v));
    }
    return out;
}

std::vector<SyntheticScene> gen_scenes(const TrainConfig& config, int first_id, int count) {
    check(count >= 0, Errc::BadConfig, "scene count must be non-negative");
    std::vector<SyntheticScene> out;
    out.reserve(std::size_t(count));
    for (int id = first_id; id < first_id + count; ++id) out.push_back(make_scene(config, id, synthetic_truth(config, id)));
    return out;
}

SceneInput scene_input(const TrainConfig& config, const SyntheticScene& scene) {
    Rng rng = Rng::stream(config.data_seed, 2 * std::uint64_t(scene.id) + 1);
    SceneInput in;
    for (int v : scene.train) {
        in.views.push_back(scene.views[std::size_t(v)]);
        Eigen::ArrayXXd depth = scene.depths[std::size_t(v)];
        for (Eigen::Index r = 0; r < depth.rows(); ++r)
            for (Eigen::Index c = 0; c < depth.cols(); ++c) depth(r, c) += config.depth_noise * config.extent * rng.normal();
        in.seed_depths.push_back(std::move(depth));
    }
    return in;
}

void save_scenes(const std::filesystem::path& dir, const std::vector<SyntheticScene>& scenes) {
    std::filesystem::create_directories(dir);
    std::string manifest;
    for (const auto& s : scenes) {
        save_scene(dir / scene_file_name(s.id), s.truth);
        manifest += std::to_string(s.id) + " " + scene_file_name(s.id) + "\n";
    }
    write_text(dir / "manifest.txt", manifest);
}

std::vector<SyntheticScene> load_scenes(const TrainConfig& config, const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.txt");
    if (!in) throw Error(Errc::IoFailure, "missing manifest in " + dir.string());
    std::vector<SyntheticScene> out;
    int id;
    std::string name;
    while (in >> id >> name) {
        GaussianScene truth = load_scene(dir / name);
        check(truth.sh_degree == config.sh_degree, Errc::BadConfig,
              name + " has SH degree " + std::to_string(truth.sh_degree));
        out.push_back(make_scene(config, id, std::move(truth)));
    }
    return out;
}

}  // namespace fsplat
