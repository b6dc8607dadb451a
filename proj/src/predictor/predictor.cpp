// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/predictor.hpp"

#include "fsplat/error.hpp"
#include "fsplat/scene_io.hpp"
#include "fsplat/sh.hpp"

#include <cmath>
#include <cstring>

namespace fsplat {

bool SceneInput::consistent() const {
    if (views.empty() || seed_depths.size() != views.size()) return false;
    for (std::size_t v = 0; v < views.size(); ++v) {
        const auto& img = views[v].image;
        const auto& cam = views[v].camera;
        if (img.width != cam.width || img.height != cam.height) return false;
        if (seed_depths[v].rows() != img.height || seed_depths[v].cols() != img.width) return false;
    }
    return true;
}

Eigen::Index PredictorParams::parameter_count() const {
    if (mode == PredictorMode::SharedInit) return shared.size();
    return w1.size() + b1.size() + w2.size() + b2.size();
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void put(Eigen::VectorXd& out, Eigen::Index& at, const Eigen::MatrixXd& m) {
    const RowMatrix r = m;
    out.segment(at, r.size()) = Eigen::Map<const Eigen::VectorXd>(r.data(), r.size());
    at += r.size();
}

void get(const Eigen::VectorXd& in, Eigen::Index& at, Eigen::MatrixXd& m) {
    m = Eigen::Map<const RowMatrix>(in.data() + at, m.rows(), m.cols());
    at += m.size();
}

}  // namespace

Eigen::VectorXd PredictorParams::pack() const {
    if (mode == PredictorMode::SharedInit) return shared;
    Eigen::VectorXd out(parameter_count());
    Eigen::Index at = 0;
    put(out, at, w1);
    put(out, at, b1);
    put(out, at, w2);
    put(out, at, b2);
    return out;
}

void PredictorParams::unpack(const Eigen::VectorXd& theta) {
    check(theta.size() == parameter_count(), Errc::ShapeMismatch, "parameter vector has the wrong length");
    if (mode == PredictorMode::SharedInit) {
        shared = theta;
        return;
    }
    Eigen::Index at = 0;
    Eigen::MatrixXd b1m(b1.size(), 1), b2m(b2.size(), 1);
    get(theta, at, w1);
    get(theta, at, b1m);
    get(theta, at, w2);
    get(theta, at, b2m);
    b1 = b1m.col(0);
    b2 = b2m.col(0);
}

bool PredictorParams::operator==(const PredictorParams& o) const {
    if (mode != o.mode || sh_degree != o.sh_degree || hidden != o.hidden || slots != o.slots || gain != o.gain)
        return false;
    const Eigen::VectorXd a = pack(), b = o.pack();
    return a.size() == b.size() && (a.size() == 0 || std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

PredictorParams init_params(Rng& rng, PredictorMode mode, const PredictorShape& shape) {
    check(shape.sh_degree >= 0 && shape.sh_degree <= kMaxShDegree && shape.hidden >= 1, Errc::BadConfig,
          "invalid predictor widths");
    PredictorParams p;
    p.mode = mode;
    p.sh_degree = shape.sh_degree;
    p.hidden = shape.hidden;
    p.gain = shape.gain;
    const int out = p.output_width();
    if (mode == PredictorMode::ConditionalHead) {
        const double bound = std::sqrt(6.0 / double(kPixelFeatures + shape.hidden));
        p.w1.resize(shape.hidden, kPixelFeatures);
        for (Eigen::Index r = 0; r < p.w1.rows(); ++r)
            for (Eigen::Index c = 0; c < p.w1.cols(); ++c) p.w1(r, c) = rng.uniform(-bound, bound);
        p.b1 = Eigen::VectorXd::Zero(shape.hidden);
        p.w2 = Eigen::MatrixXd::Zero(out, shape.hidden);
        p.b2 = Eigen::VectorXd::Zero(out);
    } else {
        check(shape.slots >= 0, Errc::BadConfig, "slot count must be non-negative");
        p.slots = shape.slots;
        GaussianScene s = GaussianScene::zeros(shape.slots, shape.sh_degree);
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            Eigen::Vector3d m;
            do {
                m = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            } while (m.squaredNorm() > 1.0);
            s.means.row(i) = m.transpose();
            s.raw_rotations(i, 0) = 1.0;
        }
        p.shared = flatten(s).data;
    }
    return p;
}

Eigen::Index predicted_count(const SceneInput& input, int stride) {
    check(stride >= 1, Errc::BadStride, "stride must be >= 1");
    Eigen::Index n = 0;
    for (const auto& v : input.views)
        n += Eigen::Index((v.image.height + stride - 1) / stride) * ((v.image.width + stride - 1) / stride);
    return n;
}

namespace {

// Per-pixel quantities shared by the forward and backward passes.
struct PixelSample {
    Eigen::Matrix<double, kPixelFeatures, 1> feature;
    Eigen::Vector3d rgb;
    Eigen::Vector3d ray_cam;  // ((u-cx)/fx, (v-cy)/fy, 1): camera point per unit depth
    double seed_depth;
    const Camera* camera;
};

template <typename Fn>
void for_each_sample(const SceneInput& input, int stride, Fn&& fn) {
    Eigen::Index g = 0;
    for (std::size_t v = 0; v < input.views.size(); ++v) {
        const View& view = input.views[v];
        const Camera& cam = view.camera;
        for (int row = 0; row < view.image.height; row += stride) {
            for (int col = 0; col < view.image.width; col += stride) {
                PixelSample s;
                s.camera = &cam;
                s.rgb = Eigen::Vector3d(view.image.at(row, col, 0), view.image.at(row, col, 1),
                                        view.image.at(row, col, 2));
                s.ray_cam = Eigen::Vector3d((col + 0.5 - cam.cx) / cam.fx, (row + 0.5 - cam.cy) / cam.fy, 1.0);
                s.seed_depth = input.seed_depths[v](row, col);
                const Eigen::Vector3d dir = (cam.rotation.transpose() * s.ray_cam).normalized();
                s.feature << s.rgb, dir, s.seed_depth;
                fn(g++, s);
            }
        }
    }
}

// Writes the default Gaussian for a sample plus residual `out` (may be zero-length).
void emit_gaussian(GaussianScene& scene, Eigen::Index g, const PixelSample& s, const Eigen::VectorXd* out) {
    const int B = scene.basis_count();
    auto r = [&](int k) { return out ? (*out)[k] : 0.0; };
    const double depth = s.seed_depth + r(0);
    const Eigen::Vector3d pc(s.ray_cam.x() * depth + r(1), s.ray_cam.y() * depth + r(2), depth);
    scene.means.row(g) = (s.camera->rotation.transpose() * (pc - s.camera->translation)).transpose();
    for (int k = 0; k < 3; ++k) scene.raw_scales(g, k) = r(3 + k);
    for (int k = 0; k < 4; ++k) scene.raw_rotations(g, k) = (k == 0 ? 1.0 : 0.0) + r(6 + k);
    scene.raw_opacities[g] = r(10);
    for (int b = 0; b < B; ++b)
        for (int ch = 0; ch < 3; ++ch)
            scene.sh(g, 3 * b + ch) = (b == 0 ? (s.rgb[ch] - 0.5) / kShC0 : 0.0) + r(11 + 3 * b + ch);
}

Eigen::VectorXd gain_vector(const PredictorParams& p) {
    Eigen::VectorXd gain(p.output_width());
    gain.segment(0, 3).setConstant(p.gain[0]);
    gain.segment(3, 3).setConstant(p.gain[1]);
    gain.segment(6, 4).setConstant(p.gain[2]);
    gain[10] = p.gain[3];
    gain.tail(p.output_width() - 11).setConstant(p.gain[4]);
    return gain;
}

void check_input(const SceneInput& input, int stride) {
    check(stride >= 1, Errc::BadStride, "stride must be >= 1");
    check(input.consistent(), Errc::ShapeMismatch, "scene input views and seed depths disagree");
}

}  // namespace

GaussianScene default_construction(const SceneInput& input, int stride, int sh_degree) {
    check_input(input, stride);
    GaussianScene scene = GaussianScene::zeros(predicted_count(input, stride), sh_degree);
    for_each_sample(input, stride, [&](Eigen::Index g, const PixelSample& s) { emit_gaussian(scene, g, s, nullptr); });
    return scene;
}

GaussianScene predict(const PredictorParams& params, const SceneInput& input, int stride) {
    check_input(input, stride);
    const Eigen::Index n = predicted_count(input, stride);
    if (params.mode == PredictorMode::SharedInit) {
        check(params.slots == n, Errc::ShapeMismatch,
              "shared-init has " + std::to_string(params.slots) + " slots, input needs " + std::to_string(n));
        return unflatten(params.shared, ParamLayout{n, params.sh_degree});
    }
    GaussianScene scene = GaussianScene::zeros(n, params.sh_degree);
    const Eigen::VectorXd gain = gain_vector(params);
    for_each_sample(input, stride, [&](Eigen::Index g, const PixelSample& s) {
        const Eigen::VectorXd h = (params.w1 * s.feature + params.b1).array().tanh();
        const Eigen::VectorXd out = gain.cwiseProduct(params.w2 * h + params.b2);
        emit_gaussian(scene, g, s, &out);
    });
    return scene;
}

Eigen::VectorXd predict_backward(const PredictorParams& params, const SceneInput& input, int stride,
                                 const Eigen::VectorXd& surrogate_grad) {
    check_input(input, stride);
    const Eigen::Index n = predicted_count(input, stride);
    const ParamLayout layout{n, params.sh_degree};
    check(surrogate_grad.size() == layout.total(), Errc::ShapeMismatch,
          "surrogate gradient does not match the predicted layout");
    if (params.mode == PredictorMode::SharedInit) {
        check(params.slots == n, Errc::ShapeMismatch, "shared-init slot count does not match input");
        return surrogate_grad;
    }

    const GaussianScene gs = unflatten(surrogate_grad, layout);
    const Eigen::VectorXd gain = gain_vector(params);
    const int out_width = params.output_width();
    Eigen::MatrixXd dw1 = Eigen::MatrixXd::Zero(params.w1.rows(), params.w1.cols());
    Eigen::VectorXd db1 = Eigen::VectorXd::Zero(params.b1.size());
    Eigen::MatrixXd dw2 = Eigen::MatrixXd::Zero(params.w2.rows(), params.w2.cols());
    Eigen::VectorXd db2 = Eigen::VectorXd::Zero(params.b2.size());
    Eigen::VectorXd d_out(out_width);

    for_each_sample(input, stride, [&](Eigen::Index g, const PixelSample& s) {
        const Eigen::Vector3d d_pc = s.camera->rotation * gs.means.row(g).transpose();
        d_out[0] = d_pc.dot(s.ray_cam);
        d_out[1] = d_pc.x();
        d_out[2] = d_pc.y();
        d_out.segment(3, 3) = gs.raw_scales.row(g).transpose();
        d_out.segment(6, 4) = gs.raw_rotations.row(g).transpose();
        d_out[10] = gs.raw_opacities[g];
        d_out.tail(out_width - 11) = gs.sh.row(g).transpose();

        const Eigen::VectorXd h = (params.w1 * s.feature + params.b1).array().tanh();
        const Eigen::VectorXd d_pre = gain.cwiseProduct(d_out);
        dw2.noalias() += d_pre * h.transpose();
        db2 += d_pre;
        const Eigen::VectorXd d_hidden =
            (params.w2.transpose() * d_pre).array() * (1.0 - h.array().square());
        dw1.noalias() += d_hidden * s.feature.transpose();
        db1 += d_hidden;
    });

    PredictorParams grad = params;
    grad.w1 = dw1;
    grad.b1 = db1;
    grad.w2 = dw2;
    grad.b2 = db2;
    return grad.pack();
}

namespace {
constexpr char kCheckpointMagic[4] = {'F', 'S', 'P', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const PredictorParams& p) {
    std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
    le::put_u32(out, kCheckpointVersion);
    le::put_u8(out, static_cast<std::uint8_t>(p.mode));
    le::put_u32(out, kPixelFeatures);
    le::put_u32(out, static_cast<std::uint32_t>(p.hidden));
    le::put_u32(out, static_cast<std::uint32_t>(p.output_width()));
    le::put_u32(out, static_cast<std::uint32_t>(p.sh_degree));
    le::put_u64(out, static_cast<std::uint64_t>(p.slots));
    for (double g : p.gain) le::put_f64(out, g);
    const Eigen::VectorXd theta = p.pack();
    le::put_u64(out, static_cast<std::uint64_t>(theta.size()));
    for (Eigen::Index k = 0; k < theta.size(); ++k) le::put_f64(out, theta[k]);
    return out;
}

PredictorParams decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    le::Reader in(bytes);
    check(in.has(4 + 4 + 1 + 16 + 8 + 40 + 8), Errc::CorruptHeader, "checkpoint header truncated");
    check(std::equal(kCheckpointMagic, kCheckpointMagic + 4, bytes.begin()), Errc::CorruptHeader, "bad magic");
    in.skip(4);
    const auto version = in.u32();
    check(version == kCheckpointVersion, Errc::FormatVersionMismatch, "checkpoint version " + std::to_string(version));
    const auto mode = in.u8();
    check(mode <= 1, Errc::CorruptHeader, "unknown predictor mode");
    const auto input_width = in.u32();
    const auto hidden = in.u32();
    const auto output_width = in.u32();
    const auto degree = in.u32();
    const auto slots = in.u64();
    check(input_width == kPixelFeatures && degree <= std::uint32_t(kMaxShDegree) && hidden >= 1 && hidden < (1u << 20),
          Errc::CorruptHeader, "bad widths");

    PredictorParams p;
    p.mode = static_cast<PredictorMode>(mode);
    p.sh_degree = int(degree);
    p.hidden = int(hidden);
    check(int(output_width) == p.output_width(), Errc::CorruptHeader, "output width disagrees with sh_degree");
    for (double& g : p.gain) g = in.f64();
    if (p.mode == PredictorMode::ConditionalHead) {
        p.w1 = Eigen::MatrixXd::Zero(p.hidden, kPixelFeatures);
        p.b1 = Eigen::VectorXd::Zero(p.hidden);
        p.w2 = Eigen::MatrixXd::Zero(output_width, p.hidden);
        p.b2 = Eigen::VectorXd::Zero(output_width);
    } else {
        check(slots < (std::uint64_t(1) << 32), Errc::CorruptHeader, "slot count");
        p.slots = std::int64_t(slots);
        p.shared = Eigen::VectorXd::Zero(ParamLayout{p.slots, p.sh_degree}.total());
    }
    const auto count = in.u64();
    check(count == std::uint64_t(p.parameter_count()) && in.remaining() == count * 8, Errc::CorruptHeader,
          "weight block size mismatch");
    Eigen::VectorXd theta(static_cast<Eigen::Index>(count));
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] = in.f64();
    p.unpack(theta);
    return p;
}

void save_checkpoint(const std::filesystem::path& path, const PredictorParams& params) {
    write_file(path, encode_checkpoint(params));
}

PredictorParams load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace fsplat
