// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/error.hpp"
#include "fsplat/harness.hpp"
#include "fsplat/photometric.hpp"
#include "fsplat/renderer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace fsplat {

namespace {

// Independent RNG streams derived from the training seed.
enum Stream : std::uint64_t { kInitStream = 0, kShuffleStream = 1, kHorizonStream = 2, kViewStream = 3 };
constexpr std::uint64_t kEvalStreamBase = 1000;

std::string format_row(const std::string& head, const MetricRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, ",%d,%.8f,%.8f,%.8f,%.8f\n", r.step, r.psnr, r.ssim, r.l1, r.dssim);
    return head + buf;
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
}

PredictorParams init_predictor(const TrainConfig& config, const std::vector<SyntheticScene>& scenes) {
    check(!scenes.empty(), Errc::BadConfig, "no scenes");
    Rng rng = Rng::stream(config.seed, kInitStream);
    std::int64_t slots = 0;
    if (config.mode() == PredictorMode::SharedInit) slots = predicted_count(scene_input(config, scenes.front()), config.stride);
    return init_params(rng, config.mode(), config.shape(slots));
}

PredictorParams train(const TrainConfig& config, const std::vector<SyntheticScene>& scenes,
                      const TrainOptions& options) {
    config.validate();
    check(!scenes.empty(), Errc::BadConfig, "train needs at least one scene");
    std::vector<SceneInput> inputs;
    inputs.reserve(scenes.size());
    for (const auto& s : scenes) inputs.push_back(scene_input(config, s));

    PredictorParams params = init_predictor(config, scenes);
    AdamState outer = AdamState::zeros(params.parameter_count(), config.outer_lr);
    const OuterConfig oc = config.outer();
    Rng shuffle = Rng::stream(config.seed, kShuffleStream);
    Rng horizon = Rng::stream(config.seed, kHorizonStream);
    Rng views = Rng::stream(config.seed, kViewStream);

    std::vector<int> order;
    std::size_t pos = 0;
    for (int it = 0; it < config.outer_iters; ++it) {
        if (pos == order.size()) {
            order.resize(scenes.size());
            std::iota(order.begin(), order.end(), 0);
            for (int i = int(order.size()) - 1; i > 0; --i)
                std::swap(order[std::size_t(i)], order[std::size_t(shuffle.uniform_int(0, i))]);
            pos = 0;
        }
        const int s = order[pos++];
        const std::uint64_t view_seed = views.next();
        const OuterStepReport report = outer_iteration(params, outer, inputs[std::size_t(s)], oc, horizon, view_seed);
        if (options.log) *options.log << log_record(it, scenes[std::size_t(s)].id, report, config) << '\n';
        if (options.on_iteration) options.on_iteration(it, report);
        if (!options.checkpoint_dir.empty() && config.checkpoint_interval > 0 && (it + 1) % config.checkpoint_interval == 0) {
            char name[32];
            std::snprintf(name, sizeof name, "iter_%06d.fspp", it + 1);
            std::filesystem::create_directories(options.checkpoint_dir);
            save_checkpoint(options.checkpoint_dir / name, params);
        }
    }
    if (!options.checkpoint_dir.empty()) {
        std::filesystem::create_directories(options.checkpoint_dir);
        save_checkpoint(options.checkpoint_dir / "final.fspp", params);
    }
    return params;
}

HeldOutViews::HeldOutViews(const SyntheticScene& scene, const TrainConfig& config)
    : background_(Eigen::Vector3d::Constant(config.background)), id_(scene.id) {
    for (int v : scene.test) views_.push_back(scene.views[std::size_t(v)]);
}

MetricRow HeldOutViews::metrics(const GaussianScene& scene, int step) {
    MetricRow row;
    row.scene = id_;
    row.step = step;
    for (const auto& view : views_) {
        const Image img = render_forward(scene, view.camera, background_).image;
        const double s = ssim(img, view.image);
        row.psnr += psnr(img, view.image);
        row.ssim += s;
        row.l1 += photometric_loss(img, view.image, 0.0).l1;
        row.dssim += (1.0 - s) / 2.0;
        ++reads_;
    }
    const double inv = 1.0 / double(views_.size());
    row.psnr *= inv;
    row.ssim *= inv;
    row.l1 *= inv;
    row.dssim *= inv;
    return row;
}

MetricTrajectory evaluate(const TrainConfig& config, const PredictorParams& params,
                          const std::vector<SyntheticScene>& scenes,
                          const std::function<GaussianScene(const SyntheticScene&)>& override_g0) {
    config.validate();
    MetricTrajectory out;
    const OuterConfig oc = config.outer();
    for (const auto& scene : scenes) {
        const SceneInput input = scene_input(config, scene);
        const GaussianScene g0 = override_g0 ? override_g0(scene) : predict(params, input, config.stride);
        const ParamLayout layout = ParamLayout::of(g0);
        HeldOutViews held(scene, config);

        SplatObjectiveOptions so;
        so.background = oc.background;
        so.w_ssim = config.w_ssim;
        so.views_per_step = config.views_per_step;
        so.seed = Rng::stream(config.seed, kEvalStreamBase + std::uint64_t(scene.id)).next();
        const Objective inner = make_splat_objective(layout, input.views, so);
        Objective guarded;
        guarded.full = inner.full;
        guarded.step = [&](const Eigen::VectorXd& x, int k) {
            const std::int64_t before = held.reads();
            Evaluation e = inner.step(x, k);
            out.refinement_test_reads += held.reads() - before;
            return e;
        };

        RefinementOptions ro;
        ro.adam_lr = expand_rates(layout, oc.inner_rates);
        refine(flatten(g0).data, guarded, ro, config.eval_steps, [&](int k, const Eigen::VectorXd& x) {
            if (k % config.eval_stride == 0 || k == config.eval_steps)
                out.rows.push_back(held.metrics(unflatten(x, layout), k));
        });
    }
    check(out.refinement_test_reads == 0, Errc::BadConfig, "held-out views reached the refiner");
    return out;
}

std::vector<MetricRow> MetricTrajectory::summary() const {
    std::map<int, std::pair<MetricRow, int>> acc;
    for (const auto& r : rows) {
        auto& [sum, n] = acc[r.step];
        sum.step = r.step;
        sum.psnr += r.psnr;
        sum.ssim += r.ssim;
        sum.l1 += r.l1;
        sum.dssim += r.dssim;
        ++n;
    }
    std::vector<MetricRow> out;
    for (auto& [step, entry] : acc) {
        MetricRow m = entry.first;
        const double inv = 1.0 / entry.second;
        m.scene = -1;
        m.psnr *= inv;
        m.ssim *= inv;
        m.l1 *= inv;
        m.dssim *= inv;
        out.push_back(m);
    }
    return out;
}

std::string summary_csv_header() { return "value,step,psnr,ssim,l1,dssim\n"; }

std::string summary_csv_rows(const std::string& value, const std::vector<MetricRow>& rows) {
    std::string out;
    for (const auto& r : rows) out += format_row(value, r);
    return out;
}

std::string trajectory_csv(const MetricTrajectory& trajectory) {
    std::string out = "scene,step,psnr,ssim,l1,dssim\n";
    for (const auto& r : trajectory.rows) out += format_row(std::to_string(r.scene), r);
    return out;
}

std::string step_loss_csv(const std::vector<StepLoss>& losses) {
    std::string out = "step,loss_l1,loss_dssim,loss_total\n";
    char buf[128];
    for (std::size_t k = 0; k < losses.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%zu,%.10f,%.10f,%.10f\n", k + 1, losses[k].l1, losses[k].dssim, losses[k].total);
        out += buf;
    }
    return out;
}

std::string log_record(int iteration, int scene, const OuterStepReport& report, const TrainConfig& config) {
    nlohmann::ordered_json j;
    j["iteration"] = iteration;
    j["scene"] = scene;
    j["rule"] = config.rule;
    j["lambda"] = config.lambda;
    j["L_0"] = report.loss_immediate;
    j["L_meta"] = report.loss_meta;
    j["K_rand"] = report.horizon;
    j["N_anchor"] = report.anchors;
    j["grad_norms"] = {{"immediate", report.grad_norm_immediate},
                       {"meta", report.grad_norm_meta},
                       {"combined", report.grad_norm_combined}};
    j["skipped"] = report.skipped;
    if (!report.error.empty()) j["error"] = report.error;
    j["seed"] = config.seed;
    j["config_hash"] = config.hash();
    return j.dump();
}

SweepAxis parse_axis(const std::string& text) {
    if (text == "lambda") return SweepAxis::Lambda;
    if (text == "delta") return SweepAxis::Delta;
    if (text == "rule") return SweepAxis::Rule;
    throw Error(Errc::BadConfig, "unknown sweep axis '" + text + "'");
}

std::vector<std::string> default_sweep_values(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Lambda: return {"0", "0.25", "0.5", "0.75", "1"};
        case SweepAxis::Delta: return {"1", "20", "40", "80", "reptile"};
        case SweepAxis::Rule: return {"vanilla", "reptile", "metagrad"};
    }
    return {};
}

TrainConfig sweep_config(const TrainConfig& base, SweepAxis axis, const std::string& value) {
    TrainConfig c = base;
    switch (axis) {
        case SweepAxis::Lambda:
            c.set("lambda", value);
            break;
        case SweepAxis::Delta:
            if (value == "reptile") {
                c.rule = "reptile";
            } else {
                c.set("delta", value);
                c.k_min = std::max(c.k_min, c.delta);
                c.k_max = std::max(c.k_max, c.k_min);
            }
            break;
        case SweepAxis::Rule:
            c.set("rule", value);
            break;
    }
    c.validate();
    return c;
}

SweepResult sweep(const TrainConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                  const std::vector<SyntheticScene>& train_scenes, const std::vector<SyntheticScene>& eval_scenes,
                  const std::filesystem::path& out_dir) {
    check(!values.empty(), Errc::BadConfig, "sweep needs at least one value");
    SweepResult result;
    result.summary_csv = summary_csv_header();
    for (const auto& value : values) {
        const TrainConfig cfg = sweep_config(base, axis, value);
        TrainOptions opts;
        std::ofstream log;
        const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path() : out_dir / value;
        if (!dir.empty()) {
            std::filesystem::create_directories(dir);
            write_text(dir / "config.resolved", cfg.snapshot());
            write_text(dir / "config.hash", cfg.hash() + "\n");
            log.open(dir / "train.jsonl", std::ios::binary);
            opts.log = &log;
            opts.checkpoint_dir = dir;
        }
        const PredictorParams params = train(cfg, train_scenes, opts);
        MetricTrajectory traj = evaluate(cfg, params, eval_scenes);
        result.summary_csv += summary_csv_rows(value, traj.summary());
        if (!dir.empty()) write_text(dir / "trajectory.csv", trajectory_csv(traj));
        result.values.push_back(value);
        result.trajectories.push_back(std::move(traj));
    }
    if (!out_dir.empty()) write_text(out_dir / "summary.csv", result.summary_csv);
    return result;
}

}  // namespace fsplat
