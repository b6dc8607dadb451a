// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
// fsplat: synthetic scenes, predictor training, evaluation, sweeps and numeric checks.
#include "fsplat/checks.hpp"
#include "fsplat/error.hpp"
#include "fsplat/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace fsplat;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out = ".";

    TrainConfig resolve() const {
        TrainConfig c;
        if (!config_path.empty()) c.load(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw Error(Errc::BadConfig, "override needs key=value: " + kv);
            c.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        c.validate();
        return c;
    }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config_path, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", c.overrides, "override, key=value (repeatable)");
    cmd->add_option("-o,--out", c.out, "output directory");
}

void write_resolved(const fs::path& dir, const TrainConfig& c) {
    write_text(dir / "config.resolved", c.snapshot());
    write_text(dir / "config.hash", c.hash() + "\n");
}

// Scenes from a directory written by gen-scenes, or generated on the fly.
std::vector<SyntheticScene> scenes_for(const TrainConfig& c, const std::string& dir, bool eval_split) {
    if (!dir.empty()) return load_scenes(c, dir);
    return eval_split ? gen_scenes(c, c.train_scenes, c.eval_scenes) : gen_scenes(c, 0, c.train_scenes);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

int report(const std::vector<CheckReport>& reports) {
    bool ok = true;
    for (const auto& r : reports) {
        std::printf("%-24s %s  checked=%d failed=%d worst_rel=%.3e%s%s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                    r.checked, r.failed, r.worst, r.note.empty() ? "" : "  ", r.note.c_str());
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fsplat: feed-forward Gaussian splat prediction with meta-learned refinement"};
    app.require_subcommand(1);

    Common gen_opts;
    auto* gen = app.add_subcommand("gen-scenes", "write train/ and eval/ synthetic scene sets");
    add_common(gen, gen_opts);

    Common train_opts;
    std::string train_scenes;
    auto* train_cmd = app.add_subcommand("train", "train the predictor; writes log and checkpoints");
    add_common(train_cmd, train_opts);
    train_cmd->add_option("--scenes", train_scenes, "scene directory (default: generate)");

    Common eval_opts;
    std::string eval_scenes, checkpoint, label = "eval";
    bool eval_init = false;
    auto* eval_cmd = app.add_subcommand("eval", "predict, refine on train views, score test views");
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("--scenes", eval_scenes, "scene directory (default: generate eval ids)");
    auto* ck = eval_cmd->add_option("--checkpoint", checkpoint, "predictor checkpoint")->check(CLI::ExistingFile);
    eval_cmd->add_flag("--init", eval_init, "evaluate the untrained initialization")->excludes(ck);
    eval_cmd->add_option("--label", label, "value column in summary.csv");

    Common sweep_opts;
    std::string axis_text = "lambda", values_text, sweep_train, sweep_eval;
    auto* sweep_cmd = app.add_subcommand("sweep", "train + eval per value of one axis");
    add_common(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--axis", axis_text, "lambda | delta | rule");
    sweep_cmd->add_option("--values", values_text, "comma separated (default: axis preset)");
    sweep_cmd->add_option("--train-scenes", sweep_train, "train scene directory");
    sweep_cmd->add_option("--eval-scenes", sweep_eval, "eval scene directory");

    std::uint64_t check_seed = 1;
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference suites");
    grad_cmd->add_option("--seed", check_seed);
    auto* self_cmd = app.add_subcommand("selftest", "quadratic and oracle suites");
    self_cmd->add_option("--seed", check_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const TrainConfig c = gen_opts.resolve();
            const fs::path out = gen_opts.out;
            write_resolved(out, c);
            save_scenes(out / "train", gen_scenes(c, 0, c.train_scenes));
            save_scenes(out / "eval", gen_scenes(c, c.train_scenes, c.eval_scenes));
            std::printf("wrote %d train and %d eval scenes to %s\n", c.train_scenes, c.eval_scenes, out.c_str());
        } else if (train_cmd->parsed()) {
            const TrainConfig c = train_opts.resolve();
            const fs::path out = train_opts.out;
            write_resolved(out, c);
            const auto scenes = scenes_for(c, train_scenes, false);
            std::ofstream log(out / "train.jsonl", std::ios::binary);
            TrainOptions opts;
            opts.log = &log;
            opts.checkpoint_dir = out;
            opts.on_iteration = [&](int it, const OuterStepReport& r) {
                if ((it + 1) % 10 == 0 || it + 1 == c.outer_iters)
                    std::printf("iter %5d  L_imm %.5f  L_meta %.5f  K %d%s\n", it + 1, r.loss_immediate, r.loss_meta,
                                r.horizon, r.skipped ? "  skipped" : "");
                std::fflush(stdout);
            };
            train(c, scenes, opts);
            std::printf("config %s, checkpoint %s\n", c.hash().c_str(), (out / "final.fspp").c_str());
        } else if (eval_cmd->parsed()) {
            const TrainConfig c = eval_opts.resolve();
            const fs::path out = eval_opts.out;
            if (checkpoint.empty() && !eval_init) throw Error(Errc::BadConfig, "eval needs --checkpoint or --init");
            write_resolved(out, c);
            const auto scenes = scenes_for(c, eval_scenes, true);
            const PredictorParams params = eval_init ? init_predictor(c, scenes) : load_checkpoint(checkpoint);
            const MetricTrajectory traj = evaluate(c, params, scenes);
            const auto summary = traj.summary();
            write_text(out / "trajectory.csv", trajectory_csv(traj));
            write_text(out / "summary.csv", summary_csv_header() + summary_csv_rows(label, summary));
            std::printf("step 0 psnr %.4f, step %d psnr %.4f\n", summary.front().psnr, summary.back().step,
                        summary.back().psnr);
        } else if (sweep_cmd->parsed()) {
            const TrainConfig c = sweep_opts.resolve();
            const SweepAxis axis = parse_axis(axis_text);
            const auto values = values_text.empty() ? default_sweep_values(axis) : split_list(values_text);
            const auto tr = scenes_for(c, sweep_train, false);
            const auto ev = scenes_for(c, sweep_eval, true);
            const SweepResult r = sweep(c, axis, values, tr, ev, sweep_opts.out);
            std::fputs(r.summary_csv.c_str(), stdout);
        } else if (grad_cmd->parsed()) {
            return report(run_gradcheck(check_seed));
        } else if (self_cmd->parsed()) {
            return report(run_selftest(check_seed));
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "fsplat: %s\n", e.what());
        return 2;
    }
    return 0;
}
