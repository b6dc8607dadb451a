// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion.
#include "fsplat/checks.hpp"
#include "fsplat/error.hpp"
#include "fsplat/harness.hpp"
#include "fsplat/photometric.hpp"
#include "vjp_oracle.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace fsplat;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- 1, 2, 4

Verdict renderer_suite() {
    const CheckReport r = gradcheck_renderer(2024, 20);
    return {r.passed, std::to_string(r.checked) + " coordinates, " + std::to_string(r.failed) + " over 1e-3, worst " +
                          fmt("%.2e", r.worst) + "; " + r.note};
}

Verdict quadratic_oracle() {
    const CheckReport so = selftest_second_order(2024, 10);
    const CheckReport fo = selftest_first_order(2024, 10);
    return {so.passed && fo.passed, "oracle worst " + fmt("%.2e", so.worst) + " (< 1e-6), first-order worst " +
                                        fmt("%.2e", fo.worst) + " (< 1e-10)"};
}

Verdict anchor_sets() {
    const CheckReport r = selftest_anchor_sets();
    return {r.passed, std::to_string(r.checked) + " (K, delta) pairs, " + std::to_string(r.failed) + " wrong"};
}

// ---------------------------------------------------------------- 3

Verdict lambda_endpoint(const std::vector<SyntheticScene>& train_set) {
    TrainConfig vanilla;
    vanilla.outer_iters = 50;
    vanilla.rule = "vanilla";
    TrainConfig meta = vanilla;
    meta.rule = "metagrad";
    meta.lambda = 1.0;
    const auto a = encode_checkpoint(train(vanilla, train_set));
    const auto b = encode_checkpoint(train(meta, train_set));
    return {a == b, std::to_string(a.size()) + "-byte checkpoints " + (a == b ? "identical" : "differ")};
}

// ---------------------------------------------------------------- 5

Verdict detachment() {
    double worst = 0.0;
    std::string shapes;
    for (int c = 0; c < 5; ++c) {
        Rng rng = Rng::stream(77, std::uint64_t(c));
        TrainConfig cfg;
        cfg.sh_degree = int(rng.uniform_int(0, 2));
        cfg.hidden = int(rng.uniform_int(4, 24));
        cfg.lambda = rng.uniform();
        cfg.delta = int(rng.uniform_int(5, 40));
        cfg.k_min = cfg.delta;
        cfg.k_max = cfg.delta + int(rng.uniform_int(0, 80));
        cfg.gain_scales = rng.uniform(1, 30);
        cfg.gain_sh = rng.uniform(0.5, 2);
        cfg.data_seed = rng.next();
        const SyntheticScene scene = gen_scenes(cfg, c, 1)[0];
        const SceneInput input = scene_input(cfg, scene);

        Rng init = Rng::stream(cfg.data_seed, 5);
        PredictorParams params = init_params(init, PredictorMode::ConditionalHead, cfg.shape(0));
        Eigen::VectorXd theta = params.pack();
        for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] = 0.05 * init.normal();
        params.unpack(theta);

        const PredictorParams before = params;
        AdamState outer = AdamState::zeros(params.parameter_count(), cfg.outer_lr);
        Rng horizon = Rng::stream(cfg.data_seed, 6);
        OuterGradients seen;
        outer_iteration(params, outer, input, cfg.outer(), horizon, rng.next(), &seen);

        // anchor gradients taken as constants; mean and VJP recomputed independently
        const Eigen::VectorXd surrogate = testing::reference_mean(seen.trajectory.anchor_grads);
        const Eigen::VectorXd expect = testing::reference_head_vjp(before, input, cfg.stride, surrogate);
        const double scale = std::max(1.0, expect.cwiseAbs().maxCoeff());
        worst = std::max(worst, (expect - seen.meta).cwiseAbs().maxCoeff() / scale);
        shapes += (c ? ", " : "") + std::to_string(seen.report.horizon) + "/" + std::to_string(seen.report.anchors);
    }
    return {worst <= 1e-12, "max deviation " + fmt("%.2e", worst) + " (<= 1e-12); K/anchors " + shapes};
}

// ---------------------------------------------------------------- 6, 7

struct Benchmark {
    std::vector<SyntheticScene> train_set, eval_set;
};

MetricTrajectory train_and_eval(const TrainConfig& cfg, const Benchmark& b, const fs::path& dir) {
    fs::create_directories(dir);
    write_text(dir / "config.resolved", cfg.snapshot());
    write_text(dir / "config.hash", cfg.hash() + "\n");
    std::ofstream log(dir / "train.jsonl", std::ios::binary);
    TrainOptions o;
    o.log = &log;
    o.checkpoint_dir = dir;
    const PredictorParams p = train(cfg, b.train_set, o);
    MetricTrajectory t = evaluate(cfg, p, b.eval_set);
    write_text(dir / "trajectory.csv", trajectory_csv(t));
    write_text(dir / "summary.csv", summary_csv_header() + summary_csv_rows(cfg.rule, t.summary()));
    return t;
}

struct Crossing {
    Verdict verdict;
    std::vector<MetricRow> vanilla_seed1;
};

Crossing crossing(const Benchmark& b, const fs::path& out) {
    Crossing result;
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        TrainConfig v;
        v.seed = seed;
        v.rule = "vanilla";
        TrainConfig m = v;
        m.rule = "metagrad";
        m.lambda = 0.0;
        const fs::path dir = out / ("seed" + std::to_string(seed));
        const auto vs = train_and_eval(v, b, dir / "vanilla").summary();
        const auto ms = train_and_eval(m, b, dir / "metagrad").summary();
        write_text(dir / "summary.csv", summary_csv_header() + summary_csv_rows("vanilla", vs) + summary_csv_rows("metagrad", ms));
        if (seed == 1) result.vanilla_seed1 = vs;
        const double gap = ms.back().psnr - vs.back().psnr;
        if (gap >= 0.1) ++wins;
        detail += "seed " + std::to_string(seed) + fmt(": final %+.3f dB", gap) + fmt(" (%.3f", ms.back().psnr) +
                  fmt(" vs %.3f)", vs.back().psnr) + fmt(", step 0 %+.3f dB; ", ms.front().psnr - vs.front().psnr);
    }
    result.verdict = {wins >= 2, detail + std::to_string(wins) + "/3 seeds ahead by >= 0.1 dB"};
    return result;
}

// Rows are value,step,psnr,ssim,l1,dssim with the expected values and steps.
bool schema_ok(const std::string& csv, const std::vector<std::string>& values, int steps, int stride) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != "value,step,psnr,ssim,l1,dssim") return false;
    std::vector<int> expect_steps;
    for (int k = 0; k <= steps; ++k)
        if (k % stride == 0 || k == steps) expect_steps.push_back(k);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
        if (f.size() != 6) return false;
        const std::size_t vi = row / expect_steps.size(), si = row % expect_steps.size();
        if (vi >= values.size() || f[0] != values[vi] || std::stoi(f[1]) != expect_steps[si]) return false;
        for (int k = 2; k < 6; ++k)
            if (!std::isfinite(std::stod(f[std::size_t(k)]))) return false;
        ++row;
    }
    return row == values.size() * expect_steps.size();
}

Verdict sweeps(const Benchmark& b, const std::vector<MetricRow>& vanilla, const fs::path& out) {
    const TrainConfig base;
    const std::vector<std::string> lambdas{"0", "0.5", "1"}, deltas{"20", "40", "80", "reptile"};
    const SweepResult lr = sweep(base, SweepAxis::Lambda, lambdas, b.train_set, b.eval_set, out / "lambda");
    const SweepResult dr = sweep(base, SweepAxis::Delta, deltas, b.train_set, b.eval_set, out / "delta");
    const bool schema = schema_ok(lr.summary_csv, lambdas, base.eval_steps, base.eval_stride) &&
                        schema_ok(dr.summary_csv, deltas, base.eval_steps, base.eval_stride);
    const bool endpoint = summary_csv_rows("x", lr.trajectories[2].summary()) == summary_csv_rows("x", vanilla);
    std::string finals;
    for (std::size_t i = 0; i < lambdas.size(); ++i)
        finals += "lambda " + lambdas[i] + fmt(" %.3f; ", lr.trajectories[i].summary().back().psnr);
    for (std::size_t i = 0; i < deltas.size(); ++i)
        finals += "delta " + deltas[i] + fmt(" %.3f; ", dr.trajectories[i].summary().back().psnr);
    return {schema && endpoint, std::string("schema ") + (schema ? "ok" : "BAD") + ", lambda=1 vs vanilla " +
                                    (endpoint ? "identical" : "DIFFERENT") + "; final PSNR " + finals};
}

// ---------------------------------------------------------------- 8

Verdict same_csvs(const fs::path& a, const fs::path& b) {
    int files = 0, differ = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (e.path().extension() != ".csv") continue;
        ++files;
        const fs::path other = b / fs::relative(e.path(), a);
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differ;
    }
    return {files > 0 && differ == 0, std::to_string(files) + " CSV files compared, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fsplat acceptance"};
    std::string out = "acceptance_out";
    std::vector<int> only;
    app.add_option("--out", out, "directory for CSVs and logs");
    app.add_option("--only", only, "criteria to run (default: all)");
    CLI11_PARSE(app, argc, argv);
    auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };
    const fs::path root = out;

    int failed = 0;
    auto report = [&](int n, const char* what, double limit_s, const std::function<Verdict()>& fn) {
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double s = seconds_since(t0);
        const bool pass = v.pass && s < limit_s;
        if (!pass) ++failed;
        std::printf("criterion %d %s: %s (%.1f s, limit %.0f s) %s\n", n, what, pass ? "PASS" : "FAIL", s, limit_s,
                    v.detail.c_str());
        std::fflush(stdout);
    };

    const TrainConfig base;
    Benchmark bench;
    if (wanted(3) || wanted(6) || wanted(7) || wanted(8)) {
        bench.train_set = gen_scenes(base, 0, base.train_scenes);
        bench.eval_set = gen_scenes(base, base.train_scenes, base.eval_scenes);
    }

    if (wanted(1)) report(1, "renderer gradients", 120, renderer_suite);
    if (wanted(2)) report(2, "quadratic meta-gradient oracle", 30, quadratic_oracle);
    if (wanted(3)) report(3, "lambda endpoint equivalence", 300, [&] { return lambda_endpoint(bench.train_set); });
    if (wanted(4)) report(4, "anchor-set arithmetic", 1, anchor_sets);
    if (wanted(5)) report(5, "first-order detachment", 120, detachment);

    // 7 compares against the seed-1 vanilla run of 6, and 8 repeats both
    std::vector<MetricRow> vanilla;
    if (wanted(6) || wanted(7) || wanted(8)) {
        report(6, "crossing pattern vs vanilla", 1800, [&] {
            Crossing c = crossing(bench, root / "run1" / "crossing");
            vanilla = c.vanilla_seed1;
            return c.verdict;
        });
        report(7, "sweep machinery", 2700, [&] { return sweeps(bench, vanilla, root / "run1" / "sweep"); });
    }
    if (wanted(8))
        report(8, "determinism of criteria 6-7", 1800 + 2700, [&] {
            const Crossing c = crossing(bench, root / "run2" / "crossing");
            sweeps(bench, c.vanilla_seed1, root / "run2" / "sweep");
            return same_csvs(root / "run1", root / "run2");
        });

    std::printf("%s: %d criteria failed\n", failed ? "FAIL" : "PASS", failed);
    return failed ? 1 : 0;
}
