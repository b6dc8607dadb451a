// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/error.hpp"
#include "fsplat/harness.hpp"
#include "fsplat/photometric.hpp"
#include "fsplat/renderer.hpp"
#include "fsplat/scene_io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace fsplat;
namespace fs = std::filesystem;

namespace {

// Small enough that a training run takes well under a second.
TrainConfig tiny() {
    TrainConfig c;
    c.train_scenes = 3;
    c.eval_scenes = 2;
    c.gaussians = 24;
    c.image_size = 16;
    c.views = 8;
    c.hidden = 8;
    c.k_min = 8;
    c.k_max = 16;
    c.delta = 4;
    c.outer_iters = 6;
    c.eval_steps = 20;
    c.eval_stride = 10;
    return c;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fsplat_harness_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <class F>
Errc code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::IoFailure;
}

}  // namespace

TEST(Config, SetGetRoundTripForEveryKey) {
    TrainConfig c;
    for (const auto& k : TrainConfig::keys()) {
        const std::string v = c.get(k);
        TrainConfig d;
        d.set(k, v);
        EXPECT_EQ(d.get(k), v) << k;
    }
    EXPECT_EQ(code_of([&] { c.set("no_such_key", "1"); }), Errc::BadConfig);
    EXPECT_EQ(code_of([&] { c.set("lambda", "abc"); }), Errc::BadConfig);
}

TEST(Config, ApplyParsesCommentsAndWhitespace) {
    TrainConfig c;
    c.apply("# comment\nlambda = 0.25   # trailing\n\n  rule=reptile\nskip_inner = true\n");
    EXPECT_EQ(c.lambda, 0.25);
    EXPECT_EQ(c.rule, "reptile");
    EXPECT_TRUE(c.skip_inner);
}

TEST(Config, LoadFromFile) {
    const fs::path p = scratch("cfg.txt");
    write_text(p, "delta = 20\nk_min = 20\n");
    TrainConfig c;
    c.load(p);
    EXPECT_EQ(c.delta, 20);
    EXPECT_EQ(c.k_min, 20);
    fs::remove(p);
}

TEST(Config, ValidateRejectsBadRanges) {
    auto bad = [](const std::string& k, const std::string& v) {
        TrainConfig c;
        c.set(k, v);
        return code_of([&] { c.validate(); });
    };
    EXPECT_EQ(bad("lambda", "1.5"), Errc::BadConfig);
    EXPECT_EQ(bad("k_min", "10"), Errc::BadConfig);  // below delta = 40
    EXPECT_EQ(bad("k_max", "45"), Errc::BadConfig);  // below k_min = 50
    EXPECT_EQ(bad("lr_sh", "0"), Errc::BadConfig);
    EXPECT_EQ(bad("outer_lr", "-1"), Errc::BadConfig);
    EXPECT_EQ(bad("rule", "maml"), Errc::BadConfig);
    EXPECT_NO_THROW(TrainConfig().validate());
}

TEST(Config, SnapshotAndHashTrackEveryField) {
    TrainConfig a, b;
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.hash().size(), 16u);
    std::set<std::string> hashes{a.hash()};
    for (const auto& k : TrainConfig::keys()) {
        TrainConfig c;
        const std::string v = c.get(k);
        c.set(k, v == "0" ? "1" : v == "false" ? "true" : v == "true" ? "false" : v == "head" ? "shared"
                 : v == "metagrad" ? "reptile" : v + "1");
        hashes.insert(c.hash());
        EXPECT_NE(c.snapshot().find(k + " = "), std::string::npos);
    }
    EXPECT_EQ(hashes.size(), TrainConfig::keys().size() + 1);
    EXPECT_NE(a.snapshot().find("dilation"), std::string::npos);
}

TEST(Synthetic, SplitIsEveryFourthView) {
    const TrainConfig c;
    const SyntheticScene s = make_scene(c, 0, synthetic_truth(c, 0));
    ASSERT_EQ(s.views.size(), 16u);
    EXPECT_EQ(s.train.size(), 12u);
    EXPECT_EQ(s.test, (std::vector<int>{0, 4, 8, 12}));
    for (int t : s.test) EXPECT_EQ(std::count(s.train.begin(), s.train.end(), t), 0);
}

TEST(Synthetic, TruthRanges) {
    const TrainConfig c;
    const GaussianScene g = synthetic_truth(c, 3);
    ASSERT_EQ(g.size(), c.gaussians);
    const PhysicalAttributes a = activate(g);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        EXPECT_LE(g.means.row(i).norm(), 1.0);
        for (int k = 0; k < 3; ++k) {
            EXPECT_GE(a.scales(i, k), 0.01 - 1e-12);
            EXPECT_LE(a.scales(i, k), 0.08 + 1e-12);
        }
        EXPECT_GT(a.opacities[i], 0.3 - 1e-12);
        EXPECT_LT(a.opacities[i], 0.95 + 1e-12);
        EXPECT_LE(g.sh.row(i).cwiseAbs().maxCoeff(), 0.5);
    }
}

TEST(Synthetic, RingCamerasLookAtOrigin) {
    const TrainConfig c;
    const auto cams = ring_cameras(c);
    ASSERT_EQ(cams.size(), 16u);
    for (const auto& cam : cams) {
        EXPECT_TRUE(cam.valid());
        EXPECT_NEAR(cam.center().norm(), 2.5, 1e-12);
        const Eigen::Vector3d o = cam.rotation * Eigen::Vector3d::Zero() + cam.translation;
        EXPECT_NEAR(o.x(), 0, 1e-12);
        EXPECT_NEAR(o.y(), 0, 1e-12);
    }
}

TEST(Synthetic, SelfConsistentAtSentinel) {
    const TrainConfig c = tiny();
    for (const auto& s : gen_scenes(c, 0, 2))
        for (const auto& v : s.views)
            EXPECT_EQ(psnr(render_forward(s.truth, v.camera, Eigen::Vector3d::Zero()).image, v.image), kPsnrCap);
}

TEST(Synthetic, SameSeedGivesByteIdenticalFiles) {
    const TrainConfig c = tiny();
    const fs::path a = scratch("gen_a"), b = scratch("gen_b");
    save_scenes(a, gen_scenes(c, 0, 3));
    save_scenes(b, gen_scenes(c, 0, 3));
    for (const auto& e : fs::directory_iterator(a)) EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename()));
    const auto back = load_scenes(c, a);
    ASSERT_EQ(back.size(), 3u);
    EXPECT_TRUE(back[2].truth == synthetic_truth(c, 2));
    EXPECT_EQ(back[1].views[5].image.pixels.matrix(), gen_scenes(c, 1, 1)[0].views[5].image.pixels.matrix());
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Synthetic, SceneInputHasOnlyTrainViews) {
    const TrainConfig c = tiny();
    const SyntheticScene s = gen_scenes(c, 0, 1)[0];
    const SceneInput in = scene_input(c, s);
    ASSERT_EQ(in.views.size(), s.train.size());
    for (std::size_t i = 0; i < in.views.size(); ++i)
        EXPECT_EQ(in.views[i].image.pixels.matrix(), s.views[std::size_t(s.train[i])].image.pixels.matrix());
    // seed depth is ground-truth depth plus noise
    const double diff = (in.seed_depths[0] - s.depths[std::size_t(s.train[0])]).abs().mean();
    EXPECT_GT(diff, 0.0);
    EXPECT_LT(diff, 0.2);
}

TEST(Train, ZeroIterationsGivesInit) {
    TrainConfig c = tiny();
    c.outer_iters = 0;
    const auto scenes = gen_scenes(c, 0, 2);
    EXPECT_TRUE(train(c, scenes) == init_predictor(c, scenes));
}

TEST(Train, LambdaOneMatchesVanillaBitForBit) {
    TrainConfig v = tiny();
    v.rule = "vanilla";
    TrainConfig m = tiny();
    m.lambda = 1.0;
    const auto scenes = gen_scenes(v, 0, 3);
    EXPECT_EQ(encode_checkpoint(train(v, scenes)), encode_checkpoint(train(m, scenes)));
}

TEST(Train, ReproducibleAndLogged) {
    const TrainConfig c = tiny();
    const auto scenes = gen_scenes(c, 0, 3);
    std::ostringstream log1, log2;
    TrainOptions o1, o2;
    o1.log = &log1;
    o2.log = &log2;
    const PredictorParams a = train(c, scenes, o1), b = train(c, scenes, o2);
    EXPECT_TRUE(a == b);
    EXPECT_EQ(log1.str(), log2.str());
    std::istringstream lines(log1.str());
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j["iteration"], n);
        for (const char* k : {"L_0", "L_meta", "K_rand", "N_anchor", "grad_norms", "seed", "config_hash"})
            EXPECT_TRUE(j.contains(k)) << k;
        EXPECT_EQ(j["config_hash"], c.hash());
        EXPECT_EQ(j["N_anchor"], j["K_rand"].get<int>() / c.delta);
        ++n;
    }
    EXPECT_EQ(n, c.outer_iters);
}

TEST(Train, PeriodicCheckpoints) {
    TrainConfig c = tiny();
    c.checkpoint_interval = 2;
    const fs::path dir = scratch("ckpt");
    TrainOptions o;
    o.checkpoint_dir = dir;
    const PredictorParams p = train(c, gen_scenes(c, 0, 2), o);
    for (const char* f : {"iter_000002.fspp", "iter_000004.fspp", "iter_000006.fspp", "final.fspp"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_TRUE(load_checkpoint(dir / "final.fspp") == p);
    EXPECT_TRUE(load_checkpoint(dir / "iter_000006.fspp") == p);
    fs::remove_all(dir);
}

TEST(Train, MetaLossDecreasesOnSmallSet) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        TrainConfig c = tiny();
        c.seed = seed;
        c.outer_iters = 50;
        c.outer_lr = 1e-2;
        std::vector<double> meta;
        TrainOptions o;
        o.on_iteration = [&](int, const OuterStepReport& r) { meta.push_back(r.loss_meta); };
        train(c, gen_scenes(c, 0, 5), o);
        double first = 0, last = 0;
        for (int i = 0; i < 10; ++i) {
            first += meta[std::size_t(i)];
            last += meta[meta.size() - 1 - std::size_t(i)];
        }
        EXPECT_LT(last, first) << "seed " << seed;
    }
}

TEST(Evaluate, ZeroStepsGivesOneRowPerScene) {
    TrainConfig c = tiny();
    c.eval_steps = 0;
    const auto scenes = gen_scenes(c, 10, 2);
    const MetricTrajectory t = evaluate(c, init_predictor(c, scenes), scenes);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0].step, 0);
    EXPECT_EQ(t.rows[1].scene, 11);
}

TEST(Evaluate, GroundTruthPredictionHitsSentinel) {
    const TrainConfig c = tiny();
    const auto scenes = gen_scenes(c, 10, 2);
    const MetricTrajectory t =
        evaluate(c, init_predictor(c, scenes), scenes, [](const SyntheticScene& s) { return s.truth; });
    for (const auto& r : t.rows)
        if (r.step == 0) {
            EXPECT_EQ(r.psnr, kPsnrCap);
            EXPECT_NEAR(r.ssim, 1.0, 1e-12);
        }
}

TEST(Evaluate, StepsIncreaseAndTestViewsStayHeldOut) {
    const TrainConfig c = tiny();
    const auto scenes = gen_scenes(c, 10, 2);
    const MetricTrajectory t = evaluate(c, init_predictor(c, scenes), scenes);
    EXPECT_EQ(t.refinement_test_reads, 0);
    ASSERT_EQ(t.rows.size(), 6u);
    const int expected[3] = {0, 10, 20};
    for (std::size_t i = 0; i < t.rows.size(); ++i) EXPECT_EQ(t.rows[i].step, expected[i % 3]);
    const auto summary = t.summary();
    ASSERT_EQ(summary.size(), 3u);
    EXPECT_NEAR(summary[1].psnr, (t.rows[1].psnr + t.rows[4].psnr) / 2, 1e-12);
    EXPECT_GT(summary[2].psnr, summary[0].psnr);
}

TEST(Evaluate, HeldOutViewsCountReads) {
    const TrainConfig c = tiny();
    const SyntheticScene s = gen_scenes(c, 0, 1)[0];
    HeldOutViews held(s, c);
    const MetricRow r = held.metrics(s.truth, 7);
    EXPECT_EQ(held.reads(), std::int64_t(s.test.size()));
    EXPECT_EQ(r.step, 7);
    EXPECT_EQ(r.psnr, kPsnrCap);
    EXPECT_EQ(r.dssim, 0.0);
}

TEST(Outputs, CsvSchemas) {
    EXPECT_EQ(summary_csv_header(), "value,step,psnr,ssim,l1,dssim\n");
    MetricRow r{4, 20, 21.5, 0.5, 0.25, 0.125};
    EXPECT_EQ(summary_csv_rows("0.5", {r}), "0.5,20,21.50000000,0.50000000,0.25000000,0.12500000\n");
    MetricTrajectory t;
    t.rows = {r};
    EXPECT_EQ(trajectory_csv(t), "scene,step,psnr,ssim,l1,dssim\n4,20,21.50000000,0.50000000,0.25000000,0.12500000\n");
    EXPECT_EQ(step_loss_csv({{0.5, 0.25, 0.45}}).substr(0, 35), "step,loss_l1,loss_dssim,loss_total\n");
}

TEST(Sweep, PresetsAndAxisConfigs) {
    EXPECT_EQ(default_sweep_values(SweepAxis::Lambda), (std::vector<std::string>{"0", "0.25", "0.5", "0.75", "1"}));
    EXPECT_EQ(default_sweep_values(SweepAxis::Delta), (std::vector<std::string>{"1", "20", "40", "80", "reptile"}));
    EXPECT_EQ(parse_axis("rule"), SweepAxis::Rule);
    EXPECT_EQ(code_of([] { parse_axis("eta"); }), Errc::BadConfig);
    const TrainConfig base;
    EXPECT_EQ(sweep_config(base, SweepAxis::Lambda, "0.75").lambda, 0.75);
    const TrainConfig d80 = sweep_config(base, SweepAxis::Delta, "80");
    EXPECT_EQ(d80.delta, 80);
    EXPECT_EQ(d80.k_min, 80);
    EXPECT_EQ(sweep_config(base, SweepAxis::Delta, "reptile").rule, "reptile");
}

TEST(Sweep, LambdaEndpointsAndDirectRunAgree) {
    const TrainConfig c = tiny();
    const auto tr = gen_scenes(c, 0, 3), ev = gen_scenes(c, 3, 2);
    const fs::path dir = scratch("sweep");
    const SweepResult r = sweep(c, SweepAxis::Lambda, {"0", "1"}, tr, ev, dir);
    ASSERT_EQ(r.trajectories.size(), 2u);
    TrainConfig v = c;
    v.rule = "vanilla";
    const MetricTrajectory vt = evaluate(v, train(v, tr), ev);
    EXPECT_EQ(summary_csv_rows("x", vt.summary()), summary_csv_rows("x", r.trajectories[1].summary()));
    const MetricTrajectory direct = evaluate(c, train(c, tr), ev);
    EXPECT_EQ(trajectory_csv(direct), trajectory_csv(r.trajectories[0]));
    EXPECT_EQ(slurp(dir / "summary.csv"), r.summary_csv);
    for (const char* f : {"config.resolved", "config.hash", "train.jsonl", "final.fspp", "trajectory.csv"})
        EXPECT_TRUE(fs::exists(dir / "1" / f)) << f;
    fs::remove_all(dir);
}

TEST(Sweep, DeltaPresetEmitsFiveRuns) {
    TrainConfig c = tiny();
    c.outer_iters = 1;
    c.eval_steps = 0;
    c.k_max = 100;
    const auto tr = gen_scenes(c, 0, 1), ev = gen_scenes(c, 1, 1);
    const SweepResult r = sweep(c, SweepAxis::Delta, default_sweep_values(SweepAxis::Delta), tr, ev);
    EXPECT_EQ(r.values.size(), 5u);
    std::istringstream lines(r.summary_csv);
    std::string line;
    int rows = -1;
    while (std::getline(lines, line)) ++rows;
    EXPECT_EQ(rows, 5);
}
