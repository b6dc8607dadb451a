// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "fsplat/camera.hpp"
#include "fsplat/metagrad.hpp"
#include "fsplat/predictor.hpp"
#include "fsplat/scene.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace fsplat {

// ---------------------------------------------------------------- config

struct TrainConfig {
    // data
    std::uint64_t data_seed = 7;
    int train_scenes = 40;
    int eval_scenes = 10;
    int gaussians = 256;
    int image_size = 32;
    int views = 16;
    double ring_radius = 2.5;
    double fov = 0.9;  // horizontal, radians
    double extent = 1.0;
    double depth_noise = 0.05;  // times extent
    double background = 0.0;

    // predictor
    std::string predictor = "head";  // head | shared
    int sh_degree = 1;
    int hidden = 32;
    int stride = 4;
    double gain_means = 1.0;
    double gain_scales = 1.0;
    double gain_rotations = 1.0;
    double gain_opacities = 1.0;
    double gain_sh = 1.0;

    // outer loop
    std::uint64_t seed = 1;
    std::string rule = "metagrad";
    double lambda = 0.0;
    int delta = 40;
    int k_min = 50;
    int k_max = 500;
    int outer_iters = 200;
    double outer_lr = 1e-3;
    bool skip_inner = false;
    bool strict = true;
    int checkpoint_interval = 0;

    // inner loop
    double lr_means = 1.6e-4;  // times extent
    double lr_scales = 5e-3;
    double lr_rotations = 1e-3;
    double lr_opacities = 5e-2;
    double lr_sh = 2.5e-3;
    double w_ssim = 0.2;
    int views_per_step = 1;

    // evaluation
    int eval_steps = 500;
    int eval_stride = 20;

    /// Sets one field from text. Throws BadConfig for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    static const std::vector<std::string>& keys();

    /// Reads "key = value" lines; '#' starts a comment.
    void load(const std::filesystem::path& path);
    void apply(const std::string& text);

    /// Throws BadConfig when ranges or cross-field constraints fail.
    void validate() const;

    /// Resolved key=value listing in key order, plus fixed renderer constants.
    std::string snapshot() const;
    /// 16 hex digits of FNV-1a over the snapshot.
    std::string hash() const;

    OuterConfig outer() const;
    PredictorShape shape(std::int64_t slots) const;
    PredictorMode mode() const;
};

// ---------------------------------------------------------------- scenes

struct SyntheticScene {
    int id = 0;
    GaussianScene truth;
    std::vector<View> views;              // all cameras, ring order
    std::vector<Eigen::ArrayXXd> depths;  // ground-truth depth per view
    std::vector<int> train;               // indices into views
    std::vector<int> test;                // every fourth view
};

/// Ring cameras looking at the origin.
std::vector<Camera> ring_cameras(const TrainConfig& config);

/// Ground-truth Gaussians for scene `id`, deterministic in (data_seed, id).
GaussianScene synthetic_truth(const TrainConfig& config, int id);

/// Renders the ground truth into every ring view and records depth and split.
SyntheticScene make_scene(const TrainConfig& config, int id, GaussianScene truth);

/// Scenes first_id .. first_id + count - 1.
std::vector<SyntheticScene> gen_scenes(const TrainConfig& config, int first_id, int count);

/// Train views plus noisy seed depths: the only data the predictor and the refiner see.
SceneInput scene_input(const TrainConfig& config, const SyntheticScene& scene);

void save_scenes(const std::filesystem::path& dir, const std::vector<SyntheticScene>& scenes);
std::vector<SyntheticScene> load_scenes(const TrainConfig& config, const std::filesystem::path& dir);

// ---------------------------------------------------------------- train

struct TrainOptions {
    std::ostream* log = nullptr;              // JSON lines
    std::filesystem::path checkpoint_dir;     // empty: no periodic checkpoints
    std::function<void(int, const OuterStepReport&)> on_iteration;
};

PredictorParams init_predictor(const TrainConfig& config, const std::vector<SyntheticScene>& scenes);

PredictorParams train(const TrainConfig& config, const std::vector<SyntheticScene>& scenes,
                      const TrainOptions& options = {});

// ---------------------------------------------------------------- evaluate

struct MetricRow {
    int scene = 0;
    int step = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double l1 = 0.0;
    double dssim = 0.0;
};

struct MetricTrajectory {
    std::vector<MetricRow> rows;  // grouped by scene, steps increasing
    /// Test-view reads made while the refiner was stepping; always zero.
    std::int64_t refinement_test_reads = 0;

    /// Mean over scenes per step.
    std::vector<MetricRow> summary() const;
};

/// Test-view metrics for a scene. Counts every read so callers can verify
/// that held-out pixels never reach the refiner.
class HeldOutViews {
public:
    HeldOutViews(const SyntheticScene& scene, const TrainConfig& config);
    MetricRow metrics(const GaussianScene& scene, int step);
    std::int64_t reads() const { return reads_; }

private:
    std::vector<View> views_;
    Eigen::Vector3d background_;
    int id_;
    std::int64_t reads_ = 0;
};

/// Predicts from train views, refines on train views only, records test metrics at
/// step 0 and every eval_stride steps up to eval_steps (and at eval_steps itself).
/// `override_g0`, when set, replaces the prediction for every scene.
MetricTrajectory evaluate(const TrainConfig& config, const PredictorParams& params,
                          const std::vector<SyntheticScene>& scenes,
                          const std::function<GaussianScene(const SyntheticScene&)>& override_g0 = {});

// ---------------------------------------------------------------- outputs

/// value,step,psnr,ssim,l1,dssim
std::string summary_csv_header();
std::string summary_csv_rows(const std::string& value, const std::vector<MetricRow>& rows);
/// scene,step,psnr,ssim,l1,dssim
std::string trajectory_csv(const MetricTrajectory& trajectory);
/// step,loss_l1,loss_dssim,loss_total
std::string step_loss_csv(const std::vector<StepLoss>& losses);

/// One JSON object (no newline) for a training log line.
std::string log_record(int iteration, int scene, const OuterStepReport& report, const TrainConfig& config);

// ---------------------------------------------------------------- sweep

enum class SweepAxis { Lambda, Delta, Rule };
SweepAxis parse_axis(const std::string& text);
std::vector<std::string> default_sweep_values(SweepAxis axis);

/// Config for one sweep value. For the delta axis "reptile" selects the Reptile
/// rule and k_min is raised to the stride when needed.
TrainConfig sweep_config(const TrainConfig& base, SweepAxis axis, const std::string& value);

struct SweepResult {
    std::vector<std::string> values;
    std::vector<MetricTrajectory> trajectories;
    std::string summary_csv;
};

/// Trains and evaluates each value with the base seeds. When `out_dir` is set,
/// writes summary.csv plus per-value trajectory CSVs, logs and checkpoints.
SweepResult sweep(const TrainConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                  const std::vector<SyntheticScene>& train_scenes, const std::vector<SyntheticScene>& eval_scenes,
                  const std::filesystem::path& out_dir = {});

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fsplat
