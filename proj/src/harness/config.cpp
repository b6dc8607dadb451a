// Copyright Contributors to the fsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "fsplat/error.hpp"
#include "fsplat/harness.hpp"
#include "fsplat/photometric.hpp"
#include "fsplat/renderer.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fsplat {

namespace {

// Shortest text that parses back to the same double.
std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) throw Error(Errc::BadConfig, "bad value '" + text + "' for " + key);
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw Error(Errc::BadConfig, "bad boolean '" + text + "' for " + key);
}

struct Field {
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field field(T TrainConfig::*member) {
    Field f;
    f.set = [member](TrainConfig& c, const std::string& v) {
        if constexpr (std::is_same_v<T, bool>)
            c.*member = parse_bool("", v);
        else if constexpr (std::is_same_v<T, std::string>)
            c.*member = v;
        else
            c.*member = parse_number<T>("", v);
    };
    f.get = [member](const TrainConfig& c) -> std::string {
        if constexpr (std::is_same_v<T, bool>)
            return c.*member ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>)
            return c.*member;
        else if constexpr (std::is_floating_point_v<T>)
            return format_double(c.*member);
        else
            return std::to_string(c.*member);
    };
    return f;
}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = {
        {"data_seed", field(&TrainConfig::data_seed)},
        {"train_scenes", field(&TrainConfig::train_scenes)},
        {"eval_scenes", field(&TrainConfig::eval_scenes)},
        {"gaussians", field(&TrainConfig::gaussians)},
        {"image_size", field(&TrainConfig::image_size)},
        {"views", field(&TrainConfig::views)},
        {"ring_radius", field(&TrainConfig::ring_radius)},
        {"fov", field(&TrainConfig::fov)},
        {"extent", field(&TrainConfig::extent)},
        {"depth_noise", field(&TrainConfig::depth_noise)},
        {"background", field(&TrainConfig::background)},
        {"predictor", field(&TrainConfig::predictor)},
        {"sh_degree", field(&TrainConfig::sh_degree)},
        {"hidden", field(&TrainConfig::hidden)},
        {"stride", field(&TrainConfig::stride)},
        {"gain_means", field(&TrainConfig::gain_means)},
        {"gain_scales", field(&TrainConfig::gain_scales)},
        {"gain_rotations", field(&TrainConfig::gain_rotations)},
        {"gain_opacities", field(&TrainConfig::gain_opacities)},
        {"gain_sh", field(&TrainConfig::gain_sh)},
        {"seed", field(&TrainConfig::seed)},
        {"rule", field(&TrainConfig::rule)},
        {"lambda", field(&TrainConfig::lambda)},
        {"delta", field(&TrainConfig::delta)},
        {"k_min", field(&TrainConfig::k_min)},
        {"k_max", field(&TrainConfig::k_max)},
        {"outer_iters", field(&TrainConfig::outer_iters)},
        {"outer_lr", field(&TrainConfig::outer_lr)},
        {"skip_inner", field(&TrainConfig::skip_inner)},
        {"strict", field(&TrainConfig::strict)},
        {"checkpoint_interval", field(&TrainConfig::checkpoint_interval)},
        {"lr_means", field(&TrainConfig::lr_means)},
        {"lr_scales", field(&TrainConfig::lr_scales)},
        {"lr_rotations", field(&TrainConfig::lr_rotations)},
        {"lr_opacities", field(&TrainConfig::lr_opacities)},
        {"lr_sh", field(&TrainConfig::lr_sh)},
        {"w_ssim", field(&TrainConfig::w_ssim)},
        {"views_per_step", field(&TrainConfig::views_per_step)},
        {"eval_steps", field(&TrainConfig::eval_steps)},
        {"eval_stride", field(&TrainConfig::eval_stride)},
    };
    return table;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw Error(Errc::BadConfig, "unknown config key '" + key + "'");
    try {
        it->second.set(*this, value);
    } catch (const Error&) {
        throw Error(Errc::BadConfig, "bad value '" + value + "' for " + key);
    }
}

std::string TrainConfig::get(const std::string& key) const {
    const auto it = fields().find(key);
    if (it == fields().end()) throw Error(Errc::BadConfig, "unknown config key '" + key + "'");
    return it->second.get(*this);
}

const std::vector<std::string>& TrainConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> out;
        for (const auto& [name, f] : fields()) out.push_back(name);
        return out;
    }();
    return k;
}

void TrainConfig::apply(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(Errc::BadConfig, "line " + std::to_string(lineno) + ": expected key = value");
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void TrainConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoFailure, "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    apply(ss.str());
}

void TrainConfig::validate() const {
    auto need = [](bool ok, const std::string& what) {
        if (!ok) throw Error(Errc::BadConfig, what);
    };
    need(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
    need(delta >= 1 && delta <= k_min && k_min <= k_max, "need 1 <= delta <= k_min <= k_max");
    need(outer_lr > 0 && lr_means > 0 && lr_scales > 0 && lr_rotations > 0 && lr_opacities > 0 && lr_sh > 0,
         "learning rates must be positive");
    need(train_scenes >= 1 && eval_scenes >= 0 && gaussians >= 1 && views >= 4, "scene counts out of range");
    need(image_size >= 11, "image_size must be at least the SSIM window (11)");
    need(sh_degree >= 0 && sh_degree <= kMaxShDegree, "sh_degree must be 0..3");
    need(hidden >= 1 && stride >= 1, "hidden and stride must be positive");
    need(predictor == "head" || predictor == "shared", "predictor must be head or shared");
    need(rule == "metagrad" || rule == "reptile" || rule == "vanilla", "rule must be metagrad, reptile or vanilla");
    need(w_ssim >= 0.0 && w_ssim <= 1.0, "w_ssim must lie in [0, 1]");
    need(outer_iters >= 0 && eval_steps >= 0 && eval_stride >= 1 && checkpoint_interval >= 0,
         "iteration counts must be non-negative");
    need(views_per_step >= 0, "views_per_step must be >= 0");
    need(ring_radius > extent && fov > 0.0 && fov < 3.0 && extent > 0.0 && depth_noise >= 0.0,
         "camera ring must enclose the scene");
}

std::string TrainConfig::snapshot() const {
    std::string out;
    for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
    out += "# fixed: dilation = " + format_double(RasterConstants::kDilation) +
           ", alpha_max = " + format_double(RasterConstants::kAlphaMax) +
           ", alpha_min = " + format_double(RasterConstants::kAlphaMin) +
           ", transmittance_min = " + format_double(RasterConstants::kTransmittanceMin) +
           ", ssim_window = " + std::to_string(kSsimWindow) + ", ssim_sigma = " + format_double(kSsimSigma) +
           ", outer_optimizer = adam(0.9, 0.999, 1e-8), loss = l1 + dssim (no lpips)\n";
    return out;
}

std::string TrainConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : snapshot()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

OuterConfig TrainConfig::outer() const {
    OuterConfig o;
    o.rule = parse_rule(rule);
    o.lambda = lambda;
    o.k_min = k_min;
    o.k_max = k_max;
    o.delta = delta;
    o.inner_rates = BlockRates{lr_means * extent, lr_scales, lr_rotations, lr_opacities, lr_sh};
    o.stride = stride;
    o.w_ssim = w_ssim;
    o.background = Eigen::Vector3d::Constant(background);
    o.views_per_step = views_per_step;
    o.skip_inner = skip_inner;
    o.strict = strict;
    return o;
}

PredictorShape TrainConfig::shape(std::int64_t slots) const {
    PredictorShape s;
    s.sh_degree = sh_degree;
    s.hidden = hidden;
    s.slots = slots;
    s.gain = {gain_means, gain_scales, gain_rotations, gain_opacities, gain_sh};
    return s;
}

PredictorMode TrainConfig::mode() const {
    return predictor == "shared" ? PredictorMode::SharedInit : PredictorMode::ConditionalHead;
}

}  // namespace fsplat
