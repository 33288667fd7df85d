#include "mastoid/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "mastoid/error.hpp"

namespace mastoid {

namespace {

using nlohmann::json;

void expect_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        const json& v = obj.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
                    throw ConfigError(where + "." + key + ": expected a non-negative integer");
                }
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
        }
        out = v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

std::array<double, 3> read_triple(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(where + ": expected a 3-element array");
    std::array<double, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) {
        if (!v[i].is_number()) throw ConfigError(where + ": expected numbers");
        out[i] = v[i].get<double>();
    }
    return out;
}

RigidTransform read_transform(const json& obj, const std::string& where) {
    expect_keys(obj, where, {"rot_rad", "rot_deg", "trans_mm"});
    if (obj.contains("rot_rad") && obj.contains("rot_deg")) {
        throw ConfigError(where + ": give rotation as rot_rad or rot_deg, not both");
    }
    RigidTransform t;
    if (obj.contains("rot_rad")) t.rotation = read_triple(obj["rot_rad"], where + ".rot_rad");
    if (obj.contains("rot_deg")) {
        const auto deg = read_triple(obj["rot_deg"], where + ".rot_deg");
        for (int a = 0; a < 3; ++a) t.rotation[a] = deg[a] * std::numbers::pi / 180.0;
    }
    if (obj.contains("trans_mm")) t.translation = read_triple(obj["trans_mm"], where + ".trans_mm");
    return t;
}

void read_phantom(const json& obj, PhantomSpec& p) {
    const std::string w = "phantom";
    expect_keys(obj, w,
                {"dims", "spacing_mm", "seed", "bone_level", "air_level", "air_cell_count", "removal_blob_count",
                 "blob_radius_min", "blob_radius_max", "noise_sigma", "artifact_count", "artifact_level",
                 "fluid_amplitude", "misalignment"});
    if (obj.contains("dims")) {
        const json& d = obj["dims"];
        if (!d.is_array() || d.size() != 3) throw ConfigError("phantom.dims: expected 3 integers");
        for (const auto& e : d) {
            if (!e.is_number_integer() || e.get<long long>() <= 0) {
                throw ConfigError("phantom.dims: expected positive integers");
            }
        }
        p.dims = Dims{d[0].get<std::size_t>(), d[1].get<std::size_t>(), d[2].get<std::size_t>()};
    }
    if (obj.contains("spacing_mm")) {
        const auto s = read_triple(obj["spacing_mm"], "phantom.spacing_mm");
        p.spacing = Spacing{s[0], s[1], s[2]};
    }
    read(obj, "seed", p.seed, w);
    read(obj, "bone_level", p.bone_level, w);
    read(obj, "air_level", p.air_level, w);
    read(obj, "air_cell_count", p.air_cell_count, w);
    read(obj, "removal_blob_count", p.removal_blob_count, w);
    read(obj, "blob_radius_min", p.blob_radius_min, w);
    read(obj, "blob_radius_max", p.blob_radius_max, w);
    read(obj, "noise_sigma", p.noise_sigma, w);
    read(obj, "artifact_count", p.artifact_count, w);
    read(obj, "artifact_level", p.artifact_level, w);
    read(obj, "fluid_amplitude", p.fluid_amplitude, w);
    if (obj.contains("misalignment")) {
        if (obj["misalignment"].is_null()) {
            p.misalignment.reset();
        } else {
            p.misalignment = read_transform(obj["misalignment"], "phantom.misalignment");
        }
    }
}

void read_optimizer(const json& obj, OptimConfig& o) {
    const std::string w = "optimizer";
    expect_keys(obj, w,
                {"max_iters", "step_size", "beta1", "beta2", "epsilon", "lambda_smooth", "smooth_normalize",
                 "init_delta", "convergence_tolerance", "convergence_patience", "seed"});
    read(obj, "max_iters", o.max_iters, w);
    read(obj, "step_size", o.step_size, w);
    read(obj, "beta1", o.beta1, w);
    read(obj, "beta2", o.beta2, w);
    read(obj, "epsilon", o.epsilon, w);
    read(obj, "lambda_smooth", o.lambda_smooth, w);
    read(obj, "smooth_normalize", o.smooth_normalize, w);
    read(obj, "init_delta", o.init_delta, w);
    read(obj, "convergence_tolerance", o.convergence_tolerance, w);
    read(obj, "convergence_patience", o.convergence_patience, w);
    read(obj, "seed", o.seed, w);
}

void read_msssim(const json& obj, MsssimParams& m) {
    const std::string w = "msssim";
    expect_keys(obj, w,
                {"scales", "weights", "k1", "k2", "dynamic_range", "window_radius", "window_sigma",
                 "variance_floor"});
    read(obj, "scales", m.scales, w);
    if (obj.contains("weights")) {
        const json& ws = obj["weights"];
        if (!ws.is_array()) throw ConfigError("msssim.weights: expected an array");
        m.weights.clear();
        for (const auto& e : ws) {
            if (!e.is_number()) throw ConfigError("msssim.weights: expected numbers");
            m.weights.push_back(e.get<double>());
        }
    }
    read(obj, "k1", m.k1, w);
    read(obj, "k2", m.k2, w);
    read(obj, "dynamic_range", m.dynamic_range, w);
    read(obj, "window_radius", m.window_radius, w);
    read(obj, "window_sigma", m.window_sigma, w);
    read(obj, "variance_floor", m.variance_floor, w);
}

}  // namespace

void PipelineConfig::validate() {
    phantom.validate();
    if (registration.levels < 1) throw ConfigError("registration.levels must be >= 1");
    optimizer.variant = loss_variant;
    optimizer.validate();
    msssim.validate();
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
    if (!std::isfinite(mask_iso) || !std::isfinite(ct_iso)) throw ConfigError("iso levels must be finite");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

PipelineConfig parse_config(const json& doc) {
    expect_keys(doc, "config",
                {"version", "phantom", "registration", "optimizer", "msssim", "loss_variant", "threshold",
                 "mask_iso", "ct_iso", "output_dir"});
    if (!doc.contains("version")) throw ConfigError("config: missing \"version\"");
    if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kConfigVersion) {
        throw ConfigError("config: unsupported version (expected 1)");
    }
    PipelineConfig cfg;
    if (doc.contains("phantom")) read_phantom(doc["phantom"], cfg.phantom);
    if (doc.contains("registration")) {
        const json& r = doc["registration"];
        expect_keys(r, "registration", {"enabled", "levels"});
        read(r, "enabled", cfg.registration.enabled, "registration");
        read(r, "levels", cfg.registration.levels, "registration");
    }
    if (doc.contains("optimizer")) read_optimizer(doc["optimizer"], cfg.optimizer);
    if (doc.contains("msssim")) read_msssim(doc["msssim"], cfg.msssim);
    if (doc.contains("loss_variant")) {
        if (!doc["loss_variant"].is_string()) throw ConfigError("loss_variant: expected a string");
        cfg.loss_variant = parse_loss_variant(doc["loss_variant"].get<std::string>());
    }
    read(doc, "threshold", cfg.threshold, "config");
    read(doc, "mask_iso", cfg.mask_iso, "config");
    read(doc, "ct_iso", cfg.ct_iso, "config");
    if (doc.contains("output_dir")) {
        if (!doc["output_dir"].is_string()) throw ConfigError("output_dir: expected a string");
        cfg.output_dir = doc["output_dir"].get<std::string>();
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

nlohmann::ordered_json to_json(const RigidTransform& t, double ncc) {
    nlohmann::ordered_json j;
    j["rot_rad"] = {t.rotation[0], t.rotation[1], t.rotation[2]};
    j["trans_mm"] = {t.translation[0], t.translation[1], t.translation[2]};
    j["ncc"] = ncc;
    return j;
}

nlohmann::ordered_json to_json(const PhantomSpec& p) {
    nlohmann::ordered_json j;
    j["dims"] = {p.dims.nx, p.dims.ny, p.dims.nz};
    j["spacing_mm"] = {p.spacing.x, p.spacing.y, p.spacing.z};
    j["seed"] = p.seed;
    j["bone_level"] = p.bone_level;
    j["air_level"] = p.air_level;
    j["air_cell_count"] = p.air_cell_count;
    j["removal_blob_count"] = p.removal_blob_count;
    j["blob_radius_min"] = p.blob_radius_min;
    j["blob_radius_max"] = p.blob_radius_max;
    j["noise_sigma"] = p.noise_sigma;
    j["artifact_count"] = p.artifact_count;
    j["artifact_level"] = p.artifact_level;
    j["fluid_amplitude"] = p.fluid_amplitude;
    if (p.misalignment) {
        nlohmann::ordered_json m;
        m["rot_rad"] = {p.misalignment->rotation[0], p.misalignment->rotation[1], p.misalignment->rotation[2]};
        m["trans_mm"] = {p.misalignment->translation[0], p.misalignment->translation[1],
                         p.misalignment->translation[2]};
        j["misalignment"] = m;
    } else {
        j["misalignment"] = nullptr;
    }
    return j;
}

nlohmann::ordered_json to_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["version"] = kConfigVersion;
    j["phantom"] = to_json(c.phantom);
    j["registration"] = {{"enabled", c.registration.enabled}, {"levels", c.registration.levels}};
    const OptimConfig& o = c.optimizer;
    nlohmann::ordered_json oj;
    oj["max_iters"] = o.max_iters;
    oj["step_size"] = o.step_size;
    oj["beta1"] = o.beta1;
    oj["beta2"] = o.beta2;
    oj["epsilon"] = o.epsilon;
    oj["lambda_smooth"] = o.lambda_smooth;
    oj["smooth_normalize"] = o.smooth_normalize;
    oj["init_delta"] = o.init_delta;
    oj["convergence_tolerance"] = o.convergence_tolerance;
    oj["convergence_patience"] = o.convergence_patience;
    oj["seed"] = o.seed;
    j["optimizer"] = oj;
    const MsssimParams& m = c.msssim;
    nlohmann::ordered_json mj;
    mj["scales"] = m.scales;
    mj["weights"] = m.weights;
    mj["k1"] = m.k1;
    mj["k2"] = m.k2;
    mj["dynamic_range"] = m.dynamic_range;
    mj["window_radius"] = m.window_radius;
    mj["window_sigma"] = m.window_sigma;
    mj["variance_floor"] = m.variance_floor;
    j["msssim"] = mj;
    j["loss_variant"] = std::string(to_string(c.loss_variant));
    j["threshold"] = c.threshold;
    j["mask_iso"] = c.mask_iso;
    j["ct_iso"] = c.ct_iso;
    j["output_dir"] = c.output_dir.string();
    return j;
}

}  // namespace mastoid
