#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mastoid/optimize.hpp"
#include "mastoid/phantom.hpp"
#include "mastoid/similarity.hpp"

namespace mastoid {

struct RegistrationConfig {
    bool enabled = false;
    int levels = 3;
};

// One JSON document drives every subcommand. Sections may be omitted
// (defaults apply); unknown keys anywhere are rejected.
struct PipelineConfig {
    PhantomSpec phantom;
    RegistrationConfig registration;
    OptimConfig optimizer;
    MsssimParams msssim;
    LossVariant loss_variant = LossVariant::msssim_cscc;
    double threshold = 0.5;
    double mask_iso = 0.5;
    double ct_iso = 0.5;
    std::filesystem::path output_dir = "out";

    // Copies loss_variant into the optimizer config and validates every section.
    void validate();
};

inline constexpr int kConfigVersion = 1;

PipelineConfig parse_config(const nlohmann::json& doc);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const PipelineConfig& cfg);
nlohmann::ordered_json to_json(const PhantomSpec& spec);
nlohmann::ordered_json to_json(const RigidTransform& t, double ncc);

}  // namespace mastoid
