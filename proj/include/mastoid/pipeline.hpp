#pragma once

#include <array>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mastoid/config.hpp"
#include "mastoid/error.hpp"
#include "mastoid/metrics.hpp"
#include "mastoid/optimize.hpp"
#include "mastoid/registration.hpp"

namespace mastoid {

// Thrown by run_pipeline after the partial manifest has been written. The
// original exception is kept for exit-code mapping.
class StageError : public Error {
public:
    StageError(std::string stage, std::exception_ptr cause, const std::string& message)
        : Error(stage + ": " + message), stage_(std::move(stage)), cause_(std::move(cause)) {}
    const std::string& stage() const noexcept { return stage_; }
    const std::exception_ptr& cause() const noexcept { return cause_; }

private:
    std::string stage_;
    std::exception_ptr cause_;
};

struct PipelineResult {
    PhantomCase phantom;
    std::optional<RegistrationResult> registration;
    Volume3 registered;
    OptimizationResult optimization;
    BinaryMask mask;
    CaseMetrics metrics;
};

// phantom -> optional registration -> optimization -> evaluation, in memory.
PipelineResult run_case(const PipelineConfig& cfg, const std::string& case_id = "case");

// Runs the pipeline and writes every artifact plus manifest.json into `out`.
// Returns the number of manifest entries.
std::size_t run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out);

struct AblationRow {
    LossVariant variant = LossVariant::msssim_cscc;
    std::uint64_t seed = 0;
    // "ok" or "failed: <reason>".
    std::string status;
    CaseMetrics metrics;
};

inline constexpr std::array<LossVariant, 3> kAllVariants{LossVariant::msssim, LossVariant::msssim_scc,
                                                         LossVariant::msssim_cscc};

// One run per (seed, variant), rows sorted by (variant name, seed). Failures
// become rows with a failed status.
std::vector<AblationRow> run_ablation(const PipelineConfig& cfg, std::span<const std::uint64_t> seeds);

// Header `variant,seed,dice,...,asd,status`.
std::string ablation_csv(const std::vector<AblationRow>& rows);
// Header `variant,stat,dice,...,asd`, one block of summary rows per variant.
std::string ablation_summary_csv(const std::vector<AblationRow>& rows);

// Writes ablation.csv, ablation_summary.csv and manifest.json into `out`.
std::vector<AblationRow> run_ablation(const PipelineConfig& cfg, std::span<const std::uint64_t> seeds,
                                      const std::filesystem::path& out);

}  // namespace mastoid
