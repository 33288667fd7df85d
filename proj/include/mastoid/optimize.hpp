#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mastoid/binary_mask.hpp"
#include "mastoid/similarity.hpp"

namespace mastoid {

struct OptimConfig {
    int max_iters = 300;
    double step_size = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double lambda_smooth = 0.05;
    bool smooth_normalize = true;
    double init_delta = 0.1;
    // Stop once |total(t) - total(t-1)| < tolerance for `patience` consecutive iterations.
    double convergence_tolerance = 1e-6;
    int convergence_patience = 20;
    std::uint64_t seed = 0;
    LossVariant variant = LossVariant::msssim_cscc;

    void validate() const;
};

struct OptimizationResult {
    MaskField delta;
    // trace[t] is the report for the field before update t; the last entry
    // describes the returned field.
    std::vector<LossReport> trace;
    bool converged = false;
};

// Called after each evaluation with (iteration, report).
using IterationObserver = std::function<void(int, const LossReport&)>;

// Adam on the latent field. Throws NumericalError naming the iteration when
// the loss or gradient stops being finite.
OptimizationResult optimize_mask(const Volume3& rho, const Volume3& omega, const OptimConfig& cfg,
                                 const MsssimParams& p = {}, const IterationObserver& observer = {});

BinaryMask threshold_mask(const MaskField& delta, double t = 0.5);

}  // namespace mastoid
