#include "mastoid/optimize.hpp"

#include <cmath>
#include <string>

#include "mastoid/error.hpp"

namespace mastoid {

void OptimConfig::validate() const {
    if (max_iters < 0) throw ConfigError("optimizer: max_iters must be >= 0");
    if (!(step_size > 0.0)) throw ConfigError("optimizer: step_size must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("optimizer: moment decays must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("optimizer: epsilon must be > 0");
    if (!(lambda_smooth >= 0.0)) throw ConfigError("optimizer: lambda_smooth must be >= 0");
    if (!(init_delta > 0.0 && init_delta < 1.0)) throw ConfigError("optimizer: init_delta must lie in (0, 1)");
    if (!(convergence_tolerance >= 0.0) || convergence_patience < 1) {
        throw ConfigError("optimizer: invalid convergence settings");
    }
}

OptimizationResult optimize_mask(const Volume3& rho, const Volume3& omega, const OptimConfig& cfg,
                                 const MsssimParams& p, const IterationObserver& observer) {
    cfg.validate();
    ObjectiveOptions opts;
    opts.lambda = cfg.lambda_smooth;
    opts.smooth_normalize = cfg.smooth_normalize;
    opts.variant = cfg.variant;
    const Objective objective(rho, omega, p, opts);

    OptimizationResult result;
    result.delta = MaskField(rho.dims(), cfg.init_delta);
    const std::size_t n = result.delta.size();
    std::vector<double> m(n, 0.0), v(n, 0.0);
    std::vector<double> z(result.delta.latent().begin(), result.delta.latent().end());

    double b1t = 1.0, b2t = 1.0;
    int quiet = 0;
    for (int it = 0; it <= cfg.max_iters; ++it) {
        Evaluation ev;
        try {
            ev = objective.evaluate_with_gradient(result.delta);
        } catch (const NumericalError& e) {
            throw NumericalError("optimizer: iteration " + std::to_string(it) + ": " + e.what());
        }
        for (double g : ev.gradient) {
            if (!std::isfinite(g)) throw NumericalError("optimizer: non-finite gradient at iteration " + std::to_string(it));
        }
        if (observer) observer(it, ev.report);
        if (!result.trace.empty()) {
            quiet = std::abs(ev.report.total - result.trace.back().total) < cfg.convergence_tolerance ? quiet + 1 : 0;
        }
        result.trace.push_back(std::move(ev.report));
        if (quiet >= cfg.convergence_patience) {
            result.converged = true;
            break;
        }
        if (it == cfg.max_iters) break;

        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        for (std::size_t i = 0; i < n; ++i) {
            const double g = ev.gradient[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m[i] / (1.0 - b1t);
            const double vhat = v[i] / (1.0 - b2t);
            z[i] -= cfg.step_size * mhat / (std::sqrt(vhat) + cfg.epsilon);
            result.delta.set_latent(i, z[i]);
            z[i] = result.delta.latent()[i];
        }
    }
    return result;
}

BinaryMask threshold_mask(const MaskField& delta, double t) {
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("threshold_mask: threshold must lie in (0, 1)");
    BinaryMask out(delta.dims());
    for (std::size_t i = 0; i < out.size(); ++i) out.labels[i] = delta.value(i) >= t ? 1 : 0;
    return out;
}

}  // namespace mastoid
