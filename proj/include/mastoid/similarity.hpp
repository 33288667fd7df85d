#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "mastoid/volume.hpp"

namespace mastoid {

// Which comparison term receives the squared cross-correlation.
enum class LossVariant {
    msssim,       // plain MS-SSIM
    msssim_scc,   // SCC added to the structure term s_j
    msssim_cscc,  // SCC added to the contrast term c_j
};

std::string_view to_string(LossVariant v) noexcept;
// Throws ConfigError for anything other than the three variant names.
LossVariant parse_loss_variant(std::string_view name);

struct MsssimParams {
    int scales = 5;
    // beta_j = gamma_j per scale, finest first; alpha_M = beta_M.
    std::vector<double> weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
    std::size_t window_radius = 5;
    double window_sigma = 1.5;
    // Added to both local variances and to the local covariance before the
    // contrast and structure terms. Identical inputs still score exactly 1,
    // and the square roots stay differentiable on flat windows.
    double variance_floor = 1e-8;

    double c1() const noexcept { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const noexcept { return (k2 * dynamic_range) * (k2 * dynamic_range); }
    double c3() const noexcept { return 0.5 * c2(); }
    double weight_sum() const noexcept;

    void validate() const;
};

// Per-axis window length at a given scale: the largest odd length that is at
// most both 2*radius+1 and the extent of that axis.
std::size_t window_length(const MsssimParams& p, std::size_t extent);

// Dims of each pyramid level, finest first.
std::vector<Dims> pyramid_dims(Dims finest, int scales);

// Removal probability field delta = logistic(latent), one value per voxel.
class MaskField {
public:
    // Latents are clamped to +/- this value, keeping delta strictly inside (0, 1).
    static constexpr double kLatentLimit = 30.0;

    MaskField() = default;
    MaskField(Dims dims, double probability);
    static MaskField from_latent(Dims dims, std::vector<double> latent);
    static MaskField from_probabilities(Dims dims, std::span<const double> probabilities);
    static MaskField from_volume(const Volume3& probabilities);

    const Dims& dims() const noexcept { return dims_; }
    std::size_t size() const noexcept { return latent_.size(); }
    std::span<const double> latent() const noexcept { return latent_; }
    double value(std::size_t i) const noexcept;
    std::vector<double> values() const;
    Volume3 to_volume(Spacing spacing) const;

    void set_latent(std::size_t i, double z) noexcept;

private:
    Dims dims_{};
    std::vector<double> latent_;
};

double logistic(double z) noexcept;
double logit(double p);

// rho * (1 - delta) per voxel.
Volume3 apply_mask(const Volume3& rho, const MaskField& delta);
Field3 apply_mask_field(const Volume3& rho, const MaskField& delta);

// Squared Pearson correlation over all voxels. Throws NumericalError when
// either input has zero variance.
double scc(const Volume3& a, const Volume3& b);
double scc(const Field3& a, const Field3& b);

struct SsimComponents {
    double l_mean = 0.0;
    double c_mean = 0.0;
    double s_mean = 0.0;
};

// Component means at pyramid level `scale_index` (0 = full resolution),
// averaged over the positions where the window is fully in bounds.
SsimComponents ssim_components(const Volume3& a, const Volume3& b, const MsssimParams& p, int scale_index = 0);
SsimComponents ssim_components(const Field3& a, const Field3& b, const MsssimParams& p, int scale_index = 0);

// 1 - l_M^alpha_M * prod_j A_j^beta_j B_j^gamma_j, with (A_j, B_j) chosen by
// the variant: (c_j + SCC_j, s_j) for msssim_cscc.
double loss_msssim(const Field3& masked, const Field3& omega, const MsssimParams& p, LossVariant variant);
double loss_msssim_cscc(const Volume3& masked, const Volume3& omega, const MsssimParams& p = {});

// Sum of squared forward differences of delta along each axis.
double loss_smooth(const MaskField& delta);
double loss_smooth(const Field3& delta);

struct ScaleReport {
    Dims dims{};
    double l_mean = 0.0;
    double c_mean = 0.0;
    double s_mean = 0.0;
    double scc = 0.0;
    bool scc_degenerate = false;
};

struct LossReport {
    double total = 0.0;
    // Multi-scale similarity term (whichever variant is active).
    double msssim_cscc = 0.0;
    // The term multiplied by lambda; divided by the voxel count when
    // smooth_normalize is set.
    double smooth = 0.0;
    double smooth_raw = 0.0;
    double lambda = 0.0;
    std::vector<ScaleReport> per_scale;
    // Some scale had zero variance, so its SCC was taken as 0.
    bool scc_degenerate = false;
    // A factor of the product fell below kMinFactor and was clamped.
    bool factor_clamped = false;
};

struct ObjectiveOptions {
    double lambda = 0.05;
    bool smooth_normalize = true;
    LossVariant variant = LossVariant::msssim_cscc;
};

inline constexpr double kMinFactor = 1e-6;

struct Evaluation {
    LossReport report;
    // d total / d latent, one entry per voxel.
    std::vector<double> gradient;
};

// Total objective for a fixed (rho, omega) pair. The omega pyramid and its
// window statistics are computed once.
class Objective {
public:
    Objective(const Volume3& rho, const Volume3& omega, MsssimParams params, ObjectiveOptions options = {});
    ~Objective();
    Objective(Objective&&) noexcept;
    Objective& operator=(Objective&&) noexcept;

    LossReport evaluate(const MaskField& delta) const;
    Evaluation evaluate_with_gradient(const MaskField& delta) const;

    const MsssimParams& params() const noexcept;
    const ObjectiveOptions& options() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

Evaluation total_loss_and_gradient(const Volume3& rho, const Volume3& omega, const MaskField& delta, double lambda,
                                   const MsssimParams& p, ObjectiveOptions options = {});

}  // namespace mastoid
