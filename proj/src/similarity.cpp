#include "mastoid/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mastoid/error.hpp"
#include "mastoid/kernels.hpp"
#include "mastoid/parallel.hpp"

namespace mastoid {

namespace {

// Per-voxel variance below which a volume counts as constant.
constexpr double kZeroVariance = 1e-24;

struct SccTerms {
    double value = 0.0;
    bool degenerate = false;
    double x_mean = 0.0, y_mean = 0.0;
    double cov = 0.0, var_x = 0.0, var_y = 0.0;
};

SccTerms scc_terms(const Field3& x, const Field3& y) {
    SccTerms t;
    const std::size_t n = x.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    t.x_mean = deterministic_sum(n, [&](std::size_t i) { return x.data[i]; }) * inv_n;
    t.y_mean = deterministic_sum(n, [&](std::size_t i) { return y.data[i]; }) * inv_n;
    t.cov = deterministic_sum(n, [&](std::size_t i) { return (x.data[i] - t.x_mean) * (y.data[i] - t.y_mean); });
    t.var_x = deterministic_sum(n, [&](std::size_t i) { return (x.data[i] - t.x_mean) * (x.data[i] - t.x_mean); });
    t.var_y = deterministic_sum(n, [&](std::size_t i) { return (y.data[i] - t.y_mean) * (y.data[i] - t.y_mean); });
    if (t.var_x <= kZeroVariance * static_cast<double>(n) || t.var_y <= kZeroVariance * static_cast<double>(n)) {
        t.degenerate = true;
        t.value = 0.0;
        return t;
    }
    t.value = std::clamp(t.cov * t.cov / (t.var_x * t.var_y), 0.0, 1.0);
    return t;
}

kernels::Taps window_taps(const MsssimParams& p, Dims d) {
    kernels::Taps taps;
    for (int a = 0; a < 3; ++a) {
        const std::size_t len = window_length(p, d[a]);
        taps[a] = gaussian_kernel(p.window_sigma, (len - 1) / 2);
    }
    return taps;
}

Field3 product(const Field3& a, const Field3& b) {
    Field3 out(a.dims);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    return out;
}

// Fixed-image side of one pyramid level.
struct ReferenceLevel {
    Field3 y;
    kernels::Taps taps;
    Field3 mu_y;
    Field3 e_yy;
};

std::vector<ReferenceLevel> build_reference(const Field3& omega, const MsssimParams& p) {
    std::vector<ReferenceLevel> levels;
    Field3 y = omega;
    for (int j = 0; j < p.scales; ++j) {
        if (j > 0) y = kernels::pool2(y);
        ReferenceLevel lv;
        lv.taps = window_taps(p, y.dims);
        lv.mu_y = kernels::correlate_valid(y, lv.taps);
        lv.e_yy = kernels::correlate_valid(product(y, y), lv.taps);
        lv.y = y;
        levels.push_back(std::move(lv));
    }
    return levels;
}

// Moving-image side of one level: component means plus the partial
// derivatives of each local map, kept for the backward pass.
struct LevelCache {
    Field3 x;
    double l_mean = 0.0, c_mean = 0.0, s_mean = 0.0;
    SccTerms scc;
    std::size_t valid = 0;
    std::vector<double> mu_x, mu_y, l_mu, c_vx, s_vx, s_cxy;
};

LevelCache forward_level(const Field3& x, const ReferenceLevel& ref, const MsssimParams& p, bool keep_partials) {
    LevelCache lc;
    const Field3 mu_x = kernels::correlate_valid(x, ref.taps);
    const Field3 e_xx = kernels::correlate_valid(product(x, x), ref.taps);
    const Field3 e_xy = kernels::correlate_valid(product(x, ref.y), ref.taps);
    const std::size_t n = mu_x.size();
    lc.valid = n;
    const double c1 = p.c1(), c2 = p.c2(), c3 = p.c3(), eps = p.variance_floor;

    std::vector<double> lmap(n), cmap(n), smap(n);
    if (keep_partials) {
        lc.mu_x.resize(n);
        lc.mu_y.resize(n);
        lc.l_mu.resize(n);
        lc.c_vx.resize(n);
        lc.s_vx.resize(n);
        lc.s_cxy.resize(n);
    }
    parallel_for(0, n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t q = lo; q < hi; ++q) {
            const double mx = mu_x.data[q], my = ref.mu_y.data[q];
            const double vx = e_xx.data[q] - mx * mx;
            const double vy = ref.e_yy.data[q] - my * my;
            const double cxy = e_xy.data[q] - mx * my;
            const double vxp = std::max(vx, 0.0) + eps;
            const double vyp = std::max(vy, 0.0) + eps;
            const double a = std::sqrt(vxp), b = std::sqrt(vyp);

            const double ln = 2.0 * mx * my + c1, ld = mx * mx + my * my + c1;
            const double cn = 2.0 * a * b + c2, cd = vxp + vyp + c2;
            const double sn = cxy + eps + c3, sd = a * b + c3;
            lmap[q] = ln / ld;
            cmap[q] = cn / cd;
            smap[q] = sn / sd;
            if (keep_partials) {
                lc.mu_x[q] = mx;
                lc.mu_y[q] = my;
                lc.l_mu[q] = (2.0 * my * ld - ln * 2.0 * mx) / (ld * ld);
                lc.c_vx[q] = vx > 0.0 ? (b * cd - cn * a) / (a * cd * cd) : 0.0;
                lc.s_vx[q] = vx > 0.0 ? -sn * b / (sd * sd * 2.0 * a) : 0.0;
                lc.s_cxy[q] = 1.0 / sd;
            }
        }
    });
    const double inv_n = 1.0 / static_cast<double>(n);
    lc.l_mean = deterministic_sum(n, [&](std::size_t q) { return lmap[q]; }) * inv_n;
    lc.c_mean = deterministic_sum(n, [&](std::size_t q) { return cmap[q]; }) * inv_n;
    lc.s_mean = deterministic_sum(n, [&](std::size_t q) { return smap[q]; }) * inv_n;
    lc.scc = scc_terms(x, ref.y);
    lc.x = x;
    return lc;
}

// Gradient of a weighted sum of the level's component means with respect to x.
Field3 backward_level(const LevelCache& lc, const ReferenceLevel& ref, double g_l, double g_c, double g_s,
                      double g_scc) {
    const std::size_t n = lc.valid;
    const double inv_n = 1.0 / static_cast<double>(n);
    const Dims vd = [&] {
        Dims d = lc.x.dims;
        d.nx = d.nx - ref.taps[0].size() + 1;
        d.ny = d.ny - ref.taps[1].size() + 1;
        d.nz = d.nz - ref.taps[2].size() + 1;
        return d;
    }();
    Field3 a_mu(vd), a_xx(vd), a_xy(vd);
    parallel_for(0, n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t q = lo; q < hi; ++q) {
            const double mx = lc.mu_x[q], my = lc.mu_y[q];
            a_mu.data[q] = inv_n * (g_l * lc.l_mu[q] + g_c * (-2.0 * mx * lc.c_vx[q]) +
                                    g_s * (-2.0 * mx * lc.s_vx[q] - my * lc.s_cxy[q]));
            a_xx.data[q] = inv_n * (g_c * lc.c_vx[q] + g_s * lc.s_vx[q]);
            a_xy.data[q] = inv_n * (g_s * lc.s_cxy[q]);
        }
    });
    const Dims xd = lc.x.dims;
    const Field3 t_mu = kernels::correlate_valid_adjoint(a_mu, ref.taps, xd);
    const Field3 t_xx = kernels::correlate_valid_adjoint(a_xx, ref.taps, xd);
    const Field3 t_xy = kernels::correlate_valid_adjoint(a_xy, ref.taps, xd);

    Field3 g(xd);
    const SccTerms& s = lc.scc;
    const bool scc_active = g_scc != 0.0 && !s.degenerate;
    const double k_y = scc_active ? 2.0 * s.cov / (s.var_x * s.var_y) : 0.0;
    const double k_x = scc_active ? 2.0 * s.cov * s.cov / (s.var_x * s.var_x * s.var_y) : 0.0;
    parallel_for(0, xd.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double v = t_mu.data[i] + 2.0 * lc.x.data[i] * t_xx.data[i] + ref.y.data[i] * t_xy.data[i];
            if (scc_active) {
                v += g_scc * (k_y * (ref.y.data[i] - s.y_mean) - k_x * (lc.x.data[i] - s.x_mean));
            }
            g.data[i] = v;
        }
    });
    return g;
}

struct SimilarityResult {
    double loss = 0.0;
    std::vector<ScaleReport> scales;
    bool scc_degenerate = false;
    bool factor_clamped = false;
    Field3 gradient;  // d loss / d x, only when requested
};

SimilarityResult evaluate_similarity(const Field3& x, const std::vector<ReferenceLevel>& ref, const MsssimParams& p,
                                     LossVariant variant, bool want_gradient) {
    const int m = p.scales;
    std::vector<LevelCache> caches;
    caches.reserve(static_cast<std::size_t>(m));
    Field3 xj = x;
    for (int j = 0; j < m; ++j) {
        if (j > 0) xj = kernels::pool2(xj);
        caches.push_back(forward_level(xj, ref[static_cast<std::size_t>(j)], p, want_gradient));
    }

    SimilarityResult r;
    std::vector<double> fa(static_cast<std::size_t>(m)), fb(static_cast<std::size_t>(m));
    std::vector<bool> ca(static_cast<std::size_t>(m)), cb(static_cast<std::size_t>(m));
    auto clamp_factor = [&](double f, bool& clamped) {
        if (!(f >= kMinFactor)) {
            clamped = true;
            r.factor_clamped = true;
            return kMinFactor;
        }
        clamped = false;
        return f;
    };
    double log_prod = 0.0;
    for (int j = 0; j < m; ++j) {
        const auto u = static_cast<std::size_t>(j);
        const LevelCache& lc = caches[u];
        const double sccv = lc.scc.value;
        if (lc.scc.degenerate) r.scc_degenerate = true;
        double a = lc.c_mean, b = lc.s_mean;
        if (variant == LossVariant::msssim_cscc) a += sccv;
        if (variant == LossVariant::msssim_scc) b += sccv;
        bool clamped_a = false, clamped_b = false;
        fa[u] = clamp_factor(a, clamped_a);
        fb[u] = clamp_factor(b, clamped_b);
        ca[u] = clamped_a;
        cb[u] = clamped_b;
        const double w = p.weights[u];
        log_prod += w * std::log(fa[u]) + w * std::log(fb[u]);
        r.scales.push_back({lc.x.dims, lc.l_mean, lc.c_mean, lc.s_mean, sccv, lc.scc.degenerate});
    }
    const double alpha = p.weights.back();
    bool clamped_l = false;
    const double lum = clamp_factor(caches.back().l_mean, clamped_l);
    log_prod += alpha * std::log(lum);
    const double prod = std::exp(log_prod);
    r.loss = 1.0 - prod;
    if (!want_gradient) return r;

    Field3 carry;
    for (int j = m - 1; j >= 0; --j) {
        const auto u = static_cast<std::size_t>(j);
        const double w = p.weights[u];
        const double g_a = ca[u] ? 0.0 : -prod * w / fa[u];
        const double g_b = cb[u] ? 0.0 : -prod * w / fb[u];
        const double g_l = (j == m - 1 && !clamped_l) ? -prod * alpha / lum : 0.0;
        double g_scc = 0.0;
        if (variant == LossVariant::msssim_cscc) g_scc = g_a;
        if (variant == LossVariant::msssim_scc) g_scc = g_b;
        Field3 g = backward_level(caches[u], ref[u], g_l, g_a, g_b, g_scc);
        if (j < m - 1) {
            const Field3 up = kernels::pool2_adjoint(carry, g.dims);
            for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += up.data[i];
        }
        carry = std::move(g);
    }
    r.gradient = std::move(carry);
    return r;
}

void smooth_with_gradient(const Field3& d, double& value, std::vector<double>* grad) {
    const Dims dm = d.dims;
    if (grad) grad->assign(d.size(), 0.0);
    // Forward differences per axis; the last slice of each axis contributes nothing.
    const std::size_t strides[3] = {1, dm.nx, dm.nx * dm.ny};
    double total = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        const std::size_t stride = strides[axis];
        const std::size_t extent = dm[axis];
        total += deterministic_sum(d.size(), [&](std::size_t i) {
            if ((i / stride) % extent + 1 >= extent) return 0.0;
            const double diff = d.data[i + stride] - d.data[i];
            return diff * diff;
        });
        if (grad) {
            for (std::size_t i = 0; i < d.size(); ++i) {
                if ((i / stride) % extent + 1 >= extent) continue;
                const double diff = d.data[i + stride] - d.data[i];
                (*grad)[i + stride] += 2.0 * diff;
                (*grad)[i] -= 2.0 * diff;
            }
        }
    }
    value = total;
}

void check_same_dims(Dims a, Dims b, const char* what) {
    if (a != b) throw ConfigError(std::string(what) + ": dimension mismatch");
}

}  // namespace

std::string_view to_string(LossVariant v) noexcept {
    switch (v) {
        case LossVariant::msssim: return "msssim";
        case LossVariant::msssim_scc: return "msssim_scc";
        case LossVariant::msssim_cscc: return "msssim_cscc";
    }
    return "msssim_cscc";
}

LossVariant parse_loss_variant(std::string_view name) {
    if (name == "msssim") return LossVariant::msssim;
    if (name == "msssim_scc") return LossVariant::msssim_scc;
    if (name == "msssim_cscc") return LossVariant::msssim_cscc;
    throw ConfigError("unknown loss variant \"" + std::string(name) +
                      "\" (expected msssim, msssim_scc or msssim_cscc)");
}

double MsssimParams::weight_sum() const noexcept {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

void MsssimParams::validate() const {
    if (scales < 1) throw ConfigError("msssim: scales must be >= 1");
    if (weights.size() != static_cast<std::size_t>(scales)) {
        throw ConfigError("msssim: need one weight per scale");
    }
    for (double w : weights) {
        if (!(w >= 0.0)) throw ConfigError("msssim: weights must be non-negative");
    }
    if (std::abs(weight_sum() - 1.0) > 1e-3) throw ConfigError("msssim: weights must sum to 1 within 1e-3");
    if (!(k1 > 0.0) || !(k2 > 0.0) || !(dynamic_range > 0.0)) {
        throw ConfigError("msssim: K1, K2 and dynamic range must be positive");
    }
    if (!(window_sigma > 0.0)) throw ConfigError("msssim: window sigma must be positive");
    if (!(variance_floor >= 0.0)) throw ConfigError("msssim: variance floor must be non-negative");
}

std::size_t window_length(const MsssimParams& p, std::size_t extent) {
    std::size_t len = std::min(2 * p.window_radius + 1, extent);
    if (len % 2 == 0) --len;
    return std::max<std::size_t>(len, 1);
}

std::vector<Dims> pyramid_dims(Dims finest, int scales) {
    std::vector<Dims> out{finest};
    for (int j = 1; j < scales; ++j) out.push_back(kernels::pooled_dims(out.back()));
    return out;
}

double logistic(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("logit: probability must lie in (0, 1)");
    return std::log(p / (1.0 - p));
}

MaskField::MaskField(Dims dims, double probability) : dims_(dims) {
    const double z = std::clamp(logit(probability), -kLatentLimit, kLatentLimit);
    latent_.assign(dims.size(), z);
}

MaskField MaskField::from_latent(Dims dims, std::vector<double> latent) {
    if (latent.size() != dims.size()) throw ConfigError("MaskField: latent length does not match dims");
    MaskField m;
    m.dims_ = dims;
    m.latent_ = std::move(latent);
    for (double& z : m.latent_) {
        if (!std::isfinite(z)) throw NumericalError("MaskField: non-finite latent");
        z = std::clamp(z, -kLatentLimit, kLatentLimit);
    }
    return m;
}

MaskField MaskField::from_probabilities(Dims dims, std::span<const double> probabilities) {
    if (probabilities.size() != dims.size()) throw ConfigError("MaskField: probability length does not match dims");
    std::vector<double> latent(probabilities.size());
    const double lo = logistic(-kLatentLimit), hi = logistic(kLatentLimit);
    for (std::size_t i = 0; i < latent.size(); ++i) {
        const double p = probabilities[i];
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("MaskField: probabilities must lie in [0, 1]");
        latent[i] = logit(std::clamp(p, lo, hi));
    }
    return from_latent(dims, std::move(latent));
}

MaskField MaskField::from_volume(const Volume3& probabilities) {
    const auto vals = probabilities.values();
    std::vector<double> p(vals.begin(), vals.end());
    return from_probabilities(probabilities.dims(), p);
}

double MaskField::value(std::size_t i) const noexcept { return logistic(latent_[i]); }

std::vector<double> MaskField::values() const {
    std::vector<double> out(latent_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = logistic(latent_[i]);
    return out;
}

Volume3 MaskField::to_volume(Spacing spacing) const { return Field3(dims_, values()).to_volume(spacing); }

void MaskField::set_latent(std::size_t i, double z) noexcept { latent_[i] = std::clamp(z, -kLatentLimit, kLatentLimit); }

Field3 apply_mask_field(const Volume3& rho, const MaskField& delta) {
    check_same_dims(rho.dims(), delta.dims(), "apply_mask");
    Field3 out(rho.dims());
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = static_cast<double>(rho[i]) * (1.0 - delta.value(i));
    return out;
}

Volume3 apply_mask(const Volume3& rho, const MaskField& delta) {
    return apply_mask_field(rho, delta).to_volume(rho.spacing());
}

double scc(const Field3& a, const Field3& b) {
    check_same_dims(a.dims, b.dims, "scc");
    const SccTerms t = scc_terms(a, b);
    if (t.degenerate) throw NumericalError("scc undefined: zero-variance input");
    return t.value;
}

double scc(const Volume3& a, const Volume3& b) { return scc(Field3::from_volume(a), Field3::from_volume(b)); }

SsimComponents ssim_components(const Field3& a, const Field3& b, const MsssimParams& p, int scale_index) {
    p.validate();
    check_same_dims(a.dims, b.dims, "ssim_components");
    if (scale_index < 0) throw ConfigError("ssim_components: scale index must be non-negative");
    Field3 x = a, y = b;
    for (int j = 0; j < scale_index; ++j) {
        x = kernels::pool2(x);
        y = kernels::pool2(y);
    }
    ReferenceLevel ref;
    ref.taps = window_taps(p, y.dims);
    ref.mu_y = kernels::correlate_valid(y, ref.taps);
    ref.e_yy = kernels::correlate_valid(product(y, y), ref.taps);
    ref.y = y;
    const LevelCache lc = forward_level(x, ref, p, false);
    return {lc.l_mean, lc.c_mean, lc.s_mean};
}

SsimComponents ssim_components(const Volume3& a, const Volume3& b, const MsssimParams& p, int scale_index) {
    return ssim_components(Field3::from_volume(a), Field3::from_volume(b), p, scale_index);
}

double loss_msssim(const Field3& masked, const Field3& omega, const MsssimParams& p, LossVariant variant) {
    p.validate();
    check_same_dims(masked.dims, omega.dims, "loss_msssim");
    const auto ref = build_reference(omega, p);
    return evaluate_similarity(masked, ref, p, variant, false).loss;
}

double loss_msssim_cscc(const Volume3& masked, const Volume3& omega, const MsssimParams& p) {
    return loss_msssim(Field3::from_volume(masked), Field3::from_volume(omega), p, LossVariant::msssim_cscc);
}

double loss_smooth(const Field3& delta) {
    double v = 0.0;
    smooth_with_gradient(delta, v, nullptr);
    return v;
}

double loss_smooth(const MaskField& delta) { return loss_smooth(Field3(delta.dims(), delta.values())); }

struct Objective::Impl {
    Volume3 rho;
    MsssimParams params;
    ObjectiveOptions options;
    std::vector<ReferenceLevel> reference;

    Evaluation run(const MaskField& delta, bool want_gradient) const {
        check_same_dims(rho.dims(), delta.dims(), "objective");
        const Field3 x = apply_mask_field(rho, delta);
        SimilarityResult sim = evaluate_similarity(x, reference, params, options.variant, want_gradient);
        const std::vector<double> dvals = delta.values();
        const Field3 dfield(delta.dims(), dvals);
        double smooth_raw = 0.0;
        std::vector<double> smooth_grad;
        smooth_with_gradient(dfield, smooth_raw, want_gradient ? &smooth_grad : nullptr);
        const double n = static_cast<double>(delta.size());
        const double smooth_scale = options.smooth_normalize ? 1.0 / n : 1.0;

        Evaluation ev;
        LossReport& rep = ev.report;
        rep.msssim_cscc = sim.loss;
        rep.smooth_raw = smooth_raw;
        rep.smooth = smooth_raw * smooth_scale;
        rep.lambda = options.lambda;
        rep.total = rep.msssim_cscc + options.lambda * rep.smooth;
        rep.per_scale = std::move(sim.scales);
        rep.scc_degenerate = sim.scc_degenerate;
        rep.factor_clamped = sim.factor_clamped;
        if (!std::isfinite(rep.total)) throw NumericalError("objective: non-finite loss");
        if (!want_gradient) return ev;

        ev.gradient.resize(delta.size());
        const double ks = options.lambda * smooth_scale;
        for (std::size_t i = 0; i < ev.gradient.size(); ++i) {
            const double d = dvals[i];
            const double g_delta = -static_cast<double>(rho[i]) * sim.gradient.data[i] + ks * smooth_grad[i];
            ev.gradient[i] = g_delta * d * (1.0 - d);
        }
        return ev;
    }
};

Objective::Objective(const Volume3& rho, const Volume3& omega, MsssimParams params, ObjectiveOptions options)
    : impl_(std::make_unique<Impl>()) {
    params.validate();
    check_same_dims(rho.dims(), omega.dims(), "objective");
    if (!(options.lambda >= 0.0)) throw ConfigError("objective: lambda must be >= 0");
    require_finite(rho, "rho");
    require_finite(omega, "omega");
    impl_->rho = rho;
    impl_->params = std::move(params);
    impl_->options = options;
    impl_->reference = build_reference(Field3::from_volume(omega), impl_->params);
}

Objective::~Objective() = default;
Objective::Objective(Objective&&) noexcept = default;
Objective& Objective::operator=(Objective&&) noexcept = default;

LossReport Objective::evaluate(const MaskField& delta) const { return impl_->run(delta, false).report; }

Evaluation Objective::evaluate_with_gradient(const MaskField& delta) const { return impl_->run(delta, true); }

const MsssimParams& Objective::params() const noexcept { return impl_->params; }
const ObjectiveOptions& Objective::options() const noexcept { return impl_->options; }

Evaluation total_loss_and_gradient(const Volume3& rho, const Volume3& omega, const MaskField& delta, double lambda,
                                   const MsssimParams& p, ObjectiveOptions options) {
    options.lambda = lambda;
    return Objective(rho, omega, p, options).evaluate_with_gradient(delta);
}

}  // namespace mastoid
