#include "mastoid/registration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mastoid/error.hpp"
#include "mastoid/parallel.hpp"

namespace mastoid {

namespace {

Mat3 multiply(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
    return r;
}

Vec3 multiply(const Mat3& a, const Vec3& v) {
    Vec3 r{};
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r[i] += a[i][k] * v[k];
    return r;
}

Mat3 transpose(const Mat3& a) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r[i][j] = a[j][i];
    return r;
}

double sample_trilinear(const Volume3& v, double x, double y, double z) {
    const Dims d = v.dims();
    const double coords[3] = {x, y, z};
    std::size_t base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        const auto n = static_cast<double>(d[a]);
        if (!(coords[a] >= 0.0) || coords[a] > n - 1.0) return 0.0;
        if (d[a] == 1) {
            base[a] = 0;
            frac[a] = 0.0;
            continue;
        }
        const double fl = std::min(std::floor(coords[a]), n - 2.0);
        base[a] = static_cast<std::size_t>(fl);
        frac[a] = coords[a] - fl;
    }
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) {
        double w = 1.0;
        std::size_t idx[3];
        bool skip = false;
        for (int a = 0; a < 3; ++a) {
            const bool upper = (c >> a) & 1;
            w *= upper ? frac[a] : 1.0 - frac[a];
            idx[a] = base[a] + (upper ? 1 : 0);
            if (upper && d[a] == 1) skip = true;
        }
        if (skip || w == 0.0) continue;
        acc += w * static_cast<double>(v.at(idx[0], idx[1], idx[2]));
    }
    return acc;
}

}  // namespace

double wrap_angle(double r) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    r = std::fmod(r, two_pi);
    if (r <= -std::numbers::pi) r += two_pi;
    if (r > std::numbers::pi) r -= two_pi;
    return r;
}

Mat3 RigidTransform::matrix() const {
    const double cx = std::cos(rotation[0]), sx = std::sin(rotation[0]);
    const double cy = std::cos(rotation[1]), sy = std::sin(rotation[1]);
    const double cz = std::cos(rotation[2]), sz = std::sin(rotation[2]);
    const Mat3 rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
    const Mat3 ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
    const Mat3 rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
    return multiply(multiply(rx, ry), rz);
}

RigidTransform RigidTransform::from_matrix(const Mat3& r, const Vec3& t) {
    // R = Rx Ry Rz gives R[0][2] = sin(ry), R[0][0] = cos(ry)cos(rz),
    // R[0][1] = -cos(ry)sin(rz), R[1][2] = -sin(rx)cos(ry), R[2][2] = cos(rx)cos(ry).
    RigidTransform out;
    const double sy = std::clamp(r[0][2], -1.0, 1.0);
    out.rotation[1] = std::asin(sy);
    if (std::abs(sy) < 1.0 - 1e-12) {
        out.rotation[0] = std::atan2(-r[1][2], r[2][2]);
        out.rotation[2] = std::atan2(-r[0][1], r[0][0]);
    } else {
        // Gimbal lock: only rx +/- rz is determined; put it all in rx.
        out.rotation[0] = std::atan2(r[2][1], r[1][1]);
        out.rotation[2] = 0.0;
    }
    for (double& a : out.rotation) a = wrap_angle(a);
    out.translation = t;
    return out;
}

RigidTransform RigidTransform::inverse() const {
    const Mat3 rt = transpose(matrix());
    Vec3 t = multiply(rt, translation);
    for (double& x : t) x = -x;
    return from_matrix(rt, t);
}

Vec3 RigidTransform::apply(const Vec3& p, const Vec3& center) const {
    const Vec3 rel{p[0] - center[0], p[1] - center[1], p[2] - center[2]};
    const Vec3 r = multiply(matrix(), rel);
    return {r[0] + center[0] + translation[0], r[1] + center[1] + translation[1],
            r[2] + center[2] + translation[2]};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    const Mat3 ra = a.matrix();
    const Vec3 rt = multiply(ra, b.translation);
    return RigidTransform::from_matrix(
        multiply(ra, b.matrix()),
        {rt[0] + a.translation[0], rt[1] + a.translation[1], rt[2] + a.translation[2]});
}

Vec3 volume_center(const Volume3& v) {
    const Dims d = v.dims();
    const Spacing s = v.spacing();
    return {0.5 * static_cast<double>(d.nx - 1) * s.x, 0.5 * static_cast<double>(d.ny - 1) * s.y,
            0.5 * static_cast<double>(d.nz - 1) * s.z};
}

Volume3 resample(const Volume3& v, const RigidTransform& t, const Volume3& ref) {
    const Dims od = ref.dims();
    const Spacing os = ref.spacing();
    const Spacing vs = v.spacing();
    const Vec3 center = volume_center(ref);
    const Mat3 r = t.matrix();
    std::vector<float> out(od.size());
    parallel_for(0, od.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t o = lo; o < hi; ++o) {
            const std::size_t i = o % od.nx;
            const std::size_t j = (o / od.nx) % od.ny;
            const std::size_t k = o / (od.nx * od.ny);
            const Vec3 rel{static_cast<double>(i) * os.x - center[0],
                           static_cast<double>(j) * os.y - center[1],
                           static_cast<double>(k) * os.z - center[2]};
            const Vec3 q = multiply(r, rel);
            const double x = (q[0] + center[0] + t.translation[0]) / vs.x;
            const double y = (q[1] + center[1] + t.translation[1]) / vs.y;
            const double z = (q[2] + center[2] + t.translation[2]) / vs.z;
            out[o] = static_cast<float>(sample_trilinear(v, x, y, z));
        }
    });
    return Volume3(od, os, std::move(out));
}

double ncc(const Volume3& a, const Volume3& b) {
    if (a.dims() != b.dims()) throw ConfigError("ncc: dimension mismatch");
    const auto va = a.values();
    const auto vb = b.values();
    const std::size_t n = va.size();
    const double ma = deterministic_sum(n, [&](std::size_t i) { return va[i]; }) / static_cast<double>(n);
    const double mb = deterministic_sum(n, [&](std::size_t i) { return vb[i]; }) / static_cast<double>(n);
    const double sab = deterministic_sum(n, [&](std::size_t i) { return (va[i] - ma) * (vb[i] - mb); });
    const double saa = deterministic_sum(n, [&](std::size_t i) { return (va[i] - ma) * (va[i] - ma); });
    const double sbb = deterministic_sum(n, [&](std::size_t i) { return (vb[i] - mb) * (vb[i] - mb); });
    if (!(saa > 0.0) || !(sbb > 0.0)) throw NumericalError("ncc undefined: zero-variance input");
    return sab / std::sqrt(saa * sbb);
}

RegistrationResult register_rigid(const Volume3& fixed, const Volume3& moving,
                                  const RegistrationOptions& options) {
    if (options.levels < 1) throw ConfigError("register_rigid: levels must be >= 1");
    if (options.sweeps_per_level < 1 || options.golden_iterations < 1) {
        throw ConfigError("register_rigid: sweeps and golden iterations must be positive");
    }
    require_finite(fixed, "register_rigid fixed volume");
    require_finite(moving, "register_rigid moving volume");

    std::vector<Volume3> fixed_pyr{fixed};
    std::vector<Volume3> moving_pyr{moving};
    for (int l = 1; l < options.levels; ++l) {
        const Dims fd = fixed_pyr.back().dims();
        const Dims md = moving_pyr.back().dims();
        if (fd.min_extent() < 4 || md.min_extent() < 4) break;
        fixed_pyr.push_back(downsample2(fixed_pyr.back()));
        moving_pyr.push_back(downsample2(moving_pyr.back()));
    }

    // Pyramid levels are not exactly co-centered with the full grid (pooling
    // shifts the voxel-center frame by half a fine voxel), so a level's
    // transform is estimated relative to its own center and mapped back by
    // translating centers.
    auto level_offset = [&](std::size_t l) {
        const Vec3 c0 = volume_center(fixed);
        const Vec3 cl = volume_center(fixed_pyr[l]);
        const Spacing s0 = fixed.spacing();
        const double half = 0.5 * (std::pow(2.0, static_cast<double>(l)) - 1.0);
        // Physical position of pooled voxel 0 in the full-resolution frame.
        return Vec3{cl[0] + half * s0.x - c0[0], cl[1] + half * s0.y - c0[1],
                    cl[2] + half * s0.z - c0[2]};
    };

    const Spacing fs = fixed.spacing();

    RigidTransform current = RigidTransform::identity();
    const double initial = ncc(fixed, resample(moving, current, fixed));

    constexpr double inv_phi = 0.6180339887498949;
    const int coarsest = static_cast<int>(fixed_pyr.size()) - 1;
    for (int l = coarsest; l >= 0; --l) {
        const Volume3& f = fixed_pyr[static_cast<std::size_t>(l)];
        const Volume3& m = moving_pyr[static_cast<std::size_t>(l)];
        // The level frame differs from the full frame by a pure shift d of the
        // rotation center, which changes the translation: t_l = t + (R - I) d.
        const Vec3 d = level_offset(static_cast<std::size_t>(l));
        auto to_level = [&](const RigidTransform& t) {
            const Mat3 r = t.matrix();
            const Vec3 rd = multiply(r, d);
            RigidTransform out = t;
            for (int a = 0; a < 3; ++a) out.translation[a] += rd[a] - d[a];
            return out;
        };
        auto score = [&](const RigidTransform& t) {
            const Volume3 warped = resample(m, to_level(t), f);
            try {
                return ncc(f, warped);
            } catch (const NumericalError&) {
                return -1.0;
            }
        };

        const double shrink = std::pow(0.5, static_cast<double>(coarsest - l));
        double best = score(current);
        for (int sweep = 0; sweep < options.sweeps_per_level; ++sweep) {
            for (int p = 0; p < 6; ++p) {
                const bool is_rot = p < 3;
                const double half_width =
                    shrink * (is_rot ? options.rotation_bracket_degrees * std::numbers::pi / 180.0
                                     : options.translation_bracket_voxels * fs[p - 3]);
                auto param = [&](RigidTransform& t) -> double& {
                    return is_rot ? t.rotation[p] : t.translation[p - 3];
                };
                const double centre = param(current);
                auto eval_at = [&](double x) {
                    RigidTransform t = current;
                    param(t) = x;
                    return score(t);
                };
                double a = centre - half_width;
                double b = centre + half_width;
                double x1 = b - inv_phi * (b - a);
                double x2 = a + inv_phi * (b - a);
                double f1 = eval_at(x1);
                double f2 = eval_at(x2);
                for (int it = 0; it < options.golden_iterations; ++it) {
                    if (f1 >= f2) {
                        b = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = b - inv_phi * (b - a);
                        f1 = eval_at(x1);
                    } else {
                        a = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = a + inv_phi * (b - a);
                        f2 = eval_at(x2);
                    }
                }
                const double cand = f1 >= f2 ? x1 : x2;
                const double fc = std::max(f1, f2);
                if (fc > best) {
                    best = fc;
                    param(current) = cand;
                }
            }
        }
    }
    for (double& r : current.rotation) r = wrap_angle(r);

    RegistrationResult result;
    result.transform = current;
    result.initial_ncc = initial;
    result.final_ncc = ncc(fixed, resample(moving, current, fixed));
    return result;
}

}  // namespace mastoid
