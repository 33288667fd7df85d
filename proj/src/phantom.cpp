#include "mastoid/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mastoid/error.hpp"
#include "mastoid/parallel.hpp"
#include "mastoid/rng.hpp"

namespace mastoid {

namespace {

// RNG stream ids; each purpose draws from its own counter space.
enum Stream : std::uint64_t {
    kAirCells = 1,
    kBlobs = 2,
    kNoise = 3,
    kArtifacts = 4,
    kFluid = 5,
};

constexpr double kOuterSemiAxis = 0.42;  // fraction of each dimension
constexpr double kInnerHollow = 0.45;    // normalized radius of the inner air core
constexpr int kPlacementAttempts = 100;

struct Sphere {
    std::array<double, 3> center;
    double radius;
};

std::array<double, 3> grid_center(Dims d) {
    return {0.5 * static_cast<double>(d.nx - 1), 0.5 * static_cast<double>(d.ny - 1),
            0.5 * static_cast<double>(d.nz - 1)};
}

std::array<std::size_t, 3> unravel(std::size_t idx, Dims d) {
    return {idx % d.nx, (idx / d.nx) % d.ny, idx / (d.nx * d.ny)};
}

bool in_shell(Dims d, double x, double y, double z) {
    const auto c = grid_center(d);
    const double u = (x - c[0]) / (kOuterSemiAxis * static_cast<double>(d.nx));
    const double v = (y - c[1]) / (kOuterSemiAxis * static_cast<double>(d.ny));
    const double w = (z - c[2]) / (kOuterSemiAxis * static_cast<double>(d.nz));
    const double r2 = u * u + v * v + w * w;
    return r2 < 1.0 && r2 >= kInnerHollow * kInnerHollow;
}

bool in_sphere(const Sphere& s, double x, double y, double z) {
    const double dx = x - s.center[0], dy = y - s.center[1], dz = z - s.center[2];
    return dx * dx + dy * dy + dz * dz <= s.radius * s.radius;
}

// Sphere rasterized over its bounding box only.
template <typename Fn>
void for_each_voxel_in_sphere(Dims d, const Sphere& s, Fn&& fn) {
    std::array<std::size_t, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
        lo[a] = static_cast<std::size_t>(std::max(0.0, std::ceil(s.center[a] - s.radius)));
        const double top = std::min(static_cast<double>(d[a]) - 1.0, std::floor(s.center[a] + s.radius));
        if (top < static_cast<double>(lo[a])) return;
        hi[a] = static_cast<std::size_t>(top);
    }
    for (std::size_t k = lo[2]; k <= hi[2]; ++k)
        for (std::size_t j = lo[1]; j <= hi[1]; ++j)
            for (std::size_t i = lo[0]; i <= hi[0]; ++i)
                if (in_sphere(s, static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)))
                    fn(d.index(i, j, k));
}

std::vector<std::uint8_t> majority_filter(const std::vector<std::uint8_t>& in, Dims d) {
    std::vector<std::uint8_t> out(in.size(), 0);
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j)
            for (std::size_t i = 0; i < d.nx; ++i) {
                int on = 0;
                for (int dk = -1; dk <= 1; ++dk)
                    for (int dj = -1; dj <= 1; ++dj)
                        for (int di = -1; di <= 1; ++di) {
                            const auto ii = static_cast<std::ptrdiff_t>(i) + di;
                            const auto jj = static_cast<std::ptrdiff_t>(j) + dj;
                            const auto kk = static_cast<std::ptrdiff_t>(k) + dk;
                            if (ii < 0 || jj < 0 || kk < 0 || ii >= static_cast<std::ptrdiff_t>(d.nx) ||
                                jj >= static_cast<std::ptrdiff_t>(d.ny) || kk >= static_cast<std::ptrdiff_t>(d.nz))
                                continue;
                            on += in[d.index(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj),
                                             static_cast<std::size_t>(kk))];
                        }
                out[d.index(i, j, k)] = on >= 14 ? 1 : 0;
            }
    return out;
}

std::uint64_t derived_seed(std::uint64_t seed, int attempt) {
    return CounterRng(seed, 0xa77e3b7ULL).bits(static_cast<std::uint64_t>(attempt));
}

}  // namespace

void PhantomSpec::validate() const {
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (dims.nx < 16 || dims.ny < 16 || dims.nz < 16) {
        throw ConfigError("phantom dims must each be >= 16");
    }
    if (!(spacing.x > 0 && spacing.y > 0 && spacing.z > 0)) throw ConfigError("phantom spacing must be positive");
    if (!unit(bone_level) || !unit(air_level) || !unit(noise_sigma) || !unit(fluid_amplitude)) {
        throw ConfigError("phantom intensity parameters must lie in [0, 1]");
    }
    if (!(bone_level > air_level)) throw ConfigError("phantom bone_level must exceed air_level");
    if (!(artifact_level >= 0.0 && artifact_level <= 1.5)) {
        throw ConfigError("phantom artifact_level must lie in [0, 1.5]");
    }
    if (removal_blob_count < 1) throw ConfigError("phantom removal_blob_count must be >= 1");
    if (artifact_count < 0 || air_cell_count < 0) throw ConfigError("phantom counts must be non-negative");
    if (!(blob_radius_min > 0.0 && blob_radius_max >= blob_radius_min)) {
        throw ConfigError("phantom blob radii must satisfy 0 < min <= max");
    }
}

Volume3 generate_preop(const PhantomSpec& spec) {
    spec.validate();
    const Dims d = spec.dims;
    const CounterRng rng(spec.seed, kAirCells);

    std::vector<Sphere> cells;
    std::uint64_t counter = 0;
    for (int m = 0; m < spec.air_cell_count; ++m) {
        for (int tries = 0; tries < 200; ++tries) {
            const double x = rng.uniform(counter++) * static_cast<double>(d.nx - 1);
            const double y = rng.uniform(counter++) * static_cast<double>(d.ny - 1);
            const double z = rng.uniform(counter++) * static_cast<double>(d.nz - 1);
            if (!in_shell(d, x, y, z)) continue;
            cells.push_back({{x, y, z}, 1.5 + 1.5 * rng.uniform(counter++)});
            break;
        }
    }

    std::vector<float> data(d.size(), static_cast<float>(spec.air_level));
    parallel_for(0, d.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const auto [i, j, k] = unravel(idx, d);
            const double x = static_cast<double>(i), y = static_cast<double>(j), z = static_cast<double>(k);
            if (in_shell(d, x, y, z)) data[idx] = static_cast<float>(spec.bone_level);
        }
    });
    for (const Sphere& s : cells) {
        for_each_voxel_in_sphere(d, s, [&](std::size_t idx) { data[idx] = static_cast<float>(spec.air_level); });
    }
    return Volume3(d, spec.spacing, std::move(data));
}

BinaryMask generate_removal_mask(const PhantomSpec& spec, const Volume3& preop, const RemovalMaskOptions& options) {
    spec.validate();
    if (preop.dims() != spec.dims) throw ConfigError("generate_removal_mask: preop dims do not match spec");
    const Dims d = spec.dims;
    const double bone_threshold = 0.5 * spec.bone_level;
    std::vector<std::uint8_t> bone(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) bone[i] = preop[i] >= bone_threshold ? 1 : 0;
    const auto c = grid_center(d);

    const int attempts = options.enforce_fraction ? std::max(1, options.max_attempts) : 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        const CounterRng rng(attempt == 0 ? spec.seed : derived_seed(spec.seed, attempt), kBlobs);
        std::uint64_t counter = 0;
        std::vector<Sphere> blobs;
        for (int b = 0; b < spec.removal_blob_count; ++b) {
            const double radius =
                spec.blob_radius_min + (spec.blob_radius_max - spec.blob_radius_min) * rng.uniform(counter++);
            bool placed = false;
            for (int tries = 0; tries < kPlacementAttempts && !placed; ++tries) {
                std::array<double, 3> p{};
                if (blobs.empty()) {
                    // The removal starts on the lateral (+x) side of the shell.
                    p[0] = c[0] + rng.uniform(counter++) * (static_cast<double>(d.nx - 1) - c[0]);
                    p[1] = rng.uniform(counter++) * static_cast<double>(d.ny - 1);
                    p[2] = rng.uniform(counter++) * static_cast<double>(d.nz - 1);
                } else {
                    const Sphere& first = blobs.front();
                    const double reach = 0.8 * first.radius;
                    for (int a = 0; a < 3; ++a) {
                        p[a] = first.center[a] + reach * (2.0 * rng.uniform(counter++) - 1.0);
                    }
                }
                std::array<std::size_t, 3> v{};
                bool inside = true;
                for (int a = 0; a < 3; ++a) {
                    const double r = std::round(p[a]);
                    if (r < 0.0 || r > static_cast<double>(d[a] - 1)) inside = false;
                    v[a] = inside ? static_cast<std::size_t>(r) : 0;
                }
                if (!inside || !bone[d.index(v[0], v[1], v[2])]) continue;
                blobs.push_back({{static_cast<double>(v[0]), static_cast<double>(v[1]), static_cast<double>(v[2])},
                                 radius});
                placed = true;
            }
            if (!placed) {
                throw NumericalError("generate_removal_mask: could not place blob " + std::to_string(b) +
                                     " inside bone after " + std::to_string(kPlacementAttempts) + " attempts");
            }
        }

        std::vector<std::uint8_t> uni(d.size(), 0);
        for (const Sphere& s : blobs) for_each_voxel_in_sphere(d, s, [&](std::size_t idx) { uni[idx] = 1; });
        auto smoothed = majority_filter(uni, d);
        auto intersect = [&](std::vector<std::uint8_t> m) {
            for (std::size_t i = 0; i < m.size(); ++i) m[i] &= bone[i];
            return m;
        };
        BinaryMask mask(d, intersect(std::move(smoothed)));
        if (mask.count() == 0) {
            // Blobs thinner than the filter footprint vanish under smoothing.
            mask = BinaryMask(d, intersect(std::move(uni)));
        }
        if (mask.count() == 0) continue;
        if (!options.enforce_fraction) return mask;
        const double fraction = static_cast<double>(mask.count()) / static_cast<double>(d.size());
        if (fraction >= kMinForegroundFraction && fraction <= kMaxForegroundFraction) return mask;
    }
    throw NumericalError("generate_removal_mask: no admissible removal mask after " + std::to_string(attempts) +
                         " attempts");
}

Volume3 generate_postop(const Volume3& preop, const BinaryMask& gt, const PhantomSpec& spec) {
    spec.validate();
    if (preop.dims() != spec.dims || gt.dims != spec.dims) {
        throw ConfigError("generate_postop: preop, mask and spec dims must match");
    }
    const Dims d = spec.dims;
    std::vector<double> post(preop.values().begin(), preop.values().end());

    for (std::size_t i = 0; i < post.size(); ++i) {
        if (gt[i]) post[i] = (1.0 - kRemovalBlend) * post[i] + kRemovalBlend * spec.air_level;
    }

    if (spec.noise_sigma > 0.0) {
        const CounterRng rng(spec.seed, kNoise);
        for (std::size_t i = 0; i < post.size(); ++i) post[i] += spec.noise_sigma * rng.normal(i);
    }

    std::vector<std::size_t> cavity;
    for (std::size_t i = 0; i < gt.size(); ++i)
        if (gt[i]) cavity.push_back(i);

    if (spec.fluid_amplitude > 0.0 && !cavity.empty()) {
        double zc = 0.0;
        for (std::size_t idx : cavity) zc += static_cast<double>(unravel(idx, d)[2]);
        zc /= static_cast<double>(cavity.size());
        const CounterRng rng(spec.seed, kFluid);
        const double two_pi = 2.0 * std::numbers::pi;
        const double px = two_pi * rng.uniform(0), py = two_pi * rng.uniform(1), pz = two_pi * rng.uniform(2);
        const double wavelength = 16.0;
        for (std::size_t idx : cavity) {
            const auto [i, j, k] = unravel(idx, d);
            if (static_cast<double>(k) >= zc) continue;
            const double field = (3.0 + std::sin(two_pi * static_cast<double>(i) / wavelength + px) +
                                  std::sin(two_pi * static_cast<double>(j) / wavelength + py) +
                                  std::sin(two_pi * static_cast<double>(k) / wavelength + pz)) /
                                 6.0;
            post[idx] += spec.fluid_amplitude * field;
        }
    }

    if (spec.artifact_count > 0 && !cavity.empty()) {
        const CounterRng rng(spec.seed, kArtifacts);
        std::uint64_t counter = 0;
        const double length = 0.25 * 0.5 * static_cast<double>(d.nx + d.ny);
        for (int a = 0; a < spec.artifact_count; ++a) {
            const std::size_t anchor_idx =
                cavity[static_cast<std::size_t>(rng.uniform(counter++) * static_cast<double>(cavity.size()))];
            const auto anchor = unravel(anchor_idx, d);
            // Direction uniform on the sphere.
            const double zdir = 2.0 * rng.uniform(counter++) - 1.0;
            const double phi = 2.0 * std::numbers::pi * rng.uniform(counter++);
            const double rxy = std::sqrt(std::max(0.0, 1.0 - zdir * zdir));
            const std::array<double, 3> dir{rxy * std::cos(phi), rxy * std::sin(phi), zdir};
            const int steps = static_cast<int>(std::ceil(4.0 * length));
            for (int s = 0; s <= steps; ++s) {
                const double t = -0.5 * length + length * static_cast<double>(s) / static_cast<double>(steps);
                std::array<double, 3> p{};
                bool inside = true;
                for (int ax = 0; ax < 3; ++ax) {
                    p[ax] = std::round(static_cast<double>(anchor[ax]) + t * dir[ax]);
                    if (p[ax] < 0.0 || p[ax] > static_cast<double>(d[ax] - 1)) inside = false;
                }
                if (!inside) continue;
                post[d.index(static_cast<std::size_t>(p[0]), static_cast<std::size_t>(p[1]),
                             static_cast<std::size_t>(p[2]))] = spec.artifact_level;
            }
        }
    }

    for (double& v : post) v = std::clamp(v, 0.0, 1.0);
    Volume3 out = Field3(d, std::move(post)).to_volume(preop.spacing());
    if (spec.misalignment) out = resample(out, *spec.misalignment, preop);
    return out;
}

PhantomCase generate_phantom(const PhantomSpec& spec) {
    PhantomCase pc;
    pc.preop = generate_preop(spec);
    pc.ground_truth = generate_removal_mask(spec, pc.preop);
    pc.postop = generate_postop(pc.preop, pc.ground_truth, spec);
    return pc;
}

}  // namespace mastoid
