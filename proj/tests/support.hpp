#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mastoid/binary_mask.hpp"
#include "mastoid/volume.hpp"

namespace mastoid::test {

inline Volume3 random_volume(Dims d, std::uint64_t seed, double lo = 0.0, double hi = 1.0, Spacing s = {}) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<float> data(d.size());
    for (auto& x : data) x = static_cast<float>(u(gen));
    return Volume3(d, s, std::move(data));
}

// Smooth random field: a few low-frequency sines plus small noise, values in [0, 1].
inline Volume3 smooth_volume(Dims d, std::uint64_t seed, Spacing s = {}) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double fx = 0.1 + 0.3 * u(gen), fy = 0.1 + 0.3 * u(gen), fz = 0.1 + 0.3 * u(gen);
    const double ph = 6.0 * u(gen);
    std::vector<float> data(d.size());
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j)
            for (std::size_t i = 0; i < d.nx; ++i) {
                const double v = 0.5 + 0.25 * std::sin(fx * i + ph) * std::cos(fy * j) + 0.15 * std::sin(fz * k + fx * j) +
                                 0.05 * (u(gen) - 0.5);
                data[d.index(i, j, k)] = static_cast<float>(v);
            }
    return Volume3(d, s, std::move(data));
}

inline BinaryMask random_mask(Dims d, std::uint64_t seed, double p = 0.4) {
    std::mt19937_64 gen(seed);
    std::bernoulli_distribution b(p);
    BinaryMask m(d);
    for (auto& l : m.labels) l = b(gen) ? 1 : 0;
    return m;
}

// Fraction of each voxel inside a ball, estimated on an s^3 sub-grid.
inline Volume3 ball_occupancy(Dims d, double cx, double cy, double cz, double r, int s = 4) {
    std::vector<float> data(d.size());
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j)
            for (std::size_t i = 0; i < d.nx; ++i) {
                int inside = 0;
                for (int a = 0; a < s; ++a)
                    for (int b = 0; b < s; ++b)
                        for (int c = 0; c < s; ++c) {
                            const double x = i - 0.5 + (a + 0.5) / s - cx;
                            const double y = j - 0.5 + (b + 0.5) / s - cy;
                            const double z = k - 0.5 + (c + 0.5) / s - cz;
                            inside += (x * x + y * y + z * z <= r * r);
                        }
                data[d.index(i, j, k)] = static_cast<float>(inside) / static_cast<float>(s * s * s);
            }
    return Volume3(d, Spacing{}, std::move(data));
}

inline Volume3 binary_ball(Dims d, double cx, double cy, double cz, double r, Spacing sp = {}) {
    std::vector<float> data(d.size());
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j)
            for (std::size_t i = 0; i < d.nx; ++i) {
                const double x = i - cx, y = j - cy, z = k - cz;
                data[d.index(i, j, k)] = (x * x + y * y + z * z <= r * r) ? 1.0f : 0.0f;
            }
    return Volume3(d, sp, std::move(data));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("mastoid_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace mastoid::test
