#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace mastoid {

struct Dims {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::size_t nz = 0;

    constexpr std::size_t size() const noexcept { return nx * ny * nz; }
    constexpr std::size_t operator[](int axis) const noexcept {
        return axis == 0 ? nx : (axis == 1 ? ny : nz);
    }
    constexpr std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return i + nx * (j + ny * k);
    }
    constexpr std::size_t min_extent() const noexcept {
        return nx < ny ? (nx < nz ? nx : nz) : (ny < nz ? ny : nz);
    }
    friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

// Physical voxel size in millimeters.
struct Spacing {
    double x = 1.0;
    double y = 1.0;
    double z = 1.0;

    constexpr double operator[](int axis) const noexcept {
        return axis == 0 ? x : (axis == 1 ? y : z);
    }
    friend constexpr bool operator==(const Spacing&, const Spacing&) = default;
};

// Dense scalar volume, 32-bit storage, x-fastest. Immutable once built.
class Volume3 {
public:
    Volume3() = default;
    Volume3(Dims dims, Spacing spacing, std::vector<float> data);
    // Constant-filled volume.
    Volume3(Dims dims, Spacing spacing, float fill);

    const Dims& dims() const noexcept { return dims_; }
    const Spacing& spacing() const noexcept { return spacing_; }
    std::span<const float> values() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float operator[](std::size_t linear) const noexcept { return data_[linear]; }
    float at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return data_[dims_.index(i, j, k)];
    }

    friend bool operator==(const Volume3&, const Volume3&) = default;

private:
    Dims dims_{};
    Spacing spacing_{};
    std::vector<float> data_;
};

// Double-precision working field used inside the numerical kernels.
struct Field3 {
    Dims dims{};
    std::vector<double> data;

    Field3() = default;
    explicit Field3(Dims d, double fill = 0.0) : dims(d), data(d.size(), fill) {}
    Field3(Dims d, std::vector<double> values);

    static Field3 from_volume(const Volume3& v);
    Volume3 to_volume(Spacing spacing) const;

    std::size_t size() const noexcept { return data.size(); }
    double& operator[](std::size_t i) noexcept { return data[i]; }
    double operator[](std::size_t i) const noexcept { return data[i]; }
};

struct CropRegion {
    std::array<std::size_t, 3> origin{};
    std::array<std::size_t, 3> extent{};
};

struct NormalizeResult {
    Volume3 volume;
    // Set when the two percentiles coincide; the output is then all zeros.
    bool degenerate = false;
};

inline constexpr double kDefaultLowPercentile = 0.005;
inline constexpr double kDefaultHighPercentile = 0.995;

// Percentile window-clamp to [0, 1]. Percentiles use linear interpolation
// between order statistics.
NormalizeResult normalize_intensity(const Volume3& v, double lo_pct = kDefaultLowPercentile,
                                    double hi_pct = kDefaultHighPercentile);

Volume3 crop(const Volume3& v, const CropRegion& region);

// Normalized Gaussian taps g(-radius..radius).
std::vector<double> gaussian_kernel(double sigma, std::size_t radius);

// Separable Gaussian correlation; at the borders the kernel is renormalized
// over the in-bounds taps.
Volume3 gaussian_filter(const Volume3& v, double sigma, std::size_t radius);

// 2x2x2 mean pooling. Trailing odd slices are dropped; spacing doubles.
Volume3 downsample2(const Volume3& v);

// Header `<stem>.json` plus payload `<stem>.raw`. `path` may name either file
// or the bare stem.
void write_volume(const Volume3& v, const std::filesystem::path& path);
Volume3 read_volume(const std::filesystem::path& path);

std::filesystem::path volume_stem(const std::filesystem::path& path);

// Throws ConfigError unless all values are finite.
void require_finite(const Volume3& v, const char* what);

}  // namespace mastoid
