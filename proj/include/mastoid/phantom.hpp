#pragma once

#include <cstdint>
#include <optional>

#include "mastoid/binary_mask.hpp"
#include "mastoid/registration.hpp"
#include "mastoid/volume.hpp"

namespace mastoid {

// Knobs of the synthetic pre/postoperative pair. Intensities are in the
// normalized [0, 1] range.
struct PhantomSpec {
    Dims dims{64, 64, 32};
    Spacing spacing{1.0, 1.0, 1.0};
    std::uint64_t seed = 42;
    double bone_level = 0.85;
    double air_level = 0.05;
    int air_cell_count = 40;
    int removal_blob_count = 3;
    // Sphere radii in voxels, drawn uniformly per blob.
    double blob_radius_min = 7.0;
    double blob_radius_max = 10.0;
    double noise_sigma = 0.05;
    int artifact_count = 3;
    double artifact_level = 1.0;
    double fluid_amplitude = 0.15;
    std::optional<RigidTransform> misalignment;

    // Throws ConfigError on out-of-range values.
    void validate() const;
};

inline constexpr double kRemovalBlend = 0.9;
inline constexpr double kMinForegroundFraction = 0.02;
inline constexpr double kMaxForegroundFraction = 0.35;

Volume3 generate_preop(const PhantomSpec& spec);

struct RemovalMaskOptions {
    // Retry with derived seeds until the foreground fraction lands in
    // [kMinForegroundFraction, kMaxForegroundFraction].
    bool enforce_fraction = true;
    int max_attempts = 100;
};

BinaryMask generate_removal_mask(const PhantomSpec& spec, const Volume3& preop,
                                 const RemovalMaskOptions& options = {});

Volume3 generate_postop(const Volume3& preop, const BinaryMask& gt, const PhantomSpec& spec);

struct PhantomCase {
    Volume3 preop;
    Volume3 postop;
    BinaryMask ground_truth;
};

PhantomCase generate_phantom(const PhantomSpec& spec);

}  // namespace mastoid
