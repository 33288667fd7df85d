#pragma once

#include <array>

#include "mastoid/volume.hpp"

namespace mastoid {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

// Six-parameter rigid map acting about the reference volume's physical center c:
//   p -> R (p - c) + c + t,   R = Rx(rx) * Ry(ry) * Rz(rz)  (intrinsic x-y-z).
// Rotations in radians, translations in millimeters.
struct RigidTransform {
    Vec3 rotation{0.0, 0.0, 0.0};
    Vec3 translation{0.0, 0.0, 0.0};

    static RigidTransform identity() { return {}; }
    static RigidTransform from_matrix(const Mat3& r, const Vec3& t);

    Mat3 matrix() const;
    RigidTransform inverse() const;
    Vec3 apply(const Vec3& p, const Vec3& center) const;

    friend bool operator==(const RigidTransform&, const RigidTransform&) = default;
};

// (a * b)(p) = a(b(p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

// Physical center of the voxel grid: ((n-1)/2 * spacing) per axis.
Vec3 volume_center(const Volume3& v);

// out(p) = v(T(p)) on ref's grid, trilinear, zero outside v's field.
Volume3 resample(const Volume3& v, const RigidTransform& t, const Volume3& ref);

// Normalized cross-correlation. Throws NumericalError on zero variance.
double ncc(const Volume3& a, const Volume3& b);

struct RegistrationResult {
    // Maps the moving volume onto the fixed grid: resample(moving, transform, fixed) ~ fixed.
    RigidTransform transform;
    double final_ncc = 0.0;
    double initial_ncc = 0.0;
};

struct RegistrationOptions {
    int levels = 3;
    int sweeps_per_level = 3;
    // Search half-widths at the coarsest level, halved at each finer level.
    double translation_bracket_voxels = 8.0;
    double rotation_bracket_degrees = 15.0;
    int golden_iterations = 24;
};

RegistrationResult register_rigid(const Volume3& fixed, const Volume3& moving,
                                  const RegistrationOptions& options = {});

inline RegistrationResult register_rigid(const Volume3& fixed, const Volume3& moving, int levels) {
    RegistrationOptions options;
    options.levels = levels;
    return register_rigid(fixed, moving, options);
}

}  // namespace mastoid
