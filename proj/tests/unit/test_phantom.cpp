#include <doctest.h>

#include <cmath>

#include "mastoid/error.hpp"
#include "mastoid/phantom.hpp"

using namespace mastoid;

namespace {

PhantomSpec clean_spec() {
    PhantomSpec s;
    s.noise_sigma = 0.0;
    s.artifact_count = 0;
    s.fluid_amplitude = 0.0;
    return s;
}

}  // namespace

TEST_SUITE("phantom") {

TEST_CASE("same seed gives identical volumes, different seeds differ") {
    PhantomSpec s;
    s.dims = {32, 32, 24};
    const auto a = generate_phantom(s);
    const auto b = generate_phantom(s);
    CHECK(a.preop == b.preop);
    CHECK(a.postop == b.postop);
    CHECK(a.ground_truth == b.ground_truth);
    s.seed = 43;
    const auto c = generate_phantom(s);
    CHECK_FALSE(c.postop == a.postop);
}

TEST_CASE("removal fraction lies in the documented bounds for many seeds") {
    PhantomSpec s;
    s.dims = {32, 32, 24};
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        s.seed = seed;
        const auto ph = generate_phantom(s);
        const double frac = static_cast<double>(ph.ground_truth.count()) / static_cast<double>(s.dims.size());
        CHECK(frac >= kMinForegroundFraction);
        CHECK(frac <= kMaxForegroundFraction);
    }
}

TEST_CASE("removed voxels were bone in the preoperative volume") {
    const auto s = clean_spec();
    const auto ph = generate_phantom(s);
    for (std::size_t i = 0; i < ph.ground_truth.size(); ++i) {
        if (ph.ground_truth[i]) CHECK(ph.preop[i] >= 0.5 * s.bone_level);
    }
}

TEST_CASE("noise-free postop equals preop outside the cavity and is blended inside") {
    const auto s = clean_spec();
    const auto ph = generate_phantom(s);
    for (std::size_t i = 0; i < ph.preop.size(); ++i) {
        if (ph.ground_truth[i]) {
            const double expect = (1.0 - kRemovalBlend) * ph.preop[i] + kRemovalBlend * s.air_level;
            CHECK(ph.postop[i] == doctest::Approx(expect).epsilon(1e-6));
        } else {
            CHECK(ph.postop[i] == ph.preop[i]);
        }
    }
}

TEST_CASE("all intensities lie in [0, 1]") {
    PhantomSpec s;
    s.noise_sigma = 0.2;
    const auto ph = generate_phantom(s);
    for (float x : ph.postop.values()) {
        CHECK(x >= 0.0f);
        CHECK(x <= 1.0f);
    }
    for (float x : ph.preop.values()) {
        CHECK(x >= 0.0f);
        CHECK(x <= 1.0f);
    }
}

TEST_CASE("artifacts only raise intensities toward the artifact level") {
    PhantomSpec with = clean_spec();
    with.artifact_count = 3;
    const auto a = generate_phantom(with);
    const auto b = generate_phantom(clean_spec());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < a.postop.size(); ++i) {
        if (a.postop[i] != b.postop[i]) {
            ++changed;
            CHECK(a.postop[i] == doctest::Approx(with.artifact_level));
        }
    }
    CHECK(changed > 0);
}

TEST_CASE("invalid specs are rejected") {
    PhantomSpec s;
    s.dims = {8, 64, 64};
    CHECK_THROWS_AS(generate_phantom(s), ConfigError);
    s = PhantomSpec{};
    s.noise_sigma = -0.1;
    CHECK_THROWS_AS(generate_phantom(s), ConfigError);
    s = PhantomSpec{};
    s.air_level = 0.9;
    CHECK_THROWS_AS(generate_phantom(s), ConfigError);
    s = PhantomSpec{};
    s.blob_radius_min = 5.0;
    s.blob_radius_max = 4.0;
    CHECK_THROWS_AS(generate_phantom(s), ConfigError);
}

TEST_CASE("misalignment moves the postop but not the ground truth") {
    PhantomSpec s = clean_spec();
    const auto aligned = generate_phantom(s);
    RigidTransform t;
    t.translation = {2.0, 0.0, 0.0};
    s.misalignment = t;
    const auto moved = generate_phantom(s);
    CHECK(moved.ground_truth == aligned.ground_truth);
    CHECK(moved.preop == aligned.preop);
    CHECK_FALSE(moved.postop == aligned.postop);
    // An integer shift is an exact copy away from the borders.
    const Dims d = s.dims;
    for (std::size_t k = 0; k < d.nz; k += 5)
        for (std::size_t j = 0; j < d.ny; j += 5)
            for (std::size_t i = 0; i + 2 < d.nx; i += 3) {
                CHECK(moved.postop.at(i, j, k) == doctest::Approx(aligned.postop.at(i + 2, j, k)));
            }
}

}  // TEST_SUITE
