#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mastoid/error.hpp"
#include "mastoid/phantom.hpp"
#include "mastoid/registration.hpp"
#include "../support.hpp"

using namespace mastoid;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Mat3 multiply(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

Mat3 axis_rotation(int axis, double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 m{};
    m[axis][axis] = 1.0;
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    m[u][u] = c;
    m[u][v] = -s;
    m[v][u] = s;
    m[v][v] = c;
    return m;
}

}  // namespace

TEST_SUITE("registration") {

TEST_CASE("rotation matrix is Rx * Ry * Rz") {
    RigidTransform t;
    t.rotation = {0.3, -0.2, 0.7};
    const Mat3 expect = multiply(multiply(axis_rotation(0, 0.3), axis_rotation(1, -0.2)), axis_rotation(2, 0.7));
    const Mat3 got = t.matrix();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(got[i][j] == doctest::Approx(expect[i][j]).epsilon(1e-12));
}

TEST_CASE("matrix round trip, inverse and composition") {
    RigidTransform t;
    t.rotation = {0.1, 0.25, -0.4};
    t.translation = {1.5, -2.0, 0.5};
    const auto back = RigidTransform::from_matrix(t.matrix(), t.translation);
    for (int a = 0; a < 3; ++a) CHECK(back.rotation[a] == doctest::Approx(t.rotation[a]).epsilon(1e-12));

    const Vec3 c{10.0, 12.0, 7.0};
    const Vec3 p{3.0, -1.0, 4.0};
    const Vec3 q = t.inverse().apply(t.apply(p, c), c);
    for (int a = 0; a < 3; ++a) CHECK(q[a] == doctest::Approx(p[a]).epsilon(1e-12));

    RigidTransform u;
    u.rotation = {-0.2, 0.05, 0.3};
    u.translation = {0.0, 1.0, -1.0};
    const Vec3 lhs = compose(t, u).apply(p, c);
    const Vec3 rhs = t.apply(u.apply(p, c), c);
    for (int a = 0; a < 3; ++a) CHECK(lhs[a] == doctest::Approx(rhs[a]).epsilon(1e-12));
}

TEST_CASE("wrap_angle maps into (-pi, pi]") {
    CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(wrap_angle(3.0 * std::numbers::pi / 2.0) == doctest::Approx(-std::numbers::pi / 2.0));
    CHECK(wrap_angle(0.25) == doctest::Approx(0.25));
}

TEST_CASE("identity resampling is exact, integer shifts copy voxels") {
    const auto v = test::random_volume({9, 8, 7}, 4);
    CHECK(resample(v, RigidTransform::identity(), v) == v);
    RigidTransform t;
    t.translation = {1.0, 0.0, -2.0};
    const auto s = resample(v, t, v);
    for (std::size_t k = 0; k < 7; ++k)
        for (std::size_t j = 0; j < 8; ++j)
            for (std::size_t i = 0; i < 9; ++i) {
                const bool inside = i + 1 < 9 && k >= 2;
                const float expect = inside ? v.at(i + 1, j, k - 2) : 0.0f;
                CHECK(s.at(i, j, k) == doctest::Approx(expect));
            }
}

TEST_CASE("ncc is invariant to positive affine intensity maps and flips sign for negative ones") {
    const auto a = test::random_volume({8, 8, 8}, 1);
    const auto b = test::random_volume({8, 8, 8}, 2);
    std::vector<float> scaled(b.size()), flipped(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        scaled[i] = 3.0f * b[i] + 2.0f;
        flipped[i] = -0.5f * b[i] + 1.0f;
    }
    const Volume3 bs(b.dims(), b.spacing(), scaled), bf(b.dims(), b.spacing(), flipped);
    CHECK(ncc(a, bs) == doctest::Approx(ncc(a, b)).epsilon(1e-6));
    CHECK(ncc(a, bf) == doctest::Approx(-ncc(a, b)).epsilon(1e-6));
    CHECK(ncc(a, a) == doctest::Approx(1.0));
    CHECK(ncc(a, b) == doctest::Approx(ncc(b, a)));
    CHECK_THROWS_AS(ncc(a, Volume3(a.dims(), a.spacing(), 1.0f)), NumericalError);
}

TEST_CASE("registration of identical volumes stays at identity") {
    PhantomSpec s;
    s.noise_sigma = 0.0;
    s.artifact_count = 0;
    s.fluid_amplitude = 0.0;
    s.dims = {48, 48, 32};
    const auto ph = generate_phantom(s);
    const auto r = register_rigid(ph.preop, ph.preop);
    for (int a = 0; a < 3; ++a) {
        CHECK(std::abs(r.transform.translation[a]) < 0.1);
        CHECK(std::abs(r.transform.rotation[a]) < 0.2 * kDeg);
    }
    CHECK(r.final_ncc >= r.initial_ncc);
}

TEST_CASE("registration recovers a translation-only misalignment") {
    PhantomSpec s;
    s.noise_sigma = 0.0;
    s.artifact_count = 0;
    s.fluid_amplitude = 0.0;
    s.dims = {48, 48, 32};
    RigidTransform m;
    m.translation = {-1.5, 2.5, 1.0};
    s.misalignment = m;
    const auto ph = generate_phantom(s);
    const auto r = register_rigid(ph.preop, ph.postop);
    const auto expect = m.inverse();
    for (int a = 0; a < 3; ++a) {
        CHECK(std::abs(r.transform.translation[a] - expect.translation[a]) < 0.25);
        CHECK(std::abs(r.transform.rotation[a]) < 1.0 * kDeg);
    }
}

TEST_CASE("registration rejects bad options") {
    const auto a = test::random_volume({16, 16, 16}, 1);
    RegistrationOptions o;
    o.levels = 0;
    CHECK_THROWS_AS(register_rigid(a, a, o), ConfigError);
}

}  // TEST_SUITE
