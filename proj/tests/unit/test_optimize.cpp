#include <doctest.h>

#include "mastoid/error.hpp"
#include "mastoid/optimize.hpp"
#include "mastoid/phantom.hpp"
#include "../support.hpp"

using namespace mastoid;

TEST_SUITE("optimize") {

TEST_CASE("config validation") {
    OptimConfig c;
    CHECK_NOTHROW(c.validate());
    c.max_iters = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimConfig{};
    c.init_delta = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimConfig{};
    c.step_size = -0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimConfig{};
    c.beta1 = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("threshold uses greater-or-equal") {
    const std::vector<double> p{0.2, 0.5, 0.7, 0.49999};
    const auto m = threshold_mask(MaskField::from_probabilities(Dims{4, 1, 1}, p), 0.5);
    CHECK(m.labels == std::vector<std::uint8_t>{0, 1, 1, 0});
}

TEST_CASE("adam lowers the objective and records one trace entry per evaluation") {
    PhantomSpec s;
    s.dims = {32, 32, 16};
    s.noise_sigma = 0.0;
    s.artifact_count = 0;
    s.fluid_amplitude = 0.0;
    const auto ph = generate_phantom(s);
    OptimConfig c;
    c.max_iters = 40;
    std::vector<int> seen;
    const auto r = optimize_mask(ph.preop, ph.postop, c, MsssimParams{},
                                 [&](int it, const LossReport&) { seen.push_back(it); });
    REQUIRE(r.trace.size() >= 2);
    CHECK(r.trace.back().total < r.trace.front().total);
    CHECK(seen.size() == r.trace.size());
    for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == static_cast<int>(i));
    for (std::size_t i = 0; i < r.delta.size(); ++i) {
        CHECK(r.delta.value(i) > 0.0);
        CHECK(r.delta.value(i) < 1.0);
    }
}

TEST_CASE("initial field is the configured constant probability") {
    const auto rho = test::smooth_volume({16, 16, 16}, 1);
    OptimConfig c;
    c.max_iters = 1;
    c.init_delta = 0.2;
    const auto r = optimize_mask(rho, rho, c);
    REQUIRE(!r.trace.empty());
    const double smooth0 = r.trace.front().smooth_raw;
    CHECK(smooth0 == doctest::Approx(0.0));
}

TEST_CASE("convergence stops early on a flat objective") {
    const auto rho = test::smooth_volume({16, 16, 16}, 1);
    OptimConfig c;
    c.max_iters = 300;
    c.step_size = 1e-9;
    c.convergence_patience = 5;
    const auto r = optimize_mask(rho, rho, c);
    CHECK(r.converged);
    CHECK(r.trace.size() < 50);
}

TEST_CASE("mismatched inputs are rejected") {
    const auto a = test::smooth_volume({16, 16, 16}, 1);
    const auto b = test::smooth_volume({16, 16, 12}, 2);
    CHECK_THROWS_AS(optimize_mask(a, b, OptimConfig{}), ConfigError);
}

}  // TEST_SUITE
