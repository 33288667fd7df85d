#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "mastoid/error.hpp"
#include "mastoid/volume.hpp"
#include "../support.hpp"

using namespace mastoid;

namespace {

double percentile_oracle(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double pos = p * (v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] * (1.0 - (pos - lo)) + v[hi] * (pos - lo);
}

}  // namespace

TEST_SUITE("volume") {

TEST_CASE("indexing is x-fastest") {
    const Dims d{4, 3, 2};
    CHECK(d.index(1, 0, 0) == 1);
    CHECK(d.index(0, 1, 0) == 4);
    CHECK(d.index(0, 0, 1) == 12);
    CHECK(d.size() == 24);
    CHECK(d.min_extent() == 2);
}

TEST_CASE("construction validates sizes and spacing") {
    CHECK_THROWS_AS(Volume3(Dims{2, 2, 2}, Spacing{}, std::vector<float>(7)), ConfigError);
    CHECK_THROWS_AS(Volume3(Dims{2, 2, 2}, Spacing{0.0, 1.0, 1.0}, 0.0f), ConfigError);
    CHECK_NOTHROW(Volume3(Dims{2, 2, 2}, Spacing{0.5, 1.0, 2.0}, 1.0f));
}

TEST_CASE("normalize matches a percentile clamp-rescale oracle") {
    const auto v = test::random_volume({9, 7, 5}, 3, -100.0, 400.0);
    const auto r = normalize_intensity(v);
    CHECK_FALSE(r.degenerate);
    std::vector<double> vals(v.values().begin(), v.values().end());
    const double lo = percentile_oracle(vals, 0.005);
    const double hi = percentile_oracle(vals, 0.995);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double expect = std::clamp((vals[i] - lo) / (hi - lo), 0.0, 1.0);
        CHECK(r.volume[i] == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("normalize of a constant volume is degenerate and zero") {
    const Volume3 v(Dims{3, 3, 3}, Spacing{}, 5.0f);
    const auto r = normalize_intensity(v);
    CHECK(r.degenerate);
    for (float x : r.volume.values()) CHECK(x == 0.0f);
}

TEST_CASE("normalize output lies in [0, 1] and is monotone") {
    const auto v = test::random_volume({8, 8, 8}, 11, -5.0, 5.0);
    const auto r = normalize_intensity(v);
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(r.volume[i] >= 0.0f);
        CHECK(r.volume[i] <= 1.0f);
        for (std::size_t j = i + 1; j < std::min(v.size(), i + 5); ++j) {
            if (v[i] < v[j]) CHECK(r.volume[i] <= r.volume[j]);
        }
    }
}

TEST_CASE("crop copies the region and names the failing axis") {
    const auto v = test::random_volume({6, 5, 4}, 5);
    const auto c = crop(v, CropRegion{{1, 2, 1}, {3, 2, 2}});
    CHECK(c.dims() == Dims{3, 2, 2});
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t i = 0; i < 3; ++i) CHECK(c.at(i, j, k) == v.at(i + 1, j + 2, k + 1));
    try {
        (void)crop(v, CropRegion{{0, 4, 0}, {1, 2, 1}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find('y') != std::string::npos);
    }
}

TEST_CASE("gaussian kernel is normalized and symmetric") {
    const auto g = gaussian_kernel(1.5, 5);
    REQUIRE(g.size() == 11);
    double sum = 0.0;
    for (double x : g) sum += x;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < 5; ++i) CHECK(g[i] == doctest::Approx(g[10 - i]));
    const double ratio = g[5] / g[6];
    CHECK(ratio == doctest::Approx(std::exp(1.0 / (2.0 * 1.5 * 1.5))));
}

TEST_CASE("gaussian filter preserves constants and rejects oversized kernels") {
    const Volume3 v(Dims{12, 12, 12}, Spacing{}, 0.7f);
    const auto f = gaussian_filter(v, 1.5, 5);
    for (float x : f.values()) CHECK(x == doctest::Approx(0.7).epsilon(1e-6));
    const Volume3 small(Dims{12, 12, 8}, Spacing{}, 0.5f);
    CHECK_THROWS_AS(gaussian_filter(small, 1.5, 5), ConfigError);
}

TEST_CASE("downsample2 averages 2x2x2 blocks and doubles spacing") {
    const auto v = test::random_volume({5, 4, 6}, 9, 0.0, 1.0, Spacing{1.0, 0.5, 2.0});
    const auto d = downsample2(v);
    CHECK(d.dims() == Dims{2, 2, 3});
    CHECK(d.spacing() == Spacing{2.0, 1.0, 4.0});
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t i = 0; i < 2; ++i) {
                double s = 0.0;
                for (int c = 0; c < 8; ++c) s += v.at(2 * i + (c & 1), 2 * j + ((c >> 1) & 1), 2 * k + (c >> 2));
                CHECK(d.at(i, j, k) == doctest::Approx(s / 8.0).epsilon(1e-6));
            }
    CHECK_THROWS_AS(downsample2(Volume3(Dims{1, 4, 4}, Spacing{}, 0.0f)), ConfigError);
}

TEST_CASE("volume files round-trip bit-exactly") {
    test::TempDir dir("vol");
    const auto v = test::random_volume({7, 3, 5}, 21, -3.0, 3.0, Spacing{0.5, 0.25, 2.0});
    write_volume(v, dir.path() / "a");
    CHECK(read_volume(dir.path() / "a") == v);
    CHECK(read_volume(dir.path() / "a.json") == v);
    CHECK(read_volume(dir.path() / "a.raw") == v);
    CHECK(std::filesystem::file_size(dir.path() / "a.raw") == v.size() * 4);
}

TEST_CASE("volume reader reports format problems") {
    test::TempDir dir("volerr");
    const auto v = test::random_volume({4, 4, 4}, 1);
    write_volume(v, dir.path() / "a");

    SUBCASE("size mismatch") {
        std::filesystem::resize_file(dir.path() / "a.raw", 10);
        try {
            (void)read_volume(dir.path() / "a");
            FAIL("expected VolumeFormatError");
        } catch (const VolumeFormatError& e) {
            CHECK(e.issue() == VolumeFormatIssue::size_mismatch);
        }
    }
    SUBCASE("bad header") {
        std::ofstream(dir.path() / "a.json") << "{\"dims\":[4,4,4]}\n";
        try {
            (void)read_volume(dir.path() / "a");
            FAIL("expected VolumeFormatError");
        } catch (const VolumeFormatError& e) {
            CHECK(e.issue() == VolumeFormatIssue::bad_header);
        }
    }
    SUBCASE("non-finite payload") {
        std::fstream raw(dir.path() / "a.raw", std::ios::in | std::ios::out | std::ios::binary);
        const float nan = std::numeric_limits<float>::quiet_NaN();
        raw.write(reinterpret_cast<const char*>(&nan), 4);
        raw.close();
        try {
            (void)read_volume(dir.path() / "a");
            FAIL("expected VolumeFormatError");
        } catch (const VolumeFormatError& e) {
            CHECK(e.issue() == VolumeFormatIssue::non_finite);
        }
    }
    SUBCASE("missing file is an I/O error") {
        CHECK_THROWS_AS(read_volume(dir.path() / "missing"), IoError);
    }
}

}  // TEST_SUITE
