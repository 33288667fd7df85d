#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mastoid/error.hpp"
#include "mastoid/metrics.hpp"
#include "../support.hpp"

using namespace mastoid;

namespace {

struct Counts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Counts brute_counts(const BinaryMask& p, const BinaryMask& g) {
    Counts c;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] && g[i]) ++c.tp;
        else if (p[i]) ++c.fp;
        else if (g[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

bool brute_is_surface(const BinaryMask& m, std::size_t i, std::size_t j, std::size_t k) {
    const Dims d = m.dims;
    if (!m[d.index(i, j, k)]) return false;
    if (i == 0 || j == 0 || k == 0 || i + 1 == d.nx || j + 1 == d.ny || k + 1 == d.nz) return true;
    return !m[d.index(i - 1, j, k)] || !m[d.index(i + 1, j, k)] || !m[d.index(i, j - 1, k)] ||
           !m[d.index(i, j + 1, k)] || !m[d.index(i, j, k - 1)] || !m[d.index(i, j, k + 1)];
}

std::vector<std::array<std::size_t, 3>> brute_surface(const BinaryMask& m) {
    std::vector<std::array<std::size_t, 3>> out;
    for (std::size_t k = 0; k < m.dims.nz; ++k)
        for (std::size_t j = 0; j < m.dims.ny; ++j)
            for (std::size_t i = 0; i < m.dims.nx; ++i)
                if (brute_is_surface(m, i, j, k)) out.push_back({i, j, k});
    return out;
}

std::vector<double> brute_directed(const BinaryMask& from, const BinaryMask& to, Spacing s) {
    const auto a = brute_surface(from);
    const auto b = brute_surface(to);
    std::vector<double> out;
    for (const auto& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : b) {
            const double dx = (double(p[0]) - double(q[0])) * s.x;
            const double dy = (double(p[1]) - double(q[1])) * s.y;
            const double dz = (double(p[2]) - double(q[2])) * s.z;
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        out.push_back(std::sqrt(best));
    }
    return out;
}

BinaryMask permuted(const BinaryMask& m, const std::vector<std::size_t>& perm) {
    BinaryMask out(m.dims);
    for (std::size_t i = 0; i < perm.size(); ++i) out.labels[i] = m.labels[perm[i]];
    return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("overlap counts and ratios match brute-force counting") {
    const Dims d{8, 8, 8};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = test::random_mask(d, 2 * seed + 1, 0.3);
        const auto g = test::random_mask(d, 2 * seed + 2, 0.4);
        const auto c = overlap_counts(p, g);
        const auto b = brute_counts(p, g);
        CHECK(c.tp == b.tp);
        CHECK(c.fp == b.fp);
        CHECK(c.fn == b.fn);
        CHECK(c.tn == b.tn);
        const auto m = overlap_metrics(p, g);
        CHECK(*m.dice == 2.0 * b.tp / double(2 * b.tp + b.fp + b.fn));
        CHECK(*m.iou == b.tp / double(b.tp + b.fp + b.fn));
        CHECK(*m.acc == (b.tp + b.tn) / double(d.size()));
        CHECK(*m.pre == b.tp / double(b.tp + b.fp));
        CHECK(*m.sen == b.tp / double(b.tp + b.fn));
        CHECK(*m.spe == b.tn / double(b.tn + b.fp));
    }
}

TEST_CASE("dice equals 2 iou / (1 + iou)") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = test::random_mask({6, 5, 4}, seed, 0.1 + 0.04 * seed);
        const auto g = test::random_mask({6, 5, 4}, seed + 50, 0.5);
        const auto m = overlap_metrics(p, g);
        CHECK(*m.dice == doctest::Approx(2.0 * *m.iou / (1.0 + *m.iou)).epsilon(1e-15));
    }
}

TEST_CASE("overlap metrics are invariant under a shared voxel permutation") {
    const Dims d{6, 6, 6};
    const auto p = test::random_mask(d, 1);
    const auto g = test::random_mask(d, 2);
    std::vector<std::size_t> perm(d.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
    const auto a = overlap_metrics(p, g);
    const auto b = overlap_metrics(permuted(p, perm), permuted(g, perm));
    CHECK(*a.dice == *b.dice);
    CHECK(*a.iou == *b.iou);
    CHECK(*a.acc == *b.acc);
    CHECK(*a.pre == *b.pre);
    CHECK(*a.sen == *b.sen);
    CHECK(*a.spe == *b.spe);
}

TEST_CASE("empty masks leave undefined ratios empty") {
    const BinaryMask empty(Dims{4, 4, 4});
    const auto g = test::random_mask({4, 4, 4}, 1);
    const auto m = overlap_metrics(empty, g);
    CHECK_FALSE(m.pre.has_value());
    CHECK(*m.sen == 0.0);
    CHECK(*m.dice == 0.0);
    const auto both = overlap_metrics(empty, empty);
    CHECK_FALSE(both.dice.has_value());
    CHECK_FALSE(both.iou.has_value());
    CHECK_FALSE(both.sen.has_value());
    CHECK(*both.spe == 1.0);
    const auto cm = evaluate_case("x", empty, g, Spacing{});
    CHECK_FALSE(cm.values[6].has_value());
    CHECK_FALSE(cm.values[7].has_value());
}

TEST_CASE("surface voxels use 6-connectivity and the volume border") {
    BinaryMask cube(Dims{5, 5, 5});
    for (std::size_t k = 1; k < 4; ++k)
        for (std::size_t j = 1; j < 4; ++j)
            for (std::size_t i = 1; i < 4; ++i) cube.labels[cube.dims.index(i, j, k)] = 1;
    CHECK(surface_voxels(cube).size() == 26);
    BinaryMask full(Dims{3, 3, 3});
    std::fill(full.labels.begin(), full.labels.end(), 1);
    CHECK(surface_voxels(full).size() == 26);
}

TEST_CASE("surface distances match the O(n^2) brute force exactly") {
    const Dims d{8, 8, 8};
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Spacing s = seed % 2 ? Spacing{1.0, 1.0, 1.0} : Spacing{0.5, 1.0, 2.0};
        const auto p = test::random_mask(d, 3 * seed + 1, 0.2);
        const auto g = test::random_mask(d, 3 * seed + 2, 0.2);
        const auto sd = surface_distances(p, g, s);
        auto a = sd.pred_to_gt;
        auto b = brute_directed(p, g, s);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
        auto c = sd.gt_to_pred;
        auto e = brute_directed(g, p, s);
        std::sort(c.begin(), c.end());
        std::sort(e.begin(), e.end());
        CHECK(c == e);
    }
}

TEST_CASE("surface distances swap under exchanging the masks") {
    const auto p = test::random_mask({7, 6, 5}, 1, 0.3);
    const auto g = test::random_mask({7, 6, 5}, 2, 0.3);
    const auto ab = surface_distances(p, g, Spacing{});
    const auto ba = surface_distances(g, p, Spacing{});
    CHECK(ab.pred_to_gt == ba.gt_to_pred);
    CHECK(ab.gt_to_pred == ba.pred_to_gt);
    CHECK(hd95(ab) == hd95(ba));
    CHECK(asd(ab) == doctest::Approx(asd(ba)).epsilon(1e-12));
}

TEST_CASE("empty surfaces are errors naming the empty side") {
    const BinaryMask empty(Dims{4, 4, 4});
    const auto g = test::random_mask({4, 4, 4}, 1);
    try {
        (void)surface_distances(empty, g, Spacing{});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("prediction") != std::string::npos);
    }
    CHECK_THROWS_AS(surface_distances(g, empty, Spacing{}), ConfigError);
}

TEST_CASE("hd95 and asd on the documented examples") {
    SurfaceDistanceSet twenty;
    for (int i = 0; i < 10; ++i) twenty.pred_to_gt.push_back(i);
    for (int i = 10; i < 20; ++i) twenty.gt_to_pred.push_back(i);
    CHECK(hd95(twenty) == doctest::Approx(18.05).epsilon(1e-12));
    CHECK(asd(twenty) == doctest::Approx(9.5).epsilon(1e-12));

    SurfaceDistanceSet zeros{{0.0, 0.0}, {0.0}};
    CHECK(hd95(zeros) == 0.0);
    CHECK(asd(zeros) == 0.0);
    SurfaceDistanceSet single{{3.0}, {}};
    CHECK(hd95(single) == 3.0);
    CHECK(asd(single) == 3.0);
    CHECK_THROWS_AS(hd95(SurfaceDistanceSet{}), ConfigError);
    CHECK_THROWS_AS(asd(SurfaceDistanceSet{}), ConfigError);
}

TEST_CASE("hd95 and asd never exceed the largest distance") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto sd = surface_distances(test::random_mask({8, 8, 8}, seed, 0.15),
                                          test::random_mask({8, 8, 8}, seed + 9, 0.15), Spacing{});
        const auto all = sd.combined();
        const double mx = *std::max_element(all.begin(), all.end());
        CHECK(hd95(sd) <= mx);
        CHECK(asd(sd) <= mx);
    }
}

TEST_CASE("distance transform agrees with brute force") {
    const auto sites = test::random_mask({6, 7, 5}, 4, 0.05);
    const Spacing s{0.5, 1.5, 1.0};
    const auto dt = squared_distance_transform(sites, s);
    const Dims d = sites.dims;
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j)
            for (std::size_t i = 0; i < d.nx; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < d.nz; ++c)
                    for (std::size_t b = 0; b < d.ny; ++b)
                        for (std::size_t a = 0; a < d.nx; ++a) {
                            if (!sites[d.index(a, b, c)]) continue;
                            const double dx = (double(i) - double(a)) * s.x, dy = (double(j) - double(b)) * s.y,
                                         dz = (double(k) - double(c)) * s.z;
                            best = std::min(best, dx * dx + dy * dy + dz * dz);
                        }
                CHECK(dt[d.index(i, j, k)] == doctest::Approx(best).epsilon(1e-12));
            }
}

TEST_CASE("summaries follow the median and sample-std conventions") {
    const auto single = summarize_values({0.4});
    CHECK(*single.min == 0.4);
    CHECK(*single.median == 0.4);
    CHECK(*single.mean == 0.4);
    CHECK(*single.max == 0.4);
    CHECK_FALSE(single.std.has_value());

    const auto three = summarize_values({0.9, 0.5, 0.7});
    CHECK(*three.median == doctest::Approx(0.7));
    CHECK(*three.mean == doctest::Approx(0.7));
    CHECK(*three.std == doctest::Approx(0.2));

    const auto four = summarize_values({1.0, 4.0, 2.0, 3.0});
    CHECK(*four.median == 2.5);
    CHECK(*four.std == doctest::Approx(std::sqrt(5.0 / 3.0)));

    CHECK_THROWS_AS(summarize({}), ConfigError);
}

TEST_CASE("summarize skips undefined entries per metric") {
    std::vector<CaseMetrics> runs(3);
    for (int i = 0; i < 3; ++i) {
        runs[i].case_id = "c" + std::to_string(i);
        for (auto& v : runs[i].values) v = 0.1 * (i + 1);
    }
    runs[1].values[3].reset();
    const auto s = summarize(runs);
    CHECK(s[0].defined == 3);
    CHECK(s[3].defined == 2);
    CHECK(*s[3].mean == doctest::Approx(0.2));
}

}  // TEST_SUITE
