#include "mastoid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mastoid/error.hpp"
#include "mastoid/parallel.hpp"

namespace mastoid {

namespace {

std::optional<double> ratio(double num, double den) {
    if (den == 0.0) return std::nullopt;
    return num / den;
}

// Lower envelope of parabolas along one line (Felzenszwalb & Huttenlocher),
// with sample positions scaled by the voxel size.
void distance_1d(const double* f, double* d, std::size_t n, double h, std::vector<std::size_t>& v,
                 std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    v.resize(n);
    z.resize(n + 1);
    std::size_t k = 0;
    bool any = false;
    for (std::size_t q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        const double xq = h * static_cast<double>(q);
        if (!any) {
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
            k = 0;
            any = true;
            continue;
        }
        auto intersect = [&](std::size_t p) {
            const double xp = h * static_cast<double>(p);
            return ((f[q] + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
        };
        double s = intersect(v[k]);
        while (s <= z[k]) s = intersect(v[--k]);
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    if (!any) {
        std::fill(d, d + n, inf);
        return;
    }
    k = 0;
    for (std::size_t q = 0; q < n; ++q) {
        const double xq = h * static_cast<double>(q);
        while (z[k + 1] < xq) ++k;
        const double dx = xq - h * static_cast<double>(v[k]);
        d[q] = dx * dx + f[v[k]];
    }
}

}  // namespace

OverlapCounts overlap_counts(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.dims != gt.dims) throw ConfigError("overlap metrics: dimension mismatch");
    OverlapCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i], g = gt[i];
        c.tp += p && g;
        c.fp += p && !g;
        c.fn += !p && g;
        c.tn += !p && !g;
    }
    return c;
}

OverlapMetrics overlap_metrics(const OverlapCounts& c) {
    const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const auto fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
    OverlapMetrics m;
    m.dice = ratio(2.0 * tp, 2.0 * tp + fp + fn);
    m.iou = ratio(tp, tp + fp + fn);
    m.acc = ratio(tp + tn, tp + fp + fn + tn);
    m.pre = ratio(tp, tp + fp);
    m.sen = ratio(tp, tp + fn);
    m.spe = ratio(tn, tn + fp);
    return m;
}

OverlapMetrics overlap_metrics(const BinaryMask& pred, const BinaryMask& gt) {
    return overlap_metrics(overlap_counts(pred, gt));
}

std::vector<std::size_t> surface_voxels(const BinaryMask& m) {
    const Dims d = m.dims;
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j)
            for (std::size_t i = 0; i < d.nx; ++i) {
                const std::size_t idx = d.index(i, j, k);
                if (!m[idx]) continue;
                const bool border = i == 0 || j == 0 || k == 0 || i + 1 == d.nx || j + 1 == d.ny || k + 1 == d.nz;
                if (border || !m[idx - 1] || !m[idx + 1] || !m[idx - d.nx] || !m[idx + d.nx] ||
                    !m[idx - d.nx * d.ny] || !m[idx + d.nx * d.ny]) {
                    out.push_back(idx);
                }
            }
    return out;
}

std::vector<double> squared_distance_transform(const BinaryMask& sites, Spacing spacing) {
    const Dims d = sites.dims;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> g(d.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = sites[i] ? 0.0 : inf;

    const std::size_t strides[3] = {1, d.nx, d.nx * d.ny};
    for (int axis = 0; axis < 3; ++axis) {
        const std::size_t n = d[axis];
        const std::size_t stride = strides[axis];
        const std::size_t lines = d.size() / n;
        parallel_for(0, lines, [&](std::size_t lo, std::size_t hi) {
            std::vector<double> f(n), out(n), z;
            std::vector<std::size_t> v;
            for (std::size_t line = lo; line < hi; ++line) {
                // Enumerate line starts: all voxels whose coordinate along `axis` is 0.
                std::size_t start;
                if (axis == 0) {
                    start = line * d.nx;
                } else if (axis == 1) {
                    start = (line % d.nx) + (line / d.nx) * d.nx * d.ny;
                } else {
                    start = line;
                }
                for (std::size_t q = 0; q < n; ++q) f[q] = g[start + q * stride];
                distance_1d(f.data(), out.data(), n, spacing[axis], v, z);
                for (std::size_t q = 0; q < n; ++q) g[start + q * stride] = out[q];
            }
        });
    }
    return g;
}

std::vector<double> SurfaceDistanceSet::combined() const {
    std::vector<double> all(pred_to_gt);
    all.insert(all.end(), gt_to_pred.begin(), gt_to_pred.end());
    return all;
}

SurfaceDistanceSet surface_distances(const BinaryMask& pred, const BinaryMask& gt, Spacing spacing) {
    if (pred.dims != gt.dims) throw ConfigError("surface_distances: dimension mismatch");
    if (pred.count() == 0) throw ConfigError("surface_distances: prediction mask is empty");
    if (gt.count() == 0) throw ConfigError("surface_distances: ground-truth mask is empty");
    const auto sp = surface_voxels(pred);
    const auto sg = surface_voxels(gt);
    auto as_mask = [&](const std::vector<std::size_t>& idx) {
        BinaryMask m(pred.dims);
        for (std::size_t i : idx) m.labels[i] = 1;
        return m;
    };
    const auto dist_to_gt = squared_distance_transform(as_mask(sg), spacing);
    const auto dist_to_pred = squared_distance_transform(as_mask(sp), spacing);
    SurfaceDistanceSet out;
    out.pred_to_gt.reserve(sp.size());
    out.gt_to_pred.reserve(sg.size());
    for (std::size_t i : sp) out.pred_to_gt.push_back(std::sqrt(dist_to_gt[i]));
    for (std::size_t i : sg) out.gt_to_pred.push_back(std::sqrt(dist_to_pred[i]));
    return out;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ConfigError("percentile: empty set");
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("percentile: p must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double hd95(const SurfaceDistanceSet& sd) {
    const auto all = sd.combined();
    if (all.empty()) throw ConfigError("hd95: empty distance set");
    return percentile(all, 0.95);
}

double asd(const SurfaceDistanceSet& sd) {
    const auto all = sd.combined();
    if (all.empty()) throw ConfigError("asd: empty distance set");
    return std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
}

CaseMetrics evaluate_case(std::string case_id, const BinaryMask& pred, const BinaryMask& gt, Spacing spacing) {
    CaseMetrics cm;
    cm.case_id = std::move(case_id);
    const OverlapMetrics om = overlap_metrics(pred, gt);
    cm.values = {om.dice, om.iou, om.acc, om.pre, om.sen, om.spe, std::nullopt, std::nullopt};
    if (pred.count() > 0 && gt.count() > 0) {
        const auto sd = surface_distances(pred, gt, spacing);
        cm.values[6] = hd95(sd);
        cm.values[7] = asd(sd);
    }
    return cm;
}

SummaryStat summarize_values(std::vector<double> values) {
    SummaryStat s;
    s.defined = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    s.min = values.front();
    s.max = values.back();
    s.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    s.mean = mean;
    if (n >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        s.std = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return s;
}

std::array<SummaryStat, 8> summarize(const std::vector<CaseMetrics>& runs) {
    if (runs.empty()) throw ConfigError("summarize: no runs");
    std::array<SummaryStat, 8> out;
    for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
        std::vector<double> vals;
        for (const auto& r : runs)
            if (r.values[m]) vals.push_back(*r.values[m]);
        out[m] = summarize_values(std::move(vals));
    }
    return out;
}

}  // namespace mastoid
