#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mastoid/binary_mask.hpp"
#include "mastoid/volume.hpp"

namespace mastoid {

struct OverlapCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
};

OverlapCounts overlap_counts(const BinaryMask& pred, const BinaryMask& gt);

// A ratio with a zero denominator is left empty ("undefined"), never 0.
struct OverlapMetrics {
    std::optional<double> dice;
    std::optional<double> iou;
    std::optional<double> acc;
    std::optional<double> pre;
    std::optional<double> sen;
    std::optional<double> spe;
};

OverlapMetrics overlap_metrics(const OverlapCounts& c);
OverlapMetrics overlap_metrics(const BinaryMask& pred, const BinaryMask& gt);

// Foreground voxels with a background 6-neighbour or lying on the volume border.
std::vector<std::size_t> surface_voxels(const BinaryMask& m);

struct SurfaceDistanceSet {
    std::vector<double> pred_to_gt;  // millimeters
    std::vector<double> gt_to_pred;

    std::vector<double> combined() const;
};

// Directed distances from every surface voxel of one mask to the nearest
// surface voxel of the other, measured between voxel centers in millimeters.
SurfaceDistanceSet surface_distances(const BinaryMask& pred, const BinaryMask& gt, Spacing spacing);

// Squared Euclidean distance (mm^2) from every voxel to the nearest site.
// Returns +inf everywhere when there are no sites.
std::vector<double> squared_distance_transform(const BinaryMask& sites, Spacing spacing);

// Percentile with linear interpolation between closest ranks, p in [0, 1].
double percentile(std::vector<double> values, double p);

// 95th percentile of both directed sets pooled together.
double hd95(const SurfaceDistanceSet& sd);
// Mean of both directed sets pooled together.
double asd(const SurfaceDistanceSet& sd);

// Table columns in reporting order.
inline constexpr std::array<std::string_view, 8> kMetricNames{"dice", "iou", "acc", "pre",
                                                               "sen",  "spe", "hd95", "asd"};

struct CaseMetrics {
    std::string case_id;
    // Indexed like kMetricNames.
    std::array<std::optional<double>, 8> values;
};

// Surface metrics are undefined when either mask is empty.
CaseMetrics evaluate_case(std::string case_id, const BinaryMask& pred, const BinaryMask& gt, Spacing spacing);

struct SummaryStat {
    std::optional<double> min, median, mean, std, max;
    std::size_t defined = 0;
};

// Per metric over the cases where it is defined. Median averages the two
// middle values for even counts; std uses the sample (n - 1) convention.
std::array<SummaryStat, 8> summarize(const std::vector<CaseMetrics>& runs);
SummaryStat summarize_values(std::vector<double> values);

}  // namespace mastoid
