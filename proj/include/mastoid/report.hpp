#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mastoid/metrics.hpp"
#include "mastoid/similarity.hpp"

namespace mastoid {

// Written for metrics that are not defined for a case (e.g. precision with
// an empty prediction).
inline constexpr std::string_view kUndefined = "undefined";

// Shortest round-trip decimal form with '.' as separator, independent of locale.
std::string format_number(double v);
std::string format_optional(const std::optional<double>& v);

// Header `case,dice,iou,acc,pre,sen,spe,hd95,asd`.
std::string metrics_csv(const std::vector<CaseMetrics>& cases);
// Header `stat,dice,...,asd`; rows min, median, mean, std_sample, max, n_defined.
// std_sample uses the n-1 convention and is undefined for fewer than two cases.
std::string summary_csv(const std::array<SummaryStat, 8>& stats);
// Header `iter,total,msssim_cscc,smooth`.
std::string trace_csv(const std::vector<LossReport>& trace);
// Header `scale,nx,ny,nz,l,c,s,scc,scc_degenerate`.
std::string per_scale_csv(const LossReport& report);

nlohmann::ordered_json to_json(const LossReport& report);

// Writes bytes verbatim (no newline translation). Throws IoError.
void write_text(const std::filesystem::path& path, std::string_view text);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Records files written under a root directory and emits manifest.json with
// their sizes and SHA-256 digests, sorted by relative path.
class Manifest {
public:
    explicit Manifest(std::filesystem::path root);

    void add(const std::filesystem::path& file);
    // Adds both halves of a volume written with write_volume.
    void add_volume(const std::filesystem::path& stem);
    std::size_t size() const noexcept { return files_.size(); }

    struct Failure {
        std::string stage;
        std::string kind;
        std::string message;
    };
    // Returns the path of the manifest file.
    std::filesystem::path write(const std::optional<Failure>& failure = std::nullopt) const;

private:
    std::filesystem::path root_;
    std::vector<std::filesystem::path> files_;
};

}  // namespace mastoid
