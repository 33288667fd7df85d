#include "mastoid/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mastoid/error.hpp"
#include "mastoid/parallel.hpp"

namespace mastoid {

namespace {

void check_dims(Dims d) {
    if (d.nx == 0 || d.ny == 0 || d.nz == 0) {
        throw ConfigError("volume dimensions must be positive");
    }
}

void check_spacing(Spacing s) {
    for (int a = 0; a < 3; ++a) {
        if (!(s[a] > 0.0) || !std::isfinite(s[a])) {
            throw ConfigError("volume spacing must be positive and finite");
        }
    }
}

double percentile_sorted(const std::vector<float>& sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return static_cast<double>(sorted[lo]) +
           frac * (static_cast<double>(sorted[hi]) - static_cast<double>(sorted[lo]));
}

// One separable pass of a renormalized correlation along `axis`.
std::vector<double> filter_axis(const std::vector<double>& in, Dims d, int axis,
                                const std::vector<double>& taps) {
    const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
    const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? d.nx : d.nx * d.ny);
    const auto len = static_cast<std::ptrdiff_t>(d[axis]);
    std::vector<double> out(in.size());
    parallel_for(0, d.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const auto pos = static_cast<std::ptrdiff_t>((idx / stride) % d[axis]);
            double acc = 0.0;
            double wsum = 0.0;
            for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
                const std::ptrdiff_t q = pos + t;
                if (q < 0 || q >= len) continue;
                const double w = taps[static_cast<std::size_t>(t + radius)];
                acc += w * in[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(idx) + t * static_cast<std::ptrdiff_t>(stride))];
                wsum += w;
            }
            out[idx] = acc / wsum;
        }
    });
    return out;
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* ext) {
    std::filesystem::path p = stem;
    p += ext;
    return p;
}

}  // namespace

Volume3::Volume3(Dims dims, Spacing spacing, std::vector<float> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    check_dims(dims_);
    check_spacing(spacing_);
    if (data_.size() != dims_.size()) {
        throw ConfigError("volume data length " + std::to_string(data_.size()) +
                          " does not match dims product " + std::to_string(dims_.size()));
    }
}

Volume3::Volume3(Dims dims, Spacing spacing, float fill)
    : Volume3(dims, spacing, std::vector<float>(dims.size(), fill)) {}

Field3::Field3(Dims d, std::vector<double> values) : dims(d), data(std::move(values)) {
    if (data.size() != dims.size()) throw ConfigError("field data length does not match dims");
}

Field3 Field3::from_volume(const Volume3& v) {
    const auto vals = v.values();
    return Field3(v.dims(), std::vector<double>(vals.begin(), vals.end()));
}

Volume3 Field3::to_volume(Spacing spacing) const {
    std::vector<float> out(data.size());
    std::transform(data.begin(), data.end(), out.begin(),
                   [](double x) { return static_cast<float>(x); });
    return Volume3(dims, spacing, std::move(out));
}

void require_finite(const Volume3& v, const char* what) {
    const auto vals = v.values();
    if (!std::all_of(vals.begin(), vals.end(), [](float x) { return std::isfinite(x); })) {
        throw ConfigError(std::string(what) + " contains non-finite values");
    }
}

NormalizeResult normalize_intensity(const Volume3& v, double lo_pct, double hi_pct) {
    if (v.empty()) throw ConfigError("normalize_intensity: empty volume");
    if (!(lo_pct >= 0.0 && lo_pct < hi_pct && hi_pct <= 1.0)) {
        throw ConfigError("normalize_intensity: require 0 <= lo_pct < hi_pct <= 1");
    }
    require_finite(v, "normalize_intensity input");
    std::vector<float> sorted(v.values().begin(), v.values().end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = percentile_sorted(sorted, lo_pct);
    const double hi = percentile_sorted(sorted, hi_pct);
    NormalizeResult result;
    if (!(hi > lo)) {
        result.volume = Volume3(v.dims(), v.spacing(), 0.0f);
        result.degenerate = true;
        return result;
    }
    const double scale = 1.0 / (hi - lo);
    std::vector<float> out(v.size());
    const auto in = v.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double t = (static_cast<double>(in[i]) - lo) * scale;
        out[i] = static_cast<float>(std::clamp(t, 0.0, 1.0));
    }
    result.volume = Volume3(v.dims(), v.spacing(), std::move(out));
    return result;
}

Volume3 crop(const Volume3& v, const CropRegion& r) {
    static constexpr const char* kAxis[] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
        if (r.extent[a] == 0 || r.origin[a] + r.extent[a] > v.dims()[a]) {
            throw ConfigError(std::string("crop region out of bounds along ") + kAxis[a] + " axis");
        }
    }
    const Dims od{r.extent[0], r.extent[1], r.extent[2]};
    std::vector<float> out(od.size());
    for (std::size_t k = 0; k < od.nz; ++k)
        for (std::size_t j = 0; j < od.ny; ++j)
            for (std::size_t i = 0; i < od.nx; ++i)
                out[od.index(i, j, k)] = v.at(i + r.origin[0], j + r.origin[1], k + r.origin[2]);
    return Volume3(od, v.spacing(), std::move(out));
}

std::vector<double> gaussian_kernel(double sigma, std::size_t radius) {
    if (!(sigma > 0.0)) throw ConfigError("gaussian kernel sigma must be positive");
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < taps.size(); ++i) {
        const double x = static_cast<double>(i) - static_cast<double>(radius);
        taps[i] = std::exp(-x * x / (2.0 * sigma * sigma));
        sum += taps[i];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

Volume3 gaussian_filter(const Volume3& v, double sigma, std::size_t radius) {
    if (!(sigma > 0.0)) throw ConfigError("gaussian_filter: sigma must be positive");
    if (2 * radius + 1 > v.dims().min_extent()) {
        throw ConfigError("gaussian_filter: window of " + std::to_string(2 * radius + 1) +
                          " taps exceeds the smallest volume dimension");
    }
    const auto taps = gaussian_kernel(sigma, radius);
    std::vector<double> work(v.values().begin(), v.values().end());
    for (int axis = 0; axis < 3; ++axis) work = filter_axis(work, v.dims(), axis, taps);
    return Field3(v.dims(), std::move(work)).to_volume(v.spacing());
}

Volume3 downsample2(const Volume3& v) {
    const Dims d = v.dims();
    if (d.nx < 2 || d.ny < 2 || d.nz < 2) {
        throw ConfigError("downsample2: every dimension must be at least 2");
    }
    const Dims od{d.nx / 2, d.ny / 2, d.nz / 2};
    std::vector<float> out(od.size());
    parallel_for(0, od.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t o = lo; o < hi; ++o) {
            const std::size_t i = o % od.nx;
            const std::size_t j = (o / od.nx) % od.ny;
            const std::size_t k = o / (od.nx * od.ny);
            double acc = 0.0;
            for (std::size_t dk = 0; dk < 2; ++dk)
                for (std::size_t dj = 0; dj < 2; ++dj)
                    for (std::size_t di = 0; di < 2; ++di)
                        acc += v.at(2 * i + di, 2 * j + dj, 2 * k + dk);
            out[o] = static_cast<float>(acc / 8.0);
        }
    });
    const Spacing s = v.spacing();
    return Volume3(od, Spacing{2 * s.x, 2 * s.y, 2 * s.z}, std::move(out));
}

std::filesystem::path volume_stem(const std::filesystem::path& path) {
    const auto ext = path.extension();
    if (ext == ".json" || ext == ".raw") {
        auto stem = path;
        stem.replace_extension();
        return stem;
    }
    return path;
}

void write_volume(const Volume3& v, const std::filesystem::path& path) {
    if (v.empty()) throw ConfigError("write_volume: empty volume");
    require_finite(v, "write_volume input");
    const auto stem = volume_stem(path);

    nlohmann::ordered_json header;
    header["dims"] = {v.dims().nx, v.dims().ny, v.dims().nz};
    header["spacing_mm"] = {v.spacing().x, v.spacing().y, v.spacing().z};
    header["dtype"] = "f32";
    header["order"] = "x-fastest";

    std::ofstream hj(with_suffix(stem, ".json"), std::ios::binary | std::ios::trunc);
    if (!hj) throw IoError("cannot open " + with_suffix(stem, ".json").string() + " for writing");
    hj << header.dump() << '\n';
    if (!hj) throw IoError("failed writing " + with_suffix(stem, ".json").string());

    std::vector<std::uint32_t> words(v.size());
    const auto vals = v.values();
    for (std::size_t i = 0; i < words.size(); ++i) {
        std::uint32_t w = std::bit_cast<std::uint32_t>(vals[i]);
        if constexpr (std::endian::native == std::endian::big) {
            w = ((w & 0xffu) << 24) | ((w & 0xff00u) << 8) | ((w >> 8) & 0xff00u) | (w >> 24);
        }
        words[i] = w;
    }
    std::ofstream raw(with_suffix(stem, ".raw"), std::ios::binary | std::ios::trunc);
    if (!raw) throw IoError("cannot open " + with_suffix(stem, ".raw").string() + " for writing");
    raw.write(reinterpret_cast<const char*>(words.data()),
              static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
    if (!raw) throw IoError("failed writing " + with_suffix(stem, ".raw").string());
}

Volume3 read_volume(const std::filesystem::path& path) {
    const auto stem = volume_stem(path);
    const auto header_path = with_suffix(stem, ".json");
    const auto raw_path = with_suffix(stem, ".raw");

    std::ifstream hj(header_path, std::ios::binary);
    if (!hj) throw IoError("cannot open " + header_path.string());
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hj);
    } catch (const nlohmann::json::exception& e) {
        throw VolumeFormatError(VolumeFormatIssue::bad_header,
                                header_path.string() + ": unparsable header: " + e.what());
    }
    auto bad = [&](const std::string& why) {
        return VolumeFormatError(VolumeFormatIssue::bad_header, header_path.string() + ": " + why);
    };
    if (!header.is_object() || header.size() != 4 || !header.contains("dims") ||
        !header.contains("spacing_mm") || !header.contains("dtype") || !header.contains("order")) {
        throw bad("header must contain exactly dims, spacing_mm, dtype, order");
    }
    if (header["dtype"] != "f32") throw bad("dtype must be \"f32\"");
    if (header["order"] != "x-fastest") throw bad("order must be \"x-fastest\"");
    const auto& jd = header["dims"];
    const auto& js = header["spacing_mm"];
    if (!jd.is_array() || jd.size() != 3 || !js.is_array() || js.size() != 3) {
        throw bad("dims and spacing_mm must be 3-element arrays");
    }
    Dims dims;
    Spacing spacing;
    try {
        for (const auto& e : jd) {
            if (!e.is_number_integer() || e.get<long long>() <= 0) throw bad("dims must be positive integers");
        }
        dims = Dims{jd[0].get<std::size_t>(), jd[1].get<std::size_t>(), jd[2].get<std::size_t>()};
        for (const auto& e : js) {
            if (!e.is_number() || !(e.get<double>() > 0.0)) throw bad("spacing_mm must be positive numbers");
        }
        spacing = Spacing{js[0].get<double>(), js[1].get<double>(), js[2].get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw bad(e.what());
    }

    std::ifstream raw(raw_path, std::ios::binary);
    if (!raw) throw IoError("cannot open " + raw_path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());
    const std::size_t expected = dims.size() * sizeof(float);
    if (bytes.size() != expected) {
        throw VolumeFormatError(VolumeFormatIssue::size_mismatch,
                                raw_path.string() + ": payload has " + std::to_string(bytes.size()) +
                                    " bytes, header implies " + std::to_string(expected));
    }
    std::vector<float> data(dims.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::uint32_t w;
        std::memcpy(&w, bytes.data() + 4 * i, 4);
        if constexpr (std::endian::native == std::endian::big) {
            w = ((w & 0xffu) << 24) | ((w & 0xff00u) << 8) | ((w >> 8) & 0xff00u) | (w >> 24);
        }
        data[i] = std::bit_cast<float>(w);
        if (!std::isfinite(data[i])) {
            throw VolumeFormatError(VolumeFormatIssue::non_finite,
                                    raw_path.string() + ": non-finite value at index " + std::to_string(i));
        }
    }
    return Volume3(dims, spacing, std::move(data));
}

}  // namespace mastoid
