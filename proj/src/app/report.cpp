#include "mastoid/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "mastoid/error.hpp"

namespace mastoid {

std::string format_number(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw Error("format_number: conversion failed");
    return std::string(buf.data(), end);
}

std::string format_optional(const std::optional<double>& v) {
    return v ? format_number(*v) : std::string(kUndefined);
}

namespace {

std::string metric_header(std::string_view first) {
    std::string h(first);
    for (const auto name : kMetricNames) {
        h += ',';
        h += name;
    }
    h += '\n';
    return h;
}

}  // namespace

std::string metrics_csv(const std::vector<CaseMetrics>& cases) {
    std::string out = metric_header("case");
    for (const auto& c : cases) {
        out += c.case_id;
        for (const auto& v : c.values) {
            out += ',';
            out += format_optional(v);
        }
        out += '\n';
    }
    return out;
}

std::string summary_csv(const std::array<SummaryStat, 8>& stats) {
    std::string out = metric_header("stat");
    const auto row = [&](std::string_view label, auto pick) {
        out += label;
        for (const auto& s : stats) {
            out += ',';
            out += pick(s);
        }
        out += '\n';
    };
    row("min", [](const SummaryStat& s) { return format_optional(s.min); });
    row("median", [](const SummaryStat& s) { return format_optional(s.median); });
    row("mean", [](const SummaryStat& s) { return format_optional(s.mean); });
    row("std_sample", [](const SummaryStat& s) { return format_optional(s.std); });
    row("max", [](const SummaryStat& s) { return format_optional(s.max); });
    row("n_defined", [](const SummaryStat& s) { return std::to_string(s.defined); });
    return out;
}

std::string trace_csv(const std::vector<LossReport>& trace) {
    std::string out = "iter,total,msssim_cscc,smooth\n";
    for (std::size_t t = 0; t < trace.size(); ++t) {
        out += std::to_string(t) + ',' + format_number(trace[t].total) + ',' + format_number(trace[t].msssim_cscc) +
               ',' + format_number(trace[t].smooth) + '\n';
    }
    return out;
}

std::string per_scale_csv(const LossReport& report) {
    std::string out = "scale,nx,ny,nz,l,c,s,scc,scc_degenerate\n";
    for (std::size_t j = 0; j < report.per_scale.size(); ++j) {
        const auto& s = report.per_scale[j];
        out += std::to_string(j) + ',' + std::to_string(s.dims.nx) + ',' + std::to_string(s.dims.ny) + ',' +
               std::to_string(s.dims.nz) + ',' + format_number(s.l_mean) + ',' + format_number(s.c_mean) + ',' +
               format_number(s.s_mean) + ',' + format_number(s.scc) + ',' + (s.scc_degenerate ? "1" : "0") + '\n';
    }
    return out;
}

nlohmann::ordered_json to_json(const LossReport& r) {
    nlohmann::ordered_json j;
    j["total"] = r.total;
    j["msssim_cscc"] = r.msssim_cscc;
    j["smooth"] = r.smooth;
    j["smooth_raw"] = r.smooth_raw;
    j["lambda"] = r.lambda;
    j["scc_degenerate"] = r.scc_degenerate;
    j["factor_clamped"] = r.factor_clamped;
    auto scales = nlohmann::ordered_json::array();
    for (const auto& s : r.per_scale) {
        nlohmann::ordered_json e;
        e["dims"] = {s.dims.nx, s.dims.ny, s.dims.nz};
        e["l"] = s.l_mean;
        e["c"] = s.c_mean;
        e["s"] = s.s_mean;
        e["scc"] = s.scc;
        e["scc_degenerate"] = s.scc_degenerate;
        scales.push_back(e);
    }
    j["per_scale"] = scales;
    return j;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

namespace {

struct DigestDeleter {
    void operator()(EVP_MD_CTX* ctx) const noexcept { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw Error("sha256: digest initialisation failed");
        }
    }
    void update(const void* data, std::size_t n) {
        if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw Error("sha256: digest update failed");
    }
    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw Error("sha256: digest final failed");
        static constexpr char kHex[] = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out += kHex[md[i] >> 4];
            out += kHex[md[i] & 0xf];
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for hashing");
    Sha256 h;
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    if (in.bad()) throw IoError("failed reading " + path.string());
    return h.hex();
}

Manifest::Manifest(std::filesystem::path root) : root_(std::move(root)) {}

void Manifest::add(const std::filesystem::path& file) {
    const auto rel = file.is_absolute() ? std::filesystem::relative(file, root_) : file;
    if (std::find(files_.begin(), files_.end(), rel) == files_.end()) files_.push_back(rel);
}

void Manifest::add_volume(const std::filesystem::path& stem) {
    add(std::filesystem::path(stem).concat(".json"));
    add(std::filesystem::path(stem).concat(".raw"));
}

std::filesystem::path Manifest::write(const std::optional<Failure>& failure) const {
    auto sorted = files_;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.generic_string() < b.generic_string(); });
    nlohmann::ordered_json doc;
    doc["version"] = 1;
    doc["status"] = failure ? "failed" : "ok";
    if (failure) {
        doc["failure"] = {{"stage", failure->stage}, {"kind", failure->kind}, {"message", failure->message}};
    }
    auto list = nlohmann::ordered_json::array();
    for (const auto& rel : sorted) {
        const auto full = root_ / rel;
        nlohmann::ordered_json e;
        e["path"] = rel.generic_string();
        e["bytes"] = std::filesystem::file_size(full);
        e["sha256"] = sha256_file(full);
        list.push_back(e);
    }
    doc["artifacts"] = list;
    const auto path = root_ / "manifest.json";
    write_text(path, doc.dump(2) + "\n");
    return path;
}

}  // namespace mastoid
