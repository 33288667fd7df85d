#include "mastoid/pipeline.hpp"

#include <algorithm>
#include <map>

#include "mastoid/error.hpp"
#include "mastoid/mesh.hpp"
#include "mastoid/report.hpp"

namespace mastoid {

namespace {

std::string error_kind(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const ConfigError&) {
        return "config";
    } catch (const NumericalError&) {
        return "numerical";
    } catch (const IoError&) {
        return "io";
    } catch (...) {
        return "error";
    }
}

std::string error_message(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    } catch (...) {
        return "unknown error";
    }
}

OptimizationResult optimize_for(const PipelineConfig& cfg, const Volume3& rho, const Volume3& omega) {
    OptimConfig oc = cfg.optimizer;
    oc.variant = cfg.loss_variant;
    return optimize_mask(rho, omega, oc, cfg.msssim);
}

}  // namespace

PipelineResult run_case(const PipelineConfig& cfg, const std::string& case_id) {
    PipelineResult r{generate_phantom(cfg.phantom), std::nullopt, Volume3{}, {}, {}, {}};
    if (cfg.registration.enabled) {
        r.registration = register_rigid(r.phantom.preop, r.phantom.postop, cfg.registration.levels);
        r.registered = resample(r.phantom.postop, r.registration->transform, r.phantom.preop);
    } else {
        r.registered = r.phantom.postop;
    }
    r.optimization = optimize_for(cfg, r.phantom.preop, r.registered);
    r.mask = threshold_mask(r.optimization.delta, cfg.threshold);
    r.metrics = evaluate_case(case_id, r.mask, r.phantom.ground_truth, r.phantom.preop.spacing());
    return r;
}

std::size_t run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());

    Manifest manifest(out);
    std::string stage = "config";
    const auto emit_text = [&](const char* name, std::string_view text) {
        write_text(out / name, text);
        manifest.add(name);
    };
    const auto emit_volume = [&](const char* stem, const Volume3& v) {
        write_volume(v, out / stem);
        manifest.add_volume(stem);
    };

    try {
        auto echoed = to_json(cfg);
        echoed.erase("output_dir");
        emit_text("config.json", echoed.dump(2) + "\n");

        stage = "phantom";
        const PhantomCase ph = generate_phantom(cfg.phantom);
        emit_text("spec.json", to_json(cfg.phantom).dump(2) + "\n");
        emit_volume("pre", ph.preop);
        emit_volume("post", ph.postop);
        emit_volume("gt", ph.ground_truth.to_volume(ph.preop.spacing()));

        Volume3 omega = ph.postop;
        if (cfg.registration.enabled) {
            stage = "register";
            const auto reg = register_rigid(ph.preop, ph.postop, cfg.registration.levels);
            omega = resample(ph.postop, reg.transform, ph.preop);
            emit_text("transform.json", to_json(reg.transform, reg.final_ncc).dump(2) + "\n");
            emit_volume("post_registered", omega);
        }

        stage = "optimize";
        const auto opt = optimize_for(cfg, ph.preop, omega);
        emit_volume("delta", opt.delta.to_volume(ph.preop.spacing()));
        emit_text("trace.csv", trace_csv(opt.trace));

        stage = "evaluate";
        const BinaryMask mask = threshold_mask(opt.delta, cfg.threshold);
        const Volume3 mask_volume = mask.to_volume(ph.preop.spacing());
        emit_volume("mask", mask_volume);
        const std::vector<CaseMetrics> cases{evaluate_case("seed" + std::to_string(cfg.phantom.seed), mask,
                                                           ph.ground_truth, ph.preop.spacing())};
        emit_text("metrics.csv", metrics_csv(cases));
        emit_text("summary.csv", summary_csv(summarize(cases)));

        stage = "mesh";
        const TriMesh mask_mesh = marching_cubes(mask_volume, cfg.mask_iso);
        write_stl(mask_mesh, out / "mask.stl");
        manifest.add("mask.stl");
        write_obj(mask_mesh, out / "mask.obj");
        manifest.add("mask.obj");
        const Volume3 masked_ct = apply_mask(ph.preop, opt.delta);
        emit_volume("masked_ct", masked_ct);
        write_stl(marching_cubes(masked_ct, cfg.ct_iso), out / "masked_ct.stl");
        manifest.add("masked_ct.stl");
    } catch (const std::exception&) {
        const auto cause = std::current_exception();
        try {
            manifest.write(Manifest::Failure{stage, error_kind(cause), error_message(cause)});
        } catch (const std::exception&) {
            // The original failure is more useful to the caller than a manifest write error.
        }
        throw StageError(stage, cause, error_message(cause));
    }
    manifest.write();
    return manifest.size();
}

std::vector<AblationRow> run_ablation(const PipelineConfig& cfg, std::span<const std::uint64_t> seeds) {
    if (seeds.empty()) throw ConfigError("ablation: at least one seed is required");
    std::vector<AblationRow> rows;
    for (const auto variant : kAllVariants) {
        for (const auto seed : seeds) {
            PipelineConfig run = cfg;
            run.loss_variant = variant;
            run.phantom.seed = seed;
            run.optimizer.seed = seed;
            run.validate();
            AblationRow row{variant, seed, "ok", {}};
            const std::string id = std::string(to_string(variant)) + "_seed" + std::to_string(seed);
            try {
                row.metrics = run_case(run, id).metrics;
            } catch (const Error& e) {
                row.status = "failed: " + std::string(e.what());
                row.metrics.case_id = id;
            }
            rows.push_back(std::move(row));
        }
    }
    std::sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
        const auto va = to_string(a.variant);
        const auto vb = to_string(b.variant);
        return va != vb ? va < vb : a.seed < b.seed;
    });
    return rows;
}

namespace {

// CSV fields must not carry separators or line breaks.
std::string csv_safe(std::string s) {
    for (char& ch : s) {
        if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ' ';
    }
    return s;
}

}  // namespace

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "variant,seed";
    for (const auto name : kMetricNames) {
        out += ',';
        out += name;
    }
    out += ",status\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.variant)) + ',' + std::to_string(r.seed);
        for (const auto& v : r.metrics.values) out += ',' + format_optional(v);
        out += ',' + csv_safe(r.status) + '\n';
    }
    return out;
}

std::string ablation_summary_csv(const std::vector<AblationRow>& rows) {
    std::map<std::string, std::vector<CaseMetrics>> by_variant;
    for (const auto& r : rows) {
        auto& list = by_variant[std::string(to_string(r.variant))];
        if (r.status == "ok") list.push_back(r.metrics);
    }
    std::string out = "variant,stat";
    for (const auto name : kMetricNames) {
        out += ',';
        out += name;
    }
    out += '\n';
    for (const auto& [variant, cases] : by_variant) {
        if (cases.empty()) {
            out += variant + ",n_defined,0,0,0,0,0,0,0,0\n";
            continue;
        }
        const std::string block = summary_csv(summarize(cases));
        std::size_t pos = block.find('\n') + 1;
        while (pos < block.size()) {
            const std::size_t end = block.find('\n', pos);
            out += variant + ',' + block.substr(pos, end - pos + 1);
            pos = end + 1;
        }
    }
    return out;
}

std::vector<AblationRow> run_ablation(const PipelineConfig& cfg, std::span<const std::uint64_t> seeds,
                                      const std::filesystem::path& out) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
    auto rows = run_ablation(cfg, seeds);
    Manifest manifest(out);
    write_text(out / "ablation.csv", ablation_csv(rows));
    manifest.add("ablation.csv");
    write_text(out / "ablation_summary.csv", ablation_summary_csv(rows));
    manifest.add("ablation_summary.csv");
    manifest.write();
    return rows;
}

}  // namespace mastoid
