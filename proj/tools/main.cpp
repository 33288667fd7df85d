#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mastoid/binary_mask.hpp"
#include "mastoid/config.hpp"
#include "mastoid/error.hpp"
#include "mastoid/mesh.hpp"
#include "mastoid/parallel.hpp"
#include "mastoid/pipeline.hpp"
#include "mastoid/report.hpp"

namespace fs = std::filesystem;
using namespace mastoid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct GlobalOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

// Loads and validates the configuration with the command-line overrides applied.
PipelineConfig resolve_config(const GlobalOptions& g) {
    if (g.threads < 1) throw ConfigError("--threads must be >= 1");
    PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
    if (g.seed) {
        cfg.phantom.seed = *g.seed;
        cfg.optimizer.seed = *g.seed;
    }
    if (!g.out.empty()) cfg.output_dir = g.out;
    cfg.validate();
    set_thread_count(static_cast<std::size_t>(g.threads));
    return cfg;
}

fs::path prepare_output(const PipelineConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());
    return cfg.output_dir;
}

void require_input(const std::string& path, const char* flag) {
    if (path.empty()) throw ConfigError(std::string(flag) + " is required");
}

BinaryMask read_mask(const fs::path& path) {
    return BinaryMask::from_volume(read_volume(path));
}

void cmd_phantom(const GlobalOptions& g) {
    const auto cfg = resolve_config(g);
    const auto ph = generate_phantom(cfg.phantom);
    const auto out = prepare_output(cfg);
    Manifest manifest(out);
    write_text(out / "spec.json", to_json(cfg.phantom).dump(2) + "\n");
    manifest.add("spec.json");
    write_volume(ph.preop, out / "pre");
    manifest.add_volume("pre");
    write_volume(ph.postop, out / "post");
    manifest.add_volume("post");
    write_volume(ph.ground_truth.to_volume(ph.preop.spacing()), out / "gt");
    manifest.add_volume("gt");
    manifest.write();
}

struct RegisterArgs {
    std::string fixed, moving;
    std::optional<int> levels;
};

void cmd_register(const GlobalOptions& g, const RegisterArgs& a) {
    auto cfg = resolve_config(g);
    if (a.levels) cfg.registration.levels = *a.levels;
    cfg.validate();
    require_input(a.fixed, "--fixed");
    require_input(a.moving, "--moving");
    const Volume3 fixed = read_volume(a.fixed);
    const Volume3 moving = read_volume(a.moving);
    const auto reg = register_rigid(fixed, moving, cfg.registration.levels);
    const Volume3 registered = resample(moving, reg.transform, fixed);
    const auto out = prepare_output(cfg);
    write_text(out / "transform.json", to_json(reg.transform, reg.final_ncc).dump(2) + "\n");
    write_volume(registered, out / "registered");
}

struct PairArgs {
    std::string rho, omega, delta;
    std::string per_scale_csv;
};

void cmd_optimize(const GlobalOptions& g, const PairArgs& a) {
    const auto cfg = resolve_config(g);
    require_input(a.rho, "--rho");
    require_input(a.omega, "--omega");
    const Volume3 rho = read_volume(a.rho);
    const Volume3 omega = read_volume(a.omega);
    OptimConfig oc = cfg.optimizer;
    oc.variant = cfg.loss_variant;
    const auto res = optimize_mask(rho, omega, oc, cfg.msssim);
    const auto out = prepare_output(cfg);
    write_volume(res.delta.to_volume(rho.spacing()), out / "delta");
    write_volume(threshold_mask(res.delta, cfg.threshold).to_volume(rho.spacing()), out / "mask");
    write_text(out / "trace.csv", trace_csv(res.trace));
}

void cmd_loss_eval(const GlobalOptions& g, const PairArgs& a) {
    const auto cfg = resolve_config(g);
    require_input(a.rho, "--rho");
    require_input(a.omega, "--omega");
    require_input(a.delta, "--delta");
    const Volume3 rho = read_volume(a.rho);
    const Volume3 omega = read_volume(a.omega);
    const MaskField delta = MaskField::from_volume(read_volume(a.delta));
    const Objective objective(rho, omega, cfg.msssim,
                              ObjectiveOptions{cfg.optimizer.lambda_smooth, cfg.optimizer.smooth_normalize,
                                               cfg.loss_variant});
    const LossReport report = objective.evaluate(delta);
    std::cout << to_json(report).dump(2) << "\n";
    if (!a.per_scale_csv.empty()) write_text(a.per_scale_csv, per_scale_csv(report));
}

struct EvaluateArgs {
    std::string batch, pred, gt;
};

void cmd_evaluate(const GlobalOptions& g, const EvaluateArgs& a) {
    const auto cfg = resolve_config(g);
    struct Item {
        std::string id;
        fs::path pred, gt;
    };
    std::vector<Item> items;
    if (!a.batch.empty()) {
        if (!a.pred.empty() || !a.gt.empty()) throw ConfigError("use either --batch or --pred/--gt");
        std::ifstream in(a.batch);
        if (!in) throw IoError("cannot open " + a.batch);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("batch manifest: " + std::string(e.what()));
        }
        if (!doc.is_object() || !doc.contains("cases") || !doc["cases"].is_array()) {
            throw ConfigError("batch manifest: expected an object with a \"cases\" array");
        }
        const fs::path base = fs::path(a.batch).parent_path();
        for (const auto& c : doc["cases"]) {
            if (!c.is_object() || !c.contains("id") || !c.contains("pred") || !c.contains("gt") ||
                !c["id"].is_string() || !c["pred"].is_string() || !c["gt"].is_string()) {
                throw ConfigError("batch manifest: each case needs string id, pred and gt");
            }
            items.push_back({c["id"].get<std::string>(), base / c["pred"].get<std::string>(),
                             base / c["gt"].get<std::string>()});
        }
        if (items.empty()) throw ConfigError("batch manifest: no cases");
    } else {
        require_input(a.pred, "--pred");
        require_input(a.gt, "--gt");
        items.push_back({"case", a.pred, a.gt});
    }
    std::vector<CaseMetrics> rows;
    for (const auto& it : items) {
        const Volume3 gt_volume = read_volume(it.gt);
        rows.push_back(evaluate_case(it.id, read_mask(it.pred), BinaryMask::from_volume(gt_volume),
                                     gt_volume.spacing()));
    }
    const auto out = prepare_output(cfg);
    write_text(out / "metrics.csv", metrics_csv(rows));
    write_text(out / "summary.csv", summary_csv(summarize(rows)));
}

struct MeshArgs {
    std::string volume;
    std::optional<double> iso;
    std::string format = "both";
    std::string name = "mesh";
};

void cmd_mesh(const GlobalOptions& g, const MeshArgs& a) {
    const auto cfg = resolve_config(g);
    require_input(a.volume, "--volume");
    const double iso = a.iso.value_or(cfg.mask_iso);
    const TriMesh m = marching_cubes(read_volume(a.volume), iso);
    const auto out = prepare_output(cfg);
    if (a.format == "stl" || a.format == "both") write_stl(m, out / (a.name + ".stl"));
    if (a.format == "obj" || a.format == "both") write_obj(m, out / (a.name + ".obj"));
    std::cout << "vertices " << m.vertices.size() << " triangles " << m.triangles.size() << "\n";
}

void cmd_pipeline(const GlobalOptions& g) {
    const auto cfg = resolve_config(g);
    const std::size_t n = run_pipeline(cfg, cfg.output_dir);
    std::cout << "pipeline ok: " << n << " artifacts in " << cfg.output_dir.string() << "\n";
}

void cmd_ablation(const GlobalOptions& g, const std::vector<std::uint64_t>& seeds) {
    const auto cfg = resolve_config(g);
    if (seeds.empty()) throw ConfigError("--seeds must list at least one seed");
    const auto rows = run_ablation(cfg, seeds, cfg.output_dir);
    std::size_t failed = 0;
    for (const auto& r : rows) failed += r.status != "ok";
    std::cout << "ablation: " << rows.size() << " runs, " << failed << " failed\n";
}

int exit_code_for(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const StageError& s) {
        return exit_code_for(s.cause());
    } catch (const ConfigError&) {
        return kExitConfig;
    } catch (const NumericalError&) {
        return kExitNumerical;
    } catch (const IoError&) {
        return kExitIo;
    } catch (...) {
        return kExitFailure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised mastoidectomy mask optimization on synthetic phantoms"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Phantom and optimizer seed");
    app.add_option("--config", g.config, "JSON configuration (version 1)");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads");

    auto* phantom = app.add_subcommand("phantom", "Generate a synthetic pre/post phantom");

    RegisterArgs reg;
    auto* regc = app.add_subcommand("register", "Rigidly register a moving volume onto a fixed one");
    regc->add_option("--fixed", reg.fixed, "Fixed volume")->required();
    regc->add_option("--moving", reg.moving, "Moving volume")->required();
    regc->add_option("--levels", reg.levels, "Pyramid levels");

    PairArgs pair;
    auto* optc = app.add_subcommand("optimize", "Optimize the removal mask for a pre/post pair");
    optc->add_option("--rho", pair.rho, "Preoperative volume")->required();
    optc->add_option("--omega", pair.omega, "Postoperative volume")->required();

    EvaluateArgs ev;
    auto* evc = app.add_subcommand("evaluate", "Score predicted masks against ground truth");
    evc->add_option("--batch", ev.batch, "Batch manifest JSON with cases [{id, pred, gt}]");
    evc->add_option("--pred", ev.pred, "Predicted mask volume");
    evc->add_option("--gt", ev.gt, "Ground-truth mask volume");

    MeshArgs mesh;
    auto* meshc = app.add_subcommand("mesh", "Extract an isosurface and export STL/OBJ");
    meshc->add_option("--volume", mesh.volume, "Input volume")->required();
    meshc->add_option("--iso", mesh.iso, "Iso level");
    meshc->add_option("--format", mesh.format, "stl, obj or both")
        ->check(CLI::IsMember({"stl", "obj", "both"}));
    meshc->add_option("--name", mesh.name, "Output file stem");

    PairArgs loss;
    auto* lossc = app.add_subcommand("loss", "Loss utilities");
    lossc->require_subcommand(1);
    lossc->fallthrough();
    auto* evalc = lossc->add_subcommand("eval", "Evaluate the objective for a given mask field");
    evalc->add_option("--rho", loss.rho, "Preoperative volume")->required();
    evalc->add_option("--omega", loss.omega, "Postoperative volume")->required();
    evalc->add_option("--delta", loss.delta, "Removal probability volume")->required();
    evalc->add_option("--per-scale-csv", loss.per_scale_csv, "Write per-scale components to this CSV");

    auto* pipec = app.add_subcommand("pipeline", "Run phantom, registration, optimization, evaluation and meshing");

    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8};
    auto* ablc = app.add_subcommand("ablation", "Compare the three loss variants over several seeds");
    ablc->add_option("--seeds", seeds, "Seeds to run")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    if (seed_opt->count() > 0) g.seed = seed;

    try {
        if (phantom->parsed()) cmd_phantom(g);
        else if (regc->parsed()) cmd_register(g, reg);
        else if (optc->parsed()) cmd_optimize(g, pair);
        else if (evc->parsed()) cmd_evaluate(g, ev);
        else if (meshc->parsed()) cmd_mesh(g, mesh);
        else if (evalc->parsed()) cmd_loss_eval(g, loss);
        else if (pipec->parsed()) cmd_pipeline(g);
        else if (ablc->parsed()) cmd_ablation(g, seeds);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(std::current_exception());
    }
    return kExitOk;
}
