#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <optional>
#include <string>

#include "mastoid/error.hpp"
#include "mastoid/mesh.hpp"
#include "mastoid/metrics.hpp"
#include "mastoid/optimize.hpp"
#include "mastoid/parallel.hpp"
#include "mastoid/phantom.hpp"
#include "mastoid/registration.hpp"
#include "mastoid/similarity.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace mastoid;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using Spacing3 = std::array<double, 3>;

Volume3 to_volume(const FloatArray& a, const Spacing3& s) {
    if (a.ndim() != 3) throw ConfigError("expected a 3-D array indexed [z, y, x]");
    const Dims d{static_cast<std::size_t>(a.shape(2)), static_cast<std::size_t>(a.shape(1)),
                 static_cast<std::size_t>(a.shape(0))};
    return Volume3(d, Spacing{s[0], s[1], s[2]}, std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<float> to_array(const Volume3& v) {
    const Dims d = v.dims();
    py::array_t<float> out({d.nz, d.ny, d.nx});
    std::copy(v.values().begin(), v.values().end(), out.mutable_data());
    return out;
}

py::array_t<double> to_array(Dims d, const std::vector<double>& values) {
    py::array_t<double> out({d.nz, d.ny, d.nx});
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

BinaryMask to_mask(const FloatArray& a) {
    Volume3 v = to_volume(a, {1.0, 1.0, 1.0});
    BinaryMask m(v.dims());
    for (std::size_t i = 0; i < v.size(); ++i) m.labels[i] = v[i] >= 0.5f ? 1 : 0;
    return m;
}

py::dict report_dict(const LossReport& r) {
    py::list scales;
    for (const auto& s : r.per_scale) {
        scales.append(py::dict("dims"_a = py::make_tuple(s.dims.nx, s.dims.ny, s.dims.nz), "l"_a = s.l_mean,
                               "c"_a = s.c_mean, "s"_a = s.s_mean, "scc"_a = s.scc,
                               "scc_degenerate"_a = s.scc_degenerate));
    }
    return py::dict("total"_a = r.total, "msssim_cscc"_a = r.msssim_cscc, "smooth"_a = r.smooth,
                    "smooth_raw"_a = r.smooth_raw, "lambda"_a = r.lambda, "per_scale"_a = scales,
                    "scc_degenerate"_a = r.scc_degenerate, "factor_clamped"_a = r.factor_clamped);
}

MaskField mask_field(const FloatArray& delta) {
    return MaskField::from_volume(to_volume(delta, {1.0, 1.0, 1.0}));
}

ObjectiveOptions objective_options(const std::string& variant, double lambda, bool normalize) {
    return ObjectiveOptions{lambda, normalize, parse_loss_variant(variant)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Mastoidectomy mask optimization core";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    m.def("set_threads", [](unsigned n) { set_thread_count(n); }, "n"_a);

    m.def(
        "generate_phantom",
        [](std::array<std::size_t, 3> dims, std::uint64_t seed, double noise_sigma, int artifact_count,
           double fluid_amplitude) {
            PhantomSpec s;
            s.dims = Dims{dims[0], dims[1], dims[2]};
            s.seed = seed;
            s.noise_sigma = noise_sigma;
            s.artifact_count = artifact_count;
            s.fluid_amplitude = fluid_amplitude;
            const auto ph = generate_phantom(s);
            return py::make_tuple(to_array(ph.preop), to_array(ph.postop),
                                  to_array(ph.ground_truth.to_volume(ph.preop.spacing())));
        },
        "dims"_a = std::array<std::size_t, 3>{64, 64, 32}, "seed"_a = 42, "noise_sigma"_a = 0.05,
        "artifact_count"_a = 3, "fluid_amplitude"_a = 0.15,
        "Returns (pre, post, ground_truth) arrays indexed [z, y, x]; dims are (nx, ny, nz).");

    m.def(
        "scc", [](const FloatArray& a, const FloatArray& b) { return scc(to_volume(a, {1, 1, 1}), to_volume(b, {1, 1, 1})); },
        "a"_a, "b"_a);

    m.def(
        "loss",
        [](const FloatArray& rho, const FloatArray& omega, const FloatArray& delta, const std::string& variant,
           double lambda, bool smooth_normalize) {
            const Objective obj(to_volume(rho, {1, 1, 1}), to_volume(omega, {1, 1, 1}), MsssimParams{},
                                objective_options(variant, lambda, smooth_normalize));
            return report_dict(obj.evaluate(mask_field(delta)));
        },
        "rho"_a, "omega"_a, "delta"_a, "variant"_a = "msssim_cscc", "lambda_smooth"_a = 0.05,
        "smooth_normalize"_a = true);

    m.def(
        "loss_and_gradient",
        [](const FloatArray& rho, const FloatArray& omega, const FloatArray& delta, const std::string& variant,
           double lambda, bool smooth_normalize) {
            const Objective obj(to_volume(rho, {1, 1, 1}), to_volume(omega, {1, 1, 1}), MsssimParams{},
                                objective_options(variant, lambda, smooth_normalize));
            const MaskField field = mask_field(delta);
            const auto e = obj.evaluate_with_gradient(field);
            return py::make_tuple(report_dict(e.report), to_array(field.dims(), e.gradient));
        },
        "rho"_a, "omega"_a, "delta"_a, "variant"_a = "msssim_cscc", "lambda_smooth"_a = 0.05,
        "smooth_normalize"_a = true, "Gradient is taken with respect to the logit of delta.");

    m.def(
        "optimize",
        [](const FloatArray& rho, const FloatArray& omega, int max_iters, const std::string& variant,
           double lambda, double step_size) {
            OptimConfig c;
            c.max_iters = max_iters;
            c.variant = parse_loss_variant(variant);
            c.lambda_smooth = lambda;
            c.step_size = step_size;
            OptimizationResult r;
            {
                py::gil_scoped_release release;
                r = optimize_mask(to_volume(rho, {1, 1, 1}), to_volume(omega, {1, 1, 1}), c);
            }
            py::list trace;
            for (const auto& t : r.trace) trace.append(t.total);
            return py::make_tuple(to_array(r.delta.dims(), r.delta.values()), trace, r.converged);
        },
        "rho"_a, "omega"_a, "max_iters"_a = 300, "variant"_a = "msssim_cscc", "lambda_smooth"_a = 0.05,
        "step_size"_a = 0.05, "Returns (delta, total-loss trace, converged).");

    m.def(
        "evaluate",
        [](const FloatArray& pred, const FloatArray& gt, Spacing3 spacing) {
            const auto cm = evaluate_case("case", to_mask(pred), to_mask(gt), Spacing{spacing[0], spacing[1], spacing[2]});
            py::dict out;
            for (std::size_t i = 0; i < kMetricNames.size(); ++i) {
                out[py::str(std::string(kMetricNames[i]))] =
                    cm.values[i] ? py::cast(*cm.values[i]) : py::none();
            }
            return out;
        },
        "pred"_a, "gt"_a, "spacing"_a = Spacing3{1.0, 1.0, 1.0},
        "Overlap and surface metrics; undefined values are None.");

    m.def(
        "register_rigid",
        [](const FloatArray& fixed, const FloatArray& moving, int levels, Spacing3 spacing) {
            const Volume3 f = to_volume(fixed, spacing);
            const Volume3 mv = to_volume(moving, spacing);
            RegistrationResult r;
            {
                py::gil_scoped_release release;
                r = register_rigid(f, mv, levels);
            }
            return py::dict("rot_rad"_a = r.transform.rotation, "trans_mm"_a = r.transform.translation,
                            "ncc"_a = r.final_ncc, "registered"_a = to_array(resample(mv, r.transform, f)));
        },
        "fixed"_a, "moving"_a, "levels"_a = 3, "spacing"_a = Spacing3{1.0, 1.0, 1.0});

    m.def(
        "marching_cubes",
        [](const FloatArray& volume, double iso, Spacing3 spacing) {
            const TriMesh mesh = marching_cubes(to_volume(volume, spacing), iso);
            py::array_t<double> verts({mesh.vertices.size(), std::size_t{3}});
            py::array_t<std::uint32_t> tris({mesh.triangles.size(), std::size_t{3}});
            auto v = verts.mutable_unchecked<2>();
            for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
                for (int c = 0; c < 3; ++c) v(i, c) = mesh.vertices[i][c];
            auto t = tris.mutable_unchecked<2>();
            for (std::size_t i = 0; i < mesh.triangles.size(); ++i)
                for (int c = 0; c < 3; ++c) t(i, c) = mesh.triangles[i][c];
            return py::make_tuple(verts, tris, surface_area(mesh), enclosed_volume(mesh));
        },
        "volume"_a, "iso"_a = 0.5, "spacing"_a = Spacing3{1.0, 1.0, 1.0},
        "Returns (vertices_mm (V, 3) as x, y, z, triangles (F, 3), area, enclosed volume).");
}
