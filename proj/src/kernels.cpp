#include "mastoid/kernels.hpp"

#include <cstddef>

#include "mastoid/error.hpp"
#include "mastoid/parallel.hpp"

namespace mastoid::kernels {

namespace {

std::size_t axis_stride(Dims d, int axis) {
    return axis == 0 ? 1 : (axis == 1 ? d.nx : d.nx * d.ny);
}

Dims with_extent(Dims d, int axis, std::size_t n) {
    if (axis == 0) d.nx = n;
    if (axis == 1) d.ny = n;
    if (axis == 2) d.nz = n;
    return d;
}

Field3 valid_pass(const Field3& in, int axis, const std::vector<double>& taps) {
    const std::size_t len = taps.size();
    if (len == 1 && taps[0] == 1.0) return in;
    const Dims id = in.dims;
    const Dims od = with_extent(id, axis, id[axis] - len + 1);
    const std::size_t in_stride = axis_stride(id, axis);
    Field3 out(od);
    parallel_for(0, od.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t o = lo; o < hi; ++o) {
            const std::size_t i = o % od.nx;
            const std::size_t j = (o / od.nx) % od.ny;
            const std::size_t k = o / (od.nx * od.ny);
            const std::size_t base = id.index(i, j, k);
            double acc = 0.0;
            for (std::size_t t = 0; t < len; ++t) acc += taps[t] * in.data[base + t * in_stride];
            out.data[o] = acc;
        }
    });
    return out;
}

Field3 valid_pass_adjoint(const Field3& g, int axis, const std::vector<double>& taps, std::size_t in_extent) {
    const std::size_t len = taps.size();
    if (len == 1 && taps[0] == 1.0) return g;
    const Dims gd = g.dims;
    const Dims id = with_extent(gd, axis, in_extent);
    const std::size_t g_extent = gd[axis];
    Field3 out(id);
    // Gather form: in[q] = sum_t taps[t] * g[q - t], so writes stay disjoint.
    parallel_for(0, id.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t q = lo; q < hi; ++q) {
            const std::size_t i = q % id.nx;
            const std::size_t j = (q / id.nx) % id.ny;
            const std::size_t k = q / (id.nx * id.ny);
            const std::size_t pos = axis == 0 ? i : (axis == 1 ? j : k);
            std::size_t gi = i, gj = j, gk = k;
            double acc = 0.0;
            const std::size_t t_lo = pos >= g_extent ? pos - g_extent + 1 : 0;
            const std::size_t t_hi = pos < len - 1 ? pos : len - 1;
            for (std::size_t t = t_lo; t <= t_hi; ++t) {
                const std::size_t p = pos - t;
                if (axis == 0) gi = p;
                if (axis == 1) gj = p;
                if (axis == 2) gk = p;
                acc += taps[t] * g.data[gd.index(gi, gj, gk)];
            }
            out.data[q] = acc;
        }
    });
    return out;
}

}  // namespace

Field3 correlate_valid(const Field3& in, const Taps& taps) {
    for (int a = 0; a < 3; ++a) {
        if (taps[a].empty() || taps[a].size() > in.dims[a]) {
            throw ConfigError("correlate_valid: window longer than the field");
        }
    }
    Field3 out = valid_pass(in, 0, taps[0]);
    out = valid_pass(out, 1, taps[1]);
    return valid_pass(out, 2, taps[2]);
}

Field3 correlate_valid_adjoint(const Field3& grad_out, const Taps& taps, Dims in_dims) {
    for (int a = 0; a < 3; ++a) {
        if (grad_out.dims[a] + taps[a].size() - 1 != in_dims[a]) {
            throw ConfigError("correlate_valid_adjoint: shape mismatch");
        }
    }
    Field3 g = valid_pass_adjoint(grad_out, 2, taps[2], in_dims.nz);
    g = valid_pass_adjoint(g, 1, taps[1], in_dims.ny);
    return valid_pass_adjoint(g, 0, taps[0], in_dims.nx);
}

Dims pooled_dims(Dims d) {
    return {d.nx >= 2 ? d.nx / 2 : d.nx, d.ny >= 2 ? d.ny / 2 : d.ny, d.nz >= 2 ? d.nz / 2 : d.nz};
}

Field3 pool2(const Field3& in) {
    const Dims id = in.dims;
    const Dims od = pooled_dims(id);
    const std::size_t fx = id.nx >= 2 ? 2 : 1, fy = id.ny >= 2 ? 2 : 1, fz = id.nz >= 2 ? 2 : 1;
    const double inv = 1.0 / static_cast<double>(fx * fy * fz);
    Field3 out(od);
    parallel_for(0, od.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t o = lo; o < hi; ++o) {
            const std::size_t i = o % od.nx;
            const std::size_t j = (o / od.nx) % od.ny;
            const std::size_t k = o / (od.nx * od.ny);
            double acc = 0.0;
            for (std::size_t dk = 0; dk < fz; ++dk)
                for (std::size_t dj = 0; dj < fy; ++dj)
                    for (std::size_t di = 0; di < fx; ++di)
                        acc += in.data[id.index(fx * i + di, fy * j + dj, fz * k + dk)];
            out.data[o] = acc * inv;
        }
    });
    return out;
}

Field3 pool2_adjoint(const Field3& grad_out, Dims in_dims) {
    const Dims od = pooled_dims(in_dims);
    if (grad_out.dims != od) throw ConfigError("pool2_adjoint: shape mismatch");
    const std::size_t fx = in_dims.nx >= 2 ? 2 : 1, fy = in_dims.ny >= 2 ? 2 : 1, fz = in_dims.nz >= 2 ? 2 : 1;
    const double inv = 1.0 / static_cast<double>(fx * fy * fz);
    Field3 out(in_dims);
    parallel_for(0, in_dims.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t q = lo; q < hi; ++q) {
            const std::size_t i = (q % in_dims.nx) / fx;
            const std::size_t j = ((q / in_dims.nx) % in_dims.ny) / fy;
            const std::size_t k = (q / (in_dims.nx * in_dims.ny)) / fz;
            if (i >= od.nx || j >= od.ny || k >= od.nz) continue;
            out.data[q] = grad_out.data[od.index(i, j, k)] * inv;
        }
    });
    return out;
}

}  // namespace mastoid::kernels
