#include "mastoid/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <unordered_map>

#include "mastoid/error.hpp"
#include "mastoid/parallel.hpp"
#include "mc_tables.hpp"

namespace mastoid {

namespace {

constexpr std::array<std::array<std::size_t, 3>, 8> kCornerOffsets{{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};

constexpr std::array<std::array<int, 2>, 12> kCubeEdges{{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

using Point = std::array<double, 3>;

Point sub(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Point cross(const Point& a, const Point& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Point& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

// A triangle still expressed in grid-edge keys; vertices are materialized
// during the ordered merge.
struct KeyedTriangle {
    std::array<std::uint64_t, 3> keys;
};

struct SlabOutput {
    std::vector<KeyedTriangle> triangles;
    std::vector<std::pair<std::uint64_t, Point>> vertices;  // first-seen order within the slab
};

void put_le32(std::ofstream& out, std::uint32_t w) {
    const char b[4] = {static_cast<char>(w & 0xff), static_cast<char>((w >> 8) & 0xff),
                       static_cast<char>((w >> 16) & 0xff), static_cast<char>((w >> 24) & 0xff)};
    out.write(b, 4);
}

void put_f32(std::ofstream& out, double x) { put_le32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x))); }

}  // namespace

TriMesh marching_cubes(const Volume3& v, double iso) {
    const Dims d = v.dims();
    if (d.nx < 2 || d.ny < 2 || d.nz < 2) throw ConfigError("marching_cubes: every dimension must be >= 2");
    if (!std::isfinite(iso)) throw ConfigError("marching_cubes: iso level must be finite");
    require_finite(v, "marching_cubes input");
    const auto vals = v.values();
    const auto [lo_it, hi_it] = std::minmax_element(vals.begin(), vals.end());
    TriMesh mesh;
    if (!(iso > static_cast<double>(*lo_it) && iso < static_cast<double>(*hi_it))) return mesh;

    const Spacing s = v.spacing();
    // Grid edge key: 3 * (linear index of the edge's lower corner) + axis.
    auto edge_key = [&](std::size_t i, std::size_t j, std::size_t k, int cube_edge) {
        const auto& e = kCubeEdges[static_cast<std::size_t>(cube_edge)];
        const auto& a = kCornerOffsets[static_cast<std::size_t>(e[0])];
        const auto& b = kCornerOffsets[static_cast<std::size_t>(e[1])];
        std::size_t lo[3];
        int axis = 0;
        for (int ax = 0; ax < 3; ++ax) {
            lo[ax] = std::min(a[ax], b[ax]);
            if (a[ax] != b[ax]) axis = ax;
        }
        return 3 * static_cast<std::uint64_t>(d.index(i + lo[0], j + lo[1], k + lo[2])) +
               static_cast<std::uint64_t>(axis);
    };
    // Interpolated from the lower to the upper endpoint, so every cube sharing
    // the edge computes the same point.
    auto edge_point = [&](std::uint64_t key) {
        const auto axis = static_cast<int>(key % 3);
        const std::size_t idx = static_cast<std::size_t>(key / 3);
        const std::size_t i = idx % d.nx, j = (idx / d.nx) % d.ny, k = idx / (d.nx * d.ny);
        std::size_t i2 = i, j2 = j, k2 = k;
        if (axis == 0) ++i2;
        if (axis == 1) ++j2;
        if (axis == 2) ++k2;
        const double v0 = v.at(i, j, k), v1 = v.at(i2, j2, k2);
        const double t = v1 == v0 ? 0.5 : std::clamp((iso - v0) / (v1 - v0), 0.0, 1.0);
        Point p{static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)};
        p[static_cast<std::size_t>(axis)] += t;
        return Point{p[0] * s.x, p[1] * s.y, p[2] * s.z};
    };

    const std::size_t slabs = d.nz - 1;
    std::vector<SlabOutput> per_slab(slabs);
    parallel_for(0, slabs, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            SlabOutput& out = per_slab[k];
            std::unordered_map<std::uint64_t, bool> seen;
            for (std::size_t j = 0; j + 1 < d.ny; ++j)
                for (std::size_t i = 0; i + 1 < d.nx; ++i) {
                    int cube = 0;
                    for (int c = 0; c < 8; ++c) {
                        const auto& o = kCornerOffsets[static_cast<std::size_t>(c)];
                        // The table is built for "corner below iso" bits.
                        if (!(static_cast<double>(v.at(i + o[0], j + o[1], k + o[2])) > iso)) cube |= 1 << c;
                    }
                    const auto& row = detail::kTriangleTable[static_cast<std::size_t>(cube)];
                    for (std::size_t t = 0; t < 16 && row[t] >= 0; t += 3) {
                        KeyedTriangle tri;
                        for (std::size_t c = 0; c < 3; ++c) tri.keys[c] = edge_key(i, j, k, row[t + c]);
                        const Point a = edge_point(tri.keys[0]), b = edge_point(tri.keys[1]),
                                    cpt = edge_point(tri.keys[2]);
                        if (0.5 * norm(cross(sub(b, a), sub(cpt, a))) <= kMinTriangleArea) continue;
                        for (std::size_t c = 0; c < 3; ++c) {
                            if (seen.emplace(tri.keys[c], true).second) {
                                out.vertices.emplace_back(tri.keys[c], edge_point(tri.keys[c]));
                            }
                        }
                        out.triangles.push_back(tri);
                    }
                }
        }
    });

    std::unordered_map<std::uint64_t, std::uint32_t> index_of;
    for (const SlabOutput& slab : per_slab) {
        for (const auto& [key, p] : slab.vertices) {
            if (index_of.emplace(key, static_cast<std::uint32_t>(mesh.vertices.size())).second) {
                mesh.vertices.push_back(p);
            }
        }
        for (const KeyedTriangle& t : slab.triangles) {
            const std::array<std::uint32_t, 3> tri{index_of.at(t.keys[0]), index_of.at(t.keys[1]),
                                                   index_of.at(t.keys[2])};
            const Point& a = mesh.vertices[tri[0]];
            const Point n = cross(sub(mesh.vertices[tri[1]], a), sub(mesh.vertices[tri[2]], a));
            const double len = norm(n);
            mesh.triangles.push_back(tri);
            mesh.normals.push_back({n[0] / len, n[1] / len, n[2] / len});
        }
    }
    return mesh;
}

double surface_area(const TriMesh& m) {
    double area = 0.0;
    for (const auto& t : m.triangles) {
        const Point& a = m.vertices[t[0]];
        area += 0.5 * norm(cross(sub(m.vertices[t[1]], a), sub(m.vertices[t[2]], a)));
    }
    return area;
}

double enclosed_volume(const TriMesh& m) {
    double vol = 0.0;
    for (const auto& t : m.triangles) {
        const Point& a = m.vertices[t[0]];
        const Point& b = m.vertices[t[1]];
        const Point& c = m.vertices[t[2]];
        const Point bc = cross(b, c);
        vol += (a[0] * bc[0] + a[1] * bc[1] + a[2] * bc[2]) / 6.0;
    }
    return vol;
}

void write_stl(const TriMesh& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const std::array<char, 80> header{};
    out.write(header.data(), header.size());
    put_le32(out, static_cast<std::uint32_t>(m.triangles.size()));
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        for (double x : m.normals[t]) put_f32(out, x);
        for (std::uint32_t vi : m.triangles[t])
            for (double x : m.vertices[vi]) put_f32(out, x);
        const char attr[2] = {0, 0};
        out.write(attr, 2);
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void write_obj(const TriMesh& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    char buf[128];
    for (const auto& p : m.vertices) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", p[0], p[1], p[2]);
        out << buf;
    }
    for (const auto& t : m.triangles) {
        std::snprintf(buf, sizeof buf, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
        out << buf;
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace mastoid
