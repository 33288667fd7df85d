#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mastoid/volume.hpp"

namespace mastoid {

struct TriMesh {
    std::vector<std::array<double, 3>> vertices;  // millimeters
    std::vector<std::array<std::uint32_t, 3>> triangles;
    std::vector<std::array<double, 3>> normals;  // unit, one per triangle

    bool empty() const noexcept { return triangles.empty(); }
};

inline constexpr double kMinTriangleArea = 1e-12;

// Isosurface of v at `iso`. Voxels strictly above iso are inside; triangles
// are wound so that normals point outward (towards lower values). Vertices
// are shared through the grid edge they lie on. Returns an empty mesh when
// iso is not strictly between the volume's min and max.
TriMesh marching_cubes(const Volume3& v, double iso);

double surface_area(const TriMesh& m);
// Signed tetrahedron sum; positive for outward-wound closed meshes.
double enclosed_volume(const TriMesh& m);

// Binary STL, little-endian, 80-byte zero header.
void write_stl(const TriMesh& m, const std::filesystem::path& path);
// ASCII OBJ with 1-based face indices.
void write_obj(const TriMesh& m, const std::filesystem::path& path);

}  // namespace mastoid
