#pragma once

// Grid-sampled signed distance field, negative inside.

#include "grip/bvh.hpp"
#include "grip/mesh.hpp"

#include <filesystem>

namespace grip {

/// Exact signed distance to a watertight surface, sign from the angle-weighted
/// pseudonormal of the closest feature.
class SignedDistance {
public:
    explicit SignedDistance(const TriSurface& surface);

    [[nodiscard]] double operator()(const Vec3& p) const { return query(p); }
    [[nodiscard]] double query(const Vec3& p,
                               double bound = std::numeric_limits<double>::infinity()) const;

private:
    TriSurface surface_;
    TriangleBvh bvh_;
    std::vector<Vec3> face_n_;
    std::vector<Vec3> vertex_n_;
    std::vector<std::pair<Edge, Vec3>> edge_n_;  // sorted by edge

    [[nodiscard]] Vec3 edge_normal(int a, int b) const;
};

struct Sdf {
    std::array<int, 3> nodes = {0, 0, 0};  ///< samples per axis (cells + 1)
    Vec3 origin = Vec3::Zero();
    double spacing = 0.0;
    std::vector<double> values;  ///< row-major over [x][y][z], z fastest

    /// Trilinear interpolation inside the grid. Outside, the value at the
    /// clamped point plus the distance to the grid box.
    [[nodiscard]] double operator()(const Vec3& p) const;
    /// Central-difference gradient of the interpolant.
    [[nodiscard]] Vec3 gradient(const Vec3& p) const;

    [[nodiscard]] Aabb bounds() const;
    [[nodiscard]] int cells_longest_axis() const;
    [[nodiscard]] double at(int i, int j, int k) const
    {
        return values[(static_cast<std::size_t>(i) * nodes[1] + j) * nodes[2] + k];
    }

    void save(const std::filesystem::path& path) const;
    static Sdf load(const std::filesystem::path& path);
};

/// Samples a watertight surface on a grid with `resolution` cells along the
/// longest axis of its padded bounds. Throws if the surface is not watertight.
Sdf build_sdf(const TriSurface& surface, int resolution = 128);

}  // namespace grip
