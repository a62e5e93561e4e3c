#pragma once

#include "grip/types.hpp"

#include <random>

namespace grip {

/// Triangle surface used for collision and SDF construction.
///
/// Vertices may exist without any triangle referencing them (a point cloud or
/// a single particle is a valid surface with zero triangles).
struct TriSurface {
    Positions vertices;
    Positions rest;
    std::vector<Tri> triangles;
    std::vector<Edge> edges;  ///< unique undirected edges, (lo, hi) sorted
    bool watertight = false;

    TriSurface() = default;

    /// Validates indices and triangle areas, derives edges and the watertight flag.
    static TriSurface build(Positions vertices, std::vector<Tri> triangles);

    [[nodiscard]] int num_vertices() const { return static_cast<int>(vertices.rows()); }
    [[nodiscard]] int num_triangles() const { return static_cast<int>(triangles.size()); }

    [[nodiscard]] Vec3 vertex(int i) const { return row(vertices, i); }
    [[nodiscard]] Vec3 face_normal(int t) const;  ///< unit, right-hand orientation
    [[nodiscard]] double face_area(int t) const;
    [[nodiscard]] double total_area() const;
    [[nodiscard]] Aabb bounds() const;

    /// Signed enclosed volume (positive for outward orientation).
    [[nodiscard]] double enclosed_volume() const;

    [[nodiscard]] TriSurface transformed(const Pose& pose) const;
};

/// Area-weighted uniform samples on a surface; deterministic for a given seed.
struct SurfaceSample {
    Vec3 position;
    int triangle = -1;
};
std::vector<SurfaceSample> sample_surface(const TriSurface& surface, int n, std::uint64_t seed);

/// Volumetric simulation mesh.
struct TetMesh {
    Positions vertices;
    Positions rest;
    std::vector<Tet> tets;
    std::vector<double> rest_volume;
    TriSurface boundary;            ///< vertices indexed locally, see surface_nodes
    std::vector<int> surface_nodes;  ///< boundary vertex -> tet mesh node

    /// Validates positive rest volumes and extracts the outward boundary.
    static TetMesh build(Positions vertices, std::vector<Tet> tets);

    [[nodiscard]] int num_nodes() const { return static_cast<int>(vertices.rows()); }
    [[nodiscard]] int num_tets() const { return static_cast<int>(tets.size()); }
    [[nodiscard]] double total_volume() const;

    /// Lumped (row-sum) nodal masses for a uniform density.
    [[nodiscard]] VecX lumped_masses(double density) const;

    [[nodiscard]] TetMesh transformed(const Pose& pose) const;
};

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

}  // namespace grip
