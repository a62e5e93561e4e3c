#pragma once

// Built-in meshing for primitive shapes. Real assets are tetrahedralized
// externally and ingested through mesh_io; these exist for tests, demos and
// the regression scenes.

#include "grip/mesh.hpp"

#include <functional>

namespace grip {

struct GridSpec {
    std::array<int, 3> cells = {1, 1, 1};
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Ones();
};

/// Splits every masked hex cell of a structured grid into 6 conforming tets
/// (Kuhn split along the main diagonal), then maps node positions through
/// `node_map`. Throws if the mapping inverts any tet.
TetMesh tetrahedralize_grid(const GridSpec& grid,
                            const std::function<bool(int, int, int)>& cell_mask,
                            const std::function<Vec3(const Vec3&)>& node_map = {});

/// Axis-aligned box centered at the origin.
TetMesh make_box_tets(const Vec3& size, const std::array<int, 3>& cells);

/// Ball of the given radius, a cube grid pushed out radially.
TetMesh make_ball_tets(double radius, int cells_per_axis);

/// Rounded cup with a side handle; open at +z. Height along z, outer radius r.
TetMesh make_mug_tets(double radius, double height, int cells_across);

/// Closed box surface with 8 vertices and 12 outward triangles.
TriSurface make_box_surface(const Vec3& size);

/// Subdivided icosahedron projected to the sphere.
TriSurface make_icosphere(double radius, int level);

/// Square two-triangle plate in the local xy plane with normal +z.
TriSurface make_plane_surface(double half_extent);

}  // namespace grip
