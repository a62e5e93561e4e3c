#pragma once

#include "grip/mesh.hpp"

#include <filesystem>
#include <iosfwd>

namespace grip {

/// Wavefront OBJ: `v` and `f` records; polygons are fan-triangulated.
TriSurface read_obj(std::istream& in);
TriSurface read_obj(const std::filesystem::path& path);
void write_obj(std::ostream& out, const TriSurface& surface);

/// Gmsh MSH 2.2 ASCII; only 4-node tetrahedra (element type 4) are kept.
TetMesh read_msh(std::istream& in);
void write_msh(std::ostream& out, const TetMesh& mesh);

/// VTK legacy ASCII unstructured grid; only VTK_TETRA cells (type 10) are kept.
TetMesh read_vtk(std::istream& in);
void write_vtk(std::ostream& out, const TetMesh& mesh);

/// Dispatches on extension: .msh, .vtk.
TetMesh read_tet_mesh(const std::filesystem::path& path);

}  // namespace grip
