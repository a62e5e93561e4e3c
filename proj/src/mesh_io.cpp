#include "grip/mesh_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

namespace grip {

namespace {

Positions to_positions(const std::vector<Vec3>& pts)
{
    Positions p(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        p.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    }
    return p;
}

// Imported tets may come in either orientation; normalize to positive volume.
TetMesh orient_and_build(std::vector<Vec3> pts, std::vector<Tet> tets)
{
    for (Tet& t : tets) {
        for (int k : t) {
            if (k < 0 || k >= static_cast<int>(pts.size())) {
                throw Error("tet references node out of range");
            }
        }
        if (signed_tet_volume(pts[t[0]], pts[t[1]], pts[t[2]], pts[t[3]]) < 0.0) {
            std::swap(t[2], t[3]);
        }
    }
    return TetMesh::build(to_positions(pts), std::move(tets));
}

std::ifstream open_or_throw(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return in;
}

}  // namespace

TriSurface read_obj(std::istream& in)
{
    std::vector<Vec3> pts;
    std::vector<Tri> tris;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) {
            continue;
        }
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x() >> p.y() >> p.z())) {
                throw Error("obj line " + std::to_string(lineno) + ": malformed vertex");
            }
            pts.push_back(p);
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string tok;
            while (ls >> tok) {
                const int idx = std::stoi(tok.substr(0, tok.find('/')));
                poly.push_back(idx > 0 ? idx - 1 : static_cast<int>(pts.size()) + idx);
            }
            if (poly.size() < 3) {
                throw Error("obj line " + std::to_string(lineno) + ": face with < 3 vertices");
            }
            for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
                tris.push_back({poly[0], poly[k], poly[k + 1]});
            }
        }
    }
    return TriSurface::build(to_positions(pts), std::move(tris));
}

TriSurface read_obj(const std::filesystem::path& path)
{
    auto in = open_or_throw(path);
    return read_obj(in);
}

void write_obj(std::ostream& out, const TriSurface& surface)
{
    out << std::setprecision(17);
    for (int i = 0; i < surface.num_vertices(); ++i) {
        const Vec3 p = surface.vertex(i);
        out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    }
    for (const Tri& t : surface.triangles) {
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }
}

TetMesh read_msh(std::istream& in)
{
    std::string line;
    std::vector<Vec3> pts;
    std::vector<Tet> tets;
    std::unordered_map<long, int> node_index;
    while (std::getline(in, line)) {
        if (line.rfind("$MeshFormat", 0) == 0) {
            std::getline(in, line);
            std::istringstream ls(line);
            double version = 0;
            int file_type = -1;
            ls >> version >> file_type;
            if (version < 2.0 || version >= 3.0 || file_type != 0) {
                throw Error("only MSH 2.x ASCII is supported");
            }
        } else if (line.rfind("$Nodes", 0) == 0) {
            std::size_t n = 0;
            in >> n;
            pts.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                long id = 0;
                Vec3 p;
                if (!(in >> id >> p.x() >> p.y() >> p.z())) {
                    throw Error("msh: malformed $Nodes block");
                }
                node_index[id] = static_cast<int>(pts.size());
                pts.push_back(p);
            }
        } else if (line.rfind("$Elements", 0) == 0) {
            std::size_t n = 0;
            in >> n;
            std::getline(in, line);
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::getline(in, line)) {
                    throw Error("msh: truncated $Elements block");
                }
                std::istringstream ls(line);
                long id = 0;
                int type = 0;
                int ntags = 0;
                ls >> id >> type >> ntags;
                for (int t = 0; t < ntags; ++t) {
                    long skip = 0;
                    ls >> skip;
                }
                if (type != 4) {
                    continue;
                }
                Tet t;
                for (int& k : t) {
                    long nid = 0;
                    ls >> nid;
                    const auto it = node_index.find(nid);
                    if (it == node_index.end()) {
                        throw Error("msh: element references unknown node " + std::to_string(nid));
                    }
                    k = it->second;
                }
                tets.push_back(t);
            }
        }
    }
    if (tets.empty()) {
        throw Error("msh: no tetrahedra found");
    }
    return orient_and_build(std::move(pts), std::move(tets));
}

void write_msh(std::ostream& out, const TetMesh& mesh)
{
    out << std::setprecision(17);
    out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n" << mesh.num_nodes() << '\n';
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        const Vec3 p = row(mesh.vertices, i);
        out << i + 1 << ' ' << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    }
    out << "$EndNodes\n$Elements\n" << mesh.num_tets() << '\n';
    for (int e = 0; e < mesh.num_tets(); ++e) {
        const Tet& t = mesh.tets[e];
        out << e + 1 << " 4 2 0 0 " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << ' '
            << t[3] + 1 << '\n';
    }
    out << "$EndElements\n";
}

TetMesh read_vtk(std::istream& in)
{
    std::string tok;
    std::vector<Vec3> pts;
    std::vector<std::vector<int>> cells;
    std::vector<int> types;
    while (in >> tok) {
        if (tok == "DATASET") {
            in >> tok;
            if (tok != "UNSTRUCTURED_GRID") {
                throw Error("vtk: only UNSTRUCTURED_GRID is supported");
            }
        } else if (tok == "POINTS") {
            std::size_t n = 0;
            std::string type;
            in >> n >> type;
            pts.resize(n);
            for (Vec3& p : pts) {
                if (!(in >> p.x() >> p.y() >> p.z())) {
                    throw Error("vtk: malformed POINTS");
                }
            }
        } else if (tok == "CELLS") {
            std::size_t n = 0;
            std::size_t total = 0;
            in >> n >> total;
            cells.resize(n);
            for (auto& c : cells) {
                int k = 0;
                in >> k;
                c.resize(k);
                for (int& idx : c) {
                    in >> idx;
                }
            }
        } else if (tok == "CELL_TYPES") {
            std::size_t n = 0;
            in >> n;
            types.resize(n);
            for (int& t : types) {
                in >> t;
            }
        }
    }
    if (types.size() != cells.size()) {
        throw Error("vtk: CELLS and CELL_TYPES disagree");
    }
    std::vector<Tet> tets;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (types[i] == 10 && cells[i].size() == 4) {
            tets.push_back({cells[i][0], cells[i][1], cells[i][2], cells[i][3]});
        }
    }
    if (tets.empty()) {
        throw Error("vtk: no tetrahedra found");
    }
    return orient_and_build(std::move(pts), std::move(tets));
}

void write_vtk(std::ostream& out, const TetMesh& mesh)
{
    out << std::setprecision(17);
    out << "# vtk DataFile Version 3.0\ngrip tet mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.num_nodes() << " double\n";
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        const Vec3 p = row(mesh.vertices, i);
        out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    }
    out << "CELLS " << mesh.num_tets() << ' ' << 5 * mesh.num_tets() << '\n';
    for (const Tet& t : mesh.tets) {
        out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
    }
    out << "CELL_TYPES " << mesh.num_tets() << '\n';
    for (int e = 0; e < mesh.num_tets(); ++e) {
        out << "10\n";
    }
}

TetMesh read_tet_mesh(const std::filesystem::path& path)
{
    auto in = open_or_throw(path);
    const auto ext = path.extension().string();
    if (ext == ".msh") {
        return read_msh(in);
    }
    if (ext == ".vtk") {
        return read_vtk(in);
    }
    throw Error("unsupported tet mesh format: " + ext);
}

}  // namespace grip
