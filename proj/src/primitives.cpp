#include "grip/primitives.hpp"

#include <cmath>
#include <map>

namespace grip {

TetMesh tetrahedralize_grid(const GridSpec& grid,
                            const std::function<bool(int, int, int)>& cell_mask,
                            const std::function<Vec3(const Vec3&)>& node_map)
{
    const auto [nx, ny, nz] = grid.cells;
    if (nx < 1 || ny < 1 || nz < 1) {
        throw Error("grid needs at least one cell per axis");
    }
    const Vec3 h = (grid.hi - grid.lo).cwiseQuotient(Vec3(nx, ny, nz));
    auto grid_node = [&](int i, int j, int k) { return (i * (ny + 1) + j) * (nz + 1) + k; };

    std::map<int, int> used;  // grid node -> mesh node, ordered for determinism
    std::vector<Tet> tets;
    static constexpr std::array<std::array<int, 3>, 6> perms = {
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            for (int k = 0; k < nz; ++k) {
                if (!cell_mask(i, j, k)) {
                    continue;
                }
                for (const auto& p : perms) {
                    std::array<int, 3> c = {0, 0, 0};
                    std::array<std::array<int, 3>, 4> corners;
                    corners[0] = c;
                    c[p[0]] = 1;
                    corners[1] = c;
                    c[p[1]] = 1;
                    corners[2] = c;
                    c[p[2]] = 1;
                    corners[3] = c;
                    Tet t;
                    std::array<Vec3, 4> ref;
                    for (int q = 0; q < 4; ++q) {
                        const int gi = grid_node(i + corners[q][0], j + corners[q][1], k + corners[q][2]);
                        t[q] = gi;
                        ref[q] = Vec3(corners[q][0], corners[q][1], corners[q][2]);
                    }
                    if (signed_tet_volume(ref[0], ref[1], ref[2], ref[3]) < 0.0) {
                        std::swap(t[2], t[3]);
                    }
                    tets.push_back(t);
                }
            }
        }
    }
    if (tets.empty()) {
        throw Error("cell mask selects no cells");
    }
    for (const Tet& t : tets) {
        for (int g : t) {
            used.emplace(g, 0);
        }
    }
    int next = 0;
    for (auto& [g, idx] : used) {
        idx = next++;
    }
    Positions verts(next, 3);
    for (const auto& [g, idx] : used) {
        const int k = g % (nz + 1);
        const int j = (g / (nz + 1)) % (ny + 1);
        const int i = g / ((nz + 1) * (ny + 1));
        Vec3 p = grid.lo + Vec3(i * h.x(), j * h.y(), k * h.z());
        if (node_map) {
            p = node_map(p);
        }
        verts.row(idx) = p.transpose();
    }
    for (Tet& t : tets) {
        for (int& g : t) {
            g = used.at(g);
        }
    }
    return TetMesh::build(std::move(verts), std::move(tets));
}

TetMesh make_box_tets(const Vec3& size, const std::array<int, 3>& cells)
{
    GridSpec g{cells, -0.5 * size, 0.5 * size};
    return tetrahedralize_grid(g, [](int, int, int) { return true; });
}

namespace {

// Radial push from the max-norm shell to the Euclidean shell over the given axes.
Vec3 round_out(const Vec3& p, int dims)
{
    const Vec3 q = dims == 2 ? Vec3(p.x(), p.y(), 0.0) : p;
    const double n2 = q.norm();
    if (n2 < 1e-15) {
        return p;
    }
    const double ninf = q.cwiseAbs().maxCoeff();
    const Vec3 r = q * (ninf / n2);
    return dims == 2 ? Vec3(r.x(), r.y(), p.z()) : r;
}

}  // namespace

TetMesh make_ball_tets(double radius, int cells_per_axis)
{
    if (cells_per_axis % 2 != 0) {
        // An even count puts a node at the center, which keeps the map smooth.
        ++cells_per_axis;
    }
    GridSpec g{{cells_per_axis, cells_per_axis, cells_per_axis}, Vec3::Constant(-radius),
               Vec3::Constant(radius)};
    return tetrahedralize_grid(g, [](int, int, int) { return true; },
                               [](const Vec3& p) { return round_out(p, 3); });
}

TetMesh make_mug_tets(double radius, double height, int cells_across)
{
    // Cup occupies grid columns [0, n) in x and y; the handle loop sticks out
    // past +x by two columns. Wall and floor are one cell thick.
    const int n = std::max(cells_across, 5);
    const int nz = std::max(4, static_cast<int>(std::lround(height / (2.0 * radius / n))));
    const double h = 2.0 * radius / n;
    const int mid = n / 2;
    GridSpec g{{n + 2, n, nz}, Vec3(-radius, -radius, 0.0), Vec3(radius + 2 * h, radius, nz * h)};
    const int handle_lo = 1;
    const int handle_hi = std::max(handle_lo + 2, nz - 2);
    auto mask = [=](int i, int j, int k) {
        if (i < n) {
            const bool cavity = i >= 1 && i < n - 1 && j >= 1 && j < n - 1 && k >= 1;
            return !cavity;
        }
        if (j != mid) {
            return false;
        }
        if (i == n) {
            return k == handle_lo || k == handle_hi;
        }
        return k >= handle_lo && k <= handle_hi;
    };
    return tetrahedralize_grid(g, mask, [](const Vec3& p) { return round_out(p, 2); });
}

TriSurface make_box_surface(const Vec3& size)
{
    Positions v(8, 3);
    for (int i = 0; i < 8; ++i) {
        v.row(i) = Vec3((i & 1 ? 0.5 : -0.5) * size.x(), (i & 2 ? 0.5 : -0.5) * size.y(),
                        (i & 4 ? 0.5 : -0.5) * size.z())
                       .transpose();
    }
    std::vector<Tri> t = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                          {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    return TriSurface::build(std::move(v), std::move(t));
}

TriSurface make_icosphere(double radius, int level)
{
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
                               {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
                               {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
    for (Vec3& p : verts) {
        p.normalize();
    }
    std::vector<Tri> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                              {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                              {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                              {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mids;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = mids.find(key);
            if (it != mids.end()) {
                return it->second;
            }
            verts.push_back((verts[a] + verts[b]).normalized());
            const int idx = static_cast<int>(verts.size()) - 1;
            mids.emplace(key, idx);
            return idx;
        };
        std::vector<Tri> next;
        next.reserve(faces.size() * 4);
        for (const Tri& f : faces) {
            const int ab = midpoint(f[0], f[1]);
            const int bc = midpoint(f[1], f[2]);
            const int ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    Positions v(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) {
        v.row(static_cast<Eigen::Index>(i)) = (radius * verts[i]).transpose();
    }
    return TriSurface::build(std::move(v), std::move(faces));
}

TriSurface make_plane_surface(double half_extent)
{
    Positions v(4, 3);
    v << -half_extent, -half_extent, 0.0, half_extent, -half_extent, 0.0, half_extent, half_extent,
        0.0, -half_extent, half_extent, 0.0;
    return TriSurface::build(std::move(v), {{0, 1, 2}, {0, 2, 3}});
}

}  // namespace grip
