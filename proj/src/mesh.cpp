#include "grip/mesh.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace grip {

namespace {

std::uint64_t edge_key(int a, int b)
{
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

}  // namespace

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d)
{
    return (b - a).cross(c - a).dot(d - a) / 6.0;
}

TriSurface TriSurface::build(Positions vertices, std::vector<Tri> triangles)
{
    TriSurface s;
    const int nv = static_cast<int>(vertices.rows());
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        for (int k = 0; k < 3; ++k) {
            if (triangles[t][k] < 0 || triangles[t][k] >= nv) {
                throw Error("triangle " + std::to_string(t) + " references vertex " +
                            std::to_string(triangles[t][k]) + " out of range");
            }
        }
        const Vec3 a = row(vertices, triangles[t][0]);
        const Vec3 b = row(vertices, triangles[t][1]);
        const Vec3 c = row(vertices, triangles[t][2]);
        if (0.5 * (b - a).cross(c - a).norm() <= 1e-12) {
            throw Error("degenerate triangle " + std::to_string(t));
        }
    }
    s.rest = vertices;
    s.vertices = std::move(vertices);
    s.triangles = std::move(triangles);

    // Directed edge counts decide watertightness: every undirected edge must be
    // used exactly once in each direction.
    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(s.triangles.size() * 3);
    for (const Tri& t : s.triangles) {
        for (int k = 0; k < 3; ++k) {
            ++directed[edge_key(t[k], t[(k + 1) % 3])];
        }
    }
    bool watertight = !s.triangles.empty();
    std::vector<Edge> edges;
    edges.reserve(directed.size() / 2 + 1);
    for (const auto& [key, count] : directed) {
        const int a = static_cast<int>(key >> 32);
        const int b = static_cast<int>(key & 0xffffffffu);
        const auto rev = directed.find(edge_key(b, a));
        const int rev_count = rev == directed.end() ? 0 : rev->second;
        if (count != 1 || rev_count != 1) {
            watertight = false;
        }
        if (a < b || rev_count == 0) {
            edges.push_back({std::min(a, b), std::max(a, b)});
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    s.edges = std::move(edges);
    s.watertight = watertight;
    return s;
}

Vec3 TriSurface::face_normal(int t) const
{
    const Tri& f = triangles[t];
    const Vec3 n = (vertex(f[1]) - vertex(f[0])).cross(vertex(f[2]) - vertex(f[0]));
    return n.normalized();
}

double TriSurface::face_area(int t) const
{
    const Tri& f = triangles[t];
    return 0.5 * (vertex(f[1]) - vertex(f[0])).cross(vertex(f[2]) - vertex(f[0])).norm();
}

double TriSurface::total_area() const
{
    double a = 0.0;
    for (int t = 0; t < num_triangles(); ++t) {
        a += face_area(t);
    }
    return a;
}

Aabb TriSurface::bounds() const
{
    Aabb b;
    for (int i = 0; i < num_vertices(); ++i) {
        b.extend(vertex(i));
    }
    return b;
}

double TriSurface::enclosed_volume() const
{
    double v = 0.0;
    for (const Tri& f : triangles) {
        v += vertex(f[0]).dot(vertex(f[1]).cross(vertex(f[2]))) / 6.0;
    }
    return v;
}

TriSurface TriSurface::transformed(const Pose& pose) const
{
    TriSurface s = *this;
    for (int i = 0; i < num_vertices(); ++i) {
        s.vertices.row(i) = pose.apply(vertex(i)).transpose();
    }
    return s;
}

std::vector<SurfaceSample> sample_surface(const TriSurface& surface, int n, std::uint64_t seed)
{
    std::vector<SurfaceSample> out;
    if (surface.num_triangles() == 0 || n <= 0) {
        return out;
    }
    std::vector<double> cdf(surface.num_triangles());
    double acc = 0.0;
    for (int t = 0; t < surface.num_triangles(); ++t) {
        acc += surface.face_area(t);
        cdf[t] = acc;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double r = uni(rng) * acc;
        const int t = static_cast<int>(std::min<std::ptrdiff_t>(
            std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin(), surface.num_triangles() - 1));
        double u = uni(rng);
        double v = uni(rng);
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const Tri& f = surface.triangles[t];
        const Vec3 a = surface.vertex(f[0]);
        const Vec3 p = a + u * (surface.vertex(f[1]) - a) + v * (surface.vertex(f[2]) - a);
        out.push_back({p, t});
    }
    return out;
}

TetMesh TetMesh::build(Positions vertices, std::vector<Tet> tets)
{
    TetMesh m;
    const int nv = static_cast<int>(vertices.rows());
    m.rest_volume.reserve(tets.size());
    for (std::size_t e = 0; e < tets.size(); ++e) {
        for (int k = 0; k < 4; ++k) {
            if (tets[e][k] < 0 || tets[e][k] >= nv) {
                throw Error("tet " + std::to_string(e) + " references node out of range");
            }
        }
        const double vol = signed_tet_volume(row(vertices, tets[e][0]), row(vertices, tets[e][1]),
                                             row(vertices, tets[e][2]), row(vertices, tets[e][3]));
        if (!(vol > 0.0)) {
            throw Error("tet " + std::to_string(e) + " has non-positive rest volume");
        }
        m.rest_volume.push_back(vol);
    }

    // Boundary faces are the ones referenced by exactly one tet; orientation is
    // inherited from the owning tet so normals point outward.
    std::map<std::array<int, 3>, std::pair<int, Tri>> faces;
    for (const Tet& t : tets) {
        const std::array<Tri, 4> local = {Tri{t[0], t[2], t[1]}, Tri{t[0], t[1], t[3]},
                                          Tri{t[0], t[3], t[2]}, Tri{t[1], t[2], t[3]}};
        for (const Tri& f : local) {
            std::array<int, 3> key = f;
            std::sort(key.begin(), key.end());
            auto [it, inserted] = faces.try_emplace(key, 0, f);
            ++it->second.first;
        }
    }
    std::vector<int> node_to_surface(nv, -1);
    std::vector<Tri> boundary;
    for (const auto& [key, entry] : faces) {
        if (entry.first != 1) {
            continue;
        }
        Tri f = entry.second;
        for (int& idx : f) {
            if (node_to_surface[idx] < 0) {
                node_to_surface[idx] = static_cast<int>(m.surface_nodes.size());
                m.surface_nodes.push_back(idx);
            }
            idx = node_to_surface[idx];
        }
        boundary.push_back(f);
    }
    Positions bverts(static_cast<Eigen::Index>(m.surface_nodes.size()), 3);
    for (std::size_t i = 0; i < m.surface_nodes.size(); ++i) {
        bverts.row(static_cast<Eigen::Index>(i)) = vertices.row(m.surface_nodes[i]);
    }
    m.boundary = TriSurface::build(std::move(bverts), std::move(boundary));
    m.rest = vertices;
    m.vertices = std::move(vertices);
    m.tets = std::move(tets);
    return m;
}

double TetMesh::total_volume() const
{
    double v = 0.0;
    for (double x : rest_volume) {
        v += x;
    }
    return v;
}

VecX TetMesh::lumped_masses(double density) const
{
    VecX m = VecX::Zero(num_nodes());
    for (int e = 0; e < num_tets(); ++e) {
        const double share = density * rest_volume[e] / 4.0;
        for (int k = 0; k < 4; ++k) {
            m[tets[e][k]] += share;
        }
    }
    return m;
}

TetMesh TetMesh::transformed(const Pose& pose) const
{
    Positions v = vertices;
    for (int i = 0; i < num_nodes(); ++i) {
        v.row(i) = pose.apply(row(vertices, i)).transpose();
    }
    return TetMesh::build(std::move(v), tets);
}

}  // namespace grip
