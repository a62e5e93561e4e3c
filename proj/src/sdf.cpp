#include "grip/sdf.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace grip {

namespace {

constexpr char kMagic[8] = {'G', 'R', 'I', 'P', 'S', 'D', 'F', '1'};

Edge sorted_edge(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

template <typename T>
void put(std::ostream& out, T v)
{
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(buf, buf + sizeof(T));
    }
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& in)
{
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
        throw Error("sdf cache: truncated file");
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(buf, buf + sizeof(T));
    }
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace

SignedDistance::SignedDistance(const TriSurface& surface) : surface_(surface), bvh_(surface)
{
    if (!surface.watertight) {
        throw Error("signed distance needs a watertight surface");
    }
    const int nt = surface.num_triangles();
    face_n_.resize(nt);
    vertex_n_.assign(surface.num_vertices(), Vec3::Zero());
    std::vector<std::pair<Edge, Vec3>> edges;
    edges.reserve(3 * nt);
    for (int t = 0; t < nt; ++t) {
        const Tri& f = surface.triangles[t];
        const Vec3 n = surface.face_normal(t);
        face_n_[t] = n;
        for (int k = 0; k < 3; ++k) {
            const Vec3 p = surface.vertex(f[k]);
            const Vec3 u = (surface.vertex(f[(k + 1) % 3]) - p).normalized();
            const Vec3 w = (surface.vertex(f[(k + 2) % 3]) - p).normalized();
            const double angle = std::acos(std::clamp(u.dot(w), -1.0, 1.0));
            vertex_n_[f[k]] += angle * n;
            edges.emplace_back(sorted_edge(f[k], f[(k + 1) % 3]), n);
        }
    }
    std::sort(edges.begin(), edges.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [e, n] : edges) {
        if (!edge_n_.empty() && edge_n_.back().first == e) {
            edge_n_.back().second += n;
        } else {
            edge_n_.emplace_back(e, n);
        }
    }
}

Vec3 SignedDistance::edge_normal(int a, int b) const
{
    const Edge e = sorted_edge(a, b);
    const auto it = std::lower_bound(edge_n_.begin(), edge_n_.end(), e,
                                     [](const auto& x, const Edge& k) { return x.first < k; });
    return it->second;
}

double SignedDistance::query(const Vec3& p, double bound) const
{
    const auto c = bvh_.closest(p, bound);
    if (c.triangle < 0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const Tri& f = surface_.triangles[c.triangle];
    Vec3 n;
    switch (c.region) {
    case PointTriangleRegion::Face: n = face_n_[c.triangle]; break;
    case PointTriangleRegion::Edge01: n = edge_normal(f[0], f[1]); break;
    case PointTriangleRegion::Edge12: n = edge_normal(f[1], f[2]); break;
    case PointTriangleRegion::Edge20: n = edge_normal(f[2], f[0]); break;
    case PointTriangleRegion::Vertex0: n = vertex_n_[f[0]]; break;
    case PointTriangleRegion::Vertex1: n = vertex_n_[f[1]]; break;
    case PointTriangleRegion::Vertex2: n = vertex_n_[f[2]]; break;
    }
    return (p - c.point).dot(n) < 0.0 ? -c.distance : c.distance;
}

Sdf build_sdf(const TriSurface& surface, int resolution)
{
    if (resolution < 2) {
        throw Error("sdf resolution must be at least 2");
    }
    const SignedDistance sd(surface);
    Aabb box = surface.bounds();
    const double longest = box.extent().maxCoeff();
    // Pad by a tenth of the size so gripper samples near the surface stay inside the grid.
    box.inflate(0.1 * longest);
    Sdf g;
    g.spacing = box.extent().maxCoeff() / resolution;
    g.origin = box.lo;
    for (int k = 0; k < 3; ++k) {
        g.nodes[k] = static_cast<int>(std::ceil(box.extent()[k] / g.spacing - 1e-9)) + 1;
    }
    g.values.resize(static_cast<std::size_t>(g.nodes[0]) * g.nodes[1] * g.nodes[2]);
    std::size_t idx = 0;
    for (int i = 0; i < g.nodes[0]; ++i) {
        for (int j = 0; j < g.nodes[1]; ++j) {
            double prev = std::numeric_limits<double>::infinity();
            for (int k = 0; k < g.nodes[2]; ++k, ++idx) {
                const Vec3 p = g.origin + g.spacing * Vec3(i, j, k);
                // Distance is 1-Lipschitz, so the previous sample bounds this one.
                const double bound = std::abs(prev) + g.spacing * (1.0 + 1e-9);
                prev = sd.query(p, bound);
                g.values[idx] = prev;
            }
        }
    }
    return g;
}

double Sdf::operator()(const Vec3& p) const
{
    const Aabb b = bounds();
    const Vec3 q = p.cwiseMax(b.lo).cwiseMin(b.hi);
    const double outside = (p - q).norm();
    const Vec3 r = (q - origin) / spacing;
    int idx[3];
    double frac[3];
    for (int k = 0; k < 3; ++k) {
        idx[k] = std::clamp(static_cast<int>(std::floor(r[k])), 0, nodes[k] - 2);
        frac[k] = std::clamp(r[k] - idx[k], 0.0, 1.0);
    }
    double v = 0.0;
    for (int c = 0; c < 8; ++c) {
        const int di = c & 1;
        const int dj = (c >> 1) & 1;
        const int dk = (c >> 2) & 1;
        const double w = (di ? frac[0] : 1 - frac[0]) * (dj ? frac[1] : 1 - frac[1]) *
                         (dk ? frac[2] : 1 - frac[2]);
        v += w * at(idx[0] + di, idx[1] + dj, idx[2] + dk);
    }
    return v + outside;
}

Vec3 Sdf::gradient(const Vec3& p) const
{
    const double h = 0.5 * spacing;
    Vec3 g;
    for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Zero();
        e[k] = h;
        g[k] = ((*this)(p + e) - (*this)(p - e)) / (2 * h);
    }
    return g;
}

Aabb Sdf::bounds() const
{
    Aabb b;
    b.lo = origin;
    b.hi = origin + spacing * Vec3(nodes[0] - 1, nodes[1] - 1, nodes[2] - 1);
    return b;
}

int Sdf::cells_longest_axis() const
{
    return std::max({nodes[0], nodes[1], nodes[2]}) - 1;
}

void Sdf::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out.write(kMagic, sizeof(kMagic));
    for (int n : nodes) {
        put<std::uint64_t>(out, static_cast<std::uint64_t>(n));
    }
    for (int k = 0; k < 3; ++k) {
        put<double>(out, origin[k]);
    }
    put<double>(out, spacing);
    for (double v : values) {
        put<double>(out, v);
    }
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

Sdf Sdf::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
        throw Error("sdf cache: bad magic in " + path.string());
    }
    Sdf g;
    for (int& n : g.nodes) {
        const auto v = get<std::uint64_t>(in);
        if (v < 2 || v > (1u << 16)) {
            throw Error("sdf cache: implausible grid size");
        }
        n = static_cast<int>(v);
    }
    for (int k = 0; k < 3; ++k) {
        g.origin[k] = get<double>(in);
    }
    g.spacing = get<double>(in);
    g.values.resize(static_cast<std::size_t>(g.nodes[0]) * g.nodes[1] * g.nodes[2]);
    for (double& v : g.values) {
        v = get<double>(in);
    }
    return g;
}

}  // namespace grip
