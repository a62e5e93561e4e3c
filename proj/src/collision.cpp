#include "grip/collision.hpp"

#include "grip/ccd.hpp"
#include "grip/distance.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace grip {

namespace {

constexpr long kMaxCellsPerPrimitive = 4096;

enum PrimType : int { kVertex = 0, kEdge = 1, kFace = 2 };

struct Entry {
    int env, i, j, k, type, id;
    auto key() const { return std::tie(env, i, j, k, type, id); }
};

struct EnvBoxes {
    std::vector<Aabb> vertex, edge, face;
};

Aabb swept_box(const BroadPhaseInput& in, std::initializer_list<int> ids, double pad)
{
    Aabb b;
    for (int v : ids) {
        const Vec3 p = row(*in.x, v);
        b.extend(p);
        if (in.dx != nullptr) {
            b.extend(p + row(*in.dx, v));
        }
    }
    b.inflate(pad);
    return b;
}

}  // namespace

const char* to_string(StencilKind k)
{
    switch (k) {
    case StencilKind::PointTriangle: return "point_triangle";
    case StencilKind::EdgeEdge: return "edge_edge";
    case StencilKind::PointEdge: return "point_edge";
    case StencilKind::PointPoint: return "point_point";
    }
    return "unknown";
}

std::vector<std::vector<Candidate>> broad_phase(const std::vector<BroadPhaseInput>& envs,
                                                double search_radius)
{
    const double pad = 0.5 * search_radius;
    std::vector<std::vector<Candidate>> out(envs.size());
    std::vector<EnvBoxes> boxes(envs.size());
    std::vector<Entry> entries;
    std::vector<std::pair<int, std::pair<int, int>>> overflow;  // env, (type, id)

    for (int e = 0; e < static_cast<int>(envs.size()); ++e) {
        const BroadPhaseInput& in = envs[e];
        const CollisionMesh& m = *in.mesh;
        EnvBoxes& b = boxes[e];
        for (int v = 0; v < m.num_vertices(); ++v) {
            b.vertex.push_back(swept_box(in, {v}, pad));
        }
        double mean_extent = 0.0;
        for (const Edge& ed : m.edges) {
            b.edge.push_back(swept_box(in, {ed[0], ed[1]}, pad));
            mean_extent += b.edge.back().extent().maxCoeff();
        }
        for (const Tri& f : m.faces) {
            b.face.push_back(swept_box(in, {f[0], f[1], f[2]}, pad));
        }
        if (!m.edges.empty()) {
            mean_extent /= static_cast<double>(m.edges.size());
        }
        const double h = std::max({search_radius, mean_extent, 1e-9});

        auto insert = [&](int type, int id, const Aabb& box) {
            const Eigen::Array3d lo = (box.lo / h).array().floor();
            const Eigen::Array3d hi = (box.hi / h).array().floor();
            const Eigen::Array3d n = hi - lo + 1.0;
            if (n.prod() > static_cast<double>(kMaxCellsPerPrimitive)) {
                overflow.push_back({e, {type, id}});
                return;
            }
            for (int i = static_cast<int>(lo[0]); i <= static_cast<int>(hi[0]); ++i) {
                for (int j = static_cast<int>(lo[1]); j <= static_cast<int>(hi[1]); ++j) {
                    for (int k = static_cast<int>(lo[2]); k <= static_cast<int>(hi[2]); ++k) {
                        entries.push_back({e, i, j, k, type, id});
                    }
                }
            }
        };
        for (int v = 0; v < m.num_vertices(); ++v) {
            insert(kVertex, v, b.vertex[v]);
        }
        for (int i = 0; i < static_cast<int>(m.edges.size()); ++i) {
            insert(kEdge, i, b.edge[i]);
        }
        for (int i = 0; i < static_cast<int>(m.faces.size()); ++i) {
            insert(kFace, i, b.face[i]);
        }
    }

    auto try_vf = [&](int e, int v, int f) {
        const CollisionMesh& m = *envs[e].mesh;
        if (!m.pair_allowed(m.vertex_body[v], m.face_body(f)) ||
            !boxes[e].vertex[v].overlaps(boxes[e].face[f])) {
            return;
        }
        const Tri& t = m.faces[f];
        out[e].push_back({CandidateType::VertexFace, {v, t[0], t[1], t[2]}});
    };
    auto try_ee = [&](int e, int a, int b) {
        const CollisionMesh& m = *envs[e].mesh;
        if (a == b || !m.pair_allowed(m.edge_body(a), m.edge_body(b)) ||
            !boxes[e].edge[a].overlaps(boxes[e].edge[b])) {
            return;
        }
        if (a > b) {
            std::swap(a, b);
        }
        out[e].push_back({CandidateType::EdgeEdge,
                          {m.edges[a][0], m.edges[a][1], m.edges[b][0], m.edges[b][1]}});
    };

    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.key() < b.key(); });
    std::vector<int> vs, es, fs;
    for (std::size_t s = 0; s < entries.size();) {
        std::size_t t = s;
        vs.clear();
        es.clear();
        fs.clear();
        while (t < entries.size() && entries[t].env == entries[s].env &&
               entries[t].i == entries[s].i && entries[t].j == entries[s].j &&
               entries[t].k == entries[s].k) {
            (entries[t].type == kVertex ? vs : entries[t].type == kEdge ? es : fs)
                .push_back(entries[t].id);
            ++t;
        }
        const int e = entries[s].env;
        for (int v : vs) {
            for (int f : fs) {
                try_vf(e, v, f);
            }
        }
        for (std::size_t a = 0; a < es.size(); ++a) {
            for (std::size_t b = a + 1; b < es.size(); ++b) {
                try_ee(e, es[a], es[b]);
            }
        }
        s = t;
    }

    // Oversized primitives are tested against everything in their own environment.
    for (const auto& [e, prim] : overflow) {
        const auto [type, id] = prim;
        const CollisionMesh& m = *envs[e].mesh;
        if (type == kVertex) {
            for (int f = 0; f < static_cast<int>(m.faces.size()); ++f) {
                try_vf(e, id, f);
            }
        } else if (type == kFace) {
            for (int v = 0; v < m.num_vertices(); ++v) {
                try_vf(e, v, id);
            }
        } else {
            for (int b = 0; b < static_cast<int>(m.edges.size()); ++b) {
                try_ee(e, id, b);
            }
        }
    }

    for (auto& list : out) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return out;
}

std::vector<ContactStencil> build_stencils(const CollisionMesh& mesh, const Positions& x,
                                           const std::vector<Candidate>& candidates, double dhat)
{
    // One stencil per candidate pair, even when two pairs reduce to the same
    // feature pair: dropping either would make the barrier sum jump when a
    // pair changes region.
    std::vector<ContactStencil> out;
    auto emit = [&](ContactStencil s) {
        s.bodies = {mesh.vertex_body[s.v[0]], mesh.vertex_body[s.v[s.size() - 1]]};
        out.push_back(s);
    };

    for (const Candidate& c : candidates) {
        const auto& v = c.v;
        ContactStencil s;
        if (c.type == CandidateType::VertexFace) {
            const auto r = point_triangle_distance(row(x, v[0]), row(x, v[1]), row(x, v[2]),
                                                   row(x, v[3]));
            if (!(r.distance > 0.0)) {
                throw Error("contact: zero distance between vertex " + std::to_string(v[0]) +
                            " and a face");
            }
            if (r.distance >= dhat) {
                continue;
            }
            s.distance = r.distance;
            switch (r.region) {
            case PointTriangleRegion::Face:
                s.kind = StencilKind::PointTriangle;
                s.v = v;
                break;
            case PointTriangleRegion::Edge01: s.kind = StencilKind::PointEdge; s.v = {v[0], v[1], v[2], -1}; break;
            case PointTriangleRegion::Edge12: s.kind = StencilKind::PointEdge; s.v = {v[0], v[2], v[3], -1}; break;
            case PointTriangleRegion::Edge20: s.kind = StencilKind::PointEdge; s.v = {v[0], v[3], v[1], -1}; break;
            case PointTriangleRegion::Vertex0: s.kind = StencilKind::PointPoint; s.v = {v[0], v[1], -1, -1}; break;
            case PointTriangleRegion::Vertex1: s.kind = StencilKind::PointPoint; s.v = {v[0], v[2], -1, -1}; break;
            case PointTriangleRegion::Vertex2: s.kind = StencilKind::PointPoint; s.v = {v[0], v[3], -1, -1}; break;
            }
            emit(s);
            continue;
        }
        const double eps_x = edge_edge_mollifier_threshold(row(mesh.rest, v[0]), row(mesh.rest, v[1]),
                                                           row(mesh.rest, v[2]), row(mesh.rest, v[3]));
        const Vec3 a0 = row(x, v[0]), a1 = row(x, v[1]), b0 = row(x, v[2]), b1 = row(x, v[3]);
        const auto r = edge_edge_distance(a0, a1, b0, b1, eps_x);
        if (!(r.distance > 0.0)) {
            throw Error("contact: zero distance between two edges");
        }
        if (r.distance >= dhat) {
            continue;
        }
        s.distance = r.distance;
        s.eps_x = eps_x;
        s.edge_v = v;
        s.mollified = (a1 - a0).cross(b1 - b0).squaredNorm() < eps_x;
        switch (r.region) {
        case EdgeEdgeRegion::Interior: s.kind = StencilKind::EdgeEdge; s.v = v; break;
        case EdgeEdgeRegion::A0_B: s.kind = StencilKind::PointEdge; s.v = {v[0], v[2], v[3], -1}; break;
        case EdgeEdgeRegion::A1_B: s.kind = StencilKind::PointEdge; s.v = {v[1], v[2], v[3], -1}; break;
        case EdgeEdgeRegion::A_B0: s.kind = StencilKind::PointEdge; s.v = {v[2], v[0], v[1], -1}; break;
        case EdgeEdgeRegion::A_B1: s.kind = StencilKind::PointEdge; s.v = {v[3], v[0], v[1], -1}; break;
        case EdgeEdgeRegion::A0_B0: s.kind = StencilKind::PointPoint; s.v = {v[0], v[2], -1, -1}; break;
        case EdgeEdgeRegion::A0_B1: s.kind = StencilKind::PointPoint; s.v = {v[0], v[3], -1, -1}; break;
        case EdgeEdgeRegion::A1_B0: s.kind = StencilKind::PointPoint; s.v = {v[1], v[2], -1, -1}; break;
        case EdgeEdgeRegion::A1_B1: s.kind = StencilKind::PointPoint; s.v = {v[1], v[3], -1, -1}; break;
        }
        emit(s);
    }
    return out;
}

double ccd_max_step(const std::vector<Candidate>& candidates, const Positions& x,
                    const Positions& dx)
{
    double alpha = 1.0;
    for (const Candidate& c : candidates) {
        std::array<Vec3, 4> p;
        std::array<Vec3, 4> d;
        bool moving = false;
        for (int k = 0; k < 4; ++k) {
            p[k] = row(x, c.v[k]);
            d[k] = row(dx, c.v[k]);
            moving = moving || d[k].squaredNorm() > 0.0;
        }
        if (!moving) {
            continue;
        }
        const double t = c.type == CandidateType::VertexFace ? ccd_point_triangle(p, d, alpha)
                                                             : ccd_edge_edge(p, d, alpha);
        alpha = std::min(alpha, t);
    }
    return alpha;
}

double min_candidate_distance(const std::vector<Candidate>& candidates, const Positions& x)
{
    double dmin = std::numeric_limits<double>::infinity();
    for (const Candidate& c : candidates) {
        const auto& v = c.v;
        const double d = c.type == CandidateType::VertexFace
                             ? point_triangle_distance(row(x, v[0]), row(x, v[1]), row(x, v[2]), row(x, v[3])).distance
                             : edge_edge_distance(row(x, v[0]), row(x, v[1]), row(x, v[2]), row(x, v[3]), 1.0).distance;
        dmin = std::min(dmin, d);
    }
    return dmin;
}

}  // namespace grip
