#pragma once

// Collision primitives of one environment, the environment-tagged spatial hash
// broad phase, and classification of candidates into contact stencils.

#include "grip/types.hpp"

namespace grip {

/// Flattened collision geometry of all bodies in one environment. Vertex
/// indices are environment-global collision vertex ids.
struct CollisionMesh {
    Positions rest;  ///< rest positions, for the edge-edge mollifier threshold
    std::vector<int> vertex_body;
    std::vector<Edge> edges;
    std::vector<Tri> faces;
    std::vector<char> body_kinematic;  ///< indexed by body id

    [[nodiscard]] int num_vertices() const { return static_cast<int>(vertex_body.size()); }
    [[nodiscard]] int edge_body(int e) const { return vertex_body[edges[e][0]]; }
    [[nodiscard]] int face_body(int f) const { return vertex_body[faces[f][0]]; }
    [[nodiscard]] bool pair_allowed(int body_a, int body_b) const
    {
        return body_a != body_b && !(body_kinematic[body_a] && body_kinematic[body_b]);
    }
};

enum class CandidateType { VertexFace, EdgeEdge };

struct Candidate {
    CandidateType type = CandidateType::VertexFace;
    std::array<int, 4> v = {0, 0, 0, 0};  ///< (p, t0, t1, t2) or (a0, a1, b0, b1)

    friend bool operator==(const Candidate&, const Candidate&) = default;
    friend auto operator<=>(const Candidate&, const Candidate&) = default;
};

struct BroadPhaseInput {
    const CollisionMesh* mesh = nullptr;
    const Positions* x = nullptr;
    const Positions* dx = nullptr;  ///< optional displacement; boxes are swept over it
};

/// Candidate pairs whose (swept) primitive boxes come within `search_radius`.
/// The hash key contains the environment index, so pairs never cross
/// environments. Output lists are sorted.
std::vector<std::vector<Candidate>> broad_phase(const std::vector<BroadPhaseInput>& envs,
                                                double search_radius);

enum class StencilKind { PointTriangle, EdgeEdge, PointEdge, PointPoint };

const char* to_string(StencilKind k);

struct ContactStencil {
    StencilKind kind = StencilKind::PointTriangle;
    std::array<int, 4> v = {-1, -1, -1, -1};  ///< active vertices, first `size()` valid
    std::array<int, 2> bodies = {-1, -1};
    double distance = 0.0;
    bool mollified = false;                   ///< stems from an edge pair
    std::array<int, 4> edge_v = {-1, -1, -1, -1};  ///< source edges when mollified
    double eps_x = 0.0;

    [[nodiscard]] int size() const
    {
        switch (kind) {
        case StencilKind::PointTriangle:
        case StencilKind::EdgeEdge: return 4;
        case StencilKind::PointEdge: return 3;
        case StencilKind::PointPoint: return 2;
        }
        return 0;
    }
};

/// Classifies candidates at `x` by closest-feature region and keeps those
/// closer than `dhat`, one stencil per candidate. Throws if any candidate has
/// zero distance.
std::vector<ContactStencil> build_stencils(const CollisionMesh& mesh, const Positions& x,
                                           const std::vector<Candidate>& candidates, double dhat);

/// Minimum over candidates of the conservative advancement bound along dx.
double ccd_max_step(const std::vector<Candidate>& candidates, const Positions& x,
                    const Positions& dx);

/// Minimum distance over candidates at x (+inf when empty).
double min_candidate_distance(const std::vector<Candidate>& candidates, const Positions& x);

}  // namespace grip
