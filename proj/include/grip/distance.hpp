#pragma once

// Elementary primitive distances and their classification into the closest
// feature pair. Barrier terms are built on the squared distance of the
// classified feature pair, which is smooth inside each region.

#include "grip/autodiff.hpp"
#include "grip/types.hpp"

namespace grip {

enum class PointTriangleRegion {
    Face,
    Edge01,
    Edge12,
    Edge20,
    Vertex0,
    Vertex1,
    Vertex2,
};

struct PointTriangleResult {
    double distance = 0.0;
    PointTriangleRegion region = PointTriangleRegion::Face;
    Vec3 closest = Vec3::Zero();
    Vec3 barycentric = Vec3::Zero();  ///< weights of t0, t1, t2 at the closest point
};

/// Exact distance from a point to a closed triangle. Throws on degenerate input.
PointTriangleResult point_triangle_distance(const Vec3& p, const Vec3& t0, const Vec3& t1,
                                            const Vec3& t2);

enum class PointEdgeRegion { Interior, Vertex0, Vertex1 };

struct PointEdgeResult {
    double distance = 0.0;
    PointEdgeRegion region = PointEdgeRegion::Interior;
    double t = 0.0;  ///< closest point parameter on the edge
};

PointEdgeResult point_edge_distance(const Vec3& p, const Vec3& e0, const Vec3& e1);

enum class EdgeEdgeRegion {
    Interior,
    A0_B,  ///< endpoint a0 against the interior of edge b
    A1_B,
    A_B0,  ///< endpoint b0 against the interior of edge a
    A_B1,
    A0_B0,
    A0_B1,
    A1_B0,
    A1_B1,
};

struct EdgeEdgeResult {
    double distance = 0.0;
    EdgeEdgeRegion region = EdgeEdgeRegion::Interior;
    double mollifier_weight = 1.0;
    double s = 0.0;  ///< closest point parameter on edge a
    double t = 0.0;  ///< closest point parameter on edge b
};

/// Default parallel-edge threshold: 1e-3 times the product of squared rest lengths.
double edge_edge_mollifier_threshold(const Vec3& a0, const Vec3& a1, const Vec3& b0,
                                     const Vec3& b1);

/// Exact segment-segment distance. `eps_x <= 0` selects the default threshold
/// from the current edge lengths.
EdgeEdgeResult edge_edge_distance(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1,
                                  double eps_x = -1.0);

/// Quadratic mollifier m(x) = -x^2/eps^2 + 2x/eps on [0, eps), 1 beyond,
/// where x is the squared norm of the edge direction cross product.
struct MollifierValue {
    double value, d1, d2;
};
MollifierValue edge_edge_mollifier(double cross_sq, double eps_x);

// Squared distances of fixed feature pairs, generic over the scalar so they can
// be differentiated with ad::Dual2.

template <typename T>
T point_point_sq(const ad::V3<T>& p, const ad::V3<T>& q)
{
    return ad::squared_norm(p - q);
}

template <typename T>
T point_line_sq(const ad::V3<T>& p, const ad::V3<T>& e0, const ad::V3<T>& e1)
{
    return ad::squared_norm(ad::cross(e0 - p, e1 - p)) / ad::squared_norm(e1 - e0);
}

template <typename T>
T point_plane_sq(const ad::V3<T>& p, const ad::V3<T>& t0, const ad::V3<T>& t1,
                 const ad::V3<T>& t2)
{
    const ad::V3<T> n = ad::cross(t1 - t0, t2 - t0);
    const T h = ad::dot(p - t0, n);
    return h * h / ad::squared_norm(n);
}

template <typename T>
T line_line_sq(const ad::V3<T>& a0, const ad::V3<T>& a1, const ad::V3<T>& b0,
               const ad::V3<T>& b1)
{
    const ad::V3<T> n = ad::cross(a1 - a0, b1 - b0);
    const T h = ad::dot(b0 - a0, n);
    return h * h / ad::squared_norm(n);
}

template <typename T>
T edge_cross_sq(const ad::V3<T>& a0, const ad::V3<T>& a1, const ad::V3<T>& b0,
                const ad::V3<T>& b1)
{
    return ad::squared_norm(ad::cross(a1 - a0, b1 - b0));
}

inline ad::V3<double> v3(const Vec3& p)
{
    return {p.x(), p.y(), p.z()};
}

}  // namespace grip
