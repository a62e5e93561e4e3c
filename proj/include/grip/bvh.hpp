#pragma once

#include "grip/distance.hpp"
#include "grip/mesh.hpp"

#include <optional>

namespace grip {

/// Static bounding volume hierarchy over the triangles of a surface. Holds a
/// copy of the geometry, so it stays valid when the surface is destroyed.
class TriangleBvh {
public:
    explicit TriangleBvh(const TriSurface& surface);

    struct Closest {
        double distance = std::numeric_limits<double>::infinity();
        int triangle = -1;
        Vec3 point = Vec3::Zero();
        PointTriangleRegion region = PointTriangleRegion::Face;
    };

    /// Closest surface point. Triangles farther than `bound` may be skipped; if
    /// nothing lies within `bound` the result has triangle == -1.
    [[nodiscard]] Closest closest(const Vec3& p,
                                  double bound = std::numeric_limits<double>::infinity()) const;

    struct Hit {
        double t = 0.0;
        int triangle = -1;
    };
    /// First intersection of origin + t * dir for t in (0, t_max].
    [[nodiscard]] std::optional<Hit> raycast(const Vec3& origin, const Vec3& dir,
                                             double t_max = std::numeric_limits<double>::infinity()) const;

    [[nodiscard]] int num_triangles() const { return static_cast<int>(tris_.size()); }
    [[nodiscard]] const std::array<Vec3, 3>& triangle(int t) const { return tris_[t]; }

private:
    struct Node {
        Aabb box;
        int left = -1;   ///< child index, or -1 for leaves
        int right = -1;
        int begin = 0;   ///< leaf range into order_
        int end = 0;
    };
    int build(int begin, int end);

    std::vector<std::array<Vec3, 3>> tris_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

/// Möller-Trumbore segment test; returns the ray parameter of the hit.
std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                   const Vec3& b, const Vec3& c);

}  // namespace grip
