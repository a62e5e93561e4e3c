#include "grip/bvh.hpp"

#include <algorithm>
#include <cmath>

namespace grip {

namespace {

constexpr int kLeafSize = 4;

double box_distance_sq(const Aabb& b, const Vec3& p)
{
    const Vec3 d = (b.lo - p).cwiseMax(p - b.hi).cwiseMax(Vec3::Zero());
    return d.squaredNorm();
}

// Slab test; returns entry parameter or nullopt.
std::optional<double> ray_box(const Aabb& b, const Vec3& o, const Vec3& inv, double t_max)
{
    double t0 = 0.0;
    double t1 = t_max;
    for (int k = 0; k < 3; ++k) {
        double a = (b.lo[k] - o[k]) * inv[k];
        double c = (b.hi[k] - o[k]) * inv[k];
        if (a > c) {
            std::swap(a, c);
        }
        // NaN from 0 * inf means the ray lies in the slab plane; keep it.
        if (!std::isnan(a)) {
            t0 = std::max(t0, a);
        }
        if (!std::isnan(c)) {
            t1 = std::min(t1, c);
        }
        if (t0 > t1) {
            return std::nullopt;
        }
    }
    return t0;
}

}  // namespace

std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                   const Vec3& b, const Vec3& c)
{
    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-300) {
        return std::nullopt;
    }
    const double inv = 1.0 / det;
    const Vec3 tv = origin - a;
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) {
        return std::nullopt;
    }
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) {
        return std::nullopt;
    }
    return e2.dot(qv) * inv;
}

TriangleBvh::TriangleBvh(const TriSurface& surface)
{
    tris_.reserve(surface.triangles.size());
    for (const Tri& t : surface.triangles) {
        tris_.push_back({surface.vertex(t[0]), surface.vertex(t[1]), surface.vertex(t[2])});
    }
    order_.resize(tris_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) {
        order_[i] = static_cast<int>(i);
    }
    if (!tris_.empty()) {
        nodes_.reserve(2 * tris_.size() / kLeafSize + 2);
        build(0, static_cast<int>(tris_.size()));
    }
}

int TriangleBvh::build(int begin, int end)
{
    Aabb box;
    Aabb centroids;
    for (int i = begin; i < end; ++i) {
        for (const Vec3& v : tris_[order_[i]]) {
            box.extend(v);
        }
        centroids.extend((tris_[order_[i]][0] + tris_[order_[i]][1] + tris_[order_[i]][2]) / 3.0);
    }
    const int idx = static_cast<int>(nodes_.size());
    nodes_.push_back({box, -1, -1, begin, end});
    if (end - begin <= kLeafSize) {
        return idx;
    }
    int axis = 0;
    centroids.extent().maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                         const double ca = tris_[a][0][axis] + tris_[a][1][axis] + tris_[a][2][axis];
                         const double cb = tris_[b][0][axis] + tris_[b][1][axis] + tris_[b][2][axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[idx].left = l;
    nodes_[idx].right = r;
    return idx;
}

TriangleBvh::Closest TriangleBvh::closest(const Vec3& p, double bound) const
{
    Closest best;
    if (nodes_.empty()) {
        return best;
    }
    double best_sq = bound * bound;
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& n = nodes_[stack[--top]];
        if (box_distance_sq(n.box, p) > best_sq) {
            continue;
        }
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                const auto& t = tris_[order_[i]];
                const auto r = point_triangle_distance(p, t[0], t[1], t[2]);
                if (r.distance * r.distance <= best_sq) {
                    best_sq = r.distance * r.distance;
                    best.distance = r.distance;
                    best.triangle = order_[i];
                    best.point = r.closest;
                    best.region = r.region;
                }
            }
            continue;
        }
        const double dl = box_distance_sq(nodes_[n.left].box, p);
        const double dr = box_distance_sq(nodes_[n.right].box, p);
        // Push the farther child first so the nearer one is processed next.
        if (dl < dr) {
            stack[top++] = n.right;
            stack[top++] = n.left;
        } else {
            stack[top++] = n.left;
            stack[top++] = n.right;
        }
    }
    return best;
}

std::optional<TriangleBvh::Hit> TriangleBvh::raycast(const Vec3& origin, const Vec3& dir,
                                                     double t_max) const
{
    std::optional<Hit> best;
    if (nodes_.empty()) {
        return best;
    }
    const Vec3 inv = dir.cwiseInverse();
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& n = nodes_[stack[--top]];
        const double limit = best ? best->t : t_max;
        if (!ray_box(n.box, origin, inv, limit)) {
            continue;
        }
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                const auto& t = tris_[order_[i]];
                const auto hit = ray_triangle(origin, dir, t[0], t[1], t[2]);
                if (hit && *hit > 0.0 && *hit <= (best ? best->t : t_max)) {
                    best = Hit{*hit, order_[i]};
                }
            }
            continue;
        }
        stack[top++] = n.left;
        stack[top++] = n.right;
    }
    return best;
}

}  // namespace grip
