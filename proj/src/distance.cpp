#include "grip/distance.hpp"

#include <algorithm>
#include <cmath>

namespace grip {

PointTriangleResult point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                                            const Vec3& c)
{
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    if (ab.cross(ac).squaredNorm() <= 4e-24) {
        throw Error("point_triangle_distance: degenerate triangle");
    }
    PointTriangleResult r;
    auto finish = [&](PointTriangleRegion region, double wa, double wb, double wc) {
        r.region = region;
        r.barycentric = Vec3(wa, wb, wc);
        r.closest = wa * a + wb * b + wc * c;
        r.distance = (p - r.closest).norm();
        return r;
    };

    const Vec3 ap = p - a;
    const Vec3 n = ab.cross(ac);
    const double h = ap.dot(n);
    if (h != 0.0) {
        // Off the plane: if the foot of the perpendicular is on the closed
        // triangle, the face realizes the distance (ties go to the face).
        const Vec3 foot = p - (h / n.squaredNorm()) * n;
        const double wc = ab.cross(foot - a).dot(n);
        const double wb = (foot - a).cross(ac).dot(n);
        const double wa = n.squaredNorm() - wb - wc;
        if (wa >= 0.0 && wb >= 0.0 && wc >= 0.0) {
            const double inv = 1.0 / n.squaredNorm();
            r = finish(PointTriangleRegion::Face, wa * inv, wb * inv, wc * inv);
            r.distance = std::abs(h) / n.norm();
            return r;
        }
    }
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) {
        return finish(PointTriangleRegion::Vertex0, 1, 0, 0);
    }
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) {
        return finish(PointTriangleRegion::Vertex1, 0, 1, 0);
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return finish(PointTriangleRegion::Edge01, 1 - v, v, 0);
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) {
        return finish(PointTriangleRegion::Vertex2, 0, 0, 1);
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return finish(PointTriangleRegion::Edge20, 1 - w, 0, w);
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return finish(PointTriangleRegion::Edge12, 0, 1 - w, w);
    }
    // Foot inside the triangle; reached for in-plane points or after rounding.
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    r = finish(PointTriangleRegion::Face, 1 - v - w, v, w);
    r.distance = std::abs(h) / n.norm();
    return r;
}

PointEdgeResult point_edge_distance(const Vec3& p, const Vec3& e0, const Vec3& e1)
{
    const Vec3 e = e1 - e0;
    const double len_sq = e.squaredNorm();
    if (len_sq <= 1e-24) {
        throw Error("point_edge_distance: degenerate edge");
    }
    PointEdgeResult r;
    const double t = (p - e0).dot(e) / len_sq;
    if (t <= 0.0) {
        r.region = PointEdgeRegion::Vertex0;
        r.t = 0.0;
        r.distance = (p - e0).norm();
    } else if (t >= 1.0) {
        r.region = PointEdgeRegion::Vertex1;
        r.t = 1.0;
        r.distance = (p - e1).norm();
    } else {
        r.region = PointEdgeRegion::Interior;
        r.t = t;
        r.distance = std::sqrt(std::max(0.0, (e0 - p).cross(e1 - p).squaredNorm() / len_sq));
    }
    return r;
}

double edge_edge_mollifier_threshold(const Vec3& a0, const Vec3& a1, const Vec3& b0,
                                     const Vec3& b1)
{
    return 1e-3 * (a1 - a0).squaredNorm() * (b1 - b0).squaredNorm();
}

MollifierValue edge_edge_mollifier(double x, double eps_x)
{
    if (x >= eps_x) {
        return {1.0, 0.0, 0.0};
    }
    const double r = x / eps_x;
    return {(2.0 - r) * r, 2.0 / eps_x - 2.0 * x / (eps_x * eps_x), -2.0 / (eps_x * eps_x)};
}

EdgeEdgeResult edge_edge_distance(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1,
                                  double eps_x)
{
    const Vec3 da = a1 - a0;
    const Vec3 db = b1 - b0;
    const double aa = da.squaredNorm();
    const double ee = db.squaredNorm();
    if (aa <= 1e-24 || ee <= 1e-24) {
        throw Error("edge_edge_distance: degenerate segment");
    }
    if (eps_x <= 0.0) {
        eps_x = edge_edge_mollifier_threshold(a0, a1, b0, b1);
    }
    EdgeEdgeResult r;
    const double cross_sq = da.cross(db).squaredNorm();
    r.mollifier_weight = edge_edge_mollifier(cross_sq, eps_x).value;

    if (cross_sq <= 1e-20 * aa * ee) {
        // Parallel: the closest pair is realized by an endpoint.
        struct Option {
            PointEdgeResult pe;
            bool endpoint_on_a;
            int endpoint;
        };
        const std::array<Option, 4> options = {
            Option{point_edge_distance(a0, b0, b1), true, 0},
            Option{point_edge_distance(a1, b0, b1), true, 1},
            Option{point_edge_distance(b0, a0, a1), false, 0},
            Option{point_edge_distance(b1, a0, a1), false, 1},
        };
        const auto best = std::min_element(options.begin(), options.end(), [](const auto& x, const auto& y) {
            return x.pe.distance < y.pe.distance;
        });
        r.distance = best->pe.distance;
        const double param = best->pe.t;
        if (best->endpoint_on_a) {
            r.s = best->endpoint;
            r.t = param;
        } else {
            r.t = best->endpoint;
            r.s = param;
        }
    } else {
        const Vec3 rr = a0 - b0;
        const double b = da.dot(db);
        const double c = da.dot(rr);
        const double f = db.dot(rr);
        const double denom = aa * ee - b * b;
        double s = std::clamp((b * f - c * ee) / denom, 0.0, 1.0);
        double t = (b * s + f) / ee;
        if (t < 0.0) {
            t = 0.0;
            s = std::clamp(-c / aa, 0.0, 1.0);
        } else if (t > 1.0) {
            t = 1.0;
            s = std::clamp((b - c) / aa, 0.0, 1.0);
        }
        r.s = s;
        r.t = t;
        r.distance = ((a0 + s * da) - (b0 + t * db)).norm();
    }

    const bool s_in = r.s > 0.0 && r.s < 1.0;
    const bool t_in = r.t > 0.0 && r.t < 1.0;
    if (s_in && t_in) {
        r.region = EdgeEdgeRegion::Interior;
        // Use the line-line form for accuracy in the interior.
        const Vec3 n = da.cross(db);
        r.distance = std::abs((b0 - a0).dot(n)) / std::sqrt(cross_sq);
    } else if (!s_in && t_in) {
        r.region = r.s <= 0.0 ? EdgeEdgeRegion::A0_B : EdgeEdgeRegion::A1_B;
    } else if (s_in && !t_in) {
        r.region = r.t <= 0.0 ? EdgeEdgeRegion::A_B0 : EdgeEdgeRegion::A_B1;
    } else if (r.s <= 0.0) {
        r.region = r.t <= 0.0 ? EdgeEdgeRegion::A0_B0 : EdgeEdgeRegion::A0_B1;
    } else {
        r.region = r.t <= 0.0 ? EdgeEdgeRegion::A1_B0 : EdgeEdgeRegion::A1_B1;
    }
    return r;
}

}  // namespace grip
