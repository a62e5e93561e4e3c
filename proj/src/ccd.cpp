#include "grip/ccd.hpp"

#include "grip/distance.hpp"

#include <algorithm>
#include <cmath>

namespace grip {

namespace {

constexpr int kMaxAdvanceSteps = 10000;  // returns the certified partial t when hit

// Conservative advancement shared by both primitive kinds. `split` is the
// number of leading vertices in the first primitive.
template <typename DistanceFn>
double advance(std::array<Vec3, 4> x, std::array<Vec3, 4> dx, int split, double t_max,
               DistanceFn&& distance)
{
    Vec3 mean = Vec3::Zero();
    for (const Vec3& d : dx) {
        mean += d;
    }
    mean /= 4.0;
    double l0 = 0.0;
    double l1 = 0.0;
    for (int i = 0; i < 4; ++i) {
        dx[i] -= mean;
        (i < split ? l0 : l1) = std::max(i < split ? l0 : l1, dx[i].norm());
    }
    const double lp = l0 + l1;
    double d = distance(x);
    if (!(d > 0.0)) {
        throw Error("ccd: primitives already in contact");
    }
    if (lp == 0.0) {
        return t_max;
    }
    const double stop = (1.0 - kCcdScale) * d;
    double t = 0.0;
    for (int it = 0; it < kMaxAdvanceSteps; ++it) {
        const double tl = kCcdScale * d / lp;
        if (t + tl >= t_max) {
            return t_max;
        }
        for (int i = 0; i < 4; ++i) {
            x[i] += tl * dx[i];
        }
        t += tl;
        d = distance(x);
        if (d < stop) {
            // The next advance is still conservative, so it is taken too.
            return std::min(t_max, t + kCcdScale * d / lp);
        }
    }
    return t;
}

}  // namespace

double ccd_point_triangle(const std::array<Vec3, 4>& x, const std::array<Vec3, 4>& dx,
                          double t_max)
{
    return advance(x, dx, 1, t_max, [](const std::array<Vec3, 4>& y) {
        return point_triangle_distance(y[0], y[1], y[2], y[3]).distance;
    });
}

double ccd_edge_edge(const std::array<Vec3, 4>& x, const std::array<Vec3, 4>& dx, double t_max)
{
    return advance(x, dx, 2, t_max, [](const std::array<Vec3, 4>& y) {
        return edge_edge_distance(y[0], y[1], y[2], y[3], 1.0).distance;
    });
}

double first_root_cubic(double c0, double c1, double c2, double c3)
{
    auto f = [&](double t) { return ((c3 * t + c2) * t + c1) * t + c0; };
    // Split [0, 1] at the critical points so f is monotone on each piece.
    std::vector<double> knots = {0.0};
    const double a = 3 * c3;
    const double b = 2 * c2;
    const double c = c1;
    if (std::abs(a) > 0.0) {
        const double disc = b * b - 4 * a * c;
        if (disc >= 0.0) {
            const double s = std::sqrt(disc);
            for (double r : {(-b - s) / (2 * a), (-b + s) / (2 * a)}) {
                if (r > 0.0 && r < 1.0) {
                    knots.push_back(r);
                }
            }
        }
    } else if (std::abs(b) > 0.0) {
        const double r = -c / b;
        if (r > 0.0 && r < 1.0) {
            knots.push_back(r);
        }
    }
    std::sort(knots.begin(), knots.end());
    knots.push_back(1.0);
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        double lo = knots[k];
        double hi = knots[k + 1];
        if (f(hi) > 0.0) {
            continue;
        }
        if (f(lo) <= 0.0) {
            return lo;
        }
        for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) > 0.0 ? lo : hi) = mid;
        }
        return lo;
    }
    return std::numeric_limits<double>::infinity();
}

std::array<double, 4> det_cubic(const Mat3& m, const Mat3& dm)
{
    auto det3 = [](const Vec3& a, const Vec3& b, const Vec3& c) { return a.dot(b.cross(c)); };
    const Vec3 e1 = m.col(0), e2 = m.col(1), e3 = m.col(2);
    const Vec3 q1 = dm.col(0), q2 = dm.col(1), q3 = dm.col(2);
    return {det3(e1, e2, e3), det3(q1, e2, e3) + det3(e1, q2, e3) + det3(e1, e2, q3),
            det3(e1, q2, q3) + det3(q1, e2, q3) + det3(q1, q2, e3), det3(q1, q2, q3)};
}

double tet_inversion_step_filter(const std::vector<Tet>& tets, const Positions& x,
                                 const Positions& dx)
{
    double alpha = 1.0;
    for (const Tet& t : tets) {
        Mat3 m;
        Mat3 dm;
        for (int k = 0; k < 3; ++k) {
            m.col(k) = row(x, t[k + 1]) - row(x, t[0]);
            dm.col(k) = row(dx, t[k + 1]) - row(dx, t[0]);
        }
        const auto c = det_cubic(m, dm);
        if (!(c[0] > 0.0)) {
            throw Error("tet inversion filter: tet already inverted");
        }
        const double root = first_root_cubic(c[0], c[1], c[2], c[3]);
        if (root <= 1.0) {
            alpha = std::min(alpha, kCcdScale * root);
        }
    }
    return alpha;
}

}  // namespace grip
