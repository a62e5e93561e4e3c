#include "grip/contact.hpp"

#include "grip/autodiff.hpp"
#include "grip/distance.hpp"

#include <cmath>

namespace grip {

namespace {

using D12 = ad::Dual2<12>;

D12 squared_distance(StencilKind kind, const std::array<ad::V3<D12>, 4>& p)
{
    switch (kind) {
    case StencilKind::PointTriangle: return point_plane_sq(p[0], p[1], p[2], p[3]);
    case StencilKind::EdgeEdge: return line_line_sq(p[0], p[1], p[2], p[3]);
    case StencilKind::PointEdge: return point_line_sq(p[0], p[1], p[2]);
    case StencilKind::PointPoint: return point_point_sq(p[0], p[1]);
    }
    throw Error("unknown stencil kind");
}

void scatter(const LocalTerm& t, VecX& g)
{
    for (int a = 0; a < t.n; ++a) {
        g.segment<3>(3 * t.v[a]) += t.gradient.segment<3>(3 * a);
    }
}

Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& n)
{
    int axis = 0;
    n.cwiseAbs().minCoeff(&axis);
    const Vec3 t1 = n.cross(Vec3::Unit(axis)).normalized();
    Eigen::Matrix<double, 3, 2> b;
    b.col(0) = t1;
    b.col(1) = n.cross(t1);
    return b;
}

}  // namespace

void ContactParams::validate() const
{
    if (!(kappa > 0.0) || !(dhat > 0.0) || !(eps_v > 0.0)) {
        throw Error("contact parameters kappa, dhat, eps_v must be > 0");
    }
    if (friction_iterations < 0) {
        throw Error("friction_iterations must be >= 0");
    }
}

BarrierValue barrier(double d, double dhat)
{
    if (!(d > 0.0)) {
        throw Error("barrier evaluated at non-positive distance");
    }
    if (d >= dhat) {
        return {0.0, 0.0, 0.0};
    }
    const double r = d - dhat;
    const double l = std::log(d / dhat);
    return {-r * r * l, -2.0 * r * l - r * r / d, -2.0 * l - 4.0 * r / d + r * r / (d * d)};
}

VecX PotentialEval::dense_gradient(int num_vertices) const
{
    VecX g = VecX::Zero(3 * num_vertices);
    for (const auto& t : terms) {
        scatter(t, g);
    }
    return g;
}

MatX PotentialEval::dense_hessian(int num_vertices) const
{
    MatX h = MatX::Zero(3 * num_vertices, 3 * num_vertices);
    for (const auto& t : terms) {
        for (int a = 0; a < t.n; ++a) {
            for (int b = 0; b < t.n; ++b) {
                h.block<3, 3>(3 * t.v[a], 3 * t.v[b]) += t.hessian.block<3, 3>(3 * a, 3 * b);
            }
        }
    }
    return h;
}

StencilGeometry stencil_barrier(const ContactStencil& s, const Positions& x, double dhat,
                                bool with_hessian)
{
    StencilGeometry g;
    const int active = s.size();
    std::array<int, 4> local = {0, 1, 2, 3};  // active vertex -> slot
    if (s.mollified) {
        g.slots = s.edge_v;
        g.n = 4;
        for (int j = 0; j < active; ++j) {
            for (int k = 0; k < 4; ++k) {
                if (s.edge_v[k] == s.v[j]) {
                    local[j] = k;
                }
            }
        }
    } else {
        g.slots = s.v;
        g.n = active;
    }
    std::array<ad::V3<D12>, 4> slot_pos;
    for (int k = 0; k < g.n; ++k) {
        slot_pos[k] = ad::seed<12>(row(x, g.slots[k]), k);
    }
    std::array<ad::V3<D12>, 4> p;
    for (int j = 0; j < active; ++j) {
        p[j] = slot_pos[local[j]];
    }
    const D12 dsq = squared_distance(s.kind, p);
    if (!(dsq.v > 0.0)) {
        throw Error("contact stencil at zero distance");
    }
    const D12 d = ad::sqrt(dsq);
    g.distance = d.v;
    const BarrierValue b = barrier(d.v, dhat);
    D12 e = ad::chain(d, b.value, b.d1, b.d2);
    if (s.mollified) {
        const D12 c = edge_cross_sq(slot_pos[0], slot_pos[1], slot_pos[2], slot_pos[3]);
        const MollifierValue m = edge_edge_mollifier(c.v, s.eps_x);
        g.mollifier = m.value;
        e = e * ad::chain(c, m.value, m.d1, m.d2);
    }
    g.energy = e.v;
    g.gradient = e.g;
    if (with_hessian) {
        g.hessian = e.h;
    }
    return g;
}

PotentialEval contact_potential(const std::vector<ContactStencil>& stencils, const Positions& x,
                                const ContactParams& params, bool with_hessian)
{
    PotentialEval out;
    out.terms.reserve(stencils.size());
    for (const auto& s : stencils) {
        const StencilGeometry g = stencil_barrier(s, x, params.dhat, with_hessian);
        if (g.energy == 0.0 && g.gradient.isZero(0.0)) {
            continue;
        }
        LocalTerm t;
        t.v = g.slots;
        t.n = g.n;
        t.energy = params.kappa * g.energy;
        t.gradient = params.kappa * g.gradient;
        if (with_hessian) {
            t.hessian = project_psd<12>(Mat12(params.kappa * g.hessian));
        }
        out.energy += t.energy;
        out.terms.push_back(t);
    }
    return out;
}

double stencil_force(const ContactStencil& s, const Positions& x, const ContactParams& params)
{
    const StencilGeometry g = stencil_barrier(s, x, params.dhat, false);
    return params.kappa * g.mollifier * std::abs(barrier(g.distance, params.dhat).d1);
}

FrictionMollifier friction_mollifier(double y, double eps_v, double dt)
{
    const double eps = eps_v * dt;
    if (y >= eps) {
        return {y - eps / 3.0, 1.0};
    }
    return {-y * y * y / (3.0 * eps * eps) + y * y / eps, -y * y / (eps * eps) + 2.0 * y / eps};
}

std::vector<FrictionAnchor> update_friction_anchors(const std::vector<ContactStencil>& stencils,
                                                    const Positions& x, const ContactParams& params,
                                                    const std::vector<double>& body_mu)
{
    std::vector<FrictionAnchor> out;
    for (const auto& s : stencils) {
        const double lambda = stencil_force(s, x, params);
        if (lambda == 0.0) {
            continue;
        }
        FrictionAnchor a;
        a.v = s.v;
        a.n = s.size();
        a.lambda = lambda;
        a.bodies = s.bodies;
        a.mu = std::sqrt(body_mu.at(s.bodies[0]) * body_mu.at(s.bodies[1]));
        std::array<Vec3, 4> p;
        for (int k = 0; k < a.n; ++k) {
            p[k] = row(x, s.v[k]);
        }
        switch (s.kind) {
        case StencilKind::PointTriangle: {
            const auto r = point_triangle_distance(p[0], p[1], p[2], p[3]);
            a.w = {1.0, -r.barycentric[0], -r.barycentric[1], -r.barycentric[2]};
            break;
        }
        case StencilKind::EdgeEdge: {
            const auto r = edge_edge_distance(p[0], p[1], p[2], p[3], 1.0);
            a.w = {1.0 - r.s, r.s, -(1.0 - r.t), -r.t};
            break;
        }
        case StencilKind::PointEdge: {
            const auto r = point_edge_distance(p[0], p[1], p[2]);
            a.w = {1.0, -(1.0 - r.t), -r.t, 0.0};
            break;
        }
        case StencilKind::PointPoint: a.w = {1.0, -1.0, 0.0, 0.0}; break;
        }
        Vec3 rel = Vec3::Zero();
        for (int k = 0; k < a.n; ++k) {
            rel += a.w[k] * p[k];
        }
        a.normal = rel.normalized();
        a.basis = tangent_basis(a.normal);
        out.push_back(a);
    }
    return out;
}

Vec2 anchor_slip(const FrictionAnchor& a, const Positions& x, const Positions& x_prev)
{
    Vec3 rel = Vec3::Zero();
    for (int k = 0; k < a.n; ++k) {
        rel += a.w[k] * (row(x, a.v[k]) - row(x_prev, a.v[k]));
    }
    return a.basis.transpose() * rel;
}

PotentialEval friction_potential(const std::vector<FrictionAnchor>& anchors, const Positions& x,
                                 const Positions& x_prev, const ContactParams& params, double dt,
                                 bool with_hessian)
{
    PotentialEval out;
    const double eps = params.eps_v * dt;
    for (const auto& a : anchors) {
        const double scale = a.mu * a.lambda;
        if (scale == 0.0) {
            continue;
        }
        const Vec2 u = anchor_slip(a, x, x_prev);
        const double y = u.norm();
        const auto f = friction_mollifier(y, params.eps_v, dt);
        Eigen::Matrix<double, 2, 12> jac = Eigen::Matrix<double, 2, 12>::Zero();
        for (int k = 0; k < a.n; ++k) {
            jac.block<2, 3>(0, 3 * k) = a.w[k] * a.basis.transpose();
        }
        // f1(y)/y and its derivative factor, written to stay finite at y = 0.
        double f1_over_y;
        double curv;  // coefficient of u u^T in the Hessian
        if (y >= eps) {
            f1_over_y = 1.0 / y;
            curv = -1.0 / (y * y * y);
        } else {
            f1_over_y = -y / (eps * eps) + 2.0 / eps;
            curv = y > 0.0 ? -1.0 / (eps * eps * y) : 0.0;
        }
        LocalTerm t;
        t.v = a.v;
        t.n = a.n;
        t.energy = scale * f.f0;
        t.gradient = scale * f1_over_y * jac.transpose() * u;
        if (with_hessian) {
            Eigen::Matrix2d h2 = scale * (curv * u * u.transpose() + f1_over_y * Eigen::Matrix2d::Identity());
            h2 = project_psd<2>(h2);
            t.hessian = jac.transpose() * h2 * jac;
        }
        out.energy += t.energy;
        out.terms.push_back(t);
    }
    return out;
}

}  // namespace grip
