#include "fd.hpp"
#include "grip/contact.hpp"
#include "grip/distance.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <map>
#include <random>

using namespace grip;

namespace {

constexpr double kDhat = 1e-3;

// Two bodies: body 0 owns the first `split` vertices.
CollisionMesh two_body_mesh(const Positions& x, int split, std::vector<Edge> edges, std::vector<Tri> faces)
{
    CollisionMesh m;
    m.rest = x;
    for (int i = 0; i < x.rows(); ++i) m.vertex_body.push_back(i < split ? 0 : 1);
    m.edges = std::move(edges);
    m.faces = std::move(faces);
    m.body_kinematic = {0, 0};
    return m;
}

Positions from_vec(const VecX& q) { return Eigen::Map<const Positions>(q.data(), q.size() / 3, 3); }
VecX to_vec(const Positions& x) { return Eigen::Map<const VecX>(x.data(), x.size()); }

// Random configuration near contact for a given candidate kind, returned with
// its stencils (all kinds appear across seeds).
struct Scene {
    Positions x;
    CollisionMesh mesh;
    std::vector<ContactStencil> stencils;
};

Scene random_scene(std::mt19937_64& rng, bool edges)
{
    std::uniform_real_distribution<double> u(-1, 1);
    std::uniform_real_distribution<double> gap(0.15 * kDhat, 0.85 * kDhat);
    Scene s;
    s.x.resize(4, 3);
    if (!edges) {
        // Triangle in z = 0 plane (randomized), point at a gap above a random spot
        // that may lie outside the triangle, giving face/edge/vertex regions.
        s.x << 0, 0, 0, 0.01, 0, 0, 0, 0.01, 0, 0, 0, 0;
        s.x.row(1) += 0.002 * Eigen::RowVector3d(u(rng), u(rng), 0);
        s.x.row(2) += 0.002 * Eigen::RowVector3d(u(rng), u(rng), 0);
        const Vec3 foot = Vec3(0.004 + 0.006 * u(rng), 0.004 + 0.006 * u(rng), 0);
        const auto r = point_triangle_distance(foot, row(s.x, 1), row(s.x, 2), row(s.x, 3));
        Vec3 dir = foot - r.closest;
        dir = dir.norm() > 1e-12 ? Vec3(dir.normalized() + Vec3(0, 0, 1)).normalized() : Vec3(0, 0, 1);
        s.x.row(0) = (r.closest + gap(rng) * dir).transpose();
        // vertex 0 is body 0, triangle 1..3 body 1
        s.mesh = two_body_mesh(s.x, 1, {}, {{1, 2, 3}});
        s.stencils = build_stencils(s.mesh, s.x, {{CandidateType::VertexFace, {0, 1, 2, 3}}}, kDhat);
    } else {
        const double angle = rng() % 3 == 0 ? 0.01 * u(rng) : u(rng);
        s.x << -0.005, 0, 0, 0.005, 0, 0, 0, 0, 0, 0, 0, 0;
        const Vec3 d(std::cos(angle), std::sin(angle), 0);
        const Vec3 c(0.004 * u(rng), 0.004 * u(rng), gap(rng));
        s.x.row(2) = (c - 0.005 * d).transpose();
        s.x.row(3) = (c + 0.005 * d).transpose();
        s.mesh = two_body_mesh(s.x, 2, {{0, 1}, {2, 3}}, {});
        s.stencils = build_stencils(s.mesh, s.x, {{CandidateType::EdgeEdge, {0, 1, 2, 3}}}, kDhat);
    }
    return s;
}

}  // namespace

TEST(Barrier, SupportBoundary)
{
    for (double d : {kDhat, 2 * kDhat}) {
        const auto b = barrier(d, kDhat);
        EXPECT_EQ(b.value, 0.0);
        EXPECT_EQ(b.d1, 0.0);
        EXPECT_EQ(b.d2, 0.0);
    }
    EXPECT_THROW(barrier(0.0, kDhat), Error);
}

TEST(Barrier, HalfDhat)
{
    const auto b = barrier(0.5 * kDhat, kDhat);
    EXPECT_NEAR(b.value, 2.5e-7 * std::log(2.0), 1e-20);
    EXPECT_NEAR(b.value, 1.733e-7, 1e-10);
    const double h = 1e-9;
    const double d = 0.5 * kDhat;
    const double fd1 = (barrier(d + h, kDhat).value - barrier(d - h, kDhat).value) / (2 * h);
    const double fd2 = (barrier(d + h, kDhat).d1 - barrier(d - h, kDhat).d1) / (2 * h);
    EXPECT_NEAR(fd1, b.d1, 1e-6 * std::abs(b.d1));
    EXPECT_NEAR(fd2, b.d2, 1e-6 * std::abs(b.d2));
}

TEST(Barrier, DivergesAtZero)
{
    // The value grows like ln(1/d): b(1e-12) / b(dhat/2) is only about 120, so
    // the unbounded growth is checked through monotonicity and the closed-form
    // lower bound, and the 1e6 ratio through the force, which grows like 1/d.
    double prev = 0.0;
    for (double d = 0.5 * kDhat; d > 1e-300; d *= 1e-3) {
        const double b = barrier(d, kDhat).value;
        EXPECT_GT(b, prev);
        EXPECT_GE(b, 0.25 * kDhat * kDhat * std::log(kDhat / d));
        prev = b;
    }
    EXPECT_GT(std::abs(barrier(1e-12, kDhat).d1), 1e6 * std::abs(barrier(0.5 * kDhat, kDhat).d1));
}

TEST(ContactPotential, NothingWithinDhat)
{
    Positions x(4, 3);
    x << 0.1, 0.1, 2 * kDhat, 0, 0, 0, 1, 0, 0, 0, 1, 0;
    const auto m = two_body_mesh(x, 1, {}, {{1, 2, 3}});
    const auto st = build_stencils(m, x, {{CandidateType::VertexFace, {0, 1, 2, 3}}}, kDhat);
    EXPECT_TRUE(st.empty());
    const auto e = contact_potential(st, x, ContactParams{});
    EXPECT_EQ(e.energy, 0.0);
    EXPECT_TRUE(e.dense_gradient(4).isZero(0.0));
}

TEST(ContactPotential, ExactZeroOutsideSupport)
{
    // A stencil evaluated beyond dhat contributes exactly nothing.
    Positions x(4, 3);
    x << 0.1, 0.1, 0.5 * kDhat, 0, 0, 0, 1, 0, 0, 0, 1, 0;
    const auto m = two_body_mesh(x, 1, {}, {{1, 2, 3}});
    const auto st = build_stencils(m, x, {{CandidateType::VertexFace, {0, 1, 2, 3}}}, kDhat);
    x(0, 2) = 1.5 * kDhat;
    const auto e = contact_potential(st, x, ContactParams{});
    EXPECT_EQ(e.energy, 0.0);
    EXPECT_TRUE(e.dense_gradient(4).isZero(0.0));
}

TEST(ContactPotential, PointPlaneAtHalfDhat)
{
    Positions x(4, 3);
    x << 0.2, 0.2, 0.5 * kDhat, 0, 0, 0, 1, 0, 0, 0, 1, 0;
    const auto m = two_body_mesh(x, 1, {}, {{1, 2, 3}});
    const auto st = build_stencils(m, x, {{CandidateType::VertexFace, {0, 1, 2, 3}}}, kDhat);
    ASSERT_EQ(st.size(), 1u);
    const ContactParams p;
    const auto e = contact_potential(st, x, p);
    EXPECT_NEAR(e.energy, p.kappa * barrier(0.5 * kDhat, kDhat).value, 1e-12 * e.energy);
    EXPECT_NEAR(stencil_force(st[0], x, p), p.kappa * std::abs(barrier(0.5 * kDhat, kDhat).d1), 1e-9);
}

TEST(ContactPotential, GradientMatchesFiniteDifferencesAllKinds)
{
    std::mt19937_64 rng(3);
    std::map<StencilKind, int> kinds;
    int mollified = 0;
    const ContactParams p;
    for (int trial = 0; trial < 400; ++trial) {
        Scene s = random_scene(rng, trial % 2 == 1);
        if (s.stencils.empty()) continue;
        kinds[s.stencils[0].kind]++;
        mollified += s.stencils[0].mollified;
        const VecX q = to_vec(s.x);
        auto energy = [&](const VecX& y) { return contact_potential(s.stencils, from_vec(y), p, false).energy; };
        const auto e = contact_potential(s.stencils, s.x, p, false);
        const VecX g = e.dense_gradient(4);
        EXPECT_LT(fd::rel_err(fd::gradient(energy, q, 1e-10), g), 1e-6) << "trial " << trial;
        // Unprojected Hessian against finite differences of the gradient.
        auto grad = [&](const VecX& y) -> VecX { return contact_potential(s.stencils, from_vec(y), p, false).dense_gradient(4); };
        const auto geo = stencil_barrier(s.stencils[0], s.x, kDhat, true);
        MatX h = MatX::Zero(12, 12);
        for (int a = 0; a < geo.n; ++a)
            for (int b = 0; b < geo.n; ++b)
                h.block<3, 3>(3 * geo.slots[a], 3 * geo.slots[b]) += p.kappa * geo.hessian.block<3, 3>(3 * a, 3 * b);
        const VecX v = VecX::Random(12);
        EXPECT_LT(fd::rel_err(fd::jvp(grad, q, v, 1e-10), h * v), 1e-5) << "trial " << trial;
        const auto proj = contact_potential(s.stencils, s.x, p, true);
        const MatX hp = proj.dense_hessian(4);
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatX>(hp).eigenvalues().minCoeff(), -1e-10 * std::max(1.0, hp.norm()));
    }
    EXPECT_GT(kinds[StencilKind::PointTriangle], 10);
    EXPECT_GT(kinds[StencilKind::EdgeEdge], 10);
    EXPECT_GT(kinds[StencilKind::PointEdge], 10);
    EXPECT_GT(kinds[StencilKind::PointPoint], 3);
    EXPECT_GT(mollified, 5);
}

TEST(FrictionMollifier, ClosedForms)
{
    const double dt = 0.01, ev = 1e-3, eps = ev * dt;
    EXPECT_EQ(friction_mollifier(0.0, ev, dt).f1, 0.0);
    EXPECT_EQ(friction_mollifier(0.0, ev, dt).f0, 0.0);
    EXPECT_DOUBLE_EQ(friction_mollifier(eps, ev, dt).f1, 1.0);
    EXPECT_DOUBLE_EQ(friction_mollifier(0.5 * eps, ev, dt).f1, 0.75);
    for (double y : {0.1 * eps, 0.7 * eps, eps, 3 * eps}) {
        const double h = 1e-4 * eps;
        const double fd0 = (friction_mollifier(y + h, ev, dt).f0 - friction_mollifier(y - h, ev, dt).f0) / (2 * h);
        EXPECT_NEAR(fd0, friction_mollifier(y, ev, dt).f1, 1e-6);
    }
    double prev = 0.0;
    for (int i = 1; i <= 100; ++i) {
        const double f1 = friction_mollifier(eps * i / 100.0, ev, dt).f1;
        EXPECT_GE(f1, prev);
        prev = f1;
    }
}

namespace {

FrictionAnchor point_anchor(double mu, double lambda)
{
    FrictionAnchor a;
    a.v = {0, 1, -1, -1};
    a.n = 2;
    a.w = {1.0, -1.0, 0, 0};
    a.normal = Vec3(0, 0, 1);
    a.basis.col(0) = Vec3(1, 0, 0);
    a.basis.col(1) = Vec3(0, 1, 0);
    a.mu = mu;
    a.lambda = lambda;
    return a;
}

}  // namespace

TEST(Friction, ZeroSlip)
{
    Positions x(2, 3);
    x << 0, 0, 1e-4, 0, 0, 0;
    const auto e = friction_potential({point_anchor(0.5, 10.0)}, x, x, ContactParams{}, 0.01);
    EXPECT_EQ(e.energy, 0.0);
    EXPECT_TRUE(e.dense_gradient(2).isZero(0.0));
}

TEST(Friction, CoulombLimit)
{
    Positions x0(2, 3);
    x0 << 0, 0, 1e-4, 0, 0, 0;
    Positions x = x0;
    x(0, 0) += 0.3;
    x(0, 1) -= 0.1;
    const double mu = 0.7, lambda = 12.0;
    const auto e = friction_potential({point_anchor(mu, lambda)}, x, x0, ContactParams{}, 0.01);
    EXPECT_NEAR(e.dense_gradient(2).segment<3>(0).norm(), mu * lambda, 1e-8);
}

TEST(Friction, GradientAndHessianMatchFiniteDifferences)
{
    std::mt19937_64 rng(17);
    const double dt = 0.01;
    const ContactParams p;
    const double eps = p.eps_v * dt;
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 100; ++trial) {
        // PT anchor with random barycentric weights and slips spanning the transition.
        FrictionAnchor a;
        a.v = {0, 1, 2, 3};
        a.n = 4;
        const double b1 = 0.3 * (1 + u(rng)), b2 = 0.3 * (1 + u(rng));
        a.w = {1.0, -(1 - b1 - b2), -b1, -b2};
        a.normal = Vec3(u(rng), u(rng), u(rng)).normalized();
        const Vec3 t1 = a.normal.cross(Vec3(1, 0, 0)).normalized();
        a.basis.col(0) = t1;
        a.basis.col(1) = a.normal.cross(t1);
        a.mu = 0.5 + 0.5 * u(rng);
        a.lambda = 5.0;
        Positions x0 = 1e-3 * Positions::Random(4, 3);
        Positions x = x0 + (3 * eps * (1 + u(rng))) * Positions::Random(4, 3);
        const VecX q = to_vec(x);
        auto energy = [&](const VecX& y) { return friction_potential({a}, from_vec(y), x0, p, dt, false).energy; };
        auto grad = [&](const VecX& y) -> VecX { return friction_potential({a}, from_vec(y), x0, p, dt, false).dense_gradient(4); };
        const auto e = friction_potential({a}, x, x0, p, dt, true);
        EXPECT_LT(fd::rel_err(fd::gradient(energy, q, 1e-9), e.dense_gradient(4)), 1e-6) << trial;
        const VecX v = VecX::Random(12);
        EXPECT_LT(fd::rel_err(fd::jvp(grad, q, v, 1e-10), e.dense_hessian(4) * v), 1e-5) << trial;
        EXPECT_GE(e.energy, 0.0);
        // Tangential force on the point stays inside the cone.
        EXPECT_LE(e.dense_gradient(4).segment<3>(0).norm(), a.mu * a.lambda * (1 + 1e-8));
        const MatX hp = e.dense_hessian(4);
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatX>(hp).eigenvalues().minCoeff(), -1e-10 * std::max(1.0, hp.norm()));
    }
}

TEST(Anchors, LambdaAndDeterminism)
{
    Positions x(4, 3);
    x << 0.2, 0.2, 0.4 * kDhat, 0, 0, 0, 1, 0, 0, 0, 1, 0;
    const auto m = two_body_mesh(x, 1, {}, {{1, 2, 3}});
    const auto st = build_stencils(m, x, {{CandidateType::VertexFace, {0, 1, 2, 3}}}, kDhat);
    const ContactParams p;
    const auto a1 = update_friction_anchors(st, x, p, {0.25, 1.0});
    const auto a2 = update_friction_anchors(st, x, p, {0.25, 1.0});
    ASSERT_EQ(a1.size(), 1u);
    EXPECT_DOUBLE_EQ(a1[0].mu, 0.5);
    EXPECT_EQ(a1[0].lambda, a2[0].lambda);
    EXPECT_EQ(a1[0].basis, a2[0].basis);
    EXPECT_NEAR(a1[0].normal.z(), 1.0, 1e-12);
    EXPECT_NEAR(a1[0].basis.col(0).dot(a1[0].normal), 0.0, 1e-15);
    EXPECT_NEAR((a1[0].basis.transpose() * a1[0].basis - Eigen::Matrix2d::Identity()).norm(), 0.0, 1e-15);
    // Beyond dhat there is no normal force.
    Positions far = x;
    far(0, 2) = 1.2 * kDhat;
    EXPECT_EQ(stencil_force(st[0], far, p), 0.0);
}
