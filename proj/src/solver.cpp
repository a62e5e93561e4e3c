#include "grip/solver.hpp"

#include "grip/ccd.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>

namespace grip {

void SolverParams::validate() const
{
    if (!(dt > 0.0) || !(rel_tol > 0.0) || max_iters < 1 || !(abd_stiffness > 0.0)) {
        throw Error("SolverParams: dt, rel_tol, abd_stiffness must be positive and max_iters >= 1");
    }
}

const char* to_string(FailureReason r)
{
    switch (r) {
    case FailureReason::None: return "none";
    case FailureReason::NonConvergence: return "non-convergence";
    case FailureReason::NonFiniteState: return "non-finite-state";
    case FailureReason::CcdViolation: return "ccd-violation";
    case FailureReason::LinearSolveBreakdown: return "linear-solve-breakdown";
    }
    return "?";
}

InvariantMonitor& InvariantMonitor::global()
{
    static InvariantMonitor m;
    return m;
}

// ---------------------------------------------------------------------------
// Linear solve

namespace {

double rel_residual(const SparseMatrix& h, const VecX& p, const VecX& g)
{
    const double gn = g.norm();
    const double r = (h * p + g).norm();
    return gn > 0.0 ? r / gn : r;
}

bool direct_solve(const SparseMatrix& h, const VecX& g, VecX& p, int& refinements, double& res)
{
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(h);
    if (ldlt.info() != Eigen::Success) return false;
    p = ldlt.solve(-g);
    if (ldlt.info() != Eigen::Success || !p.allFinite()) return false;
    res = rel_residual(h, p, g);
    for (refinements = 0; refinements < 2 && res > 1e-10; ++refinements) {
        p += ldlt.solve(-(h * p + g));
        res = rel_residual(h, p, g);
    }
    return res <= 1e-10;
}

}  // namespace

VecX linear_solve(const SparseMatrix& h, const VecX& g, LinearSolverKind kind, LinearSolveReport* report)
{
    LinearSolveReport rep;
    VecX p = VecX::Zero(g.size());
    if (g.size() == 0) {
        rep.ok = true;
    } else if (kind == LinearSolverKind::Direct) {
        rep.ok = direct_solve(h, g, p, rep.refinements, rep.relative_residual);
        if (!rep.ok) {
            double scale = 0.0;
            for (int i = 0; i < h.rows(); ++i) scale = std::max(scale, std::abs(h.coeff(i, i)));
            SparseMatrix shifted = h;
            SparseMatrix eye(h.rows(), h.cols());
            eye.setIdentity();
            shifted += (1e-8 * std::max(scale, 1.0)) * eye;
            rep.regularized = true;
            rep.ok = direct_solve(shifted, g, p, rep.refinements, rep.relative_residual);
        }
    } else {
        Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(1e-10);
        cg.setMaxIterations(std::max<int>(1000, 10 * static_cast<int>(g.size())));
        cg.compute(h);
        p = cg.solve(-g);
        rep.relative_residual = rel_residual(h, p, g);
        rep.ok = p.allFinite() && rep.relative_residual <= 1e-6;
    }
    if (report) *report = rep;
    return p;
}

// ---------------------------------------------------------------------------
// Bodies

Body make_soft_body(std::string name, const TetMesh& mesh, const MaterialParams& material)
{
    material.validate();
    Body b;
    b.name = std::move(name);
    b.kind = BodyKind::Soft;
    b.material = material;
    b.mesh = mesh;
    b.surface = mesh.boundary;
    b.surface_node = mesh.surface_nodes;
    b.node_mass = mesh.lumped_masses(material.density);
    b.fixed_node.assign(mesh.num_nodes(), 0);
    return b;
}

Body make_affine_body(std::string name, const TetMesh& mesh, const MaterialParams& material)
{
    material.validate();
    if (mesh.num_tets() == 0) throw Error("make_affine_body: mesh has no tets");
    Body b;
    b.name = std::move(name);
    b.kind = BodyKind::Affine;
    b.material = material;
    b.mesh = mesh;
    b.surface = mesh.boundary;
    b.surface_node = mesh.surface_nodes;
    b.node_mass = mesh.lumped_masses(material.density);
    Vec3 com = Vec3::Zero();
    for (int i = 0; i < mesh.num_nodes(); ++i) com += b.node_mass[i] * row(mesh.vertices, i);
    com /= b.node_mass.sum();
    b.node_xbar.resize(mesh.num_nodes());
    for (int i = 0; i < mesh.num_nodes(); ++i) b.node_xbar[i] = row(mesh.vertices, i) - com;
    return b;
}

Body make_kinematic_body(std::string name, const TriSurface& surface, double friction)
{
    Body b;
    b.name = std::move(name);
    b.kind = BodyKind::Kinematic;
    b.material.friction = friction;
    b.material.validate();
    b.mesh.vertices = surface.vertices;
    b.mesh.rest = surface.vertices;
    b.surface = surface;
    b.surface_node.resize(surface.num_vertices());
    for (int i = 0; i < surface.num_vertices(); ++i) b.surface_node[i] = i;
    b.node_mass = VecX::Zero(surface.num_vertices());
    b.fixed_node.assign(surface.num_vertices(), 1);
    return b;
}

Body make_particle(std::string name, const Vec3& position, double mass, double friction)
{
    if (!(mass > 0.0)) throw Error("make_particle: mass must be positive");
    Body b;
    b.name = std::move(name);
    b.kind = BodyKind::Soft;
    b.material.friction = friction;
    b.material.validate();
    Positions p(1, 3);
    p.row(0) = position.transpose();
    b.mesh.vertices = p;
    b.mesh.rest = p;
    b.surface = TriSurface::build(p, {});
    b.surface_node = {0};
    b.node_mass = VecX::Constant(1, mass);
    b.fixed_node = {0};
    return b;
}

// ---------------------------------------------------------------------------
// Environment setup

Environment::Environment(SolverParams solver, ContactParams contact) : solver_(solver), contact_(contact)
{
    solver_.validate();
    contact_.validate();
}

int Environment::add_body(Body body)
{
    if (finalized_) throw Error("Environment::add_body after finalize");
    if (body.kind == BodyKind::Soft && static_cast<int>(body.fixed_node.size()) != body.num_nodes()) {
        body.fixed_node.assign(body.num_nodes(), 0);
    }
    bodies_.push_back(std::move(body));
    return static_cast<int>(bodies_.size()) - 1;
}

void Environment::set_fixed_nodes(int b, const std::vector<char>& fixed)
{
    if (finalized_) throw Error("Environment::set_fixed_nodes after finalize");
    Body& body = bodies_.at(b);
    if (body.kind != BodyKind::Soft || static_cast<int>(fixed.size()) != body.num_nodes()) {
        throw Error("set_fixed_nodes: soft body with one flag per node expected");
    }
    body.fixed_node = fixed;
}

void Environment::finalize()
{
    if (finalized_) return;
    const int nb = num_bodies();
    dof_offset_.resize(nb);
    n_dofs_ = 0;
    for (int b = 0; b < nb; ++b) {
        dof_offset_[b] = n_dofs_;
        n_dofs_ += bodies_[b].kind == BodyKind::Affine ? 12 : 3 * bodies_[b].num_nodes();
    }
    q_ = VecX::Zero(n_dofs_);
    v_ = VecX::Zero(n_dofs_);
    fixed_dof_.assign(n_dofs_, 0);
    mass_diag_ = VecX::Zero(n_dofs_);
    accel_ = VecX::Zero(n_dofs_);
    affine_mass_.assign(nb, Mat12::Zero());
    body_mu_.resize(nb);
    cmesh_ = CollisionMesh{};
    cmesh_.body_kinematic.assign(nb, 0);
    vertex_ref_.clear();
    tets_.clear();

    for (int b = 0; b < nb; ++b) {
        const Body& body = bodies_[b];
        const int off = dof_offset_[b];
        body_mu_[b] = body.material.friction;
        if (body.kind == BodyKind::Affine) {
            Vec3 com = Vec3::Zero();
            for (int i = 0; i < body.num_nodes(); ++i) {
                com += body.node_mass[i] * (row(body.mesh.vertices, i) - body.node_xbar[i]);
            }
            com /= body.node_mass.sum();
            q_.segment<3>(off) = com;
            q_.segment<3>(off + 3) = Vec3::UnitX();
            q_.segment<3>(off + 6) = Vec3::UnitY();
            q_.segment<3>(off + 9) = Vec3::UnitZ();
            Mat12& m = affine_mass_[b];
            for (int i = 0; i < body.num_nodes(); ++i) {
                Eigen::Matrix<double, 3, 12> j;
                j << Mat3::Identity(), body.node_xbar[i].x() * Mat3::Identity(),
                    body.node_xbar[i].y() * Mat3::Identity(), body.node_xbar[i].z() * Mat3::Identity();
                m += body.node_mass[i] * j.transpose() * j;
            }
        } else {
            bool all_fixed = true;
            for (int i = 0; i < body.num_nodes(); ++i) {
                q_.segment<3>(off + 3 * i) = row(body.mesh.vertices, i);
                const bool fixed = body.kind == BodyKind::Kinematic || body.fixed_node[i];
                all_fixed = all_fixed && fixed;
                for (int c = 0; c < 3; ++c) {
                    fixed_dof_[off + 3 * i + c] = fixed;
                    mass_diag_[off + 3 * i + c] = body.node_mass[i];
                }
            }
            cmesh_.body_kinematic[b] = all_fixed;
            if (body.kind == BodyKind::Soft) {
                for (int t = 0; t < body.mesh.num_tets(); ++t) {
                    const Tet& tet = body.mesh.tets[t];
                    TetRef ref;
                    ref.body = b;
                    std::array<Vec3, 4> rest;
                    for (int k = 0; k < 4; ++k) {
                        ref.dof[k] = off + 3 * tet[k];
                        rest[k] = row(body.mesh.rest, tet[k]);
                    }
                    ref.rest = tet_rest(rest);
                    tets_.push_back(ref);
                }
            }
        }

        const int base = static_cast<int>(vertex_ref_.size());
        for (int i = 0; i < body.surface.num_vertices(); ++i) {
            VertexRef r;
            const int node = body.surface_node[i];
            if (body.kind == BodyKind::Affine) {
                r.dof = off;
                r.affine = true;
                r.xbar = body.node_xbar[node];
            } else {
                r.dof = off + 3 * node;
            }
            vertex_ref_.push_back(r);
            cmesh_.vertex_body.push_back(b);
        }
        for (const Edge& e : body.surface.edges) cmesh_.edges.push_back({e[0] + base, e[1] + base});
        for (const Tri& f : body.surface.triangles) cmesh_.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
    }

    free_index_.assign(n_dofs_, -1);
    free_dofs_.clear();
    for (int i = 0; i < n_dofs_; ++i) {
        if (!fixed_dof_[i]) {
            free_index_[i] = static_cast<int>(free_dofs_.size());
            free_dofs_.push_back(i);
        }
    }
    target_ = q_;
    cmesh_.rest = collision_positions(q_);
    Aabb box;
    for (int i = 0; i < cmesh_.rest.rows(); ++i) box.extend(row(cmesh_.rest, i));
    ell_ = std::max(box.diagonal(), 10.0 * contact_.dhat);
    finalized_ = true;

    const std::vector<Candidate> cands = candidates(cmesh_.rest, nullptr);
    if (min_candidate_distance(cands, cmesh_.rest) <= 0.0) {
        throw Error("Environment::finalize: initial state has touching or intersecting primitives");
    }
}

// ---------------------------------------------------------------------------
// State mapping

Vec3 Environment::node_position(const VecX& q, int b, int node) const
{
    const int off = dof_offset_[b];
    if (bodies_[b].kind == BodyKind::Affine) {
        const Vec3& xb = bodies_[b].node_xbar[node];
        return q.segment<3>(off) + xb.x() * q.segment<3>(off + 3) + xb.y() * q.segment<3>(off + 6) +
               xb.z() * q.segment<3>(off + 9);
    }
    return q.segment<3>(off + 3 * node);
}

Positions Environment::collision_positions(const VecX& q) const
{
    Positions x(static_cast<int>(vertex_ref_.size()), 3);
    for (int i = 0; i < x.rows(); ++i) {
        const VertexRef& r = vertex_ref_[i];
        Vec3 p;
        if (r.affine) {
            p = q.segment<3>(r.dof) + r.xbar.x() * q.segment<3>(r.dof + 3) +
                r.xbar.y() * q.segment<3>(r.dof + 6) + r.xbar.z() * q.segment<3>(r.dof + 9);
        } else {
            p = q.segment<3>(r.dof);
        }
        x.row(i) = p.transpose();
    }
    return x;
}

Positions Environment::collision_displacement(const VecX& dq) const { return collision_positions(dq); }

double Environment::max_abs_displacement(const VecX& dq) const
{
    double m = collision_displacement(dq).cwiseAbs().maxCoeff();
    for (int b = 0; b < num_bodies(); ++b) {
        if (bodies_[b].kind != BodyKind::Soft) continue;
        const int n = 3 * bodies_[b].num_nodes();
        m = std::max(m, dq.segment(dof_offset_[b], n).cwiseAbs().maxCoeff());
    }
    return m;
}

Positions Environment::node_positions(int b) const
{
    Positions x(bodies_.at(b).num_nodes(), 3);
    for (int i = 0; i < x.rows(); ++i) x.row(i) = node_position(q_, b, i).transpose();
    return x;
}

Positions Environment::node_velocities(int b) const
{
    Positions x(bodies_.at(b).num_nodes(), 3);
    for (int i = 0; i < x.rows(); ++i) x.row(i) = node_position(v_, b, i).transpose();
    return x;
}

TriSurface Environment::body_surface(int b) const
{
    const Body& body = bodies_.at(b);
    TriSurface s = body.surface;
    for (int i = 0; i < s.num_vertices(); ++i) {
        s.vertices.row(i) = node_position(q_, b, body.surface_node[i]).transpose();
    }
    return s;
}

double Environment::body_mass(int b) const { return bodies_.at(b).node_mass.sum(); }

Vec3 Environment::center_of_mass(int b) const
{
    const Body& body = bodies_.at(b);
    if (body.kind == BodyKind::Affine) return q_.segment<3>(dof_offset_[b]);
    if (body.kind == BodyKind::Kinematic || body.node_mass.sum() <= 0.0) {
        return node_positions(b).colwise().mean().transpose();
    }
    Vec3 c = Vec3::Zero();
    for (int i = 0; i < body.num_nodes(); ++i) c += body.node_mass[i] * node_position(q_, b, i);
    return c / body.node_mass.sum();
}

double Environment::max_speed() const
{
    double m = 0.0;
    for (int b = 0; b < num_bodies(); ++b) {
        const Body& body = bodies_[b];
        if (body.kind == BodyKind::Kinematic) continue;
        for (int i = 0; i < body.num_nodes(); ++i) {
            if (body.kind == BodyKind::Soft && body.fixed_node[i]) continue;
            m = std::max(m, node_position(v_, b, i).norm());
        }
    }
    return m;
}

Vec3 Environment::linear_momentum() const
{
    Vec3 p = Vec3::Zero();
    for (int b = 0; b < num_bodies(); ++b) {
        const Body& body = bodies_[b];
        if (body.kind == BodyKind::Kinematic) continue;
        if (body.kind == BodyKind::Affine) {
            p += body.node_mass.sum() * v_.segment<3>(dof_offset_[b]);
            continue;
        }
        for (int i = 0; i < body.num_nodes(); ++i) p += body.node_mass[i] * node_position(v_, b, i);
    }
    return p;
}

bool Environment::kinematics_at_target() const
{
    for (int i = 0; i < n_dofs_; ++i) {
        if (fixed_dof_[i] && q_[i] != target_[i]) return false;
    }
    return true;
}

void Environment::set_node_targets(int b, const Positions& targets)
{
    const Body& body = bodies_.at(b);
    if (!finalized_) throw Error("set_node_targets before finalize");
    if (body.kind == BodyKind::Affine || targets.rows() != body.num_nodes()) {
        throw Error("set_node_targets: one target row per node of a soft or kinematic body expected");
    }
    for (int i = 0; i < body.num_nodes(); ++i) {
        for (int c = 0; c < 3; ++c) {
            const int d = dof_offset_[b] + 3 * i + c;
            if (fixed_dof_[d]) target_[d] = targets(i, c);
        }
    }
}

VecX Environment::free_dofs() const
{
    VecX y(free_dofs_.size());
    for (std::size_t i = 0; i < free_dofs_.size(); ++i) y[i] = q_[free_dofs_[i]];
    return y;
}

void Environment::set_free_dofs(const VecX& y)
{
    for (std::size_t i = 0; i < free_dofs_.size(); ++i) q_[free_dofs_[i]] = y[i];
}

// ---------------------------------------------------------------------------
// Potential assembly

std::vector<Candidate> Environment::candidates(const Positions& x, const Positions* dx) const
{
    BroadPhaseInput in{&cmesh_, &x, dx};
    return broad_phase({in}, contact_.dhat).front();
}

std::vector<ContactStencil> Environment::active_stencils() const
{
    const Positions x = collision_positions(q_);
    return build_stencils(cmesh_, x, candidates(x, nullptr), contact_.dhat);
}

namespace {

struct Assembler {
    const std::vector<int>& free_index;
    VecX* gradient;
    std::vector<Eigen::Triplet<double>>* triplets;

    void add_grad(int dof, double v) const
    {
        const int f = free_index[dof];
        if (f >= 0) (*gradient)[f] += v;
    }
    const VecX* prescribed = nullptr;  ///< full-size increment of fixed DOFs
    VecX* coupling = nullptr;          ///< accumulates H_fk * prescribed

    void add_hess(int i, int j, double v) const
    {
        const int fi = free_index[i];
        const int fj = free_index[j];
        if (fi >= 0 && fj >= 0) {
            triplets->emplace_back(fi, fj, v);
        } else if (fi >= 0 && coupling) {
            (*coupling)[fi] += v * (*prescribed)[j];
        }
    }
};

}  // namespace

Environment::Eval Environment::evaluate(const VecX& q, const std::vector<Candidate>& cands, int order,
                                        const VecX* prescribed) const
{
    const int nf = static_cast<int>(free_dofs_.size());
    const double h2 = solver_.dt * solver_.dt;
    Eval e;
    e.gradient = VecX::Zero(nf);
    std::vector<Eigen::Triplet<double>> trip;
    Assembler as{free_index_, &e.gradient, &trip};
    if (prescribed && order >= 2) {
        e.coupling = VecX::Zero(nf);
        as.prescribed = prescribed;
        as.coupling = &e.coupling;
    }

    // Inertia.
    for (int b = 0; b < num_bodies(); ++b) {
        const Body& body = bodies_[b];
        const int off = dof_offset_[b];
        if (body.kind == BodyKind::Kinematic) continue;
        if (body.kind == BodyKind::Affine) {
            const Vec12 dq = q.segment<12>(off) - q_hat_.segment<12>(off);
            const Vec12 mdq = affine_mass_[b] * dq;
            e.energy += 0.5 * dq.dot(mdq);
            if (order >= 1) {
                for (int i = 0; i < 12; ++i) as.add_grad(off + i, mdq[i]);
            }
            if (order >= 2) {
                for (int i = 0; i < 12; ++i)
                    for (int j = 0; j < 12; ++j)
                        if (affine_mass_[b](i, j) != 0.0) as.add_hess(off + i, off + j, affine_mass_[b](i, j));
            }
            // Orthogonality potential.
            Mat3 a;
            a << q.segment<3>(off + 3), q.segment<3>(off + 6), q.segment<3>(off + 9);
            const ElementEval ev = abd_orthogonality_energy(a, solver_.abd_stiffness, body.mesh.total_volume(), true);
            e.energy += h2 * ev.energy;
            if (order >= 1) {
                for (int i = 0; i < 12; ++i) as.add_grad(off + i, h2 * ev.gradient[i]);
            }
            if (order >= 2) {
                for (int i = 3; i < 12; ++i)
                    for (int j = 3; j < 12; ++j)
                        if (ev.hessian(i, j) != 0.0) as.add_hess(off + i, off + j, h2 * ev.hessian(i, j));
            }
            continue;
        }
        const int n = 3 * body.num_nodes();
        for (int i = off; i < off + n; ++i) {
            if (fixed_dof_[i]) continue;
            const double d = q[i] - q_hat_[i];
            e.energy += 0.5 * mass_diag_[i] * d * d;
            if (order >= 1) as.add_grad(i, mass_diag_[i] * d);
            if (order >= 2) as.add_hess(i, i, mass_diag_[i]);
        }
    }

    // Elasticity.
    int last_body = -1;
    Lame lame{};
    for (const TetRef& t : tets_) {
        if (t.body != last_body) {
            last_body = t.body;
            lame = lame_from_young_poisson(bodies_[t.body].material.young_modulus, bodies_[t.body].material.poisson_ratio);
        }
        std::array<Vec3, 4> x;
        for (int k = 0; k < 4; ++k) x[k] = q.segment<3>(t.dof[k]);
        const ElementEval ev = neo_hookean_energy(t.rest, x, lame, true, order >= 2);
        e.energy += h2 * ev.energy;
        if (order >= 1) {
            for (int k = 0; k < 4; ++k)
                for (int c = 0; c < 3; ++c) as.add_grad(t.dof[k] + c, h2 * ev.gradient[3 * k + c]);
        }
        if (order >= 2) {
            for (int k = 0; k < 4; ++k)
                for (int c = 0; c < 3; ++c)
                    for (int l = 0; l < 4; ++l)
                        for (int d = 0; d < 3; ++d)
                            as.add_hess(t.dof[k] + c, t.dof[l] + d, h2 * ev.hessian(3 * k + c, 3 * l + d));
        }
    }

    // Contact and friction act on collision vertices.
    const Positions x = collision_positions(q);
    auto scatter = [&](const PotentialEval& pe) {
        e.energy += h2 * pe.energy;
        if (order < 1) return;
        for (const LocalTerm& term : pe.terms) {
            // Expand each local coordinate into (dof, weight) pairs.
            std::array<std::array<std::pair<int, double>, 4>, 12> map;
            std::array<int, 12> count{};
            for (int a = 0; a < term.n; ++a) {
                const VertexRef& r = vertex_ref_[term.v[a]];
                for (int c = 0; c < 3; ++c) {
                    auto& m = map[3 * a + c];
                    int& k = count[3 * a + c];
                    m[k++] = {r.dof + c, 1.0};
                    if (r.affine) {
                        for (int j = 0; j < 3; ++j) m[k++] = {r.dof + 3 + 3 * j + c, r.xbar[j]};
                    }
                }
            }
            const int n3 = 3 * term.n;
            for (int i = 0; i < n3; ++i)
                for (int k = 0; k < count[i]; ++k)
                    as.add_grad(map[i][k].first, h2 * map[i][k].second * term.gradient[i]);
            if (order < 2) continue;
            for (int i = 0; i < n3; ++i)
                for (int j = 0; j < n3; ++j) {
                    const double hv = term.hessian(i, j);
                    if (hv == 0.0) continue;
                    for (int k = 0; k < count[i]; ++k)
                        for (int l = 0; l < count[j]; ++l)
                            as.add_hess(map[i][k].first, map[j][l].first,
                                        h2 * map[i][k].second * map[j][l].second * hv);
                }
        }
    };
    const std::vector<ContactStencil> stencils = build_stencils(cmesh_, x, cands, contact_.dhat);
    scatter(contact_potential(stencils, x, contact_, order >= 2));
    if (!anchors_.empty()) {
        scatter(friction_potential(anchors_, x, x_t_, contact_, solver_.dt, order >= 2));
    }

    if (order >= 2) {
        e.hessian.resize(nf, nf);
        e.hessian.setFromTriplets(trip.begin(), trip.end());
    }
    return e;
}

double Environment::incremental_potential() const
{
    const Positions x = collision_positions(q_);
    return evaluate(q_, candidates(x, nullptr), 0).energy;
}

VecX Environment::incremental_gradient() const
{
    const Positions x = collision_positions(q_);
    return evaluate(q_, candidates(x, nullptr), 1).gradient;
}

// ---------------------------------------------------------------------------
// Step filters

double Environment::min_tet_volume(const VecX& q) const
{
    double m = std::numeric_limits<double>::infinity();
    for (const TetRef& t : tets_) {
        m = std::min(m, signed_tet_volume(q.segment<3>(t.dof[0]), q.segment<3>(t.dof[1]),
                                          q.segment<3>(t.dof[2]), q.segment<3>(t.dof[3])));
    }
    for (int b = 0; b < num_bodies(); ++b) {
        if (bodies_[b].kind != BodyKind::Affine) continue;
        const int off = dof_offset_[b];
        Mat3 a;
        a << q.segment<3>(off + 3), q.segment<3>(off + 6), q.segment<3>(off + 9);
        m = std::min(m, a.determinant() * bodies_[b].mesh.total_volume());
    }
    return m;
}

double Environment::step_bound(const VecX& q, const VecX& dq, const std::vector<Candidate>& cands) const
{
    const Positions x = collision_positions(q);
    const Positions dx = collision_displacement(dq);
    double alpha = std::min(1.0, ccd_max_step(cands, x, dx));
    for (const TetRef& t : tets_) {
        Mat3 m, dm;
        for (int k = 1; k < 4; ++k) {
            m.col(k - 1) = q.segment<3>(t.dof[k]) - q.segment<3>(t.dof[0]);
            dm.col(k - 1) = dq.segment<3>(t.dof[k]) - dq.segment<3>(t.dof[0]);
        }
        if (dm.isZero(0.0)) continue;
        const auto c = det_cubic(m, dm);
        if (!(c[0] > 0.0)) throw Error("step_bound: inverted tet");
        alpha = std::min(alpha, kCcdScale * first_root_cubic(c[0], c[1], c[2], c[3]));
    }
    for (int b = 0; b < num_bodies(); ++b) {
        if (bodies_[b].kind != BodyKind::Affine) continue;
        const int off = dof_offset_[b];
        Mat3 a, da;
        a << q.segment<3>(off + 3), q.segment<3>(off + 6), q.segment<3>(off + 9);
        da << dq.segment<3>(off + 3), dq.segment<3>(off + 6), dq.segment<3>(off + 9);
        if (da.isZero(0.0)) continue;
        const auto c = det_cubic(a, da);
        if (!(c[0] > 0.0)) throw Error("step_bound: inverted affine body");
        alpha = std::min(alpha, kCcdScale * first_root_cubic(c[0], c[1], c[2], c[3]));
    }
    return alpha;
}

// ---------------------------------------------------------------------------
// Newton iterations

void Environment::begin_step()
{
    if (!finalized_) finalize();
    report_ = StepReport{};
    stepping_ = true;
    q_t_ = q_;
    accel_.setZero();
    for (int b = 0; b < num_bodies(); ++b) {
        const Body& body = bodies_[b];
        const int off = dof_offset_[b];
        if (body.kind == BodyKind::Affine) {
            accel_.segment<3>(off) = gravity;
        } else if (body.kind == BodyKind::Soft) {
            for (int i = 0; i < body.num_nodes(); ++i) accel_.segment<3>(off + 3 * i) = gravity;
        }
    }
    q_hat_ = q_ + solver_.dt * v_ + solver_.dt * solver_.dt * accel_;
    anchors_.clear();
    if (!q_.allFinite()) return;
    x_t_ = collision_positions(q_);
    try {
        const auto stencils = build_stencils(cmesh_, x_t_, candidates(x_t_, nullptr), contact_.dhat);
        anchors_ = update_friction_anchors(stencils, x_t_, contact_, body_mu_);
    } catch (const Error&) {
        anchors_.clear();
    }
}

IterateResult Environment::fail(FailureReason r, std::string detail)
{
    report_.status = StepStatus::Failed;
    report_.reason = r;
    report_.detail = std::move(detail);
    return IterateResult::Failed;
}

IterateResult Environment::check_invariants(const std::vector<Candidate>& swept)
{
    if (!q_.allFinite()) return fail(FailureReason::NonFiniteState, "state became non-finite");
    const Positions xn = collision_positions(q_);
    const double dmin = min_candidate_distance(swept, xn);
    const double vmin = min_tet_volume(q_);
    report_.min_distance = std::min(report_.min_distance, dmin);
    report_.min_volume = std::min(report_.min_volume, vmin);
    auto& mon = InvariantMonitor::global();
    mon.accepted_states.fetch_add(1, std::memory_order_relaxed);
    if (!(dmin > 0.0) || !(vmin > 0.0)) {
        ++report_.invariant_violations;
        mon.violations.fetch_add(1, std::memory_order_relaxed);
        return fail(FailureReason::CcdViolation, "accepted state violates distance or volume invariant");
    }
    return IterateResult::Continue;
}

IterateResult Environment::iterate_impl()
{
    if (!stepping_) throw Error("iterate_once outside begin_step/end_step");
    if (report_.status == StepStatus::Failed) return IterateResult::Failed;
    if (report_.iterations >= solver_.max_iters) {
        return fail(FailureReason::NonConvergence, "iteration budget exhausted");
    }
    if (!q_.allFinite() || !v_.allFinite()) return fail(FailureReason::NonFiniteState, "state has NaN/Inf");

    const double tol = solver_.rel_tol * solver_.dt * ell_;
    try {
        const bool pending = !kinematics_at_target();
        VecX dk = VecX::Zero(n_dofs_);
        if (pending) {
            for (int i = 0; i < n_dofs_; ++i) {
                if (fixed_dof_[i]) dk[i] = target_[i] - q_[i];
            }
        }

        const Positions x = collision_positions(q_);
        const Eval ev = evaluate(q_, candidates(x, nullptr), 2, pending ? &dk : nullptr);
        if (!std::isfinite(ev.energy) || !ev.gradient.allFinite()) {
            return fail(FailureReason::NonFiniteState, "non-finite energy or gradient");
        }
        const VecX rhs = pending ? VecX(ev.gradient + ev.coupling) : ev.gradient;
        LinearSolveReport lrep;
        const VecX p = linear_solve(ev.hessian, rhs, solver_.linear_solver, &lrep);
        if (!lrep.ok) return fail(FailureReason::LinearSolveBreakdown, "linear solve residual too large");
        report_.regularized = report_.regularized || lrep.regularized;

        VecX dq = dk;
        for (std::size_t i = 0; i < free_dofs_.size(); ++i) dq[free_dofs_[i]] = p[i];

        if (pending) {
            // Predictor: prescribed increment plus the linearized free response,
            // filtered by CCD and inversion bounds.
            const Positions dx = collision_displacement(dq);
            const std::vector<Candidate> swept = candidates(x, &dx);
            const double alpha = step_bound(q_, dq, swept);
            q_ += alpha * dq;
            if (alpha >= 1.0) {
                for (int i = 0; i < n_dofs_; ++i) {
                    if (fixed_dof_[i]) q_[i] = target_[i];
                }
            }
            ++report_.iterations;
            ++total_iterations_;
            report_.alpha_history.push_back(alpha);
            return check_invariants(swept);
        }

        const double disp = free_dofs_.empty() ? 0.0 : max_abs_displacement(dq);
        report_.residual = disp / (solver_.dt * ell_);

        // A direction below tolerance ends the solve once an update was taken;
        // the first direction of a step is always applied so that a stiff
        // barrier cannot hold a state that is off balance but within tolerance.
        const bool small = disp < tol;
        if (small && (report_.iterations > 0 || disp == 0.0)) return IterateResult::Converged;

        const Positions dx = collision_displacement(dq);
        const std::vector<Candidate> swept = candidates(x, &dx);
        double alpha = step_bound(q_, dq, swept);
        const double e0 = evaluate(q_, swept, 0).energy;
        VecX qn;
        double e1 = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int k = 0; k < 60 && alpha > 0.0; ++k, alpha *= 0.5) {
            qn = q_ + alpha * dq;
            try {
                e1 = evaluate(qn, swept, 0).energy;
            } catch (const Error&) {
                continue;
            }
            if (e1 <= e0) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (small && kinematics_at_target()) return IterateResult::Converged;
            return fail(FailureReason::NonConvergence, "line search found no decrease");
        }

        q_ = qn;
        ++report_.iterations;
        ++total_iterations_;
        report_.alpha_history.push_back(alpha);
        report_.energy_history.push_back(e1);

        return check_invariants(swept);
    } catch (const Error& err) {
        return fail(FailureReason::CcdViolation, err.what());
    }
    return IterateResult::Continue;
}

IterateResult Environment::iterate_once()
{
    const bool blocked = stepping_ && !kinematics_at_target();
    const IterateResult r = iterate_impl();
    // Numerical breakdown while prescribed motion is still pending means the
    // targets cannot be reached without intersection.
    if (r == IterateResult::Failed && blocked &&
        (report_.reason == FailureReason::LinearSolveBreakdown || report_.reason == FailureReason::NonFiniteState) &&
        q_t_.allFinite()) {
        report_.detail = "prescribed targets unreachable: " + report_.detail;
        report_.reason = FailureReason::NonConvergence;
    }
    return r;
}

StepReport Environment::end_step()
{
    if (!stepping_) throw Error("end_step without begin_step");
    stepping_ = false;
    if (report_.status == StepStatus::Converged) {
        v_ = (q_ - q_t_) / solver_.dt;
    }
    return report_;
}

StepReport Environment::step()
{
    begin_step();
    int lag_updates = 1;
    for (;;) {
        const IterateResult r = iterate_once();
        if (r == IterateResult::Continue) continue;
        if (r == IterateResult::Converged && lag_updates < contact_.friction_iterations) {
            ++lag_updates;
            const Positions x = collision_positions(q_);
            anchors_ = update_friction_anchors(build_stencils(cmesh_, x, candidates(x, nullptr), contact_.dhat),
                                               x, contact_, body_mu_);
            continue;
        }
        break;
    }
    return end_step();
}

}  // namespace grip
