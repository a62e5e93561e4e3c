#pragma once

// Per-environment implicit Euler stepper: incremental potential assembly and
// projected Newton with a CCD-filtered backtracking line search.

#include "grip/collision.hpp"
#include "grip/contact.hpp"
#include "grip/materials.hpp"

#include <Eigen/SparseCore>

#include <atomic>
#include <string>

namespace grip {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class LinearSolverKind { Direct, Iterative };

struct SolverParams {
    double dt = 0.01;
    double rel_tol = 1e-3;
    int max_iters = 100;
    LinearSolverKind linear_solver = LinearSolverKind::Direct;
    double abd_stiffness = 1e8;

    void validate() const;
};

struct LinearSolveReport {
    bool ok = false;
    bool regularized = false;
    int refinements = 0;
    double relative_residual = 0.0;
};

/// Solves H p = -g for SPD H. Falls back to a 1e-8 diagonal shift when the
/// factorization or the residual check fails.
VecX linear_solve(const SparseMatrix& h, const VecX& g, LinearSolverKind kind = LinearSolverKind::Direct,
                  LinearSolveReport* report = nullptr);

enum class BodyKind { Soft, Affine, Kinematic };

struct Body {
    std::string name;
    BodyKind kind = BodyKind::Soft;
    MaterialParams material;
    TetMesh mesh;                    ///< volume mesh (soft, affine); may have no tets
    TriSurface surface;              ///< collision surface, body-local vertex ids
    std::vector<int> surface_node;   ///< soft/kinematic: collision vertex -> node
    std::vector<Vec3> node_xbar;     ///< affine: node offsets from the center of mass
    VecX node_mass;                  ///< soft, affine: lumped nodal masses
    std::vector<char> fixed_node;    ///< soft: prescribed nodes
    int link = -1;                   ///< caller label used for force readback

    [[nodiscard]] int num_nodes() const { return static_cast<int>(mesh.vertices.rows()); }
};

Body make_soft_body(std::string name, const TetMesh& mesh, const MaterialParams& material);
Body make_affine_body(std::string name, const TetMesh& mesh, const MaterialParams& material);
Body make_kinematic_body(std::string name, const TriSurface& surface, double friction = 0.5);
/// Single free point mass with a vertex-only collision surface.
Body make_particle(std::string name, const Vec3& position, double mass, double friction = 0.5);

enum class FailureReason { None, NonConvergence, NonFiniteState, CcdViolation, LinearSolveBreakdown };
const char* to_string(FailureReason r);

enum class StepStatus { Converged, Frozen, Failed };

struct StepReport {
    StepStatus status = StepStatus::Converged;
    FailureReason reason = FailureReason::None;
    std::string detail;
    int iterations = 0;          ///< Newton updates taken
    double residual = 0.0;       ///< last |dx|_inf / (dt * ell)
    double min_distance = std::numeric_limits<double>::infinity();
    double min_volume = std::numeric_limits<double>::infinity();
    int invariant_violations = 0;
    bool regularized = false;
    std::vector<double> alpha_history;
    std::vector<double> energy_history;  ///< accepted E values of the free-DOF solve
};

/// Process-wide tally of accepted solver states and invariant breaches.
struct InvariantMonitor {
    std::atomic<long> accepted_states{0};
    std::atomic<long> violations{0};
    static InvariantMonitor& global();
};

enum class IterateResult { Continue, Converged, Failed };

class Environment {
public:
    Environment(SolverParams solver = {}, ContactParams contact = {});

    int add_body(Body body);
    /// Builds DOF maps, masses and collision data. Bodies cannot be added afterwards.
    void finalize();

    // Time stepping. step() = begin_step + iterate_once until done + end_step.
    void begin_step();
    IterateResult iterate_once();
    StepReport end_step();
    StepReport step();

    // Scene control.
    Vec3 gravity = Vec3(0, 0, -9.8);
    /// Prescribed targets for a kinematic body's nodes or a soft body's fixed nodes.
    void set_node_targets(int body, const Positions& targets);
    void set_fixed_nodes(int body, const std::vector<char>& fixed);

    // Queries.
    [[nodiscard]] const Body& body(int b) const { return bodies_[b]; }
    [[nodiscard]] int num_bodies() const { return static_cast<int>(bodies_.size()); }
    [[nodiscard]] Positions node_positions(int b) const;   ///< all nodes of a body
    [[nodiscard]] Positions node_velocities(int b) const;
    [[nodiscard]] TriSurface body_surface(int b) const;     ///< collision surface at the current state
    [[nodiscard]] Vec3 center_of_mass(int b) const;
    [[nodiscard]] double body_mass(int b) const;
    [[nodiscard]] Positions collision_positions() const { return collision_positions(q_); }
    [[nodiscard]] const CollisionMesh& collision_mesh() const { return cmesh_; }
    [[nodiscard]] std::vector<ContactStencil> active_stencils() const;
    [[nodiscard]] const std::vector<FrictionAnchor>& anchors() const { return anchors_; }
    [[nodiscard]] double max_speed() const;  ///< max vertex speed over non-fixed nodes
    [[nodiscard]] Vec3 linear_momentum() const;
    [[nodiscard]] double characteristic_length() const { return ell_; }
    [[nodiscard]] int body_of_collision_vertex(int v) const { return cmesh_.vertex_body[v]; }
    [[nodiscard]] bool kinematics_at_target() const;

    /// Total incremental potential at the current state (for tests).
    [[nodiscard]] double incremental_potential() const;
    /// Gradient over free DOFs at the current state (for tests).
    [[nodiscard]] VecX incremental_gradient() const;
    [[nodiscard]] VecX free_dofs() const;
    void set_free_dofs(const VecX& y);

    const SolverParams& solver_params() const { return solver_; }
    const ContactParams& contact_params() const { return contact_; }
    [[nodiscard]] const VecX& dofs() const { return q_; }
    VecX& mutable_dofs() { return q_; }  ///< fault injection and tests
    VecX& mutable_velocities() { return v_; }
    [[nodiscard]] int body_dof_offset(int b) const { return dof_offset_[b]; }
    [[nodiscard]] const StepReport& current_report() const { return report_; }
    [[nodiscard]] long total_iterations() const { return total_iterations_; }

private:
    struct VertexRef {
        int dof = 0;
        bool affine = false;
        Vec3 xbar = Vec3::Zero();
    };
    struct TetRef {
        int body;
        std::array<int, 4> dof;  ///< base dof of each node
        TetRest rest;
    };
    struct Eval {
        double energy = 0.0;
        VecX gradient;
        SparseMatrix hessian;
        VecX coupling;  ///< H_fk times a prescribed increment
    };

    [[nodiscard]] Positions collision_positions(const VecX& q) const;
    [[nodiscard]] Positions collision_displacement(const VecX& dq) const;
    [[nodiscard]] Eval evaluate(const VecX& q, const std::vector<Candidate>& cands, int order,
                               const VecX* prescribed = nullptr) const;
    [[nodiscard]] std::vector<Candidate> candidates(const Positions& x, const Positions* dx) const;
    [[nodiscard]] double step_bound(const VecX& q, const VecX& dq, const std::vector<Candidate>& cands) const;
    [[nodiscard]] double min_tet_volume(const VecX& q) const;
    IterateResult check_invariants(const std::vector<Candidate>& swept);
    IterateResult iterate_impl();
    IterateResult fail(FailureReason r, std::string detail);
    [[nodiscard]] Vec3 node_position(const VecX& q, int b, int node) const;
    [[nodiscard]] double max_abs_displacement(const VecX& dq) const;

    SolverParams solver_;
    ContactParams contact_;
    std::vector<Body> bodies_;
    bool finalized_ = false;

    std::vector<int> dof_offset_;
    int n_dofs_ = 0;
    std::vector<char> fixed_dof_;
    std::vector<int> free_index_;
    std::vector<int> free_dofs_;
    std::vector<VertexRef> vertex_ref_;
    CollisionMesh cmesh_;
    std::vector<TetRef> tets_;
    std::vector<double> body_mu_;
    VecX mass_diag_;                     ///< soft and kinematic DOFs
    std::vector<Mat12> affine_mass_;     ///< per body (zero for non-affine)
    VecX accel_;                         ///< generalized gravity acceleration per DOF
    double ell_ = 1.0;

    VecX q_, v_, q_t_, q_hat_, target_;
    Positions x_t_;
    std::vector<FrictionAnchor> anchors_;
    StepReport report_;
    bool stepping_ = false;
    long total_iterations_ = 0;
};

}  // namespace grip
