#pragma once

// Log-barrier contact potential and lagged, smoothly mollified friction.
// All derivatives here are over collision-vertex coordinates; the solver maps
// them onto its degrees of freedom.

#include "grip/collision.hpp"
#include "grip/materials.hpp"

namespace grip {

struct ContactParams {
    double kappa = 3e6;   ///< kg s^-2
    double dhat = 1e-3;   ///< m
    double eps_v = 1e-3;  ///< m/s
    int friction_iterations = 1;

    void validate() const;
};

struct BarrierValue {
    double value, d1, d2;
};

/// b(d) = -(d - dhat)^2 ln(d / dhat) on (0, dhat), zero beyond. Throws for d <= 0.
BarrierValue barrier(double d, double dhat);

/// Contribution of one stencil or anchor to the potential, over up to four
/// collision vertices (3 coordinates each, unused slots zero).
struct LocalTerm {
    std::array<int, 4> v = {-1, -1, -1, -1};
    int n = 0;
    double energy = 0.0;
    Vec12 gradient = Vec12::Zero();
    Mat12 hessian = Mat12::Zero();
};

struct PotentialEval {
    double energy = 0.0;
    std::vector<LocalTerm> terms;

    [[nodiscard]] VecX dense_gradient(int num_vertices) const;
    [[nodiscard]] MatX dense_hessian(int num_vertices) const;
};

/// Distance of a stencil at x with derivatives over its local vertex slots.
/// For mollified stencils the slots are the source edge vertices.
struct StencilGeometry {
    std::array<int, 4> slots = {-1, -1, -1, -1};
    int n = 0;
    double distance = 0.0;
    double mollifier = 1.0;
    Vec12 gradient = Vec12::Zero();  ///< of kappa-free energy m * b(d)
    Mat12 hessian = Mat12::Zero();
    double energy = 0.0;             ///< m * b(d)
};
StencilGeometry stencil_barrier(const ContactStencil& s, const Positions& x, double dhat,
                                bool with_hessian = true);

/// energy = kappa * sum m_k b(d_k); per-stencil Hessians projected to PSD.
PotentialEval contact_potential(const std::vector<ContactStencil>& stencils, const Positions& x,
                                const ContactParams& params, bool with_hessian = true);

/// Normal force magnitude kappa * m * |b'(d)| of one stencil at x.
double stencil_force(const ContactStencil& s, const Positions& x, const ContactParams& params);

struct FrictionMollifier {
    double f0, f1;
};
/// f1(y) = -y^2/eps^2 + 2y/eps below eps = eps_v * dt, 1 beyond; f0 is its
/// antiderivative with f0(0) = 0.
FrictionMollifier friction_mollifier(double y, double eps_v, double dt);

struct FrictionAnchor {
    std::array<int, 4> v = {-1, -1, -1, -1};
    int n = 0;
    std::array<double, 4> w = {0, 0, 0, 0};  ///< relative displacement weights
    Eigen::Matrix<double, 3, 2> basis = Eigen::Matrix<double, 3, 2>::Zero();
    Vec3 normal = Vec3::Zero();
    double lambda = 0.0;
    double mu = 0.0;
    std::array<int, 2> bodies = {-1, -1};
};

/// Lagged anchors from a converged state: lambda is the barrier force
/// magnitude, the basis spans the plane orthogonal to the contact normal, and
/// mu is the geometric mean of the two bodies' coefficients.
std::vector<FrictionAnchor> update_friction_anchors(const std::vector<ContactStencil>& stencils,
                                                    const Positions& x, const ContactParams& params,
                                                    const std::vector<double>& body_mu);

/// Tangential relative displacement of an anchor between x_prev and x.
Vec2 anchor_slip(const FrictionAnchor& a, const Positions& x, const Positions& x_prev);

/// sum mu * lambda * f0(|u|) with u the lagged tangential slip.
PotentialEval friction_potential(const std::vector<FrictionAnchor>& anchors, const Positions& x,
                                 const Positions& x_prev, const ContactParams& params, double dt,
                                 bool with_hessian = true);

}  // namespace grip
