#pragma once

#include "grip/mesh.hpp"

namespace grip {

struct MaterialParams {
    double young_modulus = 1e6;  ///< Pa
    double poisson_ratio = 0.3;
    double density = 1000.0;     ///< kg/m^3
    double friction = 0.5;

    /// Throws Error on E <= 0, nu outside [0, 0.5), density <= 0 or mu < 0.
    void validate() const;
};

struct Lame {
    double mu = 0.0;
    double lambda = 0.0;
};

/// Throws for nu >= 0.5 or nu < 0 or E <= 0.
Lame lame_from_young_poisson(double young, double poisson);

using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

/// Precomputed rest data of one tet.
struct TetRest {
    Mat3 dm_inv = Mat3::Identity();
    double volume = 0.0;
    Eigen::Matrix<double, 9, 12> dfdx;  ///< d vec(F) / d x, vec column-major
};
TetRest tet_rest(const std::array<Vec3, 4>& rest);

struct ElementEval {
    double energy = 0.0;
    Vec12 gradient = Vec12::Zero();
    Mat12 hessian = Mat12::Zero();
};

/// Deformation gradient of a tet.
Mat3 deformation_gradient(const TetRest& rest, const std::array<Vec3, 4>& x);

/// Stable Neo-Hookean density with Lame-matched parameters:
/// psi = mu/2 (I_C - 3) - mu (J - 1) + (lambda + mu)/2 (J - 1)^2.
double neo_hookean_psi(const Mat3& f, const Lame& lame);
Mat3 neo_hookean_pk1(const Mat3& f, const Lame& lame);
/// d^2 psi / d vec(F)^2; projected to PSD by eigenvalue clamping if asked.
Mat9 neo_hookean_dpdf(const Mat3& f, const Lame& lame, bool project);

/// Volume-weighted element energy, gradient and (optionally projected) Hessian.
ElementEval neo_hookean_energy(const TetRest& rest, const std::array<Vec3, 4>& x, const Lame& lame,
                               bool project = true, bool with_hessian = true);

/// Orthogonality potential kappa * volume * ||A^T A - I||_F^2 over the 12
/// affine DOFs ordered (p, A col 0, A col 1, A col 2). Independent of p.
ElementEval abd_orthogonality_energy(const Mat3& a, double kappa, double volume,
                                     bool project = true);

/// Symmetric eigenvalue clamp to >= 0.
template <int N>
Eigen::Matrix<double, N, N> project_psd(const Eigen::Matrix<double, N, N>& m);
MatX project_psd(const MatX& m);

struct StressField {
    std::vector<Mat3> cauchy;
    std::vector<double> von_mises;
};

double von_mises(const Mat3& sigma);

/// Cauchy stress sigma = P F^T / J per tet, and its von Mises scalar.
StressField compute_stress(const TetMesh& mesh, const Positions& x, const Lame& lame);

}  // namespace grip
