#include "grip/materials.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace grip {

namespace {

Mat3 skew(const Vec3& v)
{
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

Mat3 cofactor(const Mat3& f)
{
    Mat3 c;
    c.col(0) = f.col(1).cross(f.col(2));
    c.col(1) = f.col(2).cross(f.col(0));
    c.col(2) = f.col(0).cross(f.col(1));
    return c;
}

Eigen::Matrix<double, 9, 1> vec(const Mat3& m)
{
    return Eigen::Map<const Eigen::Matrix<double, 9, 1>>(m.data());
}

}  // namespace

void MaterialParams::validate() const
{
    if (!(young_modulus > 0.0)) {
        throw Error("young_modulus must be > 0");
    }
    if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5)) {
        throw Error("poisson_ratio must be in [0, 0.5)");
    }
    if (!(density > 0.0)) {
        throw Error("density must be > 0");
    }
    if (!(friction >= 0.0)) {
        throw Error("friction must be >= 0");
    }
}

Lame lame_from_young_poisson(double young, double poisson)
{
    if (!(young > 0.0) || !(poisson >= 0.0 && poisson < 0.5)) {
        throw Error("invalid Young's modulus / Poisson ratio");
    }
    return {young / (2.0 * (1.0 + poisson)),
            young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))};
}

template <int N>
Eigen::Matrix<double, N, N> project_psd(const Eigen::Matrix<double, N, N>& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(0.5 * (m + m.transpose()));
    Eigen::Matrix<double, N, 1> ev = es.eigenvalues();
    if (ev.minCoeff() >= 0.0) {
        return 0.5 * (m + m.transpose());
    }
    ev = ev.cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

template Eigen::Matrix<double, 2, 2> project_psd<2>(const Eigen::Matrix<double, 2, 2>&);
template Eigen::Matrix<double, 9, 9> project_psd<9>(const Eigen::Matrix<double, 9, 9>&);
template Eigen::Matrix<double, 12, 12> project_psd<12>(const Eigen::Matrix<double, 12, 12>&);

MatX project_psd(const MatX& m)
{
    Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (m + m.transpose()));
    VecX ev = es.eigenvalues();
    if (ev.size() == 0 || ev.minCoeff() >= 0.0) {
        return 0.5 * (m + m.transpose());
    }
    ev = ev.cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

TetRest tet_rest(const std::array<Vec3, 4>& rest)
{
    Mat3 dm;
    for (int k = 0; k < 3; ++k) {
        dm.col(k) = rest[k + 1] - rest[0];
    }
    TetRest r;
    r.volume = dm.determinant() / 6.0;
    if (!(r.volume > 0.0)) {
        throw Error("tet rest volume must be positive");
    }
    r.dm_inv = dm.inverse();
    r.dfdx.setZero();
    // F_ij = sum_k (x_{k+1,i} - x_{0,i}) D_kj
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
            const int row_idx = 3 * j + i;
            double s = 0.0;
            for (int k = 0; k < 3; ++k) {
                r.dfdx(row_idx, 3 * (k + 1) + i) = r.dm_inv(k, j);
                s += r.dm_inv(k, j);
            }
            r.dfdx(row_idx, i) = -s;
        }
    }
    return r;
}

Mat3 deformation_gradient(const TetRest& rest, const std::array<Vec3, 4>& x)
{
    Mat3 ds;
    for (int k = 0; k < 3; ++k) {
        ds.col(k) = x[k + 1] - x[0];
    }
    return ds * rest.dm_inv;
}

double neo_hookean_psi(const Mat3& f, const Lame& lame)
{
    const double j = f.determinant();
    const double lam = lame.lambda + lame.mu;
    return 0.5 * lame.mu * (f.squaredNorm() - 3.0) - lame.mu * (j - 1.0) +
           0.5 * lam * (j - 1.0) * (j - 1.0);
}

Mat3 neo_hookean_pk1(const Mat3& f, const Lame& lame)
{
    const double j = f.determinant();
    const double lam = lame.lambda + lame.mu;
    return lame.mu * f + (lam * (j - 1.0) - lame.mu) * cofactor(f);
}

Mat9 neo_hookean_dpdf(const Mat3& f, const Lame& lame, bool project)
{
    const double j = f.determinant();
    const double lam = lame.lambda + lame.mu;
    const auto g = vec(cofactor(f));
    Mat9 hj = Mat9::Zero();
    const Mat3 f0 = skew(f.col(0));
    const Mat3 f1 = skew(f.col(1));
    const Mat3 f2 = skew(f.col(2));
    hj.block<3, 3>(0, 3) = -f2;
    hj.block<3, 3>(0, 6) = f1;
    hj.block<3, 3>(3, 0) = f2;
    hj.block<3, 3>(3, 6) = -f0;
    hj.block<3, 3>(6, 0) = -f1;
    hj.block<3, 3>(6, 3) = f0;
    Mat9 h = lame.mu * Mat9::Identity() + lam * g * g.transpose() + (lam * (j - 1.0) - lame.mu) * hj;
    return project ? project_psd<9>(h) : h;
}

ElementEval neo_hookean_energy(const TetRest& rest, const std::array<Vec3, 4>& x, const Lame& lame,
                               bool project, bool with_hessian)
{
    const Mat3 f = deformation_gradient(rest, x);
    ElementEval e;
    e.energy = rest.volume * neo_hookean_psi(f, lame);
    e.gradient = rest.volume * rest.dfdx.transpose() * vec(neo_hookean_pk1(f, lame));
    if (with_hessian) {
        e.hessian = rest.volume * rest.dfdx.transpose() * neo_hookean_dpdf(f, lame, project) * rest.dfdx;
    }
    return e;
}

ElementEval abd_orthogonality_energy(const Mat3& a, double kappa, double volume, bool project)
{
    const Mat3 s = a.transpose() * a - Mat3::Identity();
    const Mat3 aat = a * a.transpose();
    const double c = kappa * volume;
    ElementEval e;
    e.energy = c * s.squaredNorm();
    const Mat3 g = 4.0 * c * a * s;
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
            e.gradient[3 + 3 * j + i] = g(i, j);
        }
    }
    // d(A S)_ij / dA_kl = delta_ik S_lj + A_il A_kj + delta_lj (A A^T)_ik
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
            for (int l = 0; l < 3; ++l) {
                for (int k = 0; k < 3; ++k) {
                    double v = a(i, l) * a(k, j);
                    if (i == k) {
                        v += s(l, j);
                    }
                    if (l == j) {
                        v += aat(i, k);
                    }
                    e.hessian(3 + 3 * j + i, 3 + 3 * l + k) = 4.0 * c * v;
                }
            }
        }
    }
    if (project) {
        e.hessian = project_psd<12>(e.hessian);
    }
    return e;
}

double von_mises(const Mat3& sigma)
{
    const Mat3 dev = sigma - (sigma.trace() / 3.0) * Mat3::Identity();
    return std::sqrt(1.5 * dev.squaredNorm());
}

StressField compute_stress(const TetMesh& mesh, const Positions& x, const Lame& lame)
{
    StressField out;
    out.cauchy.reserve(mesh.tets.size());
    out.von_mises.reserve(mesh.tets.size());
    for (const Tet& t : mesh.tets) {
        const TetRest rest = tet_rest({row(mesh.rest, t[0]), row(mesh.rest, t[1]), row(mesh.rest, t[2]),
                                       row(mesh.rest, t[3])});
        const Mat3 f = deformation_gradient(rest, {row(x, t[0]), row(x, t[1]), row(x, t[2]), row(x, t[3])});
        const double j = f.determinant();
        Mat3 sigma = neo_hookean_pk1(f, lame) * f.transpose() / j;
        sigma = 0.5 * (sigma + sigma.transpose());
        out.cauchy.push_back(sigma);
        out.von_mises.push_back(von_mises(sigma));
    }
    return out;
}

}  // namespace grip
