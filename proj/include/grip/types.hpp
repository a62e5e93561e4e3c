#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace grip {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

/// Row-per-vertex position storage (n x 3).
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

using Tri = std::array<int, 3>;
using Tet = std::array<int, 4>;
using Edge = std::array<int, 2>;

/// Thrown for contract violations on inputs (bad meshes, invalid parameters).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rigid transform (rotation + translation), applied as R * x + t.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    [[nodiscard]] Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
    [[nodiscard]] Vec3 apply_inverse(const Vec3& x) const
    {
        return rotation.transpose() * (x - translation);
    }
    [[nodiscard]] Pose operator*(const Pose& o) const
    {
        return {rotation * o.rotation, rotation * o.translation + translation};
    }
};

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void extend(const Vec3& p)
    {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void extend(const Aabb& b)
    {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    void inflate(double r)
    {
        lo.array() -= r;
        hi.array() += r;
    }
    [[nodiscard]] bool overlaps(const Aabb& b) const
    {
        return (lo.array() <= b.hi.array()).all() && (b.lo.array() <= hi.array()).all();
    }
    [[nodiscard]] bool empty() const { return (lo.array() > hi.array()).any(); }
    [[nodiscard]] Vec3 center() const { return 0.5 * (lo + hi); }
    [[nodiscard]] Vec3 extent() const { return hi - lo; }
    [[nodiscard]] double diagonal() const { return empty() ? 0.0 : (hi - lo).norm(); }
};

inline Vec3 row(const Positions& x, int i) { return x.row(i).transpose(); }

}  // namespace grip
