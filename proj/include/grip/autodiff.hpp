#pragma once

// Forward-mode second-order automatic differentiation over a fixed number of
// variables. Used for the small closed-form contact distance expressions whose
// exact Hessians are tedious to expand by hand.

#include <Eigen/Core>

#include <cmath>

namespace grip::ad {

template <int N>
struct Dual2 {
    using Grad = Eigen::Matrix<double, N, 1>;
    using Hess = Eigen::Matrix<double, N, N>;

    double v = 0.0;
    Grad g = Grad::Zero();
    Hess h = Hess::Zero();

    Dual2() = default;
    Dual2(double value) : v(value) {}  // NOLINT: implicit constants are intended

    static Dual2 variable(double value, int index)
    {
        Dual2 r(value);
        r.g[index] = 1.0;
        return r;
    }
};

/// Applies a scalar function with known first and second derivative.
template <int N>
Dual2<N> chain(const Dual2<N>& a, double f, double df, double d2f)
{
    Dual2<N> r;
    r.v = f;
    r.g = df * a.g;
    r.h = df * a.h + d2f * (a.g * a.g.transpose());
    return r;
}

template <int N>
Dual2<N> operator+(const Dual2<N>& a, const Dual2<N>& b)
{
    Dual2<N> r;
    r.v = a.v + b.v;
    r.g = a.g + b.g;
    r.h = a.h + b.h;
    return r;
}

template <int N>
Dual2<N> operator-(const Dual2<N>& a, const Dual2<N>& b)
{
    Dual2<N> r;
    r.v = a.v - b.v;
    r.g = a.g - b.g;
    r.h = a.h - b.h;
    return r;
}

template <int N>
Dual2<N> operator-(const Dual2<N>& a)
{
    Dual2<N> r;
    r.v = -a.v;
    r.g = -a.g;
    r.h = -a.h;
    return r;
}

template <int N>
Dual2<N> operator*(const Dual2<N>& a, const Dual2<N>& b)
{
    Dual2<N> r;
    r.v = a.v * b.v;
    r.g = a.v * b.g + b.v * a.g;
    const auto outer = (a.g * b.g.transpose()).eval();
    r.h = a.v * b.h + b.v * a.h + outer + outer.transpose();
    return r;
}

template <int N>
Dual2<N> operator*(double s, const Dual2<N>& a)
{
    Dual2<N> r;
    r.v = s * a.v;
    r.g = s * a.g;
    r.h = s * a.h;
    return r;
}

template <int N>
Dual2<N> operator*(const Dual2<N>& a, double s)
{
    return s * a;
}

template <int N>
Dual2<N> inverse(const Dual2<N>& a)
{
    const double inv = 1.0 / a.v;
    return chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}

template <int N>
Dual2<N> operator/(const Dual2<N>& a, const Dual2<N>& b)
{
    return a * inverse(b);
}

template <int N>
Dual2<N> sqrt(const Dual2<N>& a)
{
    const double s = std::sqrt(a.v);
    return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

template <int N>
Dual2<N> log(const Dual2<N>& a)
{
    return chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v));
}

/// Minimal 3-vector over an arbitrary scalar, enough for distance formulas.
template <typename T>
struct V3 {
    T x, y, z;

    friend V3 operator+(const V3& a, const V3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend V3 operator-(const V3& a, const V3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend V3 operator*(const T& s, const V3& a) { return {s * a.x, s * a.y, s * a.z}; }
};

template <typename T>
T dot(const V3<T>& a, const V3<T>& b)
{
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename T>
V3<T> cross(const V3<T>& a, const V3<T>& b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename T>
T squared_norm(const V3<T>& a)
{
    return dot(a, a);
}

/// Seeds the 3 coordinates of point `slot` as variables 3*slot .. 3*slot+2.
template <int N>
V3<Dual2<N>> seed(const Eigen::Vector3d& p, int slot)
{
    return {Dual2<N>::variable(p.x(), 3 * slot), Dual2<N>::variable(p.y(), 3 * slot + 1),
            Dual2<N>::variable(p.z(), 3 * slot + 2)};
}

}  // namespace grip::ad
