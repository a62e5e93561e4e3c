#pragma once

// Step-size filters: additive conservative advancement for contact
// primitives and a cubic root bound against tet inversion.

#include "grip/types.hpp"

namespace grip {

/// Scaling applied to every conservative advancement step and to root bounds.
inline constexpr double kCcdScale = 0.9;

/// Largest t in [0, t_max] such that the point-triangle pair moved by
/// x + t * dx never touches. Throws if the pair is touching at t = 0.
double ccd_point_triangle(const std::array<Vec3, 4>& x, const std::array<Vec3, 4>& dx,
                          double t_max = 1.0);

/// Same for an edge pair (a0, a1, b0, b1).
double ccd_edge_edge(const std::array<Vec3, 4>& x, const std::array<Vec3, 4>& dx,
                     double t_max = 1.0);

/// Smallest root of c0 + c1 t + c2 t^2 + c3 t^3 in (0, 1], assuming the value
/// at 0 is positive; returns +inf if the polynomial stays positive.
double first_root_cubic(double c0, double c1, double c2, double c3);

/// Coefficients of det[a + t da | b + t db | c + t dc] in t.
std::array<double, 4> det_cubic(const Mat3& m, const Mat3& dm);

/// Step bound keeping every tet volume positive along x + t * dx. Throws if
/// a tet is already inverted.
double tet_inversion_step_filter(const std::vector<Tet>& tets, const Positions& x,
                                 const Positions& dx);

}  // namespace grip
