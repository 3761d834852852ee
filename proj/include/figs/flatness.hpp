#pragma once

#include <cmath>

#include "figs/dynamics.hpp"
#include "figs/errors.hpp"
#include "figs/reference.hpp"
#include "figs/types.hpp"

// Differential-flatness layer. The flat outputs are (r, psi); with thrust
// carried as a second-order state the snap r^(4) and yaw acceleration are
// algebraic in the input:
//
//   [ r^(4) ]          [ u_T  ]
//   [ psi'' ] = M(x) * [ u_phi   ] + n(x)
//                      [ u_theta ]
//                      [ u_psi   ]
//
// so a desired pseudo-input s is realized exactly by u = M^{-1}(s - n).
// The tracking error in flat coordinates,
//   z = [e_r, e_v, e_a, e_j, psi - psi_d, psidot - psidot_d] in R^14,
// then obeys the linear chain zdot = A_EXT z + B_EXT s - d with
// d = [0,...,0, r_d^(4), 0] entering the jerk-error rows.

namespace figs {

struct ErrorState {
  Vec3 e_r = Vec3::Zero();   // position error
  Vec3 e_v = Vec3::Zero();   // velocity error
  Vec3 e_a = Vec3::Zero();   // acceleration error
  Vec3 e_j = Vec3::Zero();   // jerk error
  double yaw = 0.0;          // psi - psi_d
  double yaw_rate = 0.0;     // psidot - psidot_d

  Vec14 to_vector() const {
    Vec14 z;
    z.segment<3>(0) = e_r;
    z.segment<3>(3) = e_v;
    z.segment<3>(6) = e_a;
    z.segment<3>(9) = e_j;
    z(12) = yaw;
    z(13) = yaw_rate;
    return z;
  }
};

struct InversionMaps {
  Mat4 M;  // input-to-pseudo-input map
  Vec4 n;  // drift contribution
};

namespace detail {

// First and second partials of w(eta) = R(eta) e3 via the elementary-rotation
// product rule. Columns of `jac` are dw/dphi, dw/dtheta, dw/dpsi; `hess[i]`
// holds d2w/(deta_i deta_j) in its columns j.
struct ThrustAxisDerivs {
  Vec3 w;
  Mat3 jac;
  Mat3 hess[3];
};

inline ThrustAxisDerivs thrust_axis_derivs(const Vec3& eta) {
  const Mat3 rx = rot_x(eta(0)), ry = rot_y(eta(1)), rz = rot_z(eta(2));
  const Mat3 dx = drot_x(eta(0)), dy = drot_y(eta(1)), dz = drot_z(eta(2));
  const Mat3 ddx = ddrot_x(eta(0)), ddy = ddrot_y(eta(1)), ddz = ddrot_z(eta(2));
  const Vec3 e3(0, 0, 1);

  ThrustAxisDerivs out;
  out.w = rz * ry * (rx * e3);
  out.jac.col(0) = rz * ry * (dx * e3);
  out.jac.col(1) = rz * dy * (rx * e3);
  out.jac.col(2) = dz * ry * (rx * e3);

  Mat3& hphi = out.hess[0];
  hphi.col(0) = rz * ry * (ddx * e3);
  hphi.col(1) = rz * dy * (dx * e3);
  hphi.col(2) = dz * ry * (dx * e3);
  Mat3& htheta = out.hess[1];
  htheta.col(0) = hphi.col(1);
  htheta.col(1) = rz * ddy * (rx * e3);
  htheta.col(2) = dz * dy * (rx * e3);
  Mat3& hpsi = out.hess[2];
  hpsi.col(0) = hphi.col(2);
  hpsi.col(1) = htheta.col(2);
  hpsi.col(2) = ddz * ry * (rx * e3);
  return out;
}

inline void require_valid_attitude(const Vec3& eta, const char* where) {
  constexpr double kHalfPi = 1.5707963267948966;
  if (!(std::abs(eta(0)) < kHalfPi && std::abs(eta(1)) < kHalfPi)) {
    throw AttitudeSingular(std::string(where) +
                           ": |roll| or |pitch| at or beyond pi/2");
  }
}

}  // namespace detail

// Flat-coordinate tracking error of a physical state against a reference
// sample. Throws AttitudeSingular outside the valid Euler chart.
inline ErrorState error_state(const PhysState& x, const ReferenceSample& ref,
                              const VehicleParams& p) {
  detail::require_valid_attitude(x.eta, "error_state");
  const auto d = detail::thrust_axis_derivs(x.eta);
  const double c = (p.mass * p.gravity + x.thrust_dev) / p.mass;
  const Vec3 a = Vec3(0, 0, -p.gravity) + c * d.w;
  const Vec3 wdot = d.jac * x.eta_rate;
  const Vec3 adot = (x.thrust_rate / p.mass) * d.w + c * wdot;

  ErrorState z;
  z.e_r = x.r - ref.pos;
  z.e_v = x.v - ref.vel;
  z.e_a = a - ref.acc;
  z.e_j = adot - ref.jerk;
  z.yaw = x.eta(2) - ref.yaw;
  z.yaw_rate = x.eta_rate(2) - ref.yaw_rate;
  return z;
}

// M(x), n(x) of the exact input-to-snap map. Differentiating
// a = -g e3 + c w twice (c = (m g + T_dev)/m):
//   r^(4) = (u_T/m) w + 2 (Tdot/m) wdot + c (H + W eta_ddot),
// where W is the Jacobian of w and H the Hessian contraction with eta_rate.
inline InversionMaps inversion_maps(const PhysState& x, const VehicleParams& p) {
  detail::require_valid_attitude(x.eta, "inversion_maps");
  const double total_thrust = p.mass * p.gravity + x.thrust_dev;
  if (!(total_thrust > 0.0)) {
    throw ThrustSingular("inversion_maps: total thrust <= 0");
  }
  const auto d = detail::thrust_axis_derivs(x.eta);
  const double c = total_thrust / p.mass;
  const Vec3 wdot = d.jac * x.eta_rate;
  Vec3 hess_contract = Vec3::Zero();
  for (int i = 0; i < 3; ++i) {
    hess_contract += x.eta_rate(i) * (d.hess[i] * x.eta_rate);
  }

  InversionMaps maps;
  maps.M.setZero();
  maps.M.block<3, 1>(0, 0) = d.w / p.mass;
  maps.M.block<3, 3>(0, 1) = c * d.jac;
  maps.M(3, 3) = 1.0;  // psi'' = u_psi directly
  maps.n.setZero();
  maps.n.head<3>() = 2.0 * (x.thrust_rate / p.mass) * wdot + c * hess_contract;
  return maps;
}

// Solve M(x) u = s - n(x). Throws IllConditioned when cond_2(M) exceeds the
// bound; the residual check is a bug trap for the solve itself.
inline ControlInput invert(const Vec4& s, const PhysState& x,
                           const VehicleParams& p, double cond_bound = 1e6) {
  const InversionMaps maps = inversion_maps(x, p);
  Eigen::JacobiSVD<Mat4> svd(maps.M,
                             Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(3);
  if (!(smin > 0.0) || smax / smin > cond_bound) {
    throw IllConditioned("invert: inversion map condition number too large");
  }
  const Vec4 u = svd.solve(s - maps.n);
  const double resid = (maps.M * u + maps.n - s).norm();
  if (resid > 1e-10 * std::max(1.0, s.norm())) {
    throw InternalDisagreement("invert: solve residual out of tolerance");
  }
  return u;
}

inline Vec4 virtual_input(const ErrorState& z, const Mat4x14& K) {
  return -(K * z.to_vector());
}

// --- extended linear error dynamics ---------------------------------------

// A_EXT: three stacked integrator chains (e_r -> e_v -> e_a -> e_j) plus a
// yaw double integrator. Ten unit entries in total.
inline Mat14 a_ext() {
  Mat14 a = Mat14::Zero();
  a.block<3, 3>(0, 3).setIdentity();
  a.block<3, 3>(3, 6).setIdentity();
  a.block<3, 3>(6, 9).setIdentity();
  a(12, 13) = 1.0;
  return a;
}

// B_EXT: pseudo-input enters the jerk-error rows and the yaw-rate row.
inline Mat14x4 b_ext() {
  Mat14x4 b = Mat14x4::Zero();
  b.block<3, 3>(9, 0).setIdentity();
  b(13, 3) = 1.0;
  return b;
}

inline Mat14 closed_loop(const Mat4x14& K) { return a_ext() - b_ext() * K; }

}  // namespace figs
