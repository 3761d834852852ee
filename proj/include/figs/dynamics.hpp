#pragma once

#include <cmath>

#include "figs/errors.hpp"
#include "figs/types.hpp"

// Rigid-body quadcopter model in the control-affine form
//
//   xdot = f0(x) + G0 u,   x in R^14,
//
// with x = [r, v, eta, eta_rate, T_dev, T_rate]. Attitude is ZYX Euler
// (roll phi, pitch theta, yaw psi), thrust is carried as a deviation from
// the hover value m*g together with its rate, and the input
// u = [u_T, u_phi, u_theta, u_psi] drives the thrust second derivative and
// the Euler-angle accelerations directly.

namespace figs {

struct VehicleParams {
  double mass = 1.5;      // kg
  double gravity = 9.81;  // m/s^2
  Vec3 inertia_diag{0.02, 0.02, 0.04};  // kg m^2 (diagonal body inertia)
};

using ControlInput = Vec4;  // [u_T, u_phi, u_theta, u_psi]

struct PhysState {
  Vec3 r = Vec3::Zero();         // position, world frame [m]
  Vec3 v = Vec3::Zero();         // velocity, world frame [m/s]
  Vec3 eta = Vec3::Zero();       // [phi, theta, psi] [rad]
  Vec3 eta_rate = Vec3::Zero();  // Euler-angle rates [rad/s]
  double thrust_dev = 0.0;       // T_dev: total thrust minus m*g [N]
  double thrust_rate = 0.0;      // d/dt T_dev [N/s]

  Vec14 to_vector() const {
    Vec14 x;
    x.segment<3>(0) = r;
    x.segment<3>(3) = v;
    x.segment<3>(6) = eta;
    x.segment<3>(9) = eta_rate;
    x(12) = thrust_dev;
    x(13) = thrust_rate;
    return x;
  }

  static PhysState from_vector(const Vec14& x) {
    PhysState s;
    s.r = x.segment<3>(0);
    s.v = x.segment<3>(3);
    s.eta = x.segment<3>(6);
    s.eta_rate = x.segment<3>(9);
    s.thrust_dev = x(12);
    s.thrust_rate = x(13);
    return s;
  }

  bool is_finite() const { return to_vector().allFinite(); }
};

// --- elementary rotations and their angle derivatives ---------------------

inline Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

inline Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

inline Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

inline Mat3 drot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return m;
}

inline Mat3 drot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return m;
}

inline Mat3 drot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return m;
}

// Second angle derivatives: dd/da^2 R(a) = -R(a) + (fixed-axis projector).
inline Mat3 ddrot_x(double a) { return -rot_x(a) + Vec3(1, 0, 0).asDiagonal().toDenseMatrix(); }
inline Mat3 ddrot_y(double a) { return -rot_y(a) + Vec3(0, 1, 0).asDiagonal().toDenseMatrix(); }
inline Mat3 ddrot_z(double a) { return -rot_z(a) + Vec3(0, 0, 1).asDiagonal().toDenseMatrix(); }

// World-from-body rotation, ZYX convention: R = Rz(psi) Ry(theta) Rx(phi).
inline Mat3 rotation_matrix(const Vec3& eta) {
  return rot_z(eta(2)) * rot_y(eta(1)) * rot_x(eta(0));
}

// Thrust axis in world frame, w(eta) = R(eta) e3.
inline Vec3 thrust_axis(const Vec3& eta) { return rotation_matrix(eta).col(2); }

// E(eta): maps Euler-angle rates to body angular velocity, omega = E etadot.
// E(0) = I; singular only at |theta| = pi/2 (its inverse, that is — E itself
// just loses rank there).
inline Mat3 euler_rate_matrix(const Vec3& eta) {
  const double phi = eta(0), theta = eta(1);
  const double cphi = std::cos(phi), sphi = std::sin(phi);
  const double ctheta = std::cos(theta), stheta = std::sin(theta);
  Mat3 e;
  e << 1, 0, -stheta,
       0, cphi, sphi * ctheta,
       0, -sphi, cphi * ctheta;
  return e;
}

inline Vec3 euler_rate_to_body_rate(const Vec3& eta, const Vec3& eta_rate) {
  return euler_rate_matrix(eta) * eta_rate;
}

// --- vector field ----------------------------------------------------------

// Mass-normalized translational acceleration: a = -g e3 + ((m g + T)/m) w.
inline Vec3 acceleration(const PhysState& x, const VehicleParams& p) {
  const double c = (p.mass * p.gravity + x.thrust_dev) / p.mass;
  return Vec3(0, 0, -p.gravity) + c * thrust_axis(x.eta);
}

// Drift term f0(x): the dynamics under zero input.
inline Vec14 drift(const PhysState& x, const VehicleParams& p) {
  Vec14 f = Vec14::Zero();
  f.segment<3>(0) = x.v;
  f.segment<3>(3) = acceleration(x, p);
  f.segment<3>(6) = x.eta_rate;
  // eta_rate rows stay zero: angular acceleration is input-driven.
  f(12) = x.thrust_rate;
  // thrust_rate row stays zero: T_ddot is input-driven.
  return f;
}

// Adds G0 u onto a drift evaluation: u_phi/theta/psi feed the Euler
// accelerations, u_T feeds the thrust second derivative.
inline Vec14 apply_input(const Vec14& xdot_drift, const ControlInput& u) {
  Vec14 f = xdot_drift;
  f.segment<3>(9) += u.segment<3>(1);
  f(13) += u(0);
  return f;
}

// One RK4 step under zero-order-hold input. Throws NonFiniteState if the
// result picked up NaN/Inf (integrator blow-up is a detected event, never
// silent garbage).
inline PhysState step_rk4(const PhysState& x, const ControlInput& u, double dt,
                          const VehicleParams& p) {
  const auto f = [&](const Vec14& xv) {
    return apply_input(drift(PhysState::from_vector(xv), p), u);
  };
  const Vec14 x0 = x.to_vector();
  const Vec14 k1 = f(x0);
  const Vec14 k2 = f(x0 + 0.5 * dt * k1);
  const Vec14 k3 = f(x0 + 0.5 * dt * k2);
  const Vec14 k4 = f(x0 + dt * k3);
  const Vec14 x1 = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!x1.allFinite()) {
    throw NonFiniteState("step_rk4: non-finite state after integration step");
  }
  return PhysState::from_vector(x1);
}

}  // namespace figs
