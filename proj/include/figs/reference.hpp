#pragma once

#include <cmath>
#include <stdexcept>

#include "figs/types.hpp"

// Minimum-style quintic point-to-point reference. The scalar profile
// sigma(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5 has zero velocity/acceleration
// at both ends; each position axis follows r_start + sigma * (r_goal -
// r_start), and the trajectory holds r_goal with all derivatives zero after
// the transfer time. Desired yaw is identically zero.

namespace figs {

struct ReferenceSpec {
  Vec3 r_start = Vec3::Zero();
  Vec3 r_goal = Vec3::Zero();
  double duration = 5.0;  // transfer time T_f [s], > 0
};

struct ReferenceSample {
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 acc = Vec3::Zero();
  Vec3 jerk = Vec3::Zero();
  Vec3 snap = Vec3::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
};

struct QuinticProfile {
  double s, ds, d2s, d3s, d4s;  // value and first four tau-derivatives
};

inline QuinticProfile quintic_profile(double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw std::domain_error("quintic_profile: tau outside [0,1]");
  }
  const double t2 = tau * tau, t3 = t2 * tau, t4 = t3 * tau, t5 = t4 * tau;
  QuinticProfile q;
  q.s = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
  q.ds = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
  q.d2s = 60.0 * tau - 180.0 * t2 + 120.0 * t3;
  q.d3s = 60.0 - 360.0 * tau + 360.0 * t2;
  q.d4s = -360.0 + 720.0 * tau;
  return q;
}

inline ReferenceSample reference_at(const ReferenceSpec& spec, double t) {
  if (!(t >= 0.0)) throw std::domain_error("reference_at: t must be >= 0");
  ReferenceSample out;
  if (t >= spec.duration) {
    out.pos = spec.r_goal;
    return out;  // hold phase: all derivatives zero
  }
  const double tf = spec.duration;
  const QuinticProfile q = quintic_profile(t / tf);
  const Vec3 d = spec.r_goal - spec.r_start;
  out.pos = spec.r_start + q.s * d;
  out.vel = (q.ds / tf) * d;
  out.acc = (q.d2s / (tf * tf)) * d;
  out.jerk = (q.d3s / (tf * tf * tf)) * d;
  out.snap = (q.d4s / (tf * tf * tf * tf)) * d;
  return out;
}

// Tight per-axis-norm bound on ||snap||: the profile's fourth derivative
// peaks at |d4s| = 360 (at both endpoints), so sup_t ||r_d^(4)(t)|| =
// 360 ||r_goal - r_start|| / T_f^4.
inline double snap_bound(const ReferenceSpec& spec) {
  const double tf4 = std::pow(spec.duration, 4);
  return 360.0 * (spec.r_goal - spec.r_start).norm() / tf4;
}

}  // namespace figs
