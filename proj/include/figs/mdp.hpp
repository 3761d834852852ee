#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "figs/certify.hpp"
#include "figs/dynamics.hpp"
#include "figs/flatness.hpp"
#include "figs/reference.hpp"
#include "figs/rng.hpp"
#include "figs/types.hpp"

// Decision-level environment. One decision = one certified gain index held
// for dwell_steps inner integration steps of dt each. The policy therefore
// schedules controllers, never raw inputs — by construction there is no code
// path that applies an uncertified gain.

namespace figs {

enum class ViolationKind { Attitude, Position, Velocity, NonFinite, ZNorm };

inline const char* to_string(ViolationKind v) {
  switch (v) {
    case ViolationKind::Attitude: return "attitude";
    case ViolationKind::Position: return "position";
    case ViolationKind::Velocity: return "velocity";
    case ViolationKind::NonFinite: return "non_finite";
    case ViolationKind::ZNorm: return "z_norm";
  }
  return "unknown";
}

struct SafetyLimits {
  double max_roll_pitch = 0.60;   // rad
  double max_pos_err_norm = 5.0;  // m
  double max_vel_norm = 10.0;     // m/s
  // Bound on ||z||. 0 means "derive from the gain table" via
  // derive_z_norm_delta at environment construction.
  double z_norm_delta = 0.0;
};

struct RewardWeights {
  double w_r = 1.0;
  double w_v = 0.1;
  double w_eta = 0.5;
  double w_omega = 0.05;
  double w_u = 1e-4;
  double w_s = 1.0;
  double terminal_penalty = -10000.0;
};

struct ObservationScales {
  double position = 5.0;    // m
  double velocity = 10.0;   // m/s
  double angle = 1.0;       // rad
  double rate = 5.0;        // rad/s
  double thrust_dev = 0.0;  // N; 0 means "resolve to m*g"
  double thrust_rate = 50.0;  // N/s
};

struct InitDistribution {
  double pos_box = 0.5;   // uniform +- per axis around r_start [m]
  double att_box = 0.05;  // uniform +- per Euler angle [rad]
};

struct EnvConfig {
  VehicleParams vehicle;
  ReferenceSpec reference;
  double dt = 0.01;          // s
  double episode_len = 10.0; // s; episode_len/dt must be integral
  int dwell_steps = 10;
  double gamma = 0.99;       // decision-level discount
  double cond_bound = 1e6;   // inversion conditioning guard
  RewardWeights weights;
  SafetyLimits limits;
  InitDistribution init;
  ObservationScales scales;

  int total_inner_steps() const {
    return static_cast<int>(std::llround(episode_len / dt));
  }
  int decisions_per_episode() const {
    return (total_inner_steps() + dwell_steps - 1) / dwell_steps;
  }
};

struct StepOutcome {
  Vec15 next_observation = Vec15::Zero();
  double reward = 0.0;
  bool done = false;
  std::optional<ViolationKind> violation;
  bool switched = false;
};

// One inner integration step, for trajectory CSVs and the dwell audit.
// `t` and `state` are at the moment u was applied; `violation` marks the
// step whose result tripped a monitor.
struct StepRecord {
  double t = 0.0;
  Vec14 state = Vec14::Zero();
  Vec4 u = Vec4::Zero();
  int action = -1;
  double stage_reward = 0.0;
  bool violation = false;
};

// --- stateless pieces -------------------------------------------------------

inline ObservationScales resolve_scales(const ObservationScales& s,
                                        const VehicleParams& p) {
  ObservationScales out = s;
  if (out.thrust_dev == 0.0) out.thrust_dev = p.mass * p.gravity;
  return out;
}

inline Vec15 observe(const PhysState& x, double t, const ReferenceSpec& ref,
                     const ObservationScales& scales) {
  Vec15 obs;
  obs.segment<3>(0) = x.r / scales.position;
  obs.segment<3>(3) = x.v / scales.velocity;
  obs.segment<3>(6) = x.eta / scales.angle;
  obs.segment<3>(9) = x.eta_rate / scales.rate;
  obs(12) = x.thrust_dev / scales.thrust_dev;
  obs(13) = x.thrust_rate / scales.thrust_rate;
  obs(14) = std::min(t / ref.duration, 1.0);
  return obs;
}

// Quadratic stage cost; every term is a penalty, so the reward is always
// <= 0. The switch indicator is charged on a_k != a_prev (a_prev < 0 is the
// "no previous action" sentinel and never charges).
inline double stage_reward(const PhysState& x, const ControlInput& u,
                           const ReferenceSample& ref, int a_k, int a_prev,
                           const RewardWeights& w) {
  const Vec3 e_r = x.r - ref.pos;
  const Vec3 e_v = x.v - ref.vel;
  const Vec3 omega = euler_rate_to_body_rate(x.eta, x.eta_rate);
  double r = -(w.w_r * e_r.squaredNorm() + w.w_v * e_v.squaredNorm() +
               w.w_eta * x.eta.squaredNorm() + w.w_omega * omega.squaredNorm());
  r -= w.w_u * u.squaredNorm();
  if (a_prev >= 0 && a_k != a_prev) r -= w.w_s;
  return r;
}

// Fixed priority: NonFinite > Attitude > Position > Velocity > ZNorm. The
// attitude check also enforces the Euler-chart validity bound, so the z-norm
// computation below it can never hit the chart singularity.
inline std::optional<ViolationKind> check_safety(const PhysState& x,
                                                 const ReferenceSample& ref,
                                                 const SafetyLimits& limits,
                                                 const VehicleParams& p) {
  if (!x.is_finite()) return ViolationKind::NonFinite;
  constexpr double kChartBound = 1.5707963267948966 * 0.999;
  const double tilt = std::max(std::abs(x.eta(0)), std::abs(x.eta(1)));
  if (tilt > limits.max_roll_pitch || tilt >= kChartBound) {
    return ViolationKind::Attitude;
  }
  if ((x.r - ref.pos).norm() > limits.max_pos_err_norm) {
    return ViolationKind::Position;
  }
  if (x.v.norm() > limits.max_vel_norm) return ViolationKind::Velocity;
  if (limits.z_norm_delta > 0.0) {
    const double zn = error_state(x, ref, p).to_vector().norm();
    if (zn > limits.z_norm_delta) return ViolationKind::ZNorm;
  }
  return std::nullopt;
}

inline PhysState draw_initial_state(const InitDistribution& init,
                                    const ReferenceSpec& ref, Rng& rng) {
  PhysState x;
  for (int i = 0; i < 3; ++i) {
    x.r(i) = ref.r_start(i) + rng.uniform(-init.pos_box, init.pos_box);
  }
  for (int i = 0; i < 3; ++i) {
    x.eta(i) = rng.uniform(-init.att_box, init.att_box);
  }
  return x;  // rates, thrust deviation and its rate all zero
}

// Operational bound on ||z|| derived from the certificates: for a fixed
// certified gain, V stays below max(rho, V(z0)), so ||z|| stays inside the
// enclosing ball of that sublevel set. We take the worst case over actions
// and over the configured initial box (||w(eta) - e3|| = sqrt(2(1 - cos phi
// cos theta)) peaks at the box corners). Under dwell switching this is an
// envelope, not a theorem — see the switching test in the certify suite.
inline double derive_z_norm_delta(const GainTable& table,
                                  const InitDistribution& init,
                                  const VehicleParams& p) {
  double ea_max = 0.0;
  for (const double sphi : {-1.0, 1.0}) {
    for (const double stheta : {-1.0, 1.0}) {
      const Vec3 eta(sphi * init.att_box, stheta * init.att_box, 0.0);
      const Vec3 w = thrust_axis(eta);
      ea_max = std::max(ea_max, (w - Vec3(0, 0, 1)).norm());
    }
  }
  ea_max *= p.gravity;
  const double zbar0_sq = 3.0 * init.pos_box * init.pos_box + ea_max * ea_max +
                          init.att_box * init.att_box;
  double delta = 0.0;
  for (const Certificate& c : table.certificates) {
    Eigen::SelfAdjointEigenSolver<Mat14> eig(c.P, Eigen::EigenvaluesOnly);
    const double lam_min = eig.eigenvalues().minCoeff();
    const double lam_max = eig.eigenvalues().maxCoeff();
    const double v_cap = std::max(c.rho, lam_max * zbar0_sq);
    delta = std::max(delta, std::sqrt(v_cap / lam_min));
  }
  return delta;
}

// --- environment ------------------------------------------------------------

class Environment {
 public:
  Environment(std::shared_ptr<const GainTable> table, const EnvConfig& cfg)
      : table_(std::move(table)), cfg_(cfg) {
    if (!table_ || table_->size() == 0) {
      throw EmptyTable("Environment: gain table is empty");
    }
    if (cfg_.dwell_steps < 1) {
      throw Error("Environment: dwell_steps must be >= 1");
    }
    const double ratio = cfg_.episode_len / cfg_.dt;
    if (std::abs(ratio - std::llround(ratio)) > 1e-9) {
      throw Error("Environment: episode_len must be a multiple of dt");
    }
    cfg_.scales = resolve_scales(cfg_.scales, cfg_.vehicle);
    if (cfg_.limits.z_norm_delta == 0.0) {
      cfg_.limits.z_norm_delta =
          derive_z_norm_delta(*table_, cfg_.init, cfg_.vehicle);
    }
    k_mats_.reserve(table_->size());
    for (const GainVector& g : table_->gains) k_mats_.push_back(build_K(g));
    reset_to(PhysState{});
  }

  std::size_t action_count() const { return table_->size(); }
  const EnvConfig& config() const { return cfg_; }
  const GainTable& table() const { return *table_; }
  const PhysState& state() const { return x_; }
  double time() const { return t_; }
  bool done() const { return done_; }
  int decisions() const { return decisions_; }
  std::optional<ViolationKind> violation() const { return violation_; }
  const std::vector<StepRecord>& trajectory() const { return log_; }

  Vec15 reset(std::uint64_t seed) {
    Rng rng(seed);
    return reset_to(draw_initial_state(cfg_.init, cfg_.reference, rng));
  }

  // Deterministic reset to an explicit state (tests, hover baselines).
  Vec15 reset_to(const PhysState& x) {
    x_ = x;
    t_ = 0.0;
    step_count_ = 0;
    decisions_ = 0;
    a_prev_ = -1;
    done_ = false;
    violation_.reset();
    log_.clear();
    return observe(x_, t_, cfg_.reference, cfg_.scales);
  }

  StepOutcome step(int action) {
    if (done_) throw EpisodeFinished("Environment::step: episode is done");
    if (action < 0 || static_cast<std::size_t>(action) >= table_->size()) {
      throw std::out_of_range("Environment::step: action index out of range");
    }
    StepOutcome out;
    out.switched = (a_prev_ >= 0 && action != a_prev_);

    // A state forced outside the safe set (reset_to) trips immediately,
    // before any integration.
    if (auto ev = check_safety(x_, reference_at(cfg_.reference, t_),
                               cfg_.limits, cfg_.vehicle)) {
      finish_violation(*ev, out);
      a_prev_ = action;
      ++decisions_;
      out.next_observation = observe(x_, t_, cfg_.reference, cfg_.scales);
      return out;
    }

    for (int i = 0; i < cfg_.dwell_steps && !done_; ++i) {
      if (step_count_ >= cfg_.total_inner_steps()) break;
      const ReferenceSample ref = reference_at(cfg_.reference, t_);
      StepRecord rec;
      rec.t = t_;
      rec.state = x_.to_vector();
      rec.action = action;
      std::optional<ViolationKind> ev;
      try {
        const ErrorState z = error_state(x_, ref, cfg_.vehicle);
        const Vec4 s = virtual_input(z, k_mats_[action]);
        rec.u = invert(s, x_, cfg_.vehicle, cfg_.cond_bound);
        const int prev_for_penalty = (i == 0) ? a_prev_ : action;
        rec.stage_reward = stage_reward(x_, rec.u, ref, action,
                                        prev_for_penalty, cfg_.weights);
        x_ = step_rk4(x_, rec.u, cfg_.dt, cfg_.vehicle);
        ++step_count_;
        t_ = cfg_.dt * step_count_;
        out.reward += rec.stage_reward;
        ev = check_safety(x_, reference_at(cfg_.reference, t_), cfg_.limits,
                          cfg_.vehicle);
      } catch (const NonFiniteState&) {
        ev = ViolationKind::NonFinite;
      } catch (const AttitudeSingular&) {
        ev = ViolationKind::Attitude;
      } catch (const ThrustSingular&) {
        // Numerical infeasibility of the inversion; there is no dedicated
        // category, and by this point the state is far outside anything the
        // certificates describe.
        ev = ViolationKind::NonFinite;
      } catch (const IllConditioned&) {
        ev = ViolationKind::NonFinite;
      }
      if (ev) {
        finish_violation(*ev, out);
        rec.violation = true;
      }
      log_.push_back(rec);
    }

    if (step_count_ >= cfg_.total_inner_steps()) done_ = true;
    out.done = done_;
    out.violation = violation_;
    out.next_observation = observe(x_, t_, cfg_.reference, cfg_.scales);
    a_prev_ = action;
    ++decisions_;
    return out;
  }

 private:
  void finish_violation(ViolationKind ev, StepOutcome& out) {
    out.reward += cfg_.weights.terminal_penalty;
    out.violation = ev;
    out.done = true;
    done_ = true;
    violation_ = ev;
  }

  std::shared_ptr<const GainTable> table_;
  EnvConfig cfg_;
  std::vector<Mat4x14> k_mats_;
  PhysState x_;
  double t_ = 0.0;
  int step_count_ = 0;
  int decisions_ = 0;
  int a_prev_ = -1;
  bool done_ = false;
  std::optional<ViolationKind> violation_;
  std::vector<StepRecord> log_;
};

}  // namespace figs
