#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <set>

#include "figs/mdp.hpp"
#include "figs/table_io.hpp"

using namespace figs;

namespace {
std::shared_ptr<const GainTable> shared_table(double snap = 0.576,
                                              bool full = false) {
  std::vector<std::array<double, 4>> trans;
  std::vector<std::array<double, 2>> yaw;
  if (full) {
    trans = {pole_placement_quadruple(1.5), pole_placement_quadruple(2.5),
             pole_placement_quadruple(4.0)};
    yaw = {pole_placement_yaw(2.0), pole_placement_yaw(4.0)};
  } else {
    trans = {pole_placement_quadruple(2.5)};
    yaw = {pole_placement_yaw(4.0)};
  }
  return std::make_shared<GainTable>(build_gain_table(trans, yaw, snap).table);
}

EnvConfig default_cfg() {
  EnvConfig cfg;
  cfg.reference.r_start = Vec3::Zero();
  cfg.reference.r_goal = Vec3(1, 1, 1);
  cfg.reference.duration = 5.0;
  return cfg;
}
}  // namespace

TEST_CASE("observation layout and scaling", "[mdp]") {
  ObservationScales scales = resolve_scales({}, VehicleParams{});
  CHECK(scales.thrust_dev == Catch::Approx(1.5 * 9.81));

  ReferenceSpec ref;
  ref.duration = 5.0;

  PhysState x;
  x.r = Vec3(1, -2, 3);
  x.v = Vec3(2, 0, -4);
  x.eta = Vec3(0.1, 0.2, -0.3);
  x.eta_rate = Vec3(1, -1, 0.5);
  x.thrust_dev = 2.943;  // 0.2 m g
  x.thrust_rate = 25.0;

  const Vec15 obs = observe(x, 2.5, ref, scales);
  CHECK(obs(0) == Catch::Approx(0.2));
  CHECK(obs(1) == Catch::Approx(-0.4));
  CHECK(obs(2) == Catch::Approx(0.6));
  CHECK(obs(3) == Catch::Approx(0.2));
  CHECK(obs(5) == Catch::Approx(-0.4));
  CHECK(obs(6) == Catch::Approx(0.1));
  CHECK(obs(8) == Catch::Approx(-0.3));
  CHECK(obs(9) == Catch::Approx(0.2));
  CHECK(obs(12) == Catch::Approx(0.2));
  CHECK(obs(13) == Catch::Approx(0.5));
  CHECK(obs(14) == Catch::Approx(0.5));

  // Phase saturates at 1 once the motion is over.
  CHECK(observe(x, 5.0, ref, scales)(14) == 1.0);
  CHECK(observe(x, 12.0, ref, scales)(14) == 1.0);
  CHECK(observe(PhysState{}, 0.0, ref, scales).norm() == 0.0);
}

TEST_CASE("stage reward", "[mdp]") {
  const RewardWeights w;
  ReferenceSpec spec;
  spec.r_start = spec.r_goal = Vec3::Zero();
  const ReferenceSample ref = reference_at(spec, 0.0);

  // Perfect hover with no input and no switch costs nothing.
  CHECK(stage_reward(PhysState{}, ControlInput::Zero(), ref, 3, 3, w) == 0.0);
  // First decision: a_prev < 0 never charges the switch penalty.
  CHECK(stage_reward(PhysState{}, ControlInput::Zero(), ref, 3, -1, w) == 0.0);
  // Same state, switched action: exactly -w_s.
  CHECK(stage_reward(PhysState{}, ControlInput::Zero(), ref, 3, 2, w) ==
        Catch::Approx(-w.w_s));

  // Unit position error in one axis: -w_r.
  PhysState off;
  off.r = Vec3(1, 0, 0);
  CHECK(stage_reward(off, ControlInput::Zero(), ref, 0, 0, w) ==
        Catch::Approx(-w.w_r));

  // Control effort term.
  CHECK(stage_reward(PhysState{}, ControlInput(3, 0, 4, 0), ref, 0, 0, w) ==
        Catch::Approx(-w.w_u * 25.0));

  // Body-rate term uses omega = E(eta) etadot, not etadot itself.
  PhysState spinning;
  spinning.eta = Vec3(0.3, 0.4, 0.0);
  spinning.eta_rate = Vec3(0.5, -0.2, 0.7);
  const Vec3 omega =
      euler_rate_to_body_rate(spinning.eta, spinning.eta_rate);
  CHECK(stage_reward(spinning, ControlInput::Zero(), ref, 0, 0, w) ==
        Catch::Approx(-w.w_eta * spinning.eta.squaredNorm() -
                      w.w_omega * omega.squaredNorm()));

  // The stage reward is never positive.
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    PhysState x;
    for (int j = 0; j < 3; ++j) {
      x.r(j) = rng.uniform(-5, 5);
      x.v(j) = rng.uniform(-5, 5);
      x.eta(j) = rng.uniform(-1, 1);
      x.eta_rate(j) = rng.uniform(-3, 3);
    }
    const ControlInput u(rng.uniform(-9, 9), rng.uniform(-9, 9),
                         rng.uniform(-9, 9), rng.uniform(-9, 9));
    CHECK(stage_reward(x, u, ref, 1, 0, w) <= 0.0);
  }
}

TEST_CASE("safety monitor and priority order", "[mdp]") {
  const SafetyLimits limits{0.60, 5.0, 10.0, 60.0};
  const VehicleParams p;
  ReferenceSpec spec;
  spec.r_start = spec.r_goal = Vec3::Zero();
  const ReferenceSample ref = reference_at(spec, 0.0);

  CHECK_FALSE(check_safety(PhysState{}, ref, limits, p).has_value());

  PhysState tilted;
  tilted.eta(0) = 0.61;
  CHECK(check_safety(tilted, ref, limits, p) == ViolationKind::Attitude);
  tilted.eta(0) = 0.59;
  CHECK_FALSE(check_safety(tilted, ref, limits, p).has_value());

  PhysState lost;
  lost.r = Vec3(6, 0, 0);
  CHECK(check_safety(lost, ref, limits, p) == ViolationKind::Position);

  PhysState fast;
  fast.v = Vec3(0, 11, 0);
  CHECK(check_safety(fast, ref, limits, p) == ViolationKind::Velocity);

  PhysState nan_state;
  nan_state.v(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK(check_safety(nan_state, ref, limits, p) == ViolationKind::NonFinite);

  // z-norm monitor: huge jerk error with small physical errors.
  PhysState twitchy;
  twitchy.eta_rate = Vec3(3, 3, 0);
  twitchy.thrust_rate = 600.0;  // e_j ~ 400 m/s^3 >> 60
  CHECK(check_safety(twitchy, ref, limits, p) == ViolationKind::ZNorm);
  SafetyLimits no_znorm = limits;
  no_znorm.z_norm_delta = 0.0;  // monitor disabled
  CHECK_FALSE(check_safety(twitchy, ref, no_znorm, p).has_value());

  // Priority: a state violating everything reports NonFinite, then with
  // finite values Attitude, then Position, then Velocity.
  PhysState all_bad;
  all_bad.r = Vec3(9, 9, 9);
  all_bad.v = Vec3(20, 0, 0);
  all_bad.eta = Vec3(1.0, 0, 0);
  all_bad.thrust_rate = 1e6;
  PhysState w_nan = all_bad;
  w_nan.r(0) = std::numeric_limits<double>::infinity();
  CHECK(check_safety(w_nan, ref, limits, p) == ViolationKind::NonFinite);
  CHECK(check_safety(all_bad, ref, limits, p) == ViolationKind::Attitude);
  all_bad.eta = Vec3::Zero();
  CHECK(check_safety(all_bad, ref, limits, p) == ViolationKind::Position);
  all_bad.r = Vec3::Zero();
  CHECK(check_safety(all_bad, ref, limits, p) == ViolationKind::Velocity);

  // Attitude beyond the chart edge trips even when the limit is looser.
  SafetyLimits loose = limits;
  loose.max_roll_pitch = 3.0;
  PhysState chart;
  chart.eta(1) = 1.58;
  CHECK(check_safety(chart, ref, loose, p) == ViolationKind::Attitude);
}

TEST_CASE("initial state distribution", "[mdp]") {
  InitDistribution init;
  ReferenceSpec spec;
  spec.r_start = Vec3(1, 2, 3);

  Rng rng(32);
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (int i = 0; i < 10000; ++i) {
    const PhysState x = draw_initial_state(init, spec, rng);
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(x.r(j) - spec.r_start(j)) <= init.pos_box);
      CHECK(std::abs(x.eta(j)) <= init.att_box);
      lo(j) = std::min(lo(j), x.r(j) - spec.r_start(j));
      hi(j) = std::max(hi(j), x.r(j) - spec.r_start(j));
    }
    CHECK(x.v.norm() == 0.0);
    CHECK(x.eta_rate.norm() == 0.0);
    CHECK(x.thrust_dev == 0.0);
    CHECK(x.thrust_rate == 0.0);
  }
  // The box is actually explored end to end.
  CHECK(lo.maxCoeff() < -0.48);
  CHECK(hi.minCoeff() > 0.48);

  // Zero-width boxes pin the draw.
  Rng rng2(33);
  const PhysState pinned = draw_initial_state({0.0, 0.0}, spec, rng2);
  CHECK((pinned.r - spec.r_start).norm() == 0.0);
  CHECK(pinned.eta.norm() == 0.0);

  // Same seed, same draw.
  Rng a(77), b(77);
  CHECK((draw_initial_state(init, spec, a).to_vector() -
         draw_initial_state(init, spec, b).to_vector())
            .norm() == 0.0);
}

TEST_CASE("derived z-norm bound covers the initial box", "[mdp]") {
  const auto table = shared_table();
  const InitDistribution init;
  const VehicleParams p;
  const double delta = derive_z_norm_delta(*table, init, p);
  CHECK(delta > 0.0);

  // Every corner-ish initial state must start inside the bound.
  ReferenceSpec spec;
  spec.r_start = Vec3::Zero();
  spec.r_goal = Vec3(1, 1, 1);
  spec.duration = 5.0;
  Rng rng(34);
  for (int i = 0; i < 500; ++i) {
    const PhysState x = draw_initial_state(init, spec, rng);
    const double zn =
        error_state(x, reference_at(spec, 0.0), p).to_vector().norm();
    CHECK(zn < delta);
  }

  // Monotone in the certificates: a bigger rho can only loosen the bound.
  GainTable inflated = *table;
  for (auto& c : inflated.certificates) c.rho *= 4.0;
  CHECK(derive_z_norm_delta(inflated, init, p) >= delta);
}

TEST_CASE("environment episode accounting", "[mdp]") {
  const auto table = shared_table();
  EnvConfig cfg = default_cfg();
  Environment env(table, cfg);
  CHECK(env.action_count() == 1);
  CHECK(cfg.total_inner_steps() == 1000);
  CHECK(cfg.decisions_per_episode() == 100);

  env.reset(derive_stream(99, "env", 0));
  int decisions = 0;
  double total = 0.0;
  while (!env.done()) {
    const StepOutcome out = env.step(0);
    total += out.reward;
    ++decisions;
    REQUIRE(decisions <= 100);
  }
  CHECK(decisions == 100);
  CHECK(env.decisions() == 100);
  CHECK_FALSE(env.violation().has_value());
  CHECK(env.trajectory().size() == 1000);
  CHECK(env.time() == Catch::Approx(10.0));
  CHECK(total < 0.0);
  CHECK(total > -500.0);  // sane tracking run, nowhere near the penalty

  // Dwell audit: action constant within each 10-step block, time on a strict
  // dt grid, finite states everywhere.
  const auto& log = env.trajectory();
  for (int i = 0; i < 1000; ++i) {
    CHECK(log[i].action == 0);
    CHECK(log[i].t == Catch::Approx(0.01 * i).margin(1e-12));
    CHECK(log[i].state.allFinite());
    CHECK_FALSE(log[i].violation);
  }

  CHECK_THROWS_AS(env.step(0), EpisodeFinished);
  env.reset(1);
  CHECK_THROWS_AS(env.step(1), std::out_of_range);
  CHECK_THROWS_AS(env.step(-1), std::out_of_range);
}

TEST_CASE("environment rewards are nonpositive until termination", "[mdp]") {
  const auto table = shared_table(0.576, /*full=*/true);
  Environment env(table, default_cfg());
  REQUIRE(env.action_count() == 54);

  env.reset(derive_stream(5, "env", 0));
  Rng policy(55);
  double prev_reward = 0.0;
  while (!env.done()) {
    const StepOutcome out = env.step(static_cast<int>(policy.below(54)));
    CHECK(out.reward <= 0.0);
    prev_reward = out.reward;
  }
  CHECK_FALSE(env.violation().has_value());
  CHECK(prev_reward <= 0.0);
}

TEST_CASE("switch penalty shows up exactly once per changed decision",
          "[mdp]") {
  const auto table = shared_table(0.576, /*full=*/true);
  EnvConfig cfg = default_cfg();
  Environment env(table, cfg);

  env.reset_to(PhysState{});  // hover start: tracking costs are tiny at t=0
  const StepOutcome first = env.step(0);   // no previous action: no charge
  const StepOutcome hold = env.step(0);    // unchanged: no charge
  const StepOutcome change = env.step(1);  // charged once for the decision
  CHECK(first.switched == false);
  CHECK(hold.switched == false);
  CHECK(change.switched == true);

  // Count -w_s charges through the per-step log: only the first inner step
  // of the changed decision carries it.
  const auto& log = env.trajectory();
  REQUIRE(log.size() == 30);
  int charged = 0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    PhysState x = PhysState::from_vector(log[i].state);
    const ReferenceSample ref = reference_at(cfg.reference, log[i].t);
    const double without =
        stage_reward(x, Vec4(log[i].u), ref, log[i].action, log[i].action,
                     cfg.weights);
    if (log[i].stage_reward < without - 0.5 * cfg.weights.w_s) ++charged;
  }
  CHECK(charged == 1);
}

TEST_CASE("forced unsafe state terminates before integrating", "[mdp]") {
  const auto table = shared_table();
  EnvConfig cfg = default_cfg();
  Environment env(table, cfg);

  PhysState bad;
  bad.eta(0) = 0.7;  // beyond max_roll_pitch
  env.reset_to(bad);
  const StepOutcome out = env.step(0);
  CHECK(out.done);
  REQUIRE(out.violation.has_value());
  CHECK(*out.violation == ViolationKind::Attitude);
  CHECK(out.reward == Catch::Approx(cfg.weights.terminal_penalty));
  CHECK(env.trajectory().empty());  // nothing was integrated
  CHECK(env.done());
  CHECK(env.decisions() == 1);

  // A monitor violation mid-flight also carries the penalty exactly once.
  PhysState nearly;
  nearly.v = Vec3(9.99, 0, 0);  // will cross max_vel_norm under any gain
  nearly.r = Vec3(-4.9, 0, 0);
  env.reset_to(nearly);
  double total = 0.0;
  while (!env.done()) total += env.step(0).reward;
  REQUIRE(env.violation().has_value());
  CHECK(total <= cfg.weights.terminal_penalty);
  CHECK(total > 2.0 * cfg.weights.terminal_penalty);
}

TEST_CASE("environment is bitwise deterministic", "[mdp]") {
  const auto table = shared_table(0.576, /*full=*/true);
  EnvConfig cfg = default_cfg();
  Environment env_a(table, cfg);
  Environment env_b(table, cfg);

  const Vec15 obs_a = env_a.reset(derive_stream(12345, "env", 7));
  const Vec15 obs_b = env_b.reset(derive_stream(12345, "env", 7));
  CHECK((obs_a - obs_b).norm() == 0.0);

  Rng pick(8);
  for (int k = 0; k < 100 && !env_a.done(); ++k) {
    const int a = static_cast<int>(pick.below(54));
    const StepOutcome oa = env_a.step(a);
    const StepOutcome ob = env_b.step(a);
    REQUIRE(oa.reward == ob.reward);
    REQUIRE((oa.next_observation - ob.next_observation).norm() == 0.0);
    REQUIRE(oa.done == ob.done);
  }
  CHECK((env_a.state().to_vector() - env_b.state().to_vector()).norm() == 0.0);

  // Different episode index, different initial draw.
  Environment env_c(table, cfg);
  const Vec15 obs_c = env_c.reset(derive_stream(12345, "env", 8));
  CHECK((obs_a - obs_c).norm() > 0.0);
}

TEST_CASE("environment rejects invalid configuration", "[mdp]") {
  const auto table = shared_table();
  EnvConfig cfg = default_cfg();
  cfg.dwell_steps = 0;
  CHECK_THROWS_AS(Environment(table, cfg), Error);
  cfg = default_cfg();
  cfg.episode_len = 10.005;  // not a multiple of dt
  CHECK_THROWS_AS(Environment(table, cfg), Error);
  CHECK_THROWS_AS(Environment(std::make_shared<GainTable>(), default_cfg()),
                  EmptyTable);
}
