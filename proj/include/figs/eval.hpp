#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "figs/dqn.hpp"
#include "figs/io.hpp"
#include "figs/mdp.hpp"
#include "figs/policy.hpp"

// Evaluation protocol: greedy / epsilon-greedy / random-safe policies, n
// rollouts each with seeds base..base+n-1, reward/switching/attitude
// statistics, and plot-ready CSV emission. Rollouts are embarrassingly
// parallel; per-seed results are deterministic regardless of thread count.

namespace figs {

struct EpisodeStats {
  std::uint64_t seed = 0;
  double cumulative_reward = 0.0;
  int switches = 0;  // decisions with a_k != a_{k-1}
  double peak_abs_roll = 0.0;
  double peak_abs_pitch = 0.0;
  double final_pos_err = 0.0;  // ||r - r_d|| at episode end [m]
  int decisions = 0;
  std::optional<ViolationKind> violation;
};

struct PolicyReport {
  PolicyKind policy;
  std::vector<EpisodeStats> episodes;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double mean_switches = 0.0;
  double mean_peak_pitch = 0.0;
  double worst_peak_pitch = 0.0;
  double mean_final_pos_err = 0.0;
  int unsafe_count = 0;
  int completed_count = 0;
};

// Aggregates are a pure function of the episode list (population std so a
// single episode is well-defined).
inline void compute_aggregates(PolicyReport& rep) {
  const double n = static_cast<double>(rep.episodes.size());
  rep.mean_reward = rep.std_reward = rep.mean_switches = 0.0;
  rep.mean_peak_pitch = rep.worst_peak_pitch = rep.mean_final_pos_err = 0.0;
  rep.unsafe_count = rep.completed_count = 0;
  if (rep.episodes.empty()) return;
  for (const EpisodeStats& e : rep.episodes) {
    rep.mean_reward += e.cumulative_reward;
    rep.mean_switches += e.switches;
    rep.mean_peak_pitch += e.peak_abs_pitch;
    rep.worst_peak_pitch = std::max(rep.worst_peak_pitch, e.peak_abs_pitch);
    rep.mean_final_pos_err += e.final_pos_err;
    if (e.violation) {
      ++rep.unsafe_count;
    } else {
      ++rep.completed_count;
    }
  }
  rep.mean_reward /= n;
  rep.mean_switches /= n;
  rep.mean_peak_pitch /= n;
  rep.mean_final_pos_err /= n;
  double var = 0.0;
  for (const EpisodeStats& e : rep.episodes) {
    const double d = e.cumulative_reward - rep.mean_reward;
    var += d * d;
  }
  rep.std_reward = std::sqrt(var / n);
}

// One full episode. The environment's trajectory log stays available on the
// env afterwards. Violations land in the stats, never as exceptions.
inline EpisodeStats rollout(const PolicyKind& policy, const QNetwork* net,
                            Environment& env, std::uint64_t seed) {
  if (policy.needs_network() && net == nullptr) {
    throw Error("rollout: policy requires a Q-network");
  }
  Vec15 obs = env.reset(seed);
  Rng policy_rng(derive_stream(seed, "policy"));
  EpisodeStats stats;
  stats.seed = seed;

  auto track_peaks = [&stats](const PhysState& x) {
    stats.peak_abs_roll = std::max(stats.peak_abs_roll, std::abs(x.eta(0)));
    stats.peak_abs_pitch = std::max(stats.peak_abs_pitch, std::abs(x.eta(1)));
  };
  track_peaks(env.state());

  while (!env.done()) {
    int action = 0;
    switch (policy.type) {
      case PolicyKind::Type::Greedy:
        action = select_action(q_forward(*net, obs), 0.0, policy_rng);
        break;
      case PolicyKind::Type::EpsGreedy:
        action = select_action(q_forward(*net, obs), policy.epsilon, policy_rng);
        break;
      case PolicyKind::Type::RandomSafe:
        action = static_cast<int>(policy_rng.below(env.action_count()));
        break;
    }
    const StepOutcome out = env.step(action);
    stats.cumulative_reward += out.reward;
    if (out.switched) ++stats.switches;
    track_peaks(env.state());
    obs = out.next_observation;
  }
  stats.decisions = env.decisions();
  stats.violation = env.violation();
  const ReferenceSample ref_end = reference_at(env.config().reference, env.time());
  stats.final_pos_err = (env.state().r - ref_end.pos).norm();
  return stats;
}

inline PolicyReport evaluate(const PolicyKind& policy, const QNetwork* net,
                             std::shared_ptr<const GainTable> table,
                             const EnvConfig& env_cfg, int n,
                             std::uint64_t base_seed, int threads = 0) {
  if (n < 1) throw Error("evaluate: need at least one rollout");
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
  }
  threads = std::min(threads, n);

  PolicyReport rep;
  rep.policy = policy;
  rep.episodes.resize(n);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&]() {
      Environment env(table, env_cfg);
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        rep.episodes[i] = rollout(policy, net, env, base_seed + i);
      }
    });
  }
  for (auto& t : pool) t.join();
  compute_aggregates(rep);
  return rep;
}

// --- report emission --------------------------------------------------------

inline std::string csv_value(double v) { return format_double(v); }

inline std::string summary_csv(const std::vector<PolicyReport>& reports) {
  std::ostringstream out;
  out << "policy,rollouts,mean_cumulative_reward,std_cumulative_reward,"
         "mean_switches,mean_peak_abs_theta_rad,worst_peak_abs_theta_rad,"
         "mean_final_pos_err_m,unsafe_count,completed_count\n";
  for (const PolicyReport& r : reports) {
    out << r.policy.name() << "," << r.episodes.size() << ","
        << csv_value(r.mean_reward) << "," << csv_value(r.std_reward) << ","
        << csv_value(r.mean_switches) << "," << csv_value(r.mean_peak_pitch)
        << "," << csv_value(r.worst_peak_pitch) << ","
        << csv_value(r.mean_final_pos_err) << "," << r.unsafe_count << ","
        << r.completed_count << "\n";
  }
  return out.str();
}

inline std::string episodes_csv(const PolicyReport& rep) {
  std::ostringstream out;
  out << "episode,seed,cumulative_reward,switches,peak_abs_phi_rad,"
         "peak_abs_theta_rad,final_pos_err_m,decisions,violation\n";
  for (std::size_t i = 0; i < rep.episodes.size(); ++i) {
    const EpisodeStats& e = rep.episodes[i];
    out << i << "," << e.seed << "," << csv_value(e.cumulative_reward) << ","
        << e.switches << "," << csv_value(e.peak_abs_roll) << ","
        << csv_value(e.peak_abs_pitch) << "," << csv_value(e.final_pos_err)
        << "," << e.decisions << ","
        << (e.violation ? to_string(*e.violation) : "") << "\n";
  }
  return out.str();
}

inline std::string reward_distribution_csv(
    const std::vector<PolicyReport>& reports) {
  std::ostringstream out;
  out << "policy,episode,cumulative_reward\n";
  for (const PolicyReport& r : reports) {
    for (std::size_t i = 0; i < r.episodes.size(); ++i) {
      out << r.policy.name() << "," << i << ","
          << csv_value(r.episodes[i].cumulative_reward) << "\n";
    }
  }
  return out.str();
}

// Writes summary.csv, per-policy episode CSVs, and the long-format reward
// distribution under out_dir (which must exist).
inline void emit_report(const std::vector<PolicyReport>& reports,
                        const std::string& out_dir) {
  write_text_file(out_dir + "/summary.csv", summary_csv(reports));
  write_text_file(out_dir + "/reward_distribution.csv",
                  reward_distribution_csv(reports));
  for (const PolicyReport& r : reports) {
    write_text_file(out_dir + "/episodes_" + r.policy.file_tag() + ".csv",
                    episodes_csv(r));
  }
}

// --- per-rollout trajectory emission ------------------------------------------

// Plot-ready CSVs for one episode's inner-step log: full trajectory, gain
// schedule, flat error states, position vs desired, Euler angles, controls,
// per-step reward. States in the log are pre-step, so they all lie inside
// the Euler chart and error_state below cannot throw.
inline void write_rollout_csvs(const std::vector<StepRecord>& log,
                               const GainTable& table, const EnvConfig& cfg,
                               const std::string& out_dir,
                               const std::string& prefix = "rollout") {
  static const char* kStateCols =
      "r_x,r_y,r_z,v_x,v_y,v_z,phi,theta,psi,phi_rate,theta_rate,psi_rate,"
      "thrust_dev,thrust_rate";
  std::ostringstream traj, gains, errors, pos, euler, controls, reward;
  traj << "t," << kStateCols
       << ",u_T,u_phi,u_theta,u_psi,action,stage_reward,violation\n";
  gains << "t,action";
  for (int j = 1; j <= 14; ++j) gains << ",k" << j;
  gains << "\n";
  errors << "t,e_r_x,e_r_y,e_r_z,e_v_x,e_v_y,e_v_z,e_a_x,e_a_y,e_a_z,"
            "e_j_x,e_j_y,e_j_z,yaw_err,yaw_rate_err,z_norm\n";
  pos << "t,r_x,r_y,r_z,r_d_x,r_d_y,r_d_z\n";
  euler << "t,phi,theta,psi\n";
  controls << "t,u_T,u_phi,u_theta,u_psi\n";
  reward << "t,stage_reward\n";

  for (const StepRecord& rec : log) {
    const std::string t = csv_value(rec.t);
    const PhysState x = PhysState::from_vector(rec.state);
    const ReferenceSample ref = reference_at(cfg.reference, rec.t);
    const Vec14 z = error_state(x, ref, cfg.vehicle).to_vector();

    traj << t;
    for (int j = 0; j < 14; ++j) traj << "," << csv_value(rec.state(j));
    for (int j = 0; j < 4; ++j) traj << "," << csv_value(rec.u(j));
    traj << "," << rec.action << "," << csv_value(rec.stage_reward) << ","
         << (rec.violation ? 1 : 0) << "\n";

    gains << t << "," << rec.action;
    const Vec14& k = table.gains[rec.action].k;
    for (int j = 0; j < 14; ++j) gains << "," << csv_value(k(j));
    gains << "\n";

    errors << t;
    for (int j = 0; j < 14; ++j) errors << "," << csv_value(z(j));
    errors << "," << csv_value(z.norm()) << "\n";

    pos << t << "," << csv_value(x.r(0)) << "," << csv_value(x.r(1)) << ","
        << csv_value(x.r(2)) << "," << csv_value(ref.pos(0)) << ","
        << csv_value(ref.pos(1)) << "," << csv_value(ref.pos(2)) << "\n";
    euler << t << "," << csv_value(x.eta(0)) << "," << csv_value(x.eta(1))
          << "," << csv_value(x.eta(2)) << "\n";
    controls << t << "," << csv_value(rec.u(0)) << "," << csv_value(rec.u(1))
             << "," << csv_value(rec.u(2)) << "," << csv_value(rec.u(3))
             << "\n";
    reward << t << "," << csv_value(rec.stage_reward) << "\n";
  }

  write_text_file(out_dir + "/" + prefix + "_trajectory.csv", traj.str());
  write_text_file(out_dir + "/" + prefix + "_gain_schedule.csv", gains.str());
  write_text_file(out_dir + "/" + prefix + "_error_states.csv", errors.str());
  write_text_file(out_dir + "/" + prefix + "_position_tracking.csv", pos.str());
  write_text_file(out_dir + "/" + prefix + "_euler_angles.csv", euler.str());
  write_text_file(out_dir + "/" + prefix + "_controls.csv", controls.str());
  write_text_file(out_dir + "/" + prefix + "_step_reward.csv", reward.str());
}

}  // namespace figs
