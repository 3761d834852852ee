#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "figs/certify.hpp"
#include "figs/dqn.hpp"
#include "figs/io.hpp"
#include "figs/mdp.hpp"
#include "figs/policy.hpp"
#include "figs/version.hpp"

// Experiment configuration: one JSON file, strict schema (unknown keys are
// rejected, every field has a default), fully re-echoed into every output
// directory so a run is reproducible from its own artifacts.

namespace figs {

struct GainConfig {
  // Explicit (k_p, k_v, k_a, k_j) quadruples; defaults are repeated pole
  // placement at lambda = 1.5 / 2.5 / 4.0 ("soft/medium/aggressive").
  std::vector<std::array<double, 4>> translational_levels{
      pole_placement_quadruple(1.5), pole_placement_quadruple(2.5),
      pole_placement_quadruple(4.0)};
  // (k_psi, k_psi_rate) pairs; poles at mu = 2.0 and 4.0.
  std::vector<std::array<double, 2>> yaw_levels{pole_placement_yaw(2.0),
                                                pole_placement_yaw(4.0)};
  double k_min = 1e-6;
  double k_max = 1e6;
  double epsilon = 0.5;
  double rho_margin = 1.05;
  double rho_floor = 1e-6;
  double hurwitz_margin = 1e-9;
  double cond_bound = 1e6;

  CertifyOptions certify_options() const {
    CertifyOptions o;
    o.epsilon = epsilon;
    o.rho_margin = rho_margin;
    o.rho_floor = rho_floor;
    o.hurwitz_margin = hurwitz_margin;
    return o;
  }
};

struct EpisodeConfig {
  double dt = 0.01;
  double episode_len = 10.0;
  int dwell_steps = 10;
};

struct EvalProtocol {
  int rollouts = 40;
  std::vector<std::string> policies{"greedy", "eps-greedy-0.10",
                                    "eps-greedy-0.30", "random-safe"};
};

struct ExperimentConfig {
  std::uint64_t seed = 12345;
  int threads = 0;  // 0 = all available cores
  VehicleParams vehicle;
  ReferenceSpec reference{Vec3::Zero(), Vec3(1.0, 1.0, 1.0), 5.0};
  GainConfig gains;
  EpisodeConfig episode;
  InitDistribution init;
  RewardWeights reward;
  SafetyLimits safety;
  ObservationScales scales;
  TrainConfig train;
  EvalProtocol eval;

  EnvConfig make_env_config() const {
    EnvConfig e;
    e.vehicle = vehicle;
    e.reference = reference;
    e.dt = episode.dt;
    e.episode_len = episode.episode_len;
    e.dwell_steps = episode.dwell_steps;
    e.gamma = train.gamma;
    e.cond_bound = gains.cond_bound;
    e.weights = reward;
    e.limits = safety;
    e.init = init;
    e.scales = scales;
    return e;
  }
};

namespace detail {

using json = nlohmann::json;

// Strict section reader: every key must be consumed, leftovers are errors.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError("config: '" + path_ + "' must be an object");
    }
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& kv : j_.items()) {
      if (!seen_.count(kv.key())) {
        throw ConfigError("config: unknown key '" + join(kv.key()) + "'");
      }
    }
  }

  bool has(const std::string& key) {
    return j_.contains(key);
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_number()) throw type_error(key, "a number");
      out = v->get<double>();
    }
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_integer()) throw type_error(key, "an integer");
      out = v->get<int>();
    }
  }

  void uint64(const std::string& key, std::uint64_t& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_unsigned() && !v->is_number_integer()) {
        throw type_error(key, "an unsigned integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void size(const std::string& key, std::size_t& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_unsigned() && !v->is_number_integer()) {
        throw type_error(key, "an unsigned integer");
      }
      out = v->get<std::size_t>();
    }
  }

  void vec3(const std::string& key, Vec3& out) {
    if (const json* v = get(key)) {
      if (!v->is_array() || v->size() != 3) {
        throw type_error(key, "an array of 3 numbers");
      }
      for (int i = 0; i < 3; ++i) out(i) = v->at(i).get<double>();
    }
  }

  void int_list(const std::string& key, std::vector<int>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) throw type_error(key, "an array of integers");
      out.clear();
      for (const auto& e : *v) out.push_back(e.get<int>());
    }
  }

  void string_list(const std::string& key, std::vector<std::string>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) throw type_error(key, "an array of strings");
      out.clear();
      for (const auto& e : *v) out.push_back(e.get<std::string>());
    }
  }

  template <std::size_t N>
  void tuple_list(const std::string& key,
                  std::vector<std::array<double, N>>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) throw type_error(key, "an array of tuples");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_array() || e.size() != N) {
          throw type_error(key, "tuples of " + std::to_string(N) + " numbers");
        }
        std::array<double, N> t;
        for (std::size_t i = 0; i < N; ++i) t[i] = e.at(i).get<double>();
        out.push_back(t);
      }
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return Section(empty_object(), join(key));
    return Section(j_.at(key), join(key));
  }

 private:
  static const json& empty_object() {
    static const json e = json::object();
    return e;
  }

  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  ConfigError type_error(const std::string& key, const std::string& want) {
    return ConfigError("config: '" + join(key) + "' must be " + want);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (!(c.vehicle.mass > 0) || !(c.vehicle.gravity > 0)) {
    fail("vehicle mass and gravity must be positive");
  }
  if (!(c.reference.duration > 0)) fail("reference.duration must be positive");
  if (!(c.episode.dt > 0)) fail("env.dt must be positive");
  if (c.episode.dwell_steps < 1) fail("env.dwell_steps must be >= 1");
  const double steps = c.episode.episode_len / c.episode.dt;
  if (std::abs(steps - std::llround(steps)) > 1e-9) {
    fail("env.episode_len must be an integer multiple of env.dt");
  }
  if (!(c.gains.epsilon > 0 && c.gains.epsilon < 1)) {
    fail("gains.epsilon must lie in (0,1)");
  }
  if (!(c.gains.rho_margin > 1.0)) fail("gains.rho_margin must exceed 1");
  if (!(c.gains.rho_floor > 0)) fail("gains.rho_floor must be positive");
  if (!(c.gains.k_min > 0) || !(c.gains.k_max > c.gains.k_min)) {
    fail("gains box requires 0 < k_min < k_max");
  }
  if (c.gains.translational_levels.empty() || c.gains.yaw_levels.empty()) {
    fail("gains level lists must be nonempty");
  }
  const RewardWeights& w = c.reward;
  if (w.w_r < 0 || w.w_v < 0 || w.w_eta < 0 || w.w_omega < 0 || w.w_u < 0 ||
      w.w_s < 0) {
    fail("reward weights must be nonnegative");
  }
  if (!(w.terminal_penalty < 0)) fail("reward.terminal_penalty must be negative");
  if (!(c.safety.max_roll_pitch > 0) || !(c.safety.max_pos_err_norm > 0) ||
      !(c.safety.max_vel_norm > 0) || c.safety.z_norm_delta < 0) {
    fail("safety limits must be positive (z_norm_delta: 0 means derived)");
  }
  if (!(c.train.gamma > 0 && c.train.gamma < 1)) fail("train.gamma must lie in (0,1)");
  if (c.train.batch_size < 1) fail("train.batch_size must be >= 1");
  if (c.train.buffer_capacity < static_cast<std::size_t>(c.train.batch_size)) {
    fail("train.buffer_capacity must be >= batch_size");
  }
  if (c.train.episodes < 1) fail("train.episodes must be >= 1");
  if (!(c.train.eps_start >= 0 && c.train.eps_start <= 1) ||
      !(c.train.eps_end >= 0 && c.train.eps_end <= 1) ||
      c.train.eps_end > c.train.eps_start) {
    fail("train epsilon schedule must satisfy 0 <= eps_end <= eps_start <= 1");
  }
  if (!(c.train.eps_decay_fraction >= 0 && c.train.eps_decay_fraction <= 1)) {
    fail("train.eps_decay_fraction must lie in [0,1]");
  }
  if (c.train.target_sync_interval < 1) {
    fail("train.target_sync_interval must be >= 1");
  }
  if (c.eval.rollouts < 1) fail("eval.rollouts must be >= 1");
  for (const std::string& p : c.eval.policies) parse_policy(p);
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::Section root(j, "");
  root.get("tool_version");  // accepted (echo files are valid configs), ignored
  root.uint64("seed", c.seed);
  root.integer("threads", c.threads);
  {
    detail::Section s = root.child("vehicle");
    s.number("mass", c.vehicle.mass);
    s.number("gravity", c.vehicle.gravity);
    s.vec3("inertia", c.vehicle.inertia_diag);
  }
  {
    detail::Section s = root.child("reference");
    s.vec3("r_start", c.reference.r_start);
    s.vec3("r_goal", c.reference.r_goal);
    s.number("duration", c.reference.duration);
  }
  {
    detail::Section s = root.child("gains");
    s.tuple_list<4>("translational_levels", c.gains.translational_levels);
    s.tuple_list<2>("yaw_levels", c.gains.yaw_levels);
    s.number("k_min", c.gains.k_min);
    s.number("k_max", c.gains.k_max);
    s.number("epsilon", c.gains.epsilon);
    s.number("rho_margin", c.gains.rho_margin);
    s.number("rho_floor", c.gains.rho_floor);
    s.number("hurwitz_margin", c.gains.hurwitz_margin);
    s.number("cond_bound", c.gains.cond_bound);
  }
  {
    detail::Section s = root.child("env");
    s.number("dt", c.episode.dt);
    s.number("episode_len", c.episode.episode_len);
    s.integer("dwell_steps", c.episode.dwell_steps);
  }
  {
    detail::Section s = root.child("init");
    s.number("pos_box", c.init.pos_box);
    s.number("att_box", c.init.att_box);
  }
  {
    detail::Section s = root.child("reward");
    s.number("w_r", c.reward.w_r);
    s.number("w_v", c.reward.w_v);
    s.number("w_eta", c.reward.w_eta);
    s.number("w_omega", c.reward.w_omega);
    s.number("w_u", c.reward.w_u);
    s.number("w_s", c.reward.w_s);
    s.number("terminal_penalty", c.reward.terminal_penalty);
  }
  {
    detail::Section s = root.child("safety");
    s.number("max_roll_pitch", c.safety.max_roll_pitch);
    s.number("max_pos_err_norm", c.safety.max_pos_err_norm);
    s.number("max_vel_norm", c.safety.max_vel_norm);
    s.number("z_norm_delta", c.safety.z_norm_delta);
  }
  {
    detail::Section s = root.child("observation_scales");
    s.number("position", c.scales.position);
    s.number("velocity", c.scales.velocity);
    s.number("angle", c.scales.angle);
    s.number("rate", c.scales.rate);
    s.number("thrust_dev", c.scales.thrust_dev);
    s.number("thrust_rate", c.scales.thrust_rate);
  }
  {
    detail::Section s = root.child("train");
    s.int_list("hidden_sizes", c.train.hidden_sizes);
    s.number("learning_rate", c.train.learning_rate);
    s.integer("batch_size", c.train.batch_size);
    s.number("gamma", c.train.gamma);
    s.integer("target_sync_interval", c.train.target_sync_interval);
    s.number("eps_start", c.train.eps_start);
    s.number("eps_end", c.train.eps_end);
    s.number("eps_decay_fraction", c.train.eps_decay_fraction);
    s.integer("episodes", c.train.episodes);
    s.number("grad_clip_norm", c.train.grad_clip_norm);
    s.size("buffer_capacity", c.train.buffer_capacity);
    s.integer("checkpoint_every", c.train.checkpoint_every);
  }
  {
    detail::Section s = root.child("eval");
    s.integer("rollouts", c.eval.rollouts);
    s.string_list("policies", c.eval.policies);
  }
  validate_config(c);
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["tool_version"] = kVersionString;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["vehicle"] = {{"mass", c.vehicle.mass},
                  {"gravity", c.vehicle.gravity},
                  {"inertia", {c.vehicle.inertia_diag(0), c.vehicle.inertia_diag(1),
                               c.vehicle.inertia_diag(2)}}};
  j["reference"] = {
      {"r_start", {c.reference.r_start(0), c.reference.r_start(1), c.reference.r_start(2)}},
      {"r_goal", {c.reference.r_goal(0), c.reference.r_goal(1), c.reference.r_goal(2)}},
      {"duration", c.reference.duration}};
  j["gains"] = {{"translational_levels", c.gains.translational_levels},
                {"yaw_levels", c.gains.yaw_levels},
                {"k_min", c.gains.k_min},
                {"k_max", c.gains.k_max},
                {"epsilon", c.gains.epsilon},
                {"rho_margin", c.gains.rho_margin},
                {"rho_floor", c.gains.rho_floor},
                {"hurwitz_margin", c.gains.hurwitz_margin},
                {"cond_bound", c.gains.cond_bound}};
  j["env"] = {{"dt", c.episode.dt},
              {"episode_len", c.episode.episode_len},
              {"dwell_steps", c.episode.dwell_steps}};
  j["init"] = {{"pos_box", c.init.pos_box}, {"att_box", c.init.att_box}};
  j["reward"] = {{"w_r", c.reward.w_r},
                 {"w_v", c.reward.w_v},
                 {"w_eta", c.reward.w_eta},
                 {"w_omega", c.reward.w_omega},
                 {"w_u", c.reward.w_u},
                 {"w_s", c.reward.w_s},
                 {"terminal_penalty", c.reward.terminal_penalty}};
  j["safety"] = {{"max_roll_pitch", c.safety.max_roll_pitch},
                 {"max_pos_err_norm", c.safety.max_pos_err_norm},
                 {"max_vel_norm", c.safety.max_vel_norm},
                 {"z_norm_delta", c.safety.z_norm_delta}};
  j["observation_scales"] = {{"position", c.scales.position},
                             {"velocity", c.scales.velocity},
                             {"angle", c.scales.angle},
                             {"rate", c.scales.rate},
                             {"thrust_dev", c.scales.thrust_dev},
                             {"thrust_rate", c.scales.thrust_rate}};
  j["train"] = {{"hidden_sizes", c.train.hidden_sizes},
                {"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size},
                {"gamma", c.train.gamma},
                {"target_sync_interval", c.train.target_sync_interval},
                {"eps_start", c.train.eps_start},
                {"eps_end", c.train.eps_end},
                {"eps_decay_fraction", c.train.eps_decay_fraction},
                {"episodes", c.train.episodes},
                {"grad_clip_norm", c.train.grad_clip_norm},
                {"buffer_capacity", c.train.buffer_capacity},
                {"checkpoint_every", c.train.checkpoint_every}};
  j["eval"] = {{"rollouts", c.eval.rollouts}, {"policies", c.eval.policies}};
  return j;
}

inline std::string config_echo(const ExperimentConfig& c) {
  return config_to_json(c).dump(2) + "\n";
}

inline ExperimentConfig parse_config_text(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    // Map the byte offset to a line number for a usable message.
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < body.size(); ++i) {
      if (body[i] == '\n') ++line;
    }
    throw ConfigError("config: parse error at line " + std::to_string(line) +
                      ": " + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

}  // namespace figs
