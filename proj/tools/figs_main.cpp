// figs: forward-invariance-certified gain scheduling workbench.
//
//   figs certify --out DIR [--config FILE] [options]
//   figs train   --out DIR --table FILE [--config FILE] [options]
//   figs eval    --out DIR --table FILE --checkpoint FILE [options]
//   figs rollout --out DIR --table FILE --checkpoint FILE [options]
//
// Every subcommand writes a fully resolved config echo (config_echo.json,
// including the tool version) into its output directory; outputs carry no
// timestamps, so reruns with the same seed are byte-identical.

#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "figs/config.hpp"
#include "figs/eval.hpp"
#include "figs/table_io.hpp"
#include "figs/version.hpp"

namespace {

namespace fs = std::filesystem;
using namespace figs;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Experiment config (JSON)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "Output directory")->required();
  cmd->add_option("--seed", args.seed, "Root seed override")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--threads", args.threads, "Worker threads (0 = all cores)");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
  ExperimentConfig cfg =
      args.config_path.empty() ? ExperimentConfig{} : load_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  if (args.threads >= 0) cfg.threads = args.threads;
  return cfg;
}

// Echo with the table-derived safety bound resolved, so the echo alone
// reproduces the run.
void write_echo(const ExperimentConfig& cfg, const GainTable* table,
                const std::string& out_dir) {
  ExperimentConfig resolved = cfg;
  if (table != nullptr && resolved.safety.z_norm_delta == 0.0) {
    resolved.safety.z_norm_delta =
        derive_z_norm_delta(*table, resolved.init, resolved.vehicle);
  }
  write_text_file(out_dir + "/config_echo.json", config_echo(resolved));
}

void require_table_matches_config(const GainTable& table,
                                  const ExperimentConfig& cfg) {
  const double snap = snap_bound(cfg.reference);
  if (table.snap_bound != snap) {
    throw ConfigError(
        "gain table was certified for snap bound " +
        format_double(table.snap_bound) + " but the config's reference gives " +
        format_double(snap) + "; re-run certify");
  }
  if (table.translational_levels != cfg.gains.translational_levels ||
      table.yaw_levels != cfg.gains.yaw_levels) {
    throw ConfigError("gain table level definitions differ from the config; "
                      "re-run certify");
  }
}

std::string certification_report_csv(const GainTableBuild& build) {
  std::ostringstream out;
  out << "candidate,certified,reason";
  for (int j = 1; j <= 14; ++j) out << ",k" << j;
  out << ",alpha,beta,rho,lyap_residual\n";
  std::size_t action = 0;
  for (std::size_t i = 0; i < build.candidates.size(); ++i) {
    const CandidateOutcome& c = build.candidates[i];
    out << i << "," << (c.certified ? 1 : 0) << "," << c.reason;
    for (int j = 0; j < 14; ++j) out << "," << format_double(c.gain.k(j));
    if (c.certified) {
      const Certificate& cert = build.table.certificates[action++];
      out << "," << format_double(cert.alpha) << "," << format_double(cert.beta)
          << "," << format_double(cert.rho) << ","
          << format_double(cert.lyap_residual);
    } else {
      out << ",,,,";
    }
    out << "\n";
  }
  return out.str();
}

int cmd_certify(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  fs::create_directories(args.out_dir);
  GainTableBuild build = build_gain_table(
      cfg.gains.translational_levels, cfg.gains.yaw_levels,
      snap_bound(cfg.reference), cfg.gains.certify_options(), cfg.gains.k_min,
      cfg.gains.k_max);
  save_gain_table(build.table, args.out_dir + "/gain_table.txt");
  write_text_file(args.out_dir + "/certification_report.csv",
                  certification_report_csv(build));
  write_echo(cfg, &build.table, args.out_dir);
  std::cout << "certified " << build.table.size() << "/"
            << build.candidates.size() << " candidates; table hash "
            << build.table.content_hash << "\n";
  return 0;
}

std::string curve_csv(const std::vector<EpisodePoint>& curve) {
  std::ostringstream out;
  out << "episode,cumulative_reward,epsilon,loss_mean\n";
  for (const EpisodePoint& p : curve) {
    out << p.episode << "," << format_double(p.cumulative_reward) << ","
        << format_double(p.epsilon) << "," << format_double(p.loss_mean)
        << "\n";
  }
  return out.str();
}

int cmd_train(const CommonArgs& args, const std::string& table_path,
              int episodes_override) {
  ExperimentConfig cfg = resolve_config(args);
  if (episodes_override > 0) cfg.train.episodes = episodes_override;
  fs::create_directories(args.out_dir);
  auto table = std::make_shared<GainTable>(load_gain_table(table_path));
  require_table_matches_config(*table, cfg);
  write_echo(cfg, table.get(), args.out_dir);

  const std::string echo = config_echo(cfg);
  const std::string table_hash = table->content_hash;
  const CheckpointCallback cb = [&](int episodes_done, const QNetwork& net) {
    save_checkpoint(args.out_dir + "/checkpoint_ep" +
                        std::to_string(episodes_done) + ".txt",
                    net, table_hash, echo);
  };
  const TrainResult result =
      train(table, cfg.make_env_config(), cfg.train, cfg.seed, cb);
  save_checkpoint(args.out_dir + "/checkpoint.txt", result.net, table_hash,
                  echo);
  write_text_file(args.out_dir + "/training_curve.csv", curve_csv(result.curve));
  std::cout << "trained " << cfg.train.episodes << " episodes, "
            << result.gradient_steps << " gradient steps, "
            << result.target_syncs << " target syncs\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& table_path,
             const std::string& checkpoint_path, int rollouts_override,
             const std::vector<std::string>& policies_override) {
  ExperimentConfig cfg = resolve_config(args);
  if (rollouts_override > 0) cfg.eval.rollouts = rollouts_override;
  if (!policies_override.empty()) {
    cfg.eval.policies.clear();
    for (const std::string& tok : policies_override) {
      std::stringstream ss(tok);
      std::string part;
      while (std::getline(ss, part, ',')) {
        if (!part.empty()) cfg.eval.policies.push_back(part);
      }
    }
  }
  validate_config(cfg);
  fs::create_directories(args.out_dir);

  auto table = std::make_shared<GainTable>(load_gain_table(table_path));
  require_table_matches_config(*table, cfg);
  const LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.table_hash != table->content_hash) {
    throw HashMismatch("checkpoint was trained against table " +
                       ckpt.table_hash + " but " + table_path + " hashes to " +
                       table->content_hash);
  }
  if (ckpt.net.output_size() != static_cast<int>(table->size())) {
    throw ShapeMismatch("checkpoint action count != table size");
  }
  write_echo(cfg, table.get(), args.out_dir);

  const EnvConfig env_cfg = cfg.make_env_config();
  const std::uint64_t base_seed = derive_stream(cfg.seed, "eval");
  std::vector<PolicyReport> reports;
  for (const std::string& name : cfg.eval.policies) {
    const PolicyKind policy = parse_policy(name);
    reports.push_back(evaluate(policy, &ckpt.net, table, env_cfg,
                               cfg.eval.rollouts, base_seed, cfg.threads));
  }
  emit_report(reports, args.out_dir);
  // Representative rollout per policy (seed = base) for the figure CSVs.
  for (const PolicyReport& rep : reports) {
    Environment env(table, env_cfg);
    rollout(rep.policy, &ckpt.net, env, base_seed);
    write_rollout_csvs(env.trajectory(), *table, env_cfg, args.out_dir,
                       "rollout_" + rep.policy.file_tag());
  }
  for (const PolicyReport& rep : reports) {
    std::cout << rep.policy.name() << ": mean reward "
              << format_double(rep.mean_reward) << ", mean switches "
              << format_double(rep.mean_switches) << ", unsafe "
              << rep.unsafe_count << "/" << rep.episodes.size() << "\n";
  }
  return 0;
}

int cmd_rollout(const CommonArgs& args, const std::string& table_path,
                const std::string& checkpoint_path, int index) {
  const ExperimentConfig cfg = resolve_config(args);
  fs::create_directories(args.out_dir);
  auto table = std::make_shared<GainTable>(load_gain_table(table_path));
  require_table_matches_config(*table, cfg);
  const LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.table_hash != table->content_hash) {
    throw HashMismatch("checkpoint/table hash mismatch");
  }
  write_echo(cfg, table.get(), args.out_dir);

  const EnvConfig env_cfg = cfg.make_env_config();
  const std::uint64_t seed = derive_stream(cfg.seed, "eval") + index;
  Environment env(table, env_cfg);
  const EpisodeStats stats = rollout(PolicyKind::greedy(), &ckpt.net, env, seed);
  write_rollout_csvs(env.trajectory(), *table, env_cfg, args.out_dir);

  PolicyReport rep;
  rep.policy = PolicyKind::greedy();
  rep.episodes.push_back(stats);
  compute_aggregates(rep);
  write_text_file(args.out_dir + "/episode_stats.csv", episodes_csv(rep));
  std::cout << "rollout seed " << seed << ": reward "
            << format_double(stats.cumulative_reward) << ", switches "
            << stats.switches << ", final pos err "
            << format_double(stats.final_pos_err) << " m, "
            << (stats.violation ? to_string(*stats.violation) : "safe") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified gain-scheduling workbench"};
  app.set_version_flag("--version", figs::kVersionString);
  app.require_subcommand(1);

  CommonArgs certify_args, train_args, eval_args, rollout_args;
  std::string train_table, eval_table, eval_ckpt, rollout_table, rollout_ckpt;
  int train_episodes = 0, eval_rollouts = 0, rollout_index = 0;
  std::vector<std::string> eval_policies;

  CLI::App* certify = app.add_subcommand("certify", "Build the certified gain table");
  add_common(certify, certify_args);

  CLI::App* train = app.add_subcommand("train", "Train the DQN scheduler");
  add_common(train, train_args);
  train->add_option("--table", train_table, "Certified gain table file")
      ->required()->check(CLI::ExistingFile);
  train->add_option("--episodes", train_episodes, "Episode count override");

  CLI::App* eval = app.add_subcommand("eval", "Run the evaluation protocol");
  add_common(eval, eval_args);
  eval->add_option("--table", eval_table, "Certified gain table file")
      ->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", eval_ckpt, "Trained checkpoint file")
      ->required()->check(CLI::ExistingFile);
  eval->add_option("--rollouts", eval_rollouts, "Rollouts per policy override");
  eval->add_option("--policies", eval_policies,
                   "Policies (greedy | eps-greedy-<x> | random-safe)");

  CLI::App* roll = app.add_subcommand("rollout", "Emit one greedy rollout's CSVs");
  add_common(roll, rollout_args);
  roll->add_option("--table", rollout_table, "Certified gain table file")
      ->required()->check(CLI::ExistingFile);
  roll->add_option("--checkpoint", rollout_ckpt, "Trained checkpoint file")
      ->required()->check(CLI::ExistingFile);
  roll->add_option("--index", rollout_index,
                   "Evaluation episode index (seed = eval base + index)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (certify->parsed()) return cmd_certify(certify_args);
    if (train->parsed()) return cmd_train(train_args, train_table, train_episodes);
    if (eval->parsed()) {
      return cmd_eval(eval_args, eval_table, eval_ckpt, eval_rollouts,
                      eval_policies);
    }
    if (roll->parsed()) {
      return cmd_rollout(rollout_args, rollout_table, rollout_ckpt,
                         rollout_index);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
