#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "figs/io.hpp"
#include "figs/table_io.hpp"

// End-to-end runs of the installed binary. FIGS_CLI_PATH is injected by the
// build so the test finds the tool regardless of generator layout.

namespace fs = std::filesystem;

namespace {

int run(const std::string& cmd) {
  const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
  if (raw == -1) return -1;
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -2;
}

const char* kSmallConfig = R"({
  "seed": 42,
  "threads": 2,
  "reference": {"r_start": [0, 0, 0], "r_goal": [0.5, 0.5, 0.5], "duration": 2.0},
  "gains": {
    "translational_levels": [[39.0625, 62.5, 37.5, 10.0]],
    "yaw_levels": [[16.0, 8.0]]
  },
  "env": {"episode_len": 2.0},
  "train": {"hidden_sizes": [16], "episodes": 2, "batch_size": 16},
  "eval": {"rollouts": 2, "policies": ["greedy", "random-safe"]}
})";

struct Scratch {
  fs::path root;
  explicit Scratch(const char* name) : root(fs::path("cli_scratch") / name) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Scratch() {
    fs::remove_all(root);
    std::error_code ec;
    fs::remove(root.parent_path(), ec);  // parent, if now empty
  }
  std::string operator/(const char* leaf) const {
    return (root / leaf).string();
  }
};

std::string figs_bin() { return std::string(FIGS_CLI_PATH); }

}  // namespace

TEST_CASE("cli pipeline: certify, train, eval, rollout", "[cli]") {
  Scratch scratch("pipeline");
  const std::string cfg_path = scratch / "config.json";
  figs::write_text_file(cfg_path, kSmallConfig);
  const std::string base = figs_bin() + " ";

  // --- certify ---------------------------------------------------------
  const std::string cert_dir = scratch / "cert";
  REQUIRE(run(base + "certify --config " + cfg_path + " --out " + cert_dir) ==
          0);
  const std::string table_path = cert_dir + "/gain_table.txt";
  REQUIRE(fs::exists(table_path));
  REQUIRE(fs::exists(cert_dir + "/certification_report.csv"));
  REQUIRE(fs::exists(cert_dir + "/config_echo.json"));

  const figs::GainTable table = figs::load_gain_table(table_path);
  CHECK(table.size() == 1);

  // The echo resolves the derived safety bound to a concrete number and is
  // itself a loadable config.
  const nlohmann::json echo =
      nlohmann::json::parse(figs::read_text_file(cert_dir + "/config_echo.json"));
  CHECK(echo.at("safety").at("z_norm_delta").get<double>() > 0.0);
  CHECK(echo.at("seed").get<int>() == 42);

  // Reruns are byte-identical.
  const std::string cert_dir2 = scratch / "cert2";
  REQUIRE(run(base + "certify --config " + cfg_path + " --out " + cert_dir2) ==
          0);
  CHECK(figs::read_text_file(cert_dir2 + "/gain_table.txt") ==
        figs::read_text_file(table_path));
  CHECK(figs::read_text_file(cert_dir2 + "/certification_report.csv") ==
        figs::read_text_file(cert_dir + "/certification_report.csv"));

  // --- train -----------------------------------------------------------
  const std::string train_dir = scratch / "train";
  REQUIRE(run(base + "train --config " + cfg_path + " --table " + table_path +
              " --out " + train_dir) == 0);
  const std::string ckpt_path = train_dir + "/checkpoint.txt";
  REQUIRE(fs::exists(ckpt_path));
  REQUIRE(fs::exists(train_dir + "/training_curve.csv"));
  const std::string curve = figs::read_text_file(train_dir + "/training_curve.csv");
  CHECK(curve.rfind("episode,cumulative_reward,epsilon,loss_mean", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 3);  // header + 2

  const std::string train_dir2 = scratch / "train2";
  REQUIRE(run(base + "train --config " + cfg_path + " --table " + table_path +
              " --out " + train_dir2) == 0);
  CHECK(figs::read_text_file(train_dir2 + "/checkpoint.txt") ==
        figs::read_text_file(ckpt_path));
  CHECK(figs::read_text_file(train_dir2 + "/training_curve.csv") == curve);

  // Seed override changes the artifact.
  const std::string train_dir3 = scratch / "train3";
  REQUIRE(run(base + "train --config " + cfg_path + " --table " + table_path +
              " --seed 43 --out " + train_dir3) == 0);
  CHECK(figs::read_text_file(train_dir3 + "/checkpoint.txt") !=
        figs::read_text_file(ckpt_path));

  // --- eval ------------------------------------------------------------
  const std::string eval_dir = scratch / "eval";
  REQUIRE(run(base + "eval --config " + cfg_path + " --table " + table_path +
              " --checkpoint " + ckpt_path + " --out " + eval_dir) == 0);
  const std::string summary = figs::read_text_file(eval_dir + "/summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 3);
  CHECK(summary.find("greedy,2,") != std::string::npos);
  CHECK(summary.find("random-safe,2,") != std::string::npos);
  CHECK(fs::exists(eval_dir + "/reward_distribution.csv"));
  CHECK(fs::exists(eval_dir + "/episodes_greedy.csv"));
  CHECK(fs::exists(eval_dir + "/episodes_random_safe.csv"));
  CHECK(fs::exists(eval_dir + "/rollout_greedy_trajectory.csv"));
  CHECK(fs::exists(eval_dir + "/rollout_random_safe_gain_schedule.csv"));

  // Policy override trims the report.
  const std::string eval_dir2 = scratch / "eval2";
  REQUIRE(run(base + "eval --config " + cfg_path + " --table " + table_path +
              " --checkpoint " + ckpt_path + " --rollouts 1 --policies greedy" +
              " --out " + eval_dir2) == 0);
  const std::string summary2 = figs::read_text_file(eval_dir2 + "/summary.csv");
  CHECK(std::count(summary2.begin(), summary2.end(), '\n') == 2);
  CHECK(summary2.find("greedy,1,") != std::string::npos);

  // --- rollout ---------------------------------------------------------
  const std::string roll_dir = scratch / "roll";
  REQUIRE(run(base + "rollout --config " + cfg_path + " --table " + table_path +
              " --checkpoint " + ckpt_path + " --index 0 --out " + roll_dir) ==
          0);
  const std::string traj =
      figs::read_text_file(roll_dir + "/rollout_trajectory.csv");
  CHECK(std::count(traj.begin(), traj.end(), '\n') == 201);  // header + 200
  const std::string stats = figs::read_text_file(roll_dir + "/episode_stats.csv");
  CHECK(std::count(stats.begin(), stats.end(), '\n') == 2);

  // A different index is a different seed, hence different bytes.
  const std::string roll_dir2 = scratch / "roll2";
  REQUIRE(run(base + "rollout --config " + cfg_path + " --table " + table_path +
              " --checkpoint " + ckpt_path + " --index 1 --out " + roll_dir2) ==
          0);
  CHECK(figs::read_text_file(roll_dir2 + "/rollout_trajectory.csv") != traj);
}

TEST_CASE("cli error paths exit nonzero", "[cli]") {
  Scratch scratch("errors");
  const std::string base = figs_bin() + " ";
  const std::string cfg_path = scratch / "config.json";
  figs::write_text_file(cfg_path, kSmallConfig);

  // Unknown flag / missing required option / no subcommand.
  CHECK(run(base + "certify --nope --out " + (scratch / "x1")) != 0);
  CHECK(run(base + "train --out " + (scratch / "x2")) != 0);
  CHECK(run(base) != 0);
  CHECK(run(base + "--version") == 0);

  // Invalid config: bad JSON and bad schema.
  const std::string bad_json = scratch / "bad.json";
  figs::write_text_file(bad_json, "{\"seed\": \n");
  CHECK(run(base + "certify --config " + bad_json + " --out " +
            (scratch / "x3")) != 0);
  const std::string bad_key = scratch / "bad_key.json";
  figs::write_text_file(bad_key, R"({"gains": {"foo": 1}})");
  CHECK(run(base + "certify --config " + bad_key + " --out " +
            (scratch / "x4")) != 0);

  // Artifact mismatch: a table certified under a different gain config is
  // rejected by both train and eval.
  const std::string cert_dir = scratch / "cert";
  REQUIRE(run(base + "certify --config " + cfg_path + " --out " + cert_dir) ==
          0);
  const std::string other_cfg = scratch / "other.json";
  std::string other = kSmallConfig;
  other.replace(other.find("[[16.0, 8.0]]"), 13, "[[4.0, 4.0]]");
  figs::write_text_file(other_cfg, other);
  const std::string other_dir = scratch / "cert_other";
  REQUIRE(run(base + "certify --config " + other_cfg + " --out " + other_dir) ==
          0);

  CHECK(run(base + "train --config " + cfg_path + " --table " + other_dir +
            "/gain_table.txt --out " + (scratch / "x5")) != 0);

  const std::string train_dir = scratch / "train";
  REQUIRE(run(base + "train --config " + cfg_path + " --table " + cert_dir +
              "/gain_table.txt --out " + train_dir) == 0);
  CHECK(run(base + "eval --config " + other_cfg + " --table " + cert_dir +
            "/gain_table.txt --checkpoint " + train_dir +
            "/checkpoint.txt --out " + (scratch / "x6")) != 0);

  // Corrupting the table after training trips the checkpoint hash guard.
  const std::string tampered = scratch / "tampered.txt";
  std::string body = figs::read_text_file(cert_dir + "/gain_table.txt");
  const std::size_t pos = body.find("cert ");
  REQUIRE(pos != std::string::npos);
  body.replace(pos + 5, 1, body[pos + 5] == '0' ? "1" : "0");
  figs::write_text_file(tampered, body);
  CHECK(run(base + "eval --config " + cfg_path + " --table " + tampered +
            " --checkpoint " + train_dir + "/checkpoint.txt --out " +
            (scratch / "x7")) != 0);
}
