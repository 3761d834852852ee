#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "figs/io.hpp"
#include "figs/mdp.hpp"
#include "figs/rng.hpp"
#include "figs/types.hpp"

// Value-based learner over the certified action set: a small MLP Q-network
// (rectifier hidden layers, linear output), FIFO replay, target network,
// epsilon-greedy exploration, one TD gradient step per environment decision.
// Everything is hand-rolled on Eigen so a single root seed pins training
// bit-for-bit.

namespace figs {

struct QNetwork {
  // weights[l] is (sizes[l+1] x sizes[l]); layer l output = W x + b.
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  int layer_count() const { return static_cast<int>(weights.size()); }
  int input_size() const { return static_cast<int>(weights.front().cols()); }
  int output_size() const { return static_cast<int>(weights.back().rows()); }

  std::vector<int> sizes() const {
    std::vector<int> s{input_size()};
    for (const auto& w : weights) s.push_back(static_cast<int>(w.rows()));
    return s;
  }

  // Uniform fan-in init, U(-1/sqrt(n_in), 1/sqrt(n_in)). Draw order is part
  // of the reproducibility contract: per layer, weights row-major, then bias.
  static QNetwork init(const std::vector<int>& layer_sizes, Rng& rng) {
    if (layer_sizes.size() < 2) throw Error("QNetwork: need >= 2 layer sizes");
    QNetwork net;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      const int in = layer_sizes[l], out = layer_sizes[l + 1];
      if (in < 1 || out < 1) throw Error("QNetwork: layer sizes must be >= 1");
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      Eigen::MatrixXd w(out, in);
      for (int i = 0; i < out; ++i) {
        for (int j = 0; j < in; ++j) w(i, j) = rng.uniform(-bound, bound);
      }
      Eigen::VectorXd b(out);
      for (int i = 0; i < out; ++i) b(i) = rng.uniform(-bound, bound);
      net.weights.push_back(std::move(w));
      net.biases.push_back(std::move(b));
    }
    return net;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    Eigen::VectorXd a = x;
    for (int l = 0; l < layer_count(); ++l) {
      a = (weights[l] * a + biases[l]).eval();
      if (l + 1 < layer_count()) a = a.cwiseMax(0.0);
    }
    return a;
  }

  // Columns are samples.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd a = x;
    for (int l = 0; l < layer_count(); ++l) {
      a = ((weights[l] * a).colwise() + biases[l]).eval();
      if (l + 1 < layer_count()) a = a.cwiseMax(0.0);
    }
    return a;
  }
};

inline Eigen::VectorXd q_forward(const QNetwork& net,
                                 const Eigen::VectorXd& obs) {
  if (obs.size() != net.input_size()) {
    throw ShapeMismatch("q_forward: observation width mismatch");
  }
  return net.forward(obs);
}

// Epsilon-greedy with lowest-index argmax tie-break. The rng is consulted
// once for the explore/exploit coin whenever epsilon > 0, plus once for the
// uniform action on the explore branch, keeping stream usage predictable.
inline int select_action(const Eigen::VectorXd& qvals, double epsilon,
                         Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw std::domain_error("select_action: epsilon outside [0,1]");
  }
  if (epsilon > 0.0 && rng.uniform() < epsilon) {
    return static_cast<int>(rng.below(static_cast<std::uint64_t>(qvals.size())));
  }
  int best = 0;
  for (int i = 1; i < qvals.size(); ++i) {
    if (qvals(i) > qvals(best)) best = i;
  }
  return best;
}

inline double td_target(double reward, bool done, double gamma,
                        const Eigen::VectorXd& q_next_target_vals) {
  if (done) return reward;
  return reward + gamma * q_next_target_vals.maxCoeff();
}

inline void sync_target(const QNetwork& net, QNetwork& target) {
  if (net.layer_count() != target.layer_count()) {
    throw ShapeMismatch("sync_target: layer count mismatch");
  }
  for (int l = 0; l < net.layer_count(); ++l) {
    if (net.weights[l].rows() != target.weights[l].rows() ||
        net.weights[l].cols() != target.weights[l].cols()) {
      throw ShapeMismatch("sync_target: layer shape mismatch");
    }
  }
  target = net;
}

// --- replay ------------------------------------------------------------------

struct Transition {
  Eigen::VectorXd obs;
  int action = 0;
  double reward = 0.0;
  Eigen::VectorXd next_obs;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw Error("ReplayBuffer: capacity must be positive");
    data_.reserve(capacity_);
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_[i]; }

  // FIFO at capacity: the slot of the oldest transition is overwritten.
  void push(const Transition& t) {
    if (data_.size() < capacity_) {
      data_.push_back(t);
    } else {
      data_[next_overwrite_] = t;
      next_overwrite_ = (next_overwrite_ + 1) % capacity_;
    }
  }

  // Uniform sample without replacement within the batch (rejection on a
  // small scratch list; k is tiny relative to the buffer in practice).
  std::vector<std::size_t> sample_indices(std::size_t k, Rng& rng) const {
    if (k > data_.size()) {
      throw Error("ReplayBuffer: batch larger than buffer");
    }
    std::vector<std::size_t> out;
    out.reserve(k);
    while (out.size() < k) {
      const std::size_t cand = rng.below(data_.size());
      bool dup = false;
      for (const std::size_t s : out) {
        if (s == cand) { dup = true; break; }
      }
      if (!dup) out.push_back(cand);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t next_overwrite_ = 0;
  std::vector<Transition> data_;
};

// --- optimizer ----------------------------------------------------------------

struct GradBuffer {
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;

  static GradBuffer zeros_like(const QNetwork& net) {
    GradBuffer g;
    for (int l = 0; l < net.layer_count(); ++l) {
      g.dw.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(),
                                           net.weights[l].cols()));
      g.db.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return g;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& m : dw) s += m.squaredNorm();
    for (const auto& v : db) s += v.squaredNorm();
    return s;
  }

  void scale(double f) {
    for (auto& m : dw) m *= f;
    for (auto& v : db) v *= f;
  }
};

// Adaptive moment estimation with the standard defaults.
class Adam {
 public:
  Adam(const QNetwork& net, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(GradBuffer::zeros_like(net)), v_(GradBuffer::zeros_like(net)) {}

  void step(QNetwork& net, const GradBuffer& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t l = 0; l < g.dw.size(); ++l) {
      m_.dw[l] = beta1_ * m_.dw[l] + (1.0 - beta1_) * g.dw[l];
      v_.dw[l] = beta2_ * v_.dw[l] + (1.0 - beta2_) * g.dw[l].cwiseAbs2();
      net.weights[l] -=
          (lr_ / c1) * (m_.dw[l].array() /
                        ((v_.dw[l].array() / c2).sqrt() + eps_)).matrix();
      m_.db[l] = beta1_ * m_.db[l] + (1.0 - beta1_) * g.db[l];
      v_.db[l] = beta2_ * v_.db[l] + (1.0 - beta2_) * g.db[l].cwiseAbs2();
      net.biases[l] -=
          (lr_ / c1) * (m_.db[l].array() /
                        ((v_.db[l].array() / c2).sqrt() + eps_)).matrix();
    }
  }

  long long steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  GradBuffer m_, v_;
};

// --- TD training --------------------------------------------------------------

struct TrainConfig {
  std::vector<int> hidden_sizes{128, 128};
  double learning_rate = 1e-3;
  int batch_size = 64;
  double gamma = 0.99;
  int target_sync_interval = 1000;  // gradient steps between hard syncs
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.5;  // fraction of total decisions to anneal over
  int episodes = 300;
  double grad_clip_norm = 10.0;
  std::size_t buffer_capacity = 100000;
  int checkpoint_every = 0;  // episodes; 0 disables periodic checkpoints
};

inline double epsilon_at(long long decision, long long total_decisions,
                         const TrainConfig& cfg) {
  const double cut = cfg.eps_decay_fraction * static_cast<double>(total_decisions);
  if (cut <= 0.0 || static_cast<double>(decision) >= cut) return cfg.eps_end;
  return cfg.eps_start +
         (cfg.eps_end - cfg.eps_start) * (static_cast<double>(decision) / cut);
}

// Mean-squared TD error over a batch and its reverse-mode gradients with
// respect to net's parameters. Targets come from `target` and are treated
// as constants.
inline double td_loss_and_grads(const QNetwork& net, const QNetwork& target,
                                const std::vector<Transition>& batch,
                                double gamma, GradBuffer* grads_out) {
  if (batch.empty()) throw Error("td_loss_and_grads: empty batch");
  const int bsz = static_cast<int>(batch.size());
  const int in = net.input_size();

  Eigen::MatrixXd x(in, bsz), xn(in, bsz);
  for (int i = 0; i < bsz; ++i) {
    if (batch[i].obs.size() != in || batch[i].next_obs.size() != in) {
      throw ShapeMismatch("td_loss_and_grads: transition width mismatch");
    }
    if (batch[i].action < 0 || batch[i].action >= net.output_size()) {
      throw ShapeMismatch("td_loss_and_grads: action index out of range");
    }
    x.col(i) = batch[i].obs;
    xn.col(i) = batch[i].next_obs;
  }

  // Forward pass, keeping activations for the backward sweep.
  const int layers = net.layer_count();
  std::vector<Eigen::MatrixXd> act(layers + 1);
  act[0] = x;
  for (int l = 0; l < layers; ++l) {
    act[l + 1] = ((net.weights[l] * act[l]).colwise() + net.biases[l]).eval();
    if (l + 1 < layers) act[l + 1] = act[l + 1].cwiseMax(0.0);
  }
  const Eigen::MatrixXd q_next = target.forward_batch(xn);

  // Output-layer error is nonzero only at the taken action of each sample.
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(net.output_size(), bsz);
  double loss = 0.0;
  for (int i = 0; i < bsz; ++i) {
    const double y =
        td_target(batch[i].reward, batch[i].done, gamma, q_next.col(i));
    const double diff = act[layers](batch[i].action, i) - y;
    loss += diff * diff;
    delta(batch[i].action, i) = 2.0 * diff / bsz;
  }
  loss /= bsz;

  if (grads_out != nullptr) {
    *grads_out = GradBuffer::zeros_like(net);
    Eigen::MatrixXd d = delta;
    for (int l = layers - 1; l >= 0; --l) {
      grads_out->dw[l] = d * act[l].transpose();
      grads_out->db[l] = d.rowwise().sum();
      if (l > 0) {
        d = (net.weights[l].transpose() * d).eval();
        d = d.array() * (act[l].array() > 0.0).cast<double>();
      }
    }
  }
  return loss;
}

// One optimizer update on `net`; `target` is untouched. Returns the loss.
inline double train_step(QNetwork& net, const QNetwork& target,
                         const std::vector<Transition>& batch, double gamma,
                         double grad_clip_norm, Adam& opt) {
  GradBuffer grads;
  const double loss = td_loss_and_grads(net, target, batch, gamma, &grads);
  if (!std::isfinite(loss)) throw Error("train_step: non-finite loss");
  const double gnorm = std::sqrt(grads.squared_norm());
  if (grad_clip_norm > 0.0 && gnorm > grad_clip_norm) {
    grads.scale(grad_clip_norm / gnorm);
  }
  opt.step(net, grads);
  return loss;
}

// --- episode loop ---------------------------------------------------------------

struct EpisodePoint {
  int episode = 0;
  double cumulative_reward = 0.0;
  double epsilon = 0.0;   // schedule value at the episode's end
  double loss_mean = 0.0; // mean TD loss over the episode's gradient steps
};

struct TrainResult {
  QNetwork net;
  std::vector<EpisodePoint> curve;
  long long gradient_steps = 0;
  long long target_syncs = 0;
  long long decisions = 0;
};

using CheckpointCallback =
    std::function<void(int episodes_done, const QNetwork&)>;

// Root-seed stream usage: "init" -> weight init, "env"/episode -> initial
// states, "exploration" -> epsilon-greedy coins, "replay" -> batch sampling.
inline TrainResult train(std::shared_ptr<const GainTable> table,
                         const EnvConfig& env_cfg, const TrainConfig& cfg,
                         std::uint64_t root_seed,
                         const CheckpointCallback& checkpoint_cb = {}) {
  Environment env(table, env_cfg);
  std::vector<int> sizes{15};
  for (const int h : cfg.hidden_sizes) sizes.push_back(h);
  sizes.push_back(static_cast<int>(env.action_count()));

  Rng init_rng(derive_stream(root_seed, "init"));
  Rng explore_rng(derive_stream(root_seed, "exploration"));
  Rng replay_rng(derive_stream(root_seed, "replay"));

  TrainResult result;
  result.net = QNetwork::init(sizes, init_rng);
  QNetwork target = result.net;  // pre-sync contract: exact init copy
  Adam opt(result.net, cfg.learning_rate);
  ReplayBuffer buffer(cfg.buffer_capacity);

  const long long total_decisions =
      static_cast<long long>(cfg.episodes) * env.config().decisions_per_episode();
  long long decision = 0;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    Vec15 obs = env.reset(derive_stream(root_seed, "env", ep));
    double ep_reward = 0.0;
    double loss_sum = 0.0;
    long long loss_count = 0;

    while (!env.done()) {
      const double eps = epsilon_at(decision, total_decisions, cfg);
      const int action = select_action(result.net.forward(obs), eps, explore_rng);
      const StepOutcome out = env.step(action);
      Transition tr;
      tr.obs = obs;
      tr.action = action;
      tr.reward = out.reward;
      tr.next_obs = out.next_observation;
      tr.done = out.done;
      buffer.push(tr);
      obs = out.next_observation;
      ep_reward += out.reward;
      ++decision;

      if (buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
        const auto idx = buffer.sample_indices(cfg.batch_size, replay_rng);
        std::vector<Transition> batch;
        batch.reserve(idx.size());
        for (const std::size_t i : idx) batch.push_back(buffer.at(i));
        loss_sum += train_step(result.net, target, batch, cfg.gamma,
                               cfg.grad_clip_norm, opt);
        ++loss_count;
        ++result.gradient_steps;
        if (result.gradient_steps % cfg.target_sync_interval == 0) {
          sync_target(result.net, target);
          ++result.target_syncs;
        }
      }
    }

    EpisodePoint pt;
    pt.episode = ep;
    pt.cumulative_reward = ep_reward;
    pt.epsilon = epsilon_at(decision, total_decisions, cfg);
    pt.loss_mean = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    result.curve.push_back(pt);
    if (checkpoint_cb && cfg.checkpoint_every > 0 &&
        (ep + 1) % cfg.checkpoint_every == 0) {
      checkpoint_cb(ep + 1, result.net);
    }
  }
  result.decisions = decision;
  return result;
}

// --- checkpoint I/O ---------------------------------------------------------------

inline constexpr const char* kCheckpointFormatTag = "figs_checkpoint v1";

inline std::string serialize_checkpoint(const QNetwork& net,
                                        const std::string& table_hash,
                                        const std::string& config_echo) {
  std::ostringstream out;
  out << kCheckpointFormatTag << "\n";
  out << "table_hash " << table_hash << "\n";
  const auto sizes = net.sizes();
  out << "layers " << sizes.size();
  for (const int s : sizes) out << " " << s;
  out << "\n";
  for (int l = 0; l < net.layer_count(); ++l) {
    out << "W" << l << "\n";
    for (int i = 0; i < net.weights[l].rows(); ++i) {
      for (int j = 0; j < net.weights[l].cols(); ++j) {
        out << (j ? " " : "") << format_double(net.weights[l](i, j));
      }
      out << "\n";
    }
    out << "b" << l << "\n";
    for (int i = 0; i < net.biases[l].size(); ++i) {
      out << (i ? " " : "") << format_double(net.biases[l](i));
    }
    out << "\n";
  }
  out << "config_bytes " << config_echo.size() << "\n" << config_echo << "\n";
  out << "end\n";
  return out.str();
}

struct LoadedCheckpoint {
  QNetwork net;
  std::string table_hash;
  std::string config_echo;
};

inline LoadedCheckpoint parse_checkpoint(const std::string& body) {
  TokenReader r(body, "checkpoint");
  const std::string tag_word = r.word("format tag");  // sequenced reads
  const std::string tag = tag_word + " " + r.word("format version");
  if (tag != kCheckpointFormatTag) {
    throw IoError("checkpoint: unknown format tag '" + tag + "'");
  }
  LoadedCheckpoint out;
  r.expect("table_hash");
  out.table_hash = r.word("table hash");
  r.expect("layers");
  const std::size_t n_sizes = r.count("layer size count");
  if (n_sizes < 2) throw IoError("checkpoint: bad layer count");
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) s = static_cast<int>(r.count("layer size"));
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    r.expect(("W" + std::to_string(l)).c_str());
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (int i = 0; i < w.rows(); ++i) {
      for (int j = 0; j < w.cols(); ++j) w(i, j) = r.number("weight");
    }
    r.expect(("b" + std::to_string(l)).c_str());
    Eigen::VectorXd b(sizes[l + 1]);
    for (int i = 0; i < b.size(); ++i) b(i) = r.number("bias");
    out.net.weights.push_back(std::move(w));
    out.net.biases.push_back(std::move(b));
  }
  r.expect("config_bytes");
  const std::size_t n_bytes = r.count("config byte count");
  r.in.get();  // the newline after the count
  out.config_echo.resize(n_bytes);
  r.in.read(out.config_echo.data(), static_cast<std::streamsize>(n_bytes));
  if (static_cast<std::size_t>(r.in.gcount()) != n_bytes) {
    throw IoError("checkpoint: truncated config echo");
  }
  r.expect("end");
  return out;
}

inline void save_checkpoint(const std::string& path, const QNetwork& net,
                            const std::string& table_hash,
                            const std::string& config_echo) {
  write_text_file(path, serialize_checkpoint(net, table_hash, config_echo));
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_text_file(path));
}

}  // namespace figs
