#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "pinch/environment.hpp"
#include "pinch/neural.hpp"

namespace pinch::agents {

struct AgentConfig {
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;  // of all training steps
  int target_sync = 100;                // C, in gradient updates
  std::size_t buffer_capacity = 10'000;
  int batch_size = 64;
  double learning_rate = 1e-3;          // value network / critic
  double actor_learning_rate = 1e-4;
  double noise_start = 0.1;             // exploration std as a fraction of L
  double noise_end = 0.01;
  int hidden_units = 64;
  int hidden_layers = 2;
  double reward_scale = 0.1;            // applied to rewards inside the learner only
  double preactivation_penalty = 0.01;  // actor output squared before tanh
  bool bootstrap_on_timeout = true;     // episodes end by time limit only; keep bootstrapping there

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Linear decay from `start` to `end` over the first `fraction` of `total_steps`.
double linear_schedule(double start, double end, double fraction, std::uint64_t step, std::uint64_t total_steps);

/// Fixed-capacity FIFO ring with uniform sampling. Index 0 is the oldest entry.
template <class T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    ring_.reserve(capacity);
  }

  void push(T item) {
    if (ring_.size() < capacity_) {
      ring_.push_back(std::move(item));
    } else {
      ring_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }
  const T& operator[](std::size_t i) const { return ring_[(head_ + i) % ring_.size()]; }

  /// `n` draws with replacement.
  std::vector<std::size_t> sample(std::size_t n, std::mt19937_64& rng) const {
    if (ring_.empty()) throw std::logic_error("sampling an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, ring_.size() - 1);
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = pick(rng);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<T> ring_;
};

struct Transition {
  Vector state;
  std::vector<Vector> obs;      // per agent
  std::vector<double> action;   // discrete index or normalized displacement per agent
  double reward = 0.0;
  Vector next_state;
  std::vector<Vector> next_obs;
  bool done = false;
};

/// Deep Q-learner with experience replay and a hard-synced target network.
class DqnAgent {
 public:
  DqnAgent(std::size_t obs_size, int actions, const AgentConfig& config, std::uint64_t seed);

  Vector q_values(const Vector& obs) const;
  int greedy(const Vector& obs) const;
  int act(const Vector& obs, double epsilon, std::mt19937_64& rng) const;

  void remember(const Vector& obs, int action, double reward, const Vector& next_obs, bool done);
  /// One minibatch update; a no-op returning false until the buffer holds a batch.
  bool learn(std::mt19937_64& rng);

  const nn::MlpModel& online() const { return online_; }
  const nn::MlpModel& target() const { return target_; }
  std::uint64_t updates() const { return updates_; }
  std::size_t buffer_size() const { return buffer_.size(); }

 private:
  struct Sample {
    Vector obs;
    int action;
    double reward;
    Vector next_obs;
    bool done;
  };

  AgentConfig config_;
  int actions_;
  nn::MlpModel online_;
  nn::MlpModel target_;
  nn::Optimizer opt_;
  ReplayBuffer<Sample> buffer_;
  std::uint64_t updates_ = 0;
};

/// Deterministic actors on local observations plus one critic over the joint state and
/// actions. Actions are normalized displacements in [-1, 1]. The critic is used only in learn().
class ActorCritic {
 public:
  ActorCritic(const std::vector<std::size_t>& obs_sizes, std::size_t state_size, const AgentConfig& config,
              std::uint64_t seed);

  std::size_t agents() const { return actors_.size(); }
  double act(std::size_t agent, const Vector& obs) const;
  std::vector<double> act(const std::vector<Vector>& obs) const;

  void remember(Transition t);
  bool learn(std::mt19937_64& rng);

  std::uint64_t critic_calls() const { return critic_calls_; }
  std::uint64_t updates() const { return updates_; }
  const nn::MlpModel& actor(std::size_t k) const { return actors_[k]; }
  const nn::MlpModel& critic() const { return critic_; }

 private:
  AgentConfig config_;
  std::vector<nn::MlpModel> actors_, target_actors_;
  std::vector<nn::Optimizer> actor_opts_;
  nn::MlpModel critic_, target_critic_;
  nn::Optimizer critic_opt_;
  ReplayBuffer<Transition> buffer_;
  std::uint64_t updates_ = 0;
  mutable std::uint64_t critic_calls_ = 0;
};

struct EpisodeLog {
  int episode = 0;
  double mean_reward = 0.0;   // training episode, including exploration
  double eval_rate = 0.0;     // greedy episode, mean per-step objective
  double oracle_ratio = 0.0;  // eval_rate over the per-step oracle mean
};

struct TrainOptions {
  int episodes = 400;
  std::uint64_t seed = 1;
  int eval_every = 1;  // greedy evaluation period in episodes
  // the returned policy uses the networks from the best greedy evaluation
  bool keep_best = true;
};

using ActionPolicy = std::function<std::vector<double>(const PinchEnv&, const EnvState&)>;

/// Mean per-step objective of a full greedy episode from reset.
double rollout_objective(PinchEnv& env, const ActionPolicy& policy);

/// Mean over the episode of the best per-step objective: exhaustive over candidates
/// for discrete environments, over a grid of `fine_points` per slot for continuous ones.
double oracle_objective(const PinchEnv& env, int fine_points = 101);

struct DqnResult {
  std::vector<DqnAgent> agents;
  std::vector<EpisodeLog> curve;
  bool local = false;  // agents act on local observations rather than the global state
  std::vector<nn::MlpModel> best_nets;  // empty unless keep_best recorded a snapshot
  double best_eval = 0.0;
  ActionPolicy policy() const;
};

/// Single-agent DQN; the environment must be discrete with one slot.
DqnResult train_dqn(PinchEnv& env, const AgentConfig& config, const TrainOptions& options);
/// Independent DQN per slot on local observations, trained on the shared global reward.
DqnResult train_madqn(PinchEnv& env, const AgentConfig& config, const TrainOptions& options);

struct ActorCriticResult {
  ActorCritic model;
  std::vector<EpisodeLog> curve;
  std::vector<nn::MlpModel> best_actors;  // empty unless keep_best recorded a snapshot
  double best_eval = 0.0;
  ActionPolicy policy() const;
};

/// DDPG is the one-agent case of the same engine.
ActorCriticResult train_ddpg(PinchEnv& env, const AgentConfig& config, const TrainOptions& options);
ActorCriticResult train_maddpg(PinchEnv& env, const AgentConfig& config, const TrainOptions& options);

/// Supervised positioner for scenario (a): user features to the brute-force optimal
/// activation coordinate.
struct PositionerDataset {
  nn::Matrix features;  // 6 x n
  nn::Matrix labels;    // 1 x n, s / L
  std::vector<ScenarioConfig> instances;
  std::vector<double> oracle_values;  // brute-force NOMA sum rate per instance
};

/// Users ordered by distance to the waveguide, each as x, y, z normalized to the room.
Vector positioner_features(const ScenarioConfig& config);
/// NOMA sum rate of a single PA at coordinate `s`.
double positioner_objective(const ScenarioConfig& config, double s);

PositionerDataset make_positioner_dataset(std::size_t count, std::uint64_t seed);

struct PositionerTrainConfig {
  std::vector<int> hidden{64, 64};
  nn::TrainConfig train{1e-3, 64, 150, nn::OptimizerKind::Adam, 1, nn::LossKind::MSE, 0.0};
};

/// Throws std::invalid_argument on an empty dataset.
nn::MlpModel train_positioner(const PositionerDataset& data, const PositionerTrainConfig& config = {});

/// Candidate index nearest to the predicted coordinate; one forward pass.
int predict_candidate(const nn::MlpModel& model, const ScenarioConfig& config);

struct PositionerReport {
  std::vector<double> rate_ratio;
  double median_ratio = 0.0;
  double mean_coordinate_error = 0.0;  // metres
  double forward_passes_per_instance = 0.0;
};

PositionerReport evaluate_positioner(const nn::MlpModel& model, const PositionerDataset& data);

}  // namespace pinch::agents
