#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinch/rates.hpp"
#include "pinch/scenario.hpp"
#include "pinch/search.hpp"

namespace pinch::agents {

using Vector = Eigen::VectorXd;

/// Built-in controller scenarios:
///   a  one guide, 20 candidates, two NOMA users (supervised positioner)
///   b  one guide, 5 candidates, two OMA users, one obstacle (DQN)
///   c  one guide, continuous, one user on a linear walk (DDPG)
///   d  two guides with two PAs each, energy efficiency (alternating search)
///   e  two interfering guides, discrete (independent DQN)
///   f  two interfering guides, continuous (MADDPG)
enum class ScenarioId { A, B, C, D, E, F };

std::string to_string(ScenarioId id);
std::optional<ScenarioId> scenario_from_string(const std::string& s);

/// Scenario geometry with users (and the obstacle of b) sampled from `seed`.
ScenarioConfig make_scenario(ScenarioId id, std::uint64_t seed);

enum class ActionKind { Discrete, Continuous };
enum class RewardKind { SumRate, EnergyEfficiency };

struct EnvOptions {
  int episode_length = 10;        // T
  double qos_penalty = 10.0;      // mu
  double tick_seconds = 1.0;      // mobility time step
  double max_step_fraction = 0.1; // continuous displacement bound as a fraction of L
  RewardKind reward = RewardKind::SumRate;
  std::optional<SlotLayout> layout;  // one agent per slot; defaults to one per waveguide
};

EnvOptions default_env_options(ScenarioId id);
ActionKind default_action_kind(ScenarioId id);

/// Global state layout, per user: x, y normalized to the room, QoS; then per slot:
/// s / L; then per user and waveguide a blocked-candidate bitmap; then per user a
/// velocity estimate in units of v_max (zero for static users).
struct EnvState {
  Vector features;
  std::vector<double> coords;  // current PA coordinate per slot, metres
  int step = 0;
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
  RateReport report;
  bool done = false;
};

/// One environment per trainer; reset() restores the initial PA coordinates.
/// Discrete actions are absolute candidate indices per slot; continuous actions are
/// displacements per slot in metres, clipped to the step bound and then to [0, L].
class PinchEnv {
 public:
  PinchEnv(ScenarioConfig config, ActionKind kind, EnvOptions options = {});

  EnvState reset();
  /// Throws std::invalid_argument when the action dimension or an index is invalid.
  StepResult step(const std::vector<double>& action);

  const ScenarioConfig& config() const { return config_; }
  const EnvOptions& options() const { return options_; }
  const SlotLayout& layout() const { return layout_; }
  ActionKind action_kind() const { return kind_; }
  std::size_t agent_count() const { return layout_.total(); }
  int action_count(std::size_t agent) const;  // candidates of the slot's waveguide
  double max_step(std::size_t agent) const;   // displacement bound in metres
  const EnvState& state() const { return state_; }

  std::size_t state_size() const;
  std::size_t observation_size() const;
  /// Own coordinate, user features and velocities, and the own waveguide's bitmap.
  Vector observation(const EnvState& state, std::size_t agent) const;

  /// Rates of the given per-slot coordinates with users at tick `step`.
  RateReport evaluate_coords(const std::vector<double>& coords, int step) const;
  double reward_of(const RateReport& report) const;
  /// Sum rate or energy efficiency, without the QoS penalty.
  double objective_of(const RateReport& report) const;

 private:
  std::vector<Point3> positions_at(int step) const;
  EnvState encode(const std::vector<double>& coords, int step) const;
  PinchConfiguration pinch_of(const std::vector<double>& coords) const;

  ScenarioConfig config_;
  ActionKind kind_;
  EnvOptions options_;
  SlotLayout layout_;
  std::vector<int> assignment_;
  PowerAllocation power_;
  std::vector<std::vector<double>> candidates_;  // per waveguide
  std::vector<double> initial_coords_;
  EnvState state_;
};

/// env_reset: the scenario's environment with the default options, already reset.
PinchEnv make_env(ScenarioId id, std::uint64_t seed);

/// Exhaustive best joint discrete action at tick `step` under objective_of.
struct ActionOracle {
  std::vector<int> action;
  double value = 0.0;
};
ActionOracle best_discrete_action(const PinchEnv& env, int step = 0);

}  // namespace pinch::agents
