#include "pinch/environment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pinch/propagation.hpp"

namespace pinch::agents {

std::string to_string(ScenarioId id) {
  static const char* names[] = {"a", "b", "c", "d", "e", "f"};
  return names[static_cast<int>(id)];
}

std::optional<ScenarioId> scenario_from_string(const std::string& s) {
  for (int i = 0; i < 6; ++i)
    if (s == to_string(static_cast<ScenarioId>(i))) return static_cast<ScenarioId>(i);
  return std::nullopt;
}

namespace {

Waveguide ceiling_guide(int id, double y, int grid) {
  Waveguide w;
  w.id = id;
  w.feed = {0.0, y, 3.0};
  w.axis = {1.0, 0.0, 0.0};
  w.length = 10.0;
  w.grid_size = grid;
  w.tx_power = 1.0;
  return w;
}

User floor_user(int id, double x, double y) {
  User u;
  u.id = id;
  u.position = {x, y, 0.0};
  return u;
}

}  // namespace

ScenarioConfig make_scenario(ScenarioId id, std::uint64_t seed) {
  ScenarioConfig c;
  c.room = {{0, 0, 0}, {10, 10, 3}};
  c.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  switch (id) {
    case ScenarioId::A: {
      c.waveguides = {ceiling_guide(0, 5.0, 20)};
      for (int k = 0; k < 2; ++k) {
        const double x = uniform(0, 10), y = uniform(0, 10);
        c.users.push_back(floor_user(k, x, y));
      }
      c.access = AccessMode::NOMA;
      break;
    }
    case ScenarioId::B: {
      c.waveguides = {ceiling_guide(0, 5.0, 5)};
      for (int k = 0; k < 2; ++k) {
        const double x = uniform(0.5, 9.5);
        const double off = uniform(1.5, 4.5);
        const double y = unit(rng) < 0.5 ? 5.0 - off : 5.0 + off;
        c.users.push_back(floor_user(k, x, y));
      }
      // a shelf 1 m from user 0 toward the guide, roughly under its direct path
      const Point3 u = c.users[0].position;
      const double toward = u.y < 5.0 ? 1.0 : -1.0;
      const double cx = std::clamp(u.x + uniform(-0.5, 0.5), 0.5, 9.5);
      const double cy = u.y + toward * 1.0;
      c.obstacles.push_back({{cx - 0.5, cy - 0.5, 0.0}, {cx + 0.5, cy + 0.5, 2.5}});
      c.access = AccessMode::OMA;
      break;
    }
    case ScenarioId::C: {
      c.waveguides = {ceiling_guide(0, 5.0, 20)};
      const double y = uniform(1, 9);
      const bool rightward = unit(rng) < 0.5;
      User u = floor_user(0, rightward ? 1.0 : 9.0, y);
      u.waypoints = {{0.0, u.position}, {10.0, {rightward ? 9.0 : 1.0, y, 0.0}}};
      c.users.push_back(u);
      c.access = AccessMode::OMA;
      break;
    }
    case ScenarioId::D:
    case ScenarioId::E:
    case ScenarioId::F: {
      const double y0 = id == ScenarioId::D ? 2.5 : 3.5;
      c.waveguides = {ceiling_guide(0, y0, 10), ceiling_guide(1, 10.0 - y0, 10)};
      const double x0 = uniform(0, 10), ya = uniform(0, 5);
      const double x1 = uniform(0, 10), yb = uniform(5, 10);
      c.users = {floor_user(0, x0, ya), floor_user(1, x1, yb)};
      c.access = AccessMode::MULTI_WAVEGUIDE;
      break;
    }
  }
  return c;
}

EnvOptions default_env_options(ScenarioId id) {
  EnvOptions o;
  if (id == ScenarioId::D) {
    o.reward = RewardKind::EnergyEfficiency;
    o.layout = SlotLayout{{2, 2}};
  }
  return o;
}

ActionKind default_action_kind(ScenarioId id) {
  return id == ScenarioId::C || id == ScenarioId::F ? ActionKind::Continuous : ActionKind::Discrete;
}

PinchEnv::PinchEnv(ScenarioConfig config, ActionKind kind, EnvOptions options)
    : config_(std::move(config)), kind_(kind), options_(std::move(options)) {
  if (const auto errs = validate(config_); !errs.empty())
    throw std::invalid_argument("invalid scenario: " + errs.front().field + ": " + errs.front().rule);
  if (options_.episode_length < 1) throw std::invalid_argument("episode length must be at least 1");
  if (!(options_.qos_penalty >= 0.0)) throw std::invalid_argument("QoS penalty must be non-negative");
  if (!(options_.max_step_fraction > 0.0)) throw std::invalid_argument("displacement bound must be positive");
  layout_ = options_.layout.value_or(SlotLayout::one_per_waveguide(config_));
  if (layout_.slots_per_waveguide.size() != config_.waveguides.size())
    throw std::invalid_argument("slot layout does not match the waveguides");
  assignment_ = nearest_assignment(config_);
  power_ = equal_power(config_, assignment_);
  for (const auto& w : config_.waveguides) candidates_.push_back(candidate_positions(w));

  for (std::size_t w = 0; w < config_.waveguides.size(); ++w) {
    const int m = layout_.slots_per_waveguide[w];
    const int n = config_.waveguides[w].grid_size;
    for (int j = 0; j < m; ++j) {
      if (kind_ == ActionKind::Discrete)
        initial_coords_.push_back(candidates_[w][static_cast<std::size_t>((j + 1) * (n - 1) / (m + 1))]);
      else
        initial_coords_.push_back(config_.waveguides[w].length * (j + 1) / (m + 1));
    }
  }
  reset();
}

EnvState PinchEnv::reset() {
  state_ = encode(initial_coords_, 0);
  return state_;
}

int PinchEnv::action_count(std::size_t agent) const {
  return config_.waveguides[layout_.waveguide_of(agent)].grid_size;
}

double PinchEnv::max_step(std::size_t agent) const {
  return options_.max_step_fraction * config_.waveguides[layout_.waveguide_of(agent)].length;
}

std::vector<Point3> PinchEnv::positions_at(int step) const {
  std::vector<Point3> out;
  for (const auto& u : config_.users) out.push_back(user_position_at(u, step * options_.tick_seconds));
  return out;
}

PinchConfiguration PinchEnv::pinch_of(const std::vector<double>& coords) const {
  PinchConfiguration p;
  p.sites.resize(config_.waveguides.size());
  for (std::size_t slot = 0; slot < coords.size(); ++slot) p.sites[layout_.waveguide_of(slot)].push_back({coords[slot], true});
  return p;
}

std::size_t PinchEnv::state_size() const {
  std::size_t bitmap = 0;
  for (const auto& w : config_.waveguides) bitmap += static_cast<std::size_t>(w.grid_size);
  const std::size_t users = config_.users.size();
  return users * 3 + layout_.total() + users * bitmap + users * 2;
}

EnvState PinchEnv::encode(const std::vector<double>& coords, int step) const {
  const auto pos = positions_at(step);
  const auto next = positions_at(step + 1);
  const auto& room = config_.room;
  const double wx = room.hi.x - room.lo.x, wy = room.hi.y - room.lo.y;

  EnvState s;
  s.coords = coords;
  s.step = step;
  s.features = Vector::Zero(static_cast<Eigen::Index>(state_size()));
  Eigen::Index i = 0;
  for (std::size_t k = 0; k < pos.size(); ++k) {
    s.features(i++) = (pos[k].x - room.lo.x) / wx;
    s.features(i++) = (pos[k].y - room.lo.y) / wy;
    s.features(i++) = config_.users[k].qos_min_rate;
  }
  for (std::size_t slot = 0; slot < coords.size(); ++slot)
    s.features(i++) = coords[slot] / config_.waveguides[layout_.waveguide_of(slot)].length;
  for (std::size_t k = 0; k < pos.size(); ++k)
    for (std::size_t w = 0; w < config_.waveguides.size(); ++w)
      for (double c : candidates_[w])
        s.features(i++) = los_blocked(pa_point(config_.waveguides[w], c), pos[k], config_.obstacles) ? 1.0 : 0.0;
  for (std::size_t k = 0; k < pos.size(); ++k) {
    const auto& u = config_.users[k];
    if (u.waypoints.empty()) {
      i += 2;
      continue;
    }
    const double scale = options_.tick_seconds * u.v_max;
    s.features(i++) = (next[k].x - pos[k].x) / scale;
    s.features(i++) = (next[k].y - pos[k].y) / scale;
  }
  return s;
}

std::size_t PinchEnv::observation_size() const {
  const std::size_t users = config_.users.size();
  std::size_t widest = 0;
  for (const auto& w : config_.waveguides) widest = std::max(widest, static_cast<std::size_t>(w.grid_size));
  return 1 + users * 3 + users * 2 + users * widest;
}

Vector PinchEnv::observation(const EnvState& state, std::size_t agent) const {
  const std::size_t users = config_.users.size();
  const std::size_t w = layout_.waveguide_of(agent);
  Vector o = Vector::Zero(static_cast<Eigen::Index>(observation_size()));
  Eigen::Index i = 0;
  const Eigen::Index coords_at = static_cast<Eigen::Index>(users * 3);
  o(i++) = state.features(coords_at + static_cast<Eigen::Index>(agent));
  o.segment(i, coords_at) = state.features.head(coords_at);
  i += coords_at;
  const Eigen::Index vel_len = static_cast<Eigen::Index>(users * 2);
  o.segment(i, vel_len) = state.features.tail(vel_len);
  i += vel_len;

  std::size_t bitmap_width = 0, offset = 0;
  for (std::size_t v = 0; v < config_.waveguides.size(); ++v) {
    if (v < w) offset += static_cast<std::size_t>(config_.waveguides[v].grid_size);
    bitmap_width += static_cast<std::size_t>(config_.waveguides[v].grid_size);
  }
  const Eigen::Index bitmap_at = coords_at + static_cast<Eigen::Index>(layout_.total());
  const Eigen::Index n = config_.waveguides[w].grid_size;
  std::size_t widest = 0;
  for (const auto& g : config_.waveguides) widest = std::max(widest, static_cast<std::size_t>(g.grid_size));
  for (std::size_t k = 0; k < users; ++k) {
    o.segment(i, n) = state.features.segment(bitmap_at + static_cast<Eigen::Index>(k * bitmap_width + offset), n);
    i += static_cast<Eigen::Index>(widest);
  }
  return o;
}

RateReport PinchEnv::evaluate_coords(const std::vector<double>& coords, int step) const {
  const auto pinch = pinch_of(coords);
  const bool mobile = std::any_of(config_.users.begin(), config_.users.end(),
                                  [](const User& u) { return !u.waypoints.empty(); });
  if (!mobile) return evaluate(config_, pinch, power_, assignment_);
  const auto pos = positions_at(step);
  return evaluate(config_, compute_links(config_, pinch, pos), power_, assignment_);
}

double PinchEnv::objective_of(const RateReport& report) const {
  return options_.reward == RewardKind::SumRate ? report.sum_rate : report.energy_efficiency;
}

double PinchEnv::reward_of(const RateReport& report) const {
  const double objective = objective_of(report);
  double shortfall = 0.0;
  for (std::size_t k = 0; k < report.rates.size(); ++k)
    shortfall += std::max(0.0, config_.users[k].qos_min_rate - report.rates[k]);
  return objective - options_.qos_penalty * shortfall;
}

StepResult PinchEnv::step(const std::vector<double>& action) {
  if (action.size() != layout_.total())
    throw std::invalid_argument("action has " + std::to_string(action.size()) + " entries, expected " +
                                std::to_string(layout_.total()));
  if (state_.step >= options_.episode_length) throw std::logic_error("step after the episode ended; call reset()");
  std::vector<double> coords = state_.coords;
  for (std::size_t slot = 0; slot < action.size(); ++slot) {
    const double a = action[slot];
    if (!std::isfinite(a)) throw std::invalid_argument("non-finite action");
    const std::size_t w = layout_.waveguide_of(slot);
    if (kind_ == ActionKind::Discrete) {
      const int n = config_.waveguides[w].grid_size;
      if (a != std::floor(a) || a < 0 || a >= n) throw std::invalid_argument("discrete action out of range");
      coords[slot] = candidates_[w][static_cast<std::size_t>(a)];
    } else {
      const double bound = max_step(slot);
      coords[slot] = std::clamp(coords[slot] + std::clamp(a, -bound, bound), 0.0, config_.waveguides[w].length);
    }
  }
  StepResult r;
  r.report = evaluate_coords(coords, state_.step);
  r.reward = reward_of(r.report);
  state_ = encode(coords, state_.step + 1);
  r.state = state_;
  r.done = state_.step >= options_.episode_length;
  return r;
}

PinchEnv make_env(ScenarioId id, std::uint64_t seed) {
  return PinchEnv(make_scenario(id, seed), default_action_kind(id), default_env_options(id));
}

ActionOracle best_discrete_action(const PinchEnv& env, int step) {
  const std::size_t k = env.agent_count();
  std::vector<int> idx(k, 0);
  ActionOracle best;
  bool found = false;
  std::vector<std::vector<double>> cands;
  for (std::size_t s = 0; s < k; ++s) cands.push_back(candidate_positions(env.config().waveguides[env.layout().waveguide_of(s)]));
  while (true) {
    std::vector<double> coords(k);
    for (std::size_t s = 0; s < k; ++s) coords[s] = cands[s][static_cast<std::size_t>(idx[s])];
    const double v = env.objective_of(env.evaluate_coords(coords, step));
    if (!found || v > best.value) {
      best.value = v;
      best.action = idx;
      found = true;
    }
    std::size_t d = k;
    while (d-- > 0) {
      if (++idx[d] < env.action_count(d)) break;
      idx[d] = 0;
    }
    if (d == static_cast<std::size_t>(-1)) break;
  }
  return best;
}

}  // namespace pinch::agents
