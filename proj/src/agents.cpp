#include "pinch/agents.hpp"

#include <algorithm>
#include <cmath>

namespace pinch::agents {

void AgentConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("agent config: ") + what); };
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0, 1)");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0))
    fail("epsilon must lie in [0, 1]");
  if (!(epsilon_decay_fraction >= 0.0 && epsilon_decay_fraction <= 1.0)) fail("epsilon decay fraction must lie in [0, 1]");
  if (target_sync < 1) fail("target sync period must be at least 1");
  if (buffer_capacity < 1) fail("buffer capacity must be positive");
  if (batch_size < 1) fail("batch size must be positive");
  if (!(learning_rate >= 0.0 && actor_learning_rate >= 0.0)) fail("learning rates must be non-negative");
  if (!(noise_start >= 0.0 && noise_end >= 0.0)) fail("exploration noise must be non-negative");
  if (hidden_units < 1 || hidden_layers < 0) fail("bad hidden layer shape");
  if (!(reward_scale > 0.0)) fail("reward scale must be positive");
  if (!(preactivation_penalty >= 0.0)) fail("pre-activation penalty must be non-negative");
}

double linear_schedule(double start, double end, double fraction, std::uint64_t step, std::uint64_t total_steps) {
  const double horizon = fraction * static_cast<double>(total_steps);
  if (horizon <= 0.0 || static_cast<double>(step) >= horizon) return end;
  return start + (end - start) * static_cast<double>(step) / horizon;
}

namespace {

std::vector<int> layer_shape(std::size_t in, const AgentConfig& c, int out) {
  std::vector<int> sizes{static_cast<int>(in)};
  for (int i = 0; i < c.hidden_layers; ++i) sizes.push_back(c.hidden_units);
  sizes.push_back(out);
  return sizes;
}

void check_finite(const nn::Matrix& m, const char* what) {
  if (!m.allFinite()) throw nn::TrainingDiverged(0, std::string(what) + " produced non-finite values");
}

}  // namespace

DqnAgent::DqnAgent(std::size_t obs_size, int actions, const AgentConfig& config, std::uint64_t seed)
    : config_(config),
      actions_(actions),
      online_(nn::MlpModel::create(layer_shape(obs_size, config, actions), seed)),
      target_(online_),
      opt_(online_, nn::OptimizerKind::Adam, config.learning_rate),
      buffer_(config.buffer_capacity) {
  config.validate();
  if (actions < 1) throw std::invalid_argument("a DQN agent needs at least one action");
}

Vector DqnAgent::q_values(const Vector& obs) const { return nn::forward(online_, obs); }

int DqnAgent::greedy(const Vector& obs) const {
  Eigen::Index best = 0;
  q_values(obs).maxCoeff(&best);
  return static_cast<int>(best);
}

int DqnAgent::act(const Vector& obs, double epsilon, std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) return std::uniform_int_distribution<int>(0, actions_ - 1)(rng);
  return greedy(obs);
}

void DqnAgent::remember(const Vector& obs, int action, double reward, const Vector& next_obs, bool done) {
  if (!std::isfinite(reward)) throw std::invalid_argument("non-finite reward");
  buffer_.push({obs, action, reward, next_obs, done});
}

bool DqnAgent::learn(std::mt19937_64& rng) {
  const auto b = static_cast<std::size_t>(config_.batch_size);
  if (buffer_.size() < b) return false;
  const auto picks = buffer_.sample(b, rng);
  const auto obs_size = buffer_[0].obs.size();
  nn::Matrix x(obs_size, static_cast<Eigen::Index>(b)), xn(obs_size, static_cast<Eigen::Index>(b));
  for (std::size_t j = 0; j < b; ++j) {
    x.col(static_cast<Eigen::Index>(j)) = buffer_[picks[j]].obs;
    xn.col(static_cast<Eigen::Index>(j)) = buffer_[picks[j]].next_obs;
  }
  const nn::Matrix q_next = nn::forward(target_, xn);
  const auto cache = nn::forward_cache(online_, x);
  const nn::Matrix& q = cache.post.back();
  check_finite(q, "Q network");

  nn::Matrix grad = nn::Matrix::Zero(q.rows(), q.cols());
  for (std::size_t j = 0; j < b; ++j) {
    const auto& s = buffer_[picks[j]];
    const auto col = static_cast<Eigen::Index>(j);
    const double bootstrap = s.done ? 0.0 : config_.gamma * q_next.col(col).maxCoeff();
    const double y = config_.reward_scale * s.reward + bootstrap;
    const double td = q(s.action, col) - y;
    grad(s.action, col) = std::clamp(td, -1.0, 1.0) / static_cast<double>(b);
  }
  opt_.step(online_, nn::backward(online_, cache, grad));
  ++updates_;
  if (updates_ % static_cast<std::uint64_t>(config_.target_sync) == 0) target_ = online_;
  return true;
}

ActorCritic::ActorCritic(const std::vector<std::size_t>& obs_sizes, std::size_t state_size, const AgentConfig& config,
                         std::uint64_t seed)
    : config_(config),
      critic_(nn::MlpModel::create(layer_shape(state_size + obs_sizes.size(), config, 1), seed)),
      target_critic_(critic_),
      critic_opt_(critic_, nn::OptimizerKind::Adam, config.learning_rate),
      buffer_(config.buffer_capacity) {
  config.validate();
  if (obs_sizes.empty()) throw std::invalid_argument("actor-critic needs at least one agent");
  std::mt19937_64 seeds(seed);
  seeds.discard(1);
  for (std::size_t k = 0; k < obs_sizes.size(); ++k) {
    actors_.push_back(nn::MlpModel::create(layer_shape(obs_sizes[k], config, 1), seeds()));
    actor_opts_.emplace_back(actors_.back(), nn::OptimizerKind::Adam, config.actor_learning_rate);
  }
  target_actors_ = actors_;
}

double ActorCritic::act(std::size_t agent, const Vector& obs) const {
  return std::tanh(nn::forward(actors_.at(agent), obs)(0));
}

std::vector<double> ActorCritic::act(const std::vector<Vector>& obs) const {
  if (obs.size() != actors_.size()) throw std::invalid_argument("observation count does not match the agents");
  std::vector<double> out;
  for (std::size_t k = 0; k < obs.size(); ++k) out.push_back(act(k, obs[k]));
  return out;
}

void ActorCritic::remember(Transition t) {
  if (!std::isfinite(t.reward)) throw std::invalid_argument("non-finite reward");
  if (t.obs.size() != actors_.size() || t.action.size() != actors_.size())
    throw std::invalid_argument("transition does not match the agent count");
  buffer_.push(std::move(t));
}

bool ActorCritic::learn(std::mt19937_64& rng) {
  const auto b = static_cast<std::size_t>(config_.batch_size);
  if (buffer_.size() < b) return false;
  const auto picks = buffer_.sample(b, rng);
  const std::size_t k_agents = actors_.size();
  const auto bi = static_cast<Eigen::Index>(b);
  const auto state_size = buffer_[0].state.size();
  const auto ka = static_cast<Eigen::Index>(k_agents);

  nn::Matrix sa(state_size + ka, bi), sna(state_size + ka, bi), reward(1, bi);
  std::vector<nn::Matrix> obs(k_agents), next_obs(k_agents);
  for (std::size_t k = 0; k < k_agents; ++k) {
    obs[k].resize(buffer_[0].obs[k].size(), bi);
    next_obs[k].resize(buffer_[0].obs[k].size(), bi);
  }
  std::vector<bool> done(b);
  for (std::size_t j = 0; j < b; ++j) {
    const auto& t = buffer_[picks[j]];
    const auto c = static_cast<Eigen::Index>(j);
    sa.col(c).head(state_size) = t.state;
    sna.col(c).head(state_size) = t.next_state;
    for (std::size_t k = 0; k < k_agents; ++k) {
      sa(state_size + static_cast<Eigen::Index>(k), c) = t.action[k];
      obs[k].col(c) = t.obs[k];
      next_obs[k].col(c) = t.next_obs[k];
    }
    reward(0, c) = config_.reward_scale * t.reward;
    done[j] = t.done;
  }

  // critic: regress onto the bootstrapped target of the target actors and critic
  for (std::size_t k = 0; k < k_agents; ++k)
    sna.row(state_size + static_cast<Eigen::Index>(k)) = nn::forward(target_actors_[k], next_obs[k]).array().tanh().matrix();
  const nn::Matrix q_next = nn::forward(target_critic_, sna);
  ++critic_calls_;
  nn::Matrix y = reward;
  for (std::size_t j = 0; j < b; ++j)
    if (!done[j]) y(0, static_cast<Eigen::Index>(j)) += config_.gamma * q_next(0, static_cast<Eigen::Index>(j));
  const auto g = nn::gradient(critic_, sa, y, nn::LossKind::MSE);
  ++critic_calls_;
  critic_opt_.step(critic_, g);

  // actors: ascend the critic along each agent's own action
  for (std::size_t k = 0; k < k_agents; ++k) {
    const auto actor_cache = nn::forward_cache(actors_[k], obs[k]);
    const nn::Matrix& z = actor_cache.post.back();
    check_finite(z, "actor");
    const nn::Matrix a = z.array().tanh().matrix();
    nn::Matrix joint = sa;
    joint.row(state_size + static_cast<Eigen::Index>(k)) = a;
    const auto critic_cache = nn::forward_cache(critic_, joint);
    ++critic_calls_;
    nn::Matrix d_input;
    nn::backward(critic_, critic_cache, nn::Matrix::Constant(1, bi, -1.0 / static_cast<double>(b)), &d_input);
    // squash outside the network so a pre-activation penalty can keep tanh out of saturation
    const nn::Matrix d_z = d_input.row(state_size + static_cast<Eigen::Index>(k)).cwiseProduct((1.0 - a.array().square()).matrix()) +
                           (2.0 * config_.preactivation_penalty / static_cast<double>(b)) * z;
    actor_opts_[k].step(actors_[k], nn::backward(actors_[k], actor_cache, d_z));
  }

  ++updates_;
  if (updates_ % static_cast<std::uint64_t>(config_.target_sync) == 0) {
    target_critic_ = critic_;
    target_actors_ = actors_;
  }
  return true;
}

namespace {

std::uint64_t total_steps(const PinchEnv& env, const TrainOptions& o) {
  return static_cast<std::uint64_t>(o.episodes) * static_cast<std::uint64_t>(env.options().episode_length);
}

std::vector<std::vector<double>> fine_grids(const PinchEnv& env, int points) {
  std::vector<std::vector<double>> grids;
  for (std::size_t s = 0; s < env.agent_count(); ++s) {
    const double len = env.config().waveguides[env.layout().waveguide_of(s)].length;
    std::vector<double> g;
    for (int i = 0; i < points; ++i) g.push_back(points == 1 ? len / 2 : len * i / (points - 1));
    grids.push_back(std::move(g));
  }
  return grids;
}

double best_on_grids(const PinchEnv& env, const std::vector<std::vector<double>>& grids, int step) {
  const std::size_t k = grids.size();
  std::vector<std::size_t> idx(k, 0);
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<double> coords(k);
    for (std::size_t s = 0; s < k; ++s) coords[s] = grids[s][idx[s]];
    best = std::max(best, env.objective_of(env.evaluate_coords(coords, step)));
    std::size_t d = k;
    bool more = false;
    while (d-- > 0) {
      if (++idx[d] < grids[d].size()) {
        more = true;
        break;
      }
      idx[d] = 0;
    }
    if (!more) return best;
  }
}

bool has_mobility(const PinchEnv& env) {
  for (const auto& u : env.config().users)
    if (!u.waypoints.empty()) return true;
  return false;
}

std::vector<Vector> observations(const PinchEnv& env, const EnvState& s) {
  std::vector<Vector> out;
  for (std::size_t k = 0; k < env.agent_count(); ++k) out.push_back(env.observation(s, k));
  return out;
}

std::vector<nn::MlpModel> online_nets(const std::vector<DqnAgent>& agents) {
  std::vector<nn::MlpModel> nets;
  for (const auto& a : agents) nets.push_back(a.online());
  return nets;
}

ActionPolicy q_policy(std::vector<nn::MlpModel> nets, bool local) {
  return [nets = std::move(nets), local](const PinchEnv& env, const EnvState& s) {
    std::vector<double> a;
    for (std::size_t k = 0; k < nets.size(); ++k) {
      Eigen::Index best = 0;
      nn::forward(nets[k], local ? env.observation(s, k) : s.features).maxCoeff(&best);
      a.push_back(static_cast<double>(best));
    }
    return a;
  };
}

std::vector<nn::MlpModel> copy_actors(const ActorCritic& model) {
  std::vector<nn::MlpModel> actors;
  for (std::size_t k = 0; k < model.agents(); ++k) actors.push_back(model.actor(k));
  return actors;
}

ActionPolicy actor_policy(std::vector<nn::MlpModel> actors) {
  return [actors = std::move(actors)](const PinchEnv& env, const EnvState& s) {
    std::vector<double> a;
    for (std::size_t k = 0; k < actors.size(); ++k)
      a.push_back(std::tanh(nn::forward(actors[k], env.observation(s, k))(0)) * env.max_step(k));
    return a;
  };
}

EpisodeLog log_entry(PinchEnv& env, int episode, double mean_reward, const ActionPolicy& policy, double oracle) {
  EpisodeLog e;
  e.episode = episode;
  e.mean_reward = mean_reward;
  e.eval_rate = rollout_objective(env, policy);
  e.oracle_ratio = oracle > 0.0 ? e.eval_rate / oracle : 0.0;
  return e;
}

DqnResult train_q_learners(PinchEnv& env, const AgentConfig& config, const TrainOptions& options, bool local) {
  config.validate();
  if (env.action_kind() != ActionKind::Discrete) throw std::invalid_argument("DQN needs a discrete environment");
  if (options.episodes < 0 || options.eval_every < 1) throw std::invalid_argument("bad training options");
  std::mt19937_64 master(options.seed);
  const std::size_t k_agents = env.agent_count();
  const std::size_t in = local ? env.observation_size() : env.state_size();
  DqnResult out;
  for (std::size_t k = 0; k < k_agents; ++k) out.agents.emplace_back(in, env.action_count(k), config, master());
  std::mt19937_64 rng(master());
  const std::uint64_t steps_total = total_steps(env, options);
  const double oracle = oracle_objective(env);
  std::uint64_t step = 0;

  auto view = [&](const EnvState& s, std::size_t k) { return local ? env.observation(s, k) : s.features; };
  for (int ep = 0; ep < options.episodes; ++ep) {
    EnvState s = env.reset();
    double total = 0.0;
    int n = 0;
    for (bool done = false; !done; ++step, ++n) {
      const double eps = linear_schedule(config.epsilon_start, config.epsilon_end, config.epsilon_decay_fraction, step,
                                         steps_total);
      std::vector<double> action;
      for (std::size_t k = 0; k < k_agents; ++k) action.push_back(out.agents[k].act(view(s, k), eps, rng));
      const auto r = env.step(action);
      const bool terminal = r.done && !config.bootstrap_on_timeout;
      for (std::size_t k = 0; k < k_agents; ++k) {
        out.agents[k].remember(view(s, k), static_cast<int>(action[k]), r.reward, view(r.state, k), terminal);
        out.agents[k].learn(rng);
      }
      total += r.reward;
      s = r.state;
      done = r.done;
    }
    if ((ep + 1) % options.eval_every == 0 || ep + 1 == options.episodes) {
      auto nets = online_nets(out.agents);
      out.curve.push_back(log_entry(env, ep, total / n, q_policy(nets, local), oracle));
      if (options.keep_best && (out.best_nets.empty() || out.curve.back().eval_rate > out.best_eval)) {
        out.best_eval = out.curve.back().eval_rate;
        out.best_nets = std::move(nets);
      }
    }
  }
  out.local = local;
  return out;
}

ActorCriticResult train_actor_critic(PinchEnv& env, const AgentConfig& config, const TrainOptions& options) {
  config.validate();
  if (env.action_kind() != ActionKind::Continuous) throw std::invalid_argument("actor-critic needs a continuous environment");
  if (options.episodes < 0 || options.eval_every < 1) throw std::invalid_argument("bad training options");
  std::mt19937_64 master(options.seed);
  const std::size_t k_agents = env.agent_count();
  ActorCriticResult out{ActorCritic(std::vector<std::size_t>(k_agents, env.observation_size()), env.state_size(), config,
                                    master()),
                        {},
                        {},
                        0.0};
  std::mt19937_64 rng(master());
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::uint64_t steps_total = total_steps(env, options);
  const double oracle = oracle_objective(env);
  std::uint64_t step = 0;

  for (int ep = 0; ep < options.episodes; ++ep) {
    EnvState s = env.reset();
    double total = 0.0;
    int n = 0;
    for (bool done = false; !done; ++step, ++n) {
      // noise is specified in metres relative to L; the actor works in units of the step bound
      const double sigma = linear_schedule(config.noise_start, config.noise_end, 1.0, step, steps_total) /
                           env.options().max_step_fraction;
      const auto obs = observations(env, s);
      std::vector<double> u = out.model.act(obs), action(k_agents);
      for (std::size_t k = 0; k < k_agents; ++k) {
        if (sigma > 0.0) u[k] = std::clamp(u[k] + sigma * normal(rng), -1.0, 1.0);
        action[k] = u[k] * env.max_step(k);
      }
      const auto r = env.step(action);
      const bool terminal = r.done && !config.bootstrap_on_timeout;
      out.model.remember({s.features, obs, u, r.reward, r.state.features, observations(env, r.state), terminal});
      out.model.learn(rng);
      total += r.reward;
      s = r.state;
      done = r.done;
    }
    if ((ep + 1) % options.eval_every == 0 || ep + 1 == options.episodes) {
      auto actors = copy_actors(out.model);
      out.curve.push_back(log_entry(env, ep, total / n, actor_policy(actors), oracle));
      if (options.keep_best && (out.best_actors.empty() || out.curve.back().eval_rate > out.best_eval)) {
        out.best_eval = out.curve.back().eval_rate;
        out.best_actors = std::move(actors);
      }
    }
  }
  return out;
}

}  // namespace

double rollout_objective(PinchEnv& env, const ActionPolicy& policy) {
  EnvState s = env.reset();
  double total = 0.0;
  int n = 0;
  for (bool done = false; !done; ++n) {
    const auto r = env.step(policy(env, s));
    total += env.objective_of(r.report);
    s = r.state;
    done = r.done;
  }
  env.reset();
  return total / n;
}

double oracle_objective(const PinchEnv& env, int fine_points) {
  const int horizon = env.options().episode_length;
  const bool mobile = has_mobility(env);
  const auto grids = fine_grids(env, fine_points);
  auto best_at = [&](int t) {
    return env.action_kind() == ActionKind::Discrete ? best_discrete_action(env, t).value : best_on_grids(env, grids, t);
  };
  if (!mobile) return best_at(0);
  double total = 0.0;
  for (int t = 0; t < horizon; ++t) total += best_at(t);
  return total / horizon;
}

ActionPolicy DqnResult::policy() const { return q_policy(best_nets.empty() ? online_nets(agents) : best_nets, local); }

DqnResult train_dqn(PinchEnv& env, const AgentConfig& config, const TrainOptions& options) {
  if (env.agent_count() != 1) throw std::invalid_argument("DQN controls exactly one PA; use MADQN for several");
  return train_q_learners(env, config, options, false);
}

DqnResult train_madqn(PinchEnv& env, const AgentConfig& config, const TrainOptions& options) {
  if (env.agent_count() < 2) throw std::invalid_argument("MADQN needs at least two agents");
  return train_q_learners(env, config, options, true);
}

ActionPolicy ActorCriticResult::policy() const {
  return actor_policy(best_actors.empty() ? copy_actors(model) : best_actors);
}

ActorCriticResult train_ddpg(PinchEnv& env, const AgentConfig& config, const TrainOptions& options) {
  if (env.agent_count() != 1) throw std::invalid_argument("DDPG controls exactly one PA; use MADDPG for several");
  return train_actor_critic(env, config, options);
}

ActorCriticResult train_maddpg(PinchEnv& env, const AgentConfig& config, const TrainOptions& options) {
  return train_actor_critic(env, config, options);
}

}  // namespace pinch::agents
