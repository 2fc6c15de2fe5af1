#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "pinch/agents.hpp"
#include "pinch/propagation.hpp"

using namespace pinch;
using namespace pinch::agents;

namespace {

// Two guides separated by a full-height partition: every cross-guide path is blocked.
ScenarioConfig partitioned_pair() {
  auto c = testing::two_guides(8);
  c.obstacles.push_back({{0.0, 4.9, 0.0}, {10.0, 5.1, 2.9}});
  c.users[0].position = {2.5, 2.5, 0};
  c.users[1].position = {7.0, 7.0, 0};
  return c;
}

}  // namespace

TEST_CASE("environment reset is deterministic per (scenario, seed)") {
  for (int i = 0; i < 6; ++i) {
    const auto id = static_cast<ScenarioId>(i);
    auto a = make_env(id, 7), b = make_env(id, 7), c = make_env(id, 8);
    CHECK((a.reset().features.array() == b.reset().features.array()).all());
    CHECK(a.state_size() == c.state_size());
    CHECK_FALSE((a.reset().features.array() == c.reset().features.array()).all());
    CHECK(a.reset().features.allFinite());
  }
  CHECK_FALSE(scenario_from_string("g").has_value());
  CHECK(scenario_from_string("e") == ScenarioId::E);
}

TEST_CASE("only the mobility scenario fills the velocity slot") {
  for (int i = 0; i < 6; ++i) {
    const auto id = static_cast<ScenarioId>(i);
    auto env = make_env(id, 3);
    const auto f = env.reset().features;
    const auto users = static_cast<Eigen::Index>(env.config().users.size());
    const double speed = f.tail(2 * users).norm();
    if (id == ScenarioId::C)
      CHECK(speed > 0.0);
    else
      CHECK(speed == 0.0);
  }
}

TEST_CASE("blockage bitmap matches the LoS test") {
  auto env = make_env(ScenarioId::B, 4);
  const auto& c = env.config();
  const auto f = env.reset().features;
  const auto cands = candidate_positions(c.waveguides[0]);
  Eigen::Index i = 3 * 2 + 1;
  int blocked = 0;
  for (const auto& u : c.users)
    for (double s : cands) {
      const bool b = los_blocked(pa_point(c.waveguides[0], s), u.position, c.obstacles);
      CHECK(f(i++) == (b ? 1.0 : 0.0));
      blocked += b;
    }
  MESSAGE("blocked candidate bits: " << blocked);
}

TEST_CASE("one-step reward is maximized by the candidate nearest the user's projection") {
  auto c = testing::one_guide(11);
  c.radio.attenuation_db_per_m = 0.0;
  for (double x : {0.3, 2.2, 4.9, 7.6, 9.8}) {
    c.users[0].position = {x, 3.0, 0.0};
    PinchEnv env(c, ActionKind::Discrete);
    const auto oracle = best_discrete_action(env);
    const auto cands = candidate_positions(c.waveguides[0]);
    const auto nearest = std::min_element(cands.begin(), cands.end(), [&](double a, double b) {
      return std::abs(a - x) < std::abs(b - x);
    });
    CHECK(oracle.action[0] == nearest - cands.begin());
    double best = -1;
    for (int a = 0; a < env.action_count(0); ++a) {
      env.reset();
      best = std::max(best, env.step({static_cast<double>(a)}).reward);
    }
    CHECK(best == oracle.value);
  }
}

TEST_CASE("zero penalty reward is the evaluated sum rate, bit for bit") {
  for (auto id : {ScenarioId::A, ScenarioId::B, ScenarioId::E}) {
    const auto c = make_scenario(id, 5);
    auto opts = default_env_options(id);
    opts.qos_penalty = 0.0;
    PinchEnv env(c, ActionKind::Discrete, opts);
    const auto assign = nearest_assignment(c);
    const auto power = equal_power(c, assign);
    std::vector<double> action(env.agent_count(), 1.0);
    const auto r = env.step(action);
    std::vector<double> coords;
    for (std::size_t w = 0; w < c.waveguides.size(); ++w) coords.push_back(candidate_positions(c.waveguides[w])[1]);
    CHECK(r.reward == evaluate(c, PinchConfiguration::single(coords), power, assign).sum_rate);
  }
}

TEST_CASE("QoS shortfall is penalized with weight mu") {
  auto c = testing::one_guide(5);
  c.users[0].qos_min_rate = 100.0;
  EnvOptions opts;
  opts.qos_penalty = 2.0;
  PinchEnv env(c, ActionKind::Discrete, opts);
  const auto r = env.step({2.0});
  CHECK(r.reward == doctest::Approx(r.report.sum_rate - 2.0 * (100.0 - r.report.rates[0])));
}

TEST_CASE("episodes end after T steps and reject malformed actions") {
  auto env = make_env(ScenarioId::B, 1);
  CHECK_THROWS_AS(env.step({0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(env.step({5.0}), std::invalid_argument);
  CHECK_THROWS_AS(env.step({1.5}), std::invalid_argument);
  for (int t = 1; t <= env.options().episode_length; ++t) {
    const auto r = env.step({0.0});
    CHECK(r.done == (t == env.options().episode_length));
  }
  CHECK_THROWS(env.step({0.0}));
  env.reset();
  CHECK(env.state().step == 0);
}

TEST_CASE("continuous displacements are clipped to the step bound and the guide") {
  auto env = make_env(ScenarioId::C, 2);
  const double start = env.reset().coords[0];
  auto r = env.step({50.0});
  CHECK(r.state.coords[0] == doctest::Approx(start + env.max_step(0)));
  for (int i = 0; i < 8; ++i) r = env.step({env.max_step(0)});
  CHECK(r.state.coords[0] == 10.0);
}

TEST_CASE("replay buffer is a bounded FIFO with uniform sampling") {
  ReplayBuffer<int> buf(5);
  for (int i = 0; i < 5 + 3; ++i) {
    buf.push(i);
    CHECK(buf.size() <= 5);
  }
  CHECK(buf.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(buf[i] == static_cast<int>(i) + 3);
  std::mt19937_64 rng(1);
  std::set<std::size_t> hit;
  for (auto i : buf.sample(200, rng)) hit.insert(i);
  CHECK(hit.size() == 5);
  CHECK_THROWS(ReplayBuffer<int>(0));
}

TEST_CASE("exploration with epsilon 1 is uniform") {
  AgentConfig cfg;
  DqnAgent agent(3, 5, cfg, 1);
  std::mt19937_64 rng(2);
  std::vector<int> counts(5, 0);
  const int draws = 10'000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(agent.act(Vector::Zero(3), 1.0, rng))];
  const double mean = draws / 5.0, sd = std::sqrt(draws * 0.2 * 0.8);
  for (int c : counts) CHECK(std::abs(c - mean) <= 3 * sd);
}

TEST_CASE("two-armed bandit with gamma 0 converges to the rewards") {
  AgentConfig cfg;
  cfg.gamma = 0.0;
  cfg.reward_scale = 1.0;
  cfg.batch_size = 32;
  DqnAgent agent(1, 2, cfg, 3);
  std::mt19937_64 rng(4);
  const Vector obs = Vector::Ones(1);
  CHECK_FALSE(agent.learn(rng));
  for (int i = 0; i < 3000; ++i) {
    const int a = i % 2;
    agent.remember(obs, a, a, obs, true);
    agent.learn(rng);
  }
  const auto q = agent.q_values(obs);
  CHECK(std::abs(q(0) - 0.0) < 0.05);
  CHECK(std::abs(q(1) - 1.0) < 0.05);
  CHECK(agent.greedy(obs) == 1);
}

TEST_CASE("target network changes only at sync steps") {
  AgentConfig cfg;
  cfg.target_sync = 7;
  cfg.batch_size = 4;
  DqnAgent agent(2, 3, cfg, 5);
  std::mt19937_64 rng(6);
  std::mt19937_64 data(7);
  std::normal_distribution<double> n;
  auto previous = agent.target();
  int changes = 0;
  for (int i = 0; i < 60; ++i) {
    Vector o(2), o2(2);
    o << n(data), n(data);
    o2 << n(data), n(data);
    agent.remember(o, i % 3, n(data), o2, false);
    agent.learn(rng);
    const bool changed = !nn::identical(previous, agent.target());
    if (changed) {
      ++changes;
      CHECK(agent.updates() % 7 == 0);
      CHECK(nn::identical(agent.target(), agent.online()));
    }
    previous = agent.target();
  }
  CHECK(changes == static_cast<int>(agent.updates() / 7));
}

TEST_CASE("DQN on the obstacle scenario reaches the brute-force optimum and never exceeds it") {
  auto env = make_env(ScenarioId::B, 1);
  AgentConfig cfg;
  TrainOptions opts;
  opts.episodes = 400;
  opts.seed = 1;
  opts.eval_every = 100;
  const auto r = train_dqn(env, cfg, opts);
  REQUIRE(r.curve.size() == 4);
  const double achieved = rollout_objective(env, r.policy());
  const double oracle = best_discrete_action(env).value;
  CHECK(achieved <= oracle);
  CHECK(achieved >= 0.95 * oracle);
  CHECK(r.best_eval == achieved);
}

TEST_CASE("MADQN on partitioned guides matches per-guide optima") {
  PinchEnv env(partitioned_pair(), ActionKind::Discrete);
  AgentConfig cfg;
  TrainOptions opts;
  opts.episodes = 400;
  opts.seed = 2;
  opts.eval_every = 1;
  const auto r = train_madqn(env, cfg, opts);
  const auto policy = r.policy();
  const auto action = policy(env, env.reset());

  // no interference: each user's rate depends only on its own guide
  const auto& c = env.config();
  for (std::size_t w = 0; w < 2; ++w) {
    const auto cands = candidate_positions(c.waveguides[w]);
    double best = -1;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      std::vector<double> coords{cands[3], cands[3]};
      coords[w] = cands[i];
      const double rate = env.evaluate_coords(coords, 0).rates[w];
      if (rate > best) {
        best = rate;
        arg = i;
      }
    }
    CHECK(static_cast<std::size_t>(action[w]) == arg);
  }
}

TEST_CASE("MADQN on interfering guides beats the user-nearest joint action") {
  auto env = make_env(ScenarioId::E, 3);
  AgentConfig cfg;
  TrainOptions opts;
  opts.episodes = 300;
  opts.seed = 3;
  opts.eval_every = 300;
  const auto r = train_madqn(env, cfg, opts);
  const double learned = rollout_objective(env, r.policy());

  const auto& c = env.config();
  std::vector<double> naive;
  for (std::size_t w = 0; w < 2; ++w) {
    const auto cands = candidate_positions(c.waveguides[w]);
    const double x = c.users[w].position.x;
    naive.push_back(*std::min_element(cands.begin(), cands.end(),
                                      [&](double a, double b) { return std::abs(a - x) < std::abs(b - x); }));
  }
  const double baseline = env.objective_of(env.evaluate_coords(naive, 0));
  CHECK(learned >= baseline);
  CHECK(learned <= best_discrete_action(env).value);
}

TEST_CASE("an agent's greedy action ignores the other agent's private observation") {
  auto env = make_env(ScenarioId::E, 4);
  AgentConfig cfg;
  TrainOptions opts;
  opts.episodes = 20;
  const auto r = train_madqn(env, cfg, opts);
  const auto policy = r.policy();
  EnvState s = env.reset();
  const auto before = policy(env, s);
  // agent 1 owns its coordinate and its guide's bitmap
  const Eigen::Index users = 2, n = 10;
  s.features(users * 3 + 1) = 0.123;
  for (Eigen::Index k = 0; k < users; ++k) s.features.segment(users * 3 + 2 + k * 2 * n + n, n).setConstant(1.0);
  CHECK((env.observation(s, 0).array() == env.observation(env.reset(), 0).array()).all());
  CHECK_FALSE((env.observation(s, 1).array() == env.observation(env.reset(), 1).array()).all());
  CHECK(policy(env, s)[0] == before[0]);
}

namespace {

// Learner settings for the continuous tests: shorter horizon, faster actor.
AgentConfig tracking_config() {
  AgentConfig cfg;
  cfg.gamma = 0.9;
  cfg.actor_learning_rate = 1e-3;
  return cfg;
}

std::vector<double> actor_parameters(const ActorCritic& m) {
  std::vector<double> out;
  for (std::size_t k = 0; k < m.agents(); ++k) {
    const auto p = nn::flatten_parameters(m.actor(k));
    out.insert(out.end(), p.data(), p.data() + p.size());
  }
  return out;
}

}  // namespace

TEST_CASE("DDPG on a static user settles near the user's projection") {
  auto c = testing::one_guide(20);
  c.users[0].position = {7.0, 4.0, 0.0};
  PinchEnv env(c, ActionKind::Continuous);
  TrainOptions opts;
  opts.episodes = 600;
  opts.seed = 3;
  opts.eval_every = 10;
  const auto r = train_ddpg(env, tracking_config(), opts);
  const auto policy = r.policy();
  // iterate the greedy map well past the episode horizon
  EnvState s = env.reset();
  double coord = s.coords.at(0);
  for (int i = 0; i < 200; ++i) {
    coord = std::clamp(coord + policy(env, s)[0], 0.0, c.waveguides[0].length);
    s.coords = {coord};
    s.features(3) = coord / c.waveguides[0].length;
  }
  CHECK(std::abs(coord - 7.0) <= 1.0);
}

TEST_CASE("DDPG tracking a walking user beats the best fixed position") {
  auto env = make_env(ScenarioId::C, 3);
  TrainOptions opts;
  opts.episodes = 600;
  opts.seed = 3;
  opts.eval_every = 10;
  const auto r = train_ddpg(env, tracking_config(), opts);
  const auto calls = r.model.critic_calls();
  const double tracked = rollout_objective(env, r.policy());
  CHECK(r.model.critic_calls() == calls);
  CHECK(tracked == doctest::Approx(r.best_eval).epsilon(1e-12));

  double best_static = 0.0;
  const int horizon = env.options().episode_length;
  for (int i = 0; i <= 100; ++i) {
    const double s = 0.1 * i;
    double total = 0.0;
    for (int t = 0; t < horizon; ++t) total += env.objective_of(env.evaluate_coords({s}, t));
    best_static = std::max(best_static, total / horizon);
  }
  CHECK(tracked > best_static);
  CHECK(tracked <= oracle_objective(env) + 1e-9);
}

TEST_CASE("actor-critic training without noise is deterministic, and K = 1 MADDPG is DDPG") {
  auto env = make_env(ScenarioId::C, 2);
  AgentConfig cfg;
  cfg.noise_start = 0.0;
  cfg.noise_end = 0.0;
  TrainOptions opts;
  opts.episodes = 15;
  opts.seed = 5;
  const auto a = train_ddpg(env, cfg, opts);
  const auto b = train_ddpg(env, cfg, opts);
  const auto m = train_maddpg(env, cfg, opts);
  CHECK(actor_parameters(a.model) == actor_parameters(b.model));
  CHECK(actor_parameters(a.model) == actor_parameters(m.model));
  CHECK(a.model.critic_calls() == m.model.critic_calls());
  CHECK(rollout_objective(env, a.policy()) == rollout_objective(env, m.policy()));
  REQUIRE(a.curve.size() == 15);
  for (std::size_t i = 0; i < a.curve.size(); ++i) CHECK(a.curve[i].eval_rate == m.curve[i].eval_rate);
}

TEST_CASE("MADDPG on a mirrored pair ends symmetric") {
  auto c = testing::two_guides(10);
  c.users[0].position = {6.0, 3.0, 0.0};
  c.users[1].position = {6.0, 7.0, 0.0};
  PinchEnv env(c, ActionKind::Continuous);
  TrainOptions opts;
  opts.episodes = 600;
  opts.seed = 4;
  opts.eval_every = 10;
  const auto r = train_maddpg(env, tracking_config(), opts);
  const auto policy = r.policy();
  EnvState s = env.reset();
  for (bool done = false; !done;) {
    const auto step = env.step(policy(env, s));
    s = step.state;
    done = step.done;
  }
  CHECK(std::abs(s.coords[0] - s.coords[1]) <= 0.1 * c.waveguides[0].length);
}

TEST_CASE("supervised positioner") {
  SUBCASE("a single repeated instance is learned exactly") {
    auto data = make_positioner_dataset(1, 9);
    for (int i = 0; i < 6; ++i) {
      data.features.conservativeResize(Eigen::NoChange, data.features.cols() + 1);
      data.features.col(data.features.cols() - 1) = data.features.col(0);
      data.labels.conservativeResize(Eigen::NoChange, data.labels.cols() + 1);
      data.labels(0, data.labels.cols() - 1) = data.labels(0, 0);
      data.instances.push_back(data.instances[0]);
      data.oracle_values.push_back(data.oracle_values[0]);
    }
    PositionerTrainConfig cfg;
    cfg.train.epochs = 300;
    cfg.train.batch_size = 7;
    const auto model = train_positioner(data, cfg);
    const auto rep = evaluate_positioner(model, data);
    CHECK(rep.median_ratio == 1.0);
    CHECK(rep.mean_coordinate_error < 0.1);
  }
  SUBCASE("held-out NOMA instances, one forward pass each") {
    const auto train = make_positioner_dataset(2000, 21);
    const auto test = make_positioner_dataset(500, 22);
    const auto model = train_positioner(train);
    const auto rep = evaluate_positioner(model, test);
    CHECK(rep.median_ratio >= 0.95);
    CHECK(rep.forward_passes_per_instance == 1.0);
    for (double r : rep.rate_ratio) CHECK(r <= 1.0 + 1e-12);
  }
  SUBCASE("empty dataset") {
    CHECK_THROWS_AS(train_positioner(PositionerDataset{}), std::invalid_argument);
  }
}

TEST_CASE("agent config validation") {
  AgentConfig cfg;
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.target_sync = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.epsilon_end = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  auto env = make_env(ScenarioId::B, 1);
  CHECK_THROWS_AS(train_madqn(env, {}, {}), std::invalid_argument);
  auto cont = make_env(ScenarioId::C, 1);
  CHECK_THROWS_AS(train_dqn(cont, {}, {}), std::invalid_argument);
  CHECK(linear_schedule(1.0, 0.05, 0.5, 0, 100) == 1.0);
  CHECK(linear_schedule(1.0, 0.05, 0.5, 25, 100) == doctest::Approx(0.525));
  CHECK(linear_schedule(1.0, 0.05, 0.5, 80, 100) == 0.05);
}
