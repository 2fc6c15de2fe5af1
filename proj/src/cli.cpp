#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "pinch/edgeai.hpp"
#include "pinch/harness.hpp"
#include "pinch/rates.hpp"
#include "pinch/scenario_io.hpp"
#include "pinch/search.hpp"

namespace pinch::harness {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::uint64_t seed = 1;
  std::string out = "runs";
  std::string config;
  std::string scenario;
};

class Run {
 public:
  Run(std::string command, const Common& common, const std::vector<std::string>& args)
      : dir_(common.out) {
    manifest_.command = std::move(command);
    manifest_.config_path = common.config;
    manifest_.seed = common.seed;
    manifest_.output_dir = common.out;
    manifest_.args = args;
    manifest_.begin(dir_);
  }

  std::ofstream open(const std::string& name) {
    manifest_.outputs.push_back(name);
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    return f;
  }

  void write_json(const std::string& name, const nlohmann::json& doc) { open(name) << doc.dump(2) << '\n'; }

  void finish() { manifest_.finalize(dir_); }

 private:
  fs::path dir_;
  RunManifest manifest_;
};

ScenarioConfig scenario_for(const Common& c, ScenarioConfig fallback) {
  if (!c.config.empty()) return load_scenario(c.config);
  if (!c.scenario.empty()) {
    const auto id = agents::scenario_from_string(c.scenario);
    if (!id) throw ConfigError("unknown scenario '" + c.scenario + "' (expected a..f)");
    return agents::make_scenario(*id, c.seed);
  }
  return fallback;
}

void require_valid(const ScenarioConfig& config) {
  const auto errs = validate(config);
  if (!errs.empty()) throw ConfigError("invalid scenario: " + errs.front().field + ": " + errs.front().rule);
}

std::string join(const std::vector<double>& v, char sep = ';') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += format_number(v[i]);
  }
  return s;
}

std::vector<double> all_coords(const PinchConfiguration& p) {
  std::vector<double> out;
  for (std::size_t w = 0; w < p.sites.size(); ++w) {
    const auto c = p.active_coords(w);
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

RateReport default_report(const ScenarioConfig& c, const PinchConfiguration& p) {
  const auto assign = nearest_assignment(c);
  return evaluate(c, p, equal_power(c, assign), assign);
}

// ---------------------------------------------------------------------------

int cmd_validate(const Common& c, std::ostream& out) {
  if (c.config.empty()) throw ConfigError("validate needs --config");
  const auto config = load_scenario(c.config);
  const auto errs = validate(config);
  for (const auto& e : errs) out << e.field << ": " << e.rule << '\n';
  if (!errs.empty()) return 1;
  out << "ok: " << config.waveguides.size() << " waveguides, " << config.users.size() << " users\n";
  return 0;
}

int cmd_simulate(const Common& c, const std::vector<double>& coords, Run& run, std::ostream& out) {
  const auto config = scenario_for(c, agents::make_scenario(agents::ScenarioId::A, c.seed));
  require_valid(config);
  std::vector<double> base;
  for (const auto& w : config.waveguides) base.push_back(w.length / 2.0);
  if (!coords.empty()) {
    if (coords.size() != base.size()) throw ConfigError("--coords needs one coordinate per waveguide");
    base = coords;
  }
  const auto pinch = PinchConfiguration::single(base);
  if (const auto errs = validate(config, pinch); !errs.empty())
    throw ConfigError("invalid coordinates: " + errs.front().field + ": " + errs.front().rule);

  const auto links = compute_links(config, pinch);
  const auto assign = nearest_assignment(config);
  const auto report = evaluate(config, links, equal_power(config, assign), assign);
  {
    auto f = run.open("links.csv");
    CsvWriter csv(f, {"user", "waveguide", "serving", "gain", "rate"});
    for (std::size_t k = 0; k < config.users.size(); ++k)
      for (std::size_t w = 0; w < config.waveguides.size(); ++w) {
        csv << config.users[k].id << config.waveguides[w].id
            << (assign[k] == static_cast<int>(w) ? "1" : "0") << links.gain(k, w) << report.rates[k];
        csv.end_row();
      }
  }
  {
    auto f = run.open("sweep.csv");
    CsvWriter csv(f, {"waveguide", "s", "sum_rate", "min_rate"});
    for (std::size_t w = 0; w < config.waveguides.size(); ++w)
      for (double s : candidate_positions(config.waveguides[w])) {
        auto probe = base;
        probe[w] = s;
        const auto r = default_report(config, PinchConfiguration::single(probe));
        csv << config.waveguides[w].id << s << r.sum_rate << r.min_rate;
        csv.end_row();
      }
  }
  out << "sum rate " << format_number(report.sum_rate) << " bit/s/Hz, min rate " << format_number(report.min_rate)
      << '\n';
  return 0;
}

int cmd_optimize(const Common& c, const std::string& method, const std::string& objective, int passes, Run& run,
                 std::ostream& out) {
  const auto config = scenario_for(c, agents::make_scenario(agents::ScenarioId::B, c.seed));
  require_valid(config);
  Objective f;
  if (objective == "sum") {
    f = [&](const PinchConfiguration& p) { return default_report(config, p).sum_rate; };
  } else if (objective == "min") {
    f = [&](const PinchConfiguration& p) { return default_report(config, p).min_rate; };
  } else if (objective == "ee") {
    f = [&](const PinchConfiguration& p) { return default_report(config, p).energy_efficiency; };
  } else {
    throw ConfigError("unknown objective '" + objective + "' (sum, min, ee)");
  }

  SearchResult result;
  std::vector<double> power;
  if (method == "brute") {
    result = brute_force(config, f);
  } else if (method == "grid") {
    result = coordinate_grid(config, f, passes);
  } else if (method == "joint") {
    const auto joint = alternating_joint(config, default_power_levels());
    result = joint.search;
    power = joint.waveguide_power;
  } else {
    throw ConfigError("unknown method '" + method + "' (brute, grid, joint)");
  }
  {
    auto file = run.open("optimize.csv");
    CsvWriter csv(file, {"method", "objective", "evaluations", "best_value", "est_seconds", "coords", "power"});
    csv << method << (method == "joint" ? "ee" : objective) << result.evaluations << result.best_value
        << result.estimated_seconds << join(all_coords(result.best)) << join(power);
    csv.end_row();
  }
  {
    auto file = run.open("trace.csv");
    CsvWriter csv(file, {"sweep", "value"});
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
      csv << i << result.trace[i];
      csv.end_row();
    }
  }
  out << method << ": " << format_number(result.best_value) << " after " << result.evaluations << " evaluations\n";
  return 0;
}

int train_positioner_cmd(const Common& c, int epochs, int samples, Run& run, std::ostream& out) {
  RngRegistry rng(c.seed);
  const auto train = agents::make_positioner_dataset(static_cast<std::size_t>(samples), rng.stream("train/data")());
  const auto test = agents::make_positioner_dataset(500, rng.stream("train/heldout")());
  agents::PositionerTrainConfig tc;
  tc.train.epochs = epochs;
  tc.train.seed = rng.stream("train/init")();

  std::vector<int> sizes{static_cast<int>(train.features.rows())};
  sizes.insert(sizes.end(), tc.hidden.begin(), tc.hidden.end());
  sizes.push_back(1);
  auto model = nn::MlpModel::create(sizes, tc.train.seed);
  model.fit_normalization(train.features);
  nn::Optimizer opt(model, tc.train.optimizer, tc.train.learning_rate, tc.train.weight_decay);
  std::mt19937_64 shuffle(tc.train.seed);

  auto file = run.open("curve.csv");
  CsvWriter csv(file, {"episode", "mean_reward", "eval_rate", "oracle_ratio"});
  const int every = std::max(1, epochs / 10);
  for (int e = 0; e < epochs; ++e) {
    const double loss = nn::train_epoch(model, opt, train.features, train.labels, tc.train, shuffle);
    if ((e + 1) % every != 0 && e + 1 != epochs) continue;
    const auto rep = agents::evaluate_positioner(model, test);
    double achieved = 0.0;
    for (std::size_t i = 0; i < rep.rate_ratio.size(); ++i) achieved += rep.rate_ratio[i] * test.oracle_values[i];
    csv << e << -loss << achieved / static_cast<double>(rep.rate_ratio.size()) << rep.median_ratio;
    csv.end_row();
  }
  run.write_json("model_0.json", nn::model_to_json(model));
  out << "positioner trained for " << epochs << " epochs on " << samples << " instances\n";
  return 0;
}

void write_curve(Run& run, const std::vector<agents::EpisodeLog>& curve) {
  auto file = run.open("curve.csv");
  CsvWriter csv(file, {"episode", "mean_reward", "eval_rate", "oracle_ratio"});
  for (const auto& e : curve) {
    csv << e.episode << e.mean_reward << e.eval_rate << e.oracle_ratio;
    csv.end_row();
  }
}

int cmd_train(const Common& c, int episodes, int samples, Run& run, std::ostream& out) {
  if (c.scenario.empty()) throw ConfigError("train needs --scenario a..f");
  const auto id = agents::scenario_from_string(c.scenario);
  if (!id) throw ConfigError("unknown scenario '" + c.scenario + "' (expected a..f)");
  if (episodes < 1) throw ConfigError("--episodes must be positive");
  if (*id == agents::ScenarioId::A) return train_positioner_cmd(c, episodes, samples, run, out);

  agents::AgentConfig cfg;
  if (!c.config.empty()) {
    std::ifstream f(c.config);
    if (!f) throw ConfigError("cannot read " + c.config);
    try {
      cfg = agent_config_from_json(nlohmann::json::parse(f));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(c.config + ": " + e.what());
    }
  }
  run.write_json("agent_config.json", agent_config_to_json(cfg));
  auto env = agents::make_env(*id, c.seed);
  agents::TrainOptions opts;
  opts.episodes = episodes;
  opts.seed = rng_stream(c.seed, "train/agent")();
  opts.eval_every = std::max(1, episodes / 50);

  double best = 0.0, ratio = 0.0;
  if (env.action_kind() == agents::ActionKind::Discrete) {
    const auto r = env.agent_count() == 1 ? agents::train_dqn(env, cfg, opts) : agents::train_madqn(env, cfg, opts);
    write_curve(run, r.curve);
    for (std::size_t k = 0; k < r.agents.size(); ++k)
      run.write_json("model_" + std::to_string(k) + ".json",
                     nn::model_to_json(r.best_nets.empty() ? r.agents[k].online() : r.best_nets[k]));
    best = r.best_eval;
  } else {
    const auto r = env.agent_count() == 1 ? agents::train_ddpg(env, cfg, opts) : agents::train_maddpg(env, cfg, opts);
    write_curve(run, r.curve);
    for (std::size_t k = 0; k < r.model.agents(); ++k)
      run.write_json("actor_" + std::to_string(k) + ".json",
                     nn::model_to_json(r.best_actors.empty() ? r.model.actor(k) : r.best_actors[k]));
    run.write_json("critic.json", nn::model_to_json(r.model.critic()));
    best = r.best_eval;
  }
  ratio = best / agents::oracle_objective(env);
  out << "scenario " << c.scenario << ": best greedy objective " << format_number(best) << " (" << format_number(ratio)
      << " of the oracle)\n";
  return 0;
}

int cmd_benchmark(double tau, Run& run, std::ostream& out) {
  if (!(tau > 0.0)) throw ConfigError("--tau must be positive");
  auto file = run.open("complexity.csv");
  CsvWriter csv(file, {"method", "N", "K", "passes", "evaluations", "est_time_seconds"});
  auto opt = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& row : complexity_table(tau)) {
    csv << row.method << opt(row.n) << opt(row.k) << opt(row.passes) << row.evaluations << row.est_time_seconds;
    csv.end_row();
    out << row.method;
    if (row.n) out << " N=" << *row.n << " K=" << opt(row.k);
    out << ": " << row.evaluations << " evaluations, "
        << format_duration(row.est_time_seconds) << '\n';
  }
  return 0;
}

int cmd_fl(const Common& c, const std::string& scheme, int rounds, bool ideal, Run& run, std::ostream& out) {
  auto cfg = edge::default_fl_config();
  if (!c.config.empty()) cfg.scenario = load_scenario(c.config);
  if (rounds >= 0) cfg.rounds = rounds;
  cfg.ideal_uplink = ideal;
  std::vector<edge::FlScheme> schemes;
  if (scheme == "all") {
    schemes = {edge::FlScheme::NoPa, edge::FlScheme::FixedPa, edge::FlScheme::OptimizedPa};
  } else if (const auto s = edge::fl_scheme_from_string(scheme)) {
    schemes = {*s};
  } else {
    throw ConfigError("unknown scheme '" + scheme + "' (all, NO_PA, FIXED_PA, OPTIMIZED_PA)");
  }

  const auto data = edge::make_fl_data(cfg, c.seed);
  {
    auto file = run.open("devices.csv");
    CsvWriter csv(file, {"device", "x", "y", "samples", "data_value", "quality", "class", "compute_seconds"});
    for (const auto& d : data.devices) {
      csv << d.id << d.position.x << d.position.y << d.labels.size() << d.data_value << d.quality
          << edge::to_string(d.cls) << d.compute_seconds;
      csv.end_row();
    }
  }
  auto file = run.open("fl.csv");
  CsvWriter csv(file, {"round", "scheme", "seed", "accuracy", "round_seconds", "dropped", "rescued"});
  for (auto s : schemes) {
    const auto r = edge::fl_run(cfg, s, c.seed);
    for (const auto& log : r.rounds) {
      csv << log.round << edge::to_string(s) << c.seed << log.accuracy << log.round_seconds << log.dropped
          << log.rescued;
      csv.end_row();
    }
    out << edge::to_string(s) << ": final accuracy " << format_number(r.final_accuracy()) << '\n';
  }
  return 0;
}

int cmd_aircomp(const Common& c, int trials, Run& run, std::ostream& out) {
  const auto config = scenario_for(c, edge::default_fl_config().scenario);
  require_valid(config);
  edge::AirCompOptions opt;
  const auto cmp = edge::aircomp_with_pa(config, opt);
  RngRegistry rng(c.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto file = run.open("aircomp.csv");
  CsvWriter csv(file, {"scheme", "devices", "pa_coordinate", "mse_analytic", "mse_empirical", "standard_error"});
  for (const std::string scheme : {"NO_PA", "OPTIMIZED_PA"}) {
    const auto& gains = scheme == "NO_PA" ? cmp.gains_no_pa : cmp.gains_optimized;
    if (*std::max_element(gains.begin(), gains.end()) <= 0.0) {
      csv << scheme << gains.size() << (scheme == "NO_PA" ? "" : format_number(cmp.pa_coordinate)) << "inf" << "inf"
          << "nan";
      csv.end_row();
      continue;
    }
    const auto setup = edge::channel_inversion(gains, opt.power_cap, opt.cutoff, config.radio.noise_power,
                                               opt.signal_variance);
    auto values_rng = rng.stream("aircomp/values/" + scheme);
    std::vector<double> x;
    for (std::size_t k = 0; k < gains.size(); ++k) x.push_back(normal(values_rng));
    const auto r = edge::aircomp_aggregate(setup, x, rng.stream("aircomp/" + scheme)(), trials);
    csv << scheme << gains.size() << (scheme == "NO_PA" ? "" : format_number(cmp.pa_coordinate)) << r.mse_analytic
        << r.mse_empirical << r.standard_error;
    csv.end_row();
    out << scheme << ": analytic MSE " << format_number(r.mse_analytic) << ", Monte Carlo "
        << format_number(r.mse_empirical) << " +- " << format_number(r.standard_error) << '\n';
  }
  return 0;
}

ScenarioConfig default_hotspot_room() {
  ScenarioConfig c;
  c.room = {{0, 0, 0}, {10, 10, 3}};
  Waveguide w;
  w.feed = {0, 5, 3};
  w.length = 10;
  w.grid_size = 20;
  c.waveguides = {w};
  const std::vector<Point3> spots{{1, 3, 0}, {4, 7, 0}, {6, 3, 0}, {9, 7, 0}};
  for (std::size_t k = 0; k < spots.size(); ++k) {
    User u;
    u.id = static_cast<int>(k);
    u.position = spots[k];
    c.users.push_back(u);
  }
  return c;
}

int cmd_hotspot(const Common& c, int slots, Run& run, std::ostream& out) {
  const auto config = scenario_for(c, default_hotspot_room());
  require_valid(config);
  if (slots < 1) throw ConfigError("--slots must be positive");
  // one hot user in the first half and another in the second
  RngRegistry rng(c.seed);
  auto pick = rng.stream("hotspot/users");
  std::uniform_int_distribution<std::size_t> any(0, config.users.size() - 1);
  const std::size_t first = any(pick);
  std::size_t second = any(pick);
  if (config.users.size() > 1)
    while (second == first) second = any(pick);
  edge::TrafficMap traffic;
  for (int t = 0; t < slots; ++t) {
    std::vector<double> d(config.users.size(), 1.0);
    d[t < slots / 2 ? first : second] = 5.0;
    traffic.demand.push_back(d);
  }
  auto file = run.open("hotspot.csv");
  CsvWriter csv(file, {"slot", "policy", "objective", "min_rate", "served_load", "coords"});
  for (auto policy : {edge::HotspotPolicy::Static, edge::HotspotPolicy::Adaptive}) {
    double worst = 0.0;
    const auto trace = edge::hotspot_schedule(config, traffic, policy);
    for (const auto& s : trace) {
      csv << s.slot << edge::to_string(policy) << s.objective << s.min_rate << s.served_load << join(s.coords);
      csv.end_row();
      worst = s.slot == 0 ? s.objective : std::min(worst, s.objective);
    }
    out << edge::to_string(policy) << ": worst served fraction " << format_number(worst) << '\n';
  }
  return 0;
}

ScenarioConfig default_walk() {
  ScenarioConfig c;
  c.room = {{0, 0, 0}, {10, 10, 3}};
  for (int i = 0; i < 2; ++i) {
    Waveguide w;
    w.id = i;
    w.feed = {0, i == 0 ? 2.5 : 7.5, 3};
    w.length = 10;
    w.grid_size = 20;
    c.waveguides.push_back(w);
  }
  User u;
  u.position = {1, 2, 0};
  u.waypoints = {{0.0, {1, 2, 0}}, {10.0, {9, 8, 0}}};
  c.users = {u};
  c.obstacles = {{{4.5, 3.0, 0.0}, {5.5, 4.0, 2.8}}};
  c.access = AccessMode::MULTI_WAVEGUIDE;
  return c;
}

int cmd_mobility(const Common& c, const std::string& tracking, int ticks, double outage, int episodes,
                 const std::string& agent_config, Run& run, std::ostream& out) {
  const auto config = scenario_for(c, default_walk());
  require_valid(config);
  edge::MobilityOptions opt;
  opt.ticks = ticks;
  opt.outage_rate = outage;
  std::vector<edge::Tracking> modes;
  if (tracking == "all") {
    modes = {edge::Tracking::None, edge::Tracking::Grid, edge::Tracking::DdpgPolicy};
  } else if (const auto t = edge::tracking_from_string(tracking)) {
    modes = {*t};
  } else {
    throw ConfigError("unknown tracking '" + tracking + "' (none, grid, ddpg, all)");
  }

  auto file = run.open("mobility.csv");
  CsvWriter csv(file, {"tick", "tracking", "time", "x", "y", "serving", "rate", "outage", "coords"});
  for (auto mode : modes) {
    std::optional<agents::ActionPolicy> policy;
    if (mode == edge::Tracking::DdpgPolicy) {
      agents::AgentConfig cfg;
      cfg.gamma = 0.9;
      cfg.actor_learning_rate = 1e-3;
      if (!agent_config.empty()) {
        std::ifstream f(agent_config);
        if (!f) throw ConfigError("cannot read " + agent_config);
        cfg = agent_config_from_json(nlohmann::json::parse(f));
      }
      agents::EnvOptions eo;
      eo.episode_length = ticks;
      eo.tick_seconds = opt.tick_seconds;
      agents::PinchEnv env(config, agents::ActionKind::Continuous, eo);
      agents::TrainOptions to;
      to.episodes = episodes;
      to.seed = rng_stream(c.seed, "mobility/agent")();
      to.eval_every = std::max(1, episodes / 50);
      const auto r = env.agent_count() == 1 ? agents::train_ddpg(env, cfg, to) : agents::train_maddpg(env, cfg, to);
      policy = r.policy();
    }
    const auto rep = edge::mobility_track(config, mode, opt, policy ? &*policy : nullptr);
    for (const auto& t : rep.ticks) {
      csv << t.tick << edge::to_string(mode) << t.time << t.position.x << t.position.y << t.serving << t.rate
          << (t.outage ? "1" : "0") << join(t.coords);
      csv.end_row();
    }
    out << edge::to_string(mode) << ": outage " << format_number(rep.outage_fraction) << ", handovers "
        << rep.handovers << ", staleness " << rep.staleness << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pinching-antenna simulation, search and learning toolkit", "pinch"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kCodeVersion);

  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_out = true) {
    sub->add_option("--seed", common.seed, "run seed; every random stream derives from it");
    sub->add_option("--config", common.config, "scenario JSON (agent JSON for train)");
    sub->add_option("--scenario", common.scenario, "built-in scenario a..f");
    if (needs_out) sub->add_option("--out", common.out, "output directory");
  };

  auto* validate_cmd = app.add_subcommand("validate", "check a scenario config");
  add_common(validate_cmd, false);

  std::vector<double> coords;
  auto* simulate = app.add_subcommand("simulate", "rates at given PA coordinates plus a per-guide sweep");
  add_common(simulate);
  simulate->add_option("--coords", coords, "one coordinate per waveguide (default: midpoints)")->delimiter(',');

  std::string method = "grid", objective = "sum";
  int passes = 2;
  auto* optimize = app.add_subcommand("optimize", "search PA positions");
  add_common(optimize);
  optimize->add_option("--method", method, "brute, grid or joint");
  optimize->add_option("--objective", objective, "sum, min or ee");
  optimize->add_option("--passes", passes, "coordinate passes");

  int episodes = 400, samples = 2000;
  auto* train = app.add_subcommand("train", "train a learner on a built-in scenario");
  add_common(train);
  train->add_option("--episodes", episodes, "episodes (epochs for scenario a)");
  train->add_option("--samples", samples, "training instances for scenario a");

  double tau = 1e-3;
  auto* benchmark = app.add_subcommand("benchmark", "search-versus-learning cost table");
  add_common(benchmark);
  benchmark->add_option("--tau", tau, "seconds per objective evaluation");

  std::string scheme = "all";
  int rounds = -1;
  bool ideal = false;
  auto* fl = app.add_subcommand("fl", "federated learning with straggler rescue");
  add_common(fl);
  fl->add_option("--scheme", scheme, "all, NO_PA, FIXED_PA or OPTIMIZED_PA");
  fl->add_option("--rounds", rounds, "FedAvg rounds (default from the built-in setup)");
  fl->add_flag("--ideal-uplink", ideal, "zero upload time");

  int trials = 100000;
  auto* aircomp = app.add_subcommand("aircomp", "over-the-air aggregation with and without a PA");
  add_common(aircomp);
  aircomp->add_option("--trials", trials, "Monte Carlo trials");

  int slots = 8;
  auto* hotspot = app.add_subcommand("hotspot", "static versus adaptive placement under moving demand");
  add_common(hotspot);
  hotspot->add_option("--slots", slots, "time slots");

  std::string tracking = "all", agent_config;
  int ticks = 10, mobility_episodes = 300;
  double outage = 8.0;
  auto* mobility = app.add_subcommand("mobility", "outage and handovers along a walking trace");
  add_common(mobility);
  mobility->add_option("--tracking", tracking, "none, grid, ddpg or all");
  mobility->add_option("--ticks", ticks, "trace ticks of 1 s");
  mobility->add_option("--outage-rate", outage, "outage threshold, bit/s/Hz");
  mobility->add_option("--episodes", mobility_episodes, "DDPG training episodes");
  mobility->add_option("--agent-config", agent_config, "agent JSON for the DDPG tracker");

  std::vector<const char*> argv{"pinch"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 1;
  }

  try {
    if (validate_cmd->parsed()) return cmd_validate(common, out);
    auto* sub = app.get_subcommands().front();
    Run run(sub->get_name(), common, args);
    int code = 0;
    if (sub == simulate) code = cmd_simulate(common, coords, run, out);
    if (sub == optimize) code = cmd_optimize(common, method, objective, passes, run, out);
    if (sub == train) code = cmd_train(common, episodes, samples, run, out);
    if (sub == benchmark) code = cmd_benchmark(tau, run, out);
    if (sub == fl) code = cmd_fl(common, scheme, rounds, ideal, run, out);
    if (sub == aircomp) code = cmd_aircomp(common, trials, run, out);
    if (sub == hotspot) code = cmd_hotspot(common, slots, run, out);
    if (sub == mobility) code = cmd_mobility(common, tracking, ticks, outage, mobility_episodes, agent_config, run, out);
    run.finish();
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace pinch::harness
