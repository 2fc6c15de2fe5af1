#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "pinch/edgeai.hpp"
#include "pinch/propagation.hpp"
#include "pinch/rates.hpp"
#include "pinch/search.hpp"
#include "pinch/seeding.hpp"

namespace pinch::edge {

namespace {

void check_setup(const AirCompSetup& s) {
  if (s.gains.empty()) throw std::invalid_argument("AirComp needs at least one device");
  if (s.tx_scalars.size() != s.gains.size()) throw std::invalid_argument("one transmit scalar per device");
  if (s.receive_scale == 0.0 || !std::isfinite(s.receive_scale)) throw std::invalid_argument("zero receive scale");
  if (!(s.noise_power >= 0.0) || !(s.signal_variance >= 0.0)) throw std::invalid_argument("negative variance");
}

}  // namespace

double aircomp_estimate(const AirCompSetup& setup, std::span<const double> x, double noise) {
  check_setup(setup);
  if (x.size() != setup.gains.size()) throw std::invalid_argument("one value per device");
  double sum = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) sum += setup.tx_scalars[k] * setup.gains[k] * x[k];
  return (sum + noise) / (static_cast<double>(x.size()) * setup.receive_scale);
}

double aircomp_mse(const AirCompSetup& setup) {
  check_setup(setup);
  const double k = static_cast<double>(setup.gains.size());
  const double a = setup.receive_scale;
  double mis = 0.0;
  for (std::size_t i = 0; i < setup.gains.size(); ++i) {
    const double e = setup.tx_scalars[i] * setup.gains[i] / a - 1.0;
    mis += e * e;
  }
  return mis * setup.signal_variance / (k * k) + setup.noise_power / (k * k * a * a);
}

AirCompResult aircomp_aggregate(const AirCompSetup& setup, std::span<const double> x, std::uint64_t seed,
                                int trials) {
  check_setup(setup);
  if (x.size() != setup.gains.size()) throw std::invalid_argument("one value per device");
  if (trials < 2) throw std::invalid_argument("Monte Carlo needs at least two trials");
  const double sigma_n = std::sqrt(setup.noise_power);
  const double sigma_x = std::sqrt(setup.signal_variance);
  std::normal_distribution<double> normal(0.0, 1.0);

  AirCompResult r;
  std::mt19937_64 noise_rng(derive_seed(seed, "aircomp/noise"));
  r.estimate = aircomp_estimate(setup, x, sigma_n * normal(noise_rng));
  r.mse_analytic = aircomp_mse(setup);
  r.trials = trials;

  std::mt19937_64 mc(derive_seed(seed, "aircomp/mc"));
  std::vector<double> draw(x.size());
  double mean = 0.0, m2 = 0.0;  // Welford over squared errors
  for (int t = 0; t < trials; ++t) {
    double truth = 0.0;
    for (auto& v : draw) truth += (v = sigma_x * normal(mc));
    truth /= static_cast<double>(draw.size());
    const double err = aircomp_estimate(setup, draw, sigma_n * normal(mc)) - truth;
    const double sq = err * err;
    const double delta = sq - mean;
    mean += delta / (t + 1);
    m2 += delta * (sq - mean);
  }
  r.mse_empirical = mean;
  r.standard_error = std::sqrt(m2 / (trials - 1) / trials);
  return r;
}

AirCompSetup channel_inversion(std::vector<double> gains, double power_cap, double cutoff, double noise_power,
                               double signal_variance) {
  if (gains.empty()) throw std::invalid_argument("AirComp needs at least one device");
  if (!(power_cap > 0.0)) throw std::invalid_argument("power cap must be positive");
  const double peak = std::sqrt(power_cap);
  double floor_gain = std::numeric_limits<double>::infinity();
  for (double h : gains)
    if (h >= cutoff && h > 0.0) floor_gain = std::min(floor_gain, h);
  if (!std::isfinite(floor_gain)) floor_gain = *std::max_element(gains.begin(), gains.end());
  if (!(floor_gain > 0.0)) throw std::invalid_argument("zero receive scale: every channel is blocked");

  AirCompSetup s;
  s.receive_scale = peak * floor_gain;
  for (double h : gains)
    s.tx_scalars.push_back(h >= cutoff && h > 0.0 ? std::min(s.receive_scale / h, peak) : peak);
  s.gains = std::move(gains);
  s.noise_power = noise_power;
  s.power_cap = power_cap;
  s.signal_variance = signal_variance;
  return s;
}

AirCompComparison aircomp_with_pa(const ScenarioConfig& config, const AirCompOptions& options) {
  if (config.users.empty() || config.waveguides.empty())
    throw std::invalid_argument("AirComp needs devices and a waveguide");
  const auto& w = config.waveguides[0];
  auto mse_of = [&](const std::vector<double>& gains) {
    if (*std::max_element(gains.begin(), gains.end()) <= 0.0) return std::numeric_limits<double>::infinity();
    return aircomp_mse(channel_inversion(gains, options.power_cap, options.cutoff, config.radio.noise_power,
                                         options.signal_variance));
  };
  auto pa_gains = [&](double s) {
    std::vector<double> g;
    for (const auto& u : config.users)
      g.push_back(std::abs(channel_coeff(pa_point(w, s), s, u.position, config.radio, config.obstacles)));
    return g;
  };

  AirCompComparison out;
  for (const auto& u : config.users)
    out.gains_no_pa.push_back(std::abs(channel_coeff(options.access_point, 0.0, u.position, config.radio, config.obstacles)));
  out.mse_no_pa = mse_of(out.gains_no_pa);

  // the PA rides waveguide 0 only
  ScenarioConfig one = config;
  one.waveguides = {w};
  const auto best = coordinate_grid(
      one, [&](const PinchConfiguration& p) { return -mse_of(pa_gains(p.active_coords(0).at(0))); }, options.passes);
  out.pa_coordinate = best.best.active_coords(0).at(0);
  out.gains_optimized = pa_gains(out.pa_coordinate);
  out.mse_optimized = mse_of(out.gains_optimized);
  return out;
}

std::string to_string(HotspotPolicy p) { return p == HotspotPolicy::Static ? "STATIC" : "ADAPTIVE"; }

namespace {

struct SlotScore {
  double objective = 0.0;
  double min_rate = 0.0;
  double served = 0.0;
};

SlotScore score_slot(const ScenarioConfig& config, const PinchConfiguration& pinch, std::span<const double> demand) {
  if (demand.size() != config.users.size()) throw std::invalid_argument("one demand weight per user");
  const auto assign = nearest_assignment(config);
  const auto report = evaluate(config, pinch, equal_power(config, assign), assign);
  SlotScore s;
  double weight = 0.0;
  bool any = false;
  for (std::size_t k = 0; k < demand.size(); ++k) {
    if (!(demand[k] >= 0.0) || !std::isfinite(demand[k])) throw std::invalid_argument("demand must be non-negative");
    if (demand[k] == 0.0) continue;
    const double r = report.rates[k];
    s.objective = any ? std::min(s.objective, r / demand[k]) : r / demand[k];
    s.min_rate = any ? std::min(s.min_rate, r) : r;
    s.served += demand[k] * r;
    weight += demand[k];
    any = true;
  }
  if (weight > 0.0) s.served /= weight;
  return s;
}

std::vector<double> flat_coords(const PinchConfiguration& p) {
  std::vector<double> out;
  for (std::size_t w = 0; w < p.sites.size(); ++w) {
    const auto c = p.active_coords(w);
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

}  // namespace

double hotspot_objective(const ScenarioConfig& config, const PinchConfiguration& pinch, std::span<const double> demand) {
  return score_slot(config, pinch, demand).objective;
}

std::vector<HotspotSlot> hotspot_schedule(const ScenarioConfig& config, const TrafficMap& traffic,
                                          HotspotPolicy policy, int passes) {
  std::vector<HotspotSlot> out;
  std::optional<SearchResult> held;
  for (std::size_t t = 0; t < traffic.demand.size(); ++t) {
    const auto& demand = traffic.demand[t];
    if (!held || policy == HotspotPolicy::Adaptive) {
      std::optional<GridIndex> start;
      if (held) start = held->best_index;
      held = coordinate_grid(
          config, [&](const PinchConfiguration& p) { return hotspot_objective(config, p, demand); }, passes, {},
          std::nullopt, start);
    }
    const auto score = score_slot(config, held->best, demand);
    out.push_back({static_cast<int>(t), score.objective, score.min_rate, score.served, flat_coords(held->best)});
  }
  return out;
}

std::string to_string(Tracking t) {
  switch (t) {
    case Tracking::None: return "none";
    case Tracking::Grid: return "grid";
    case Tracking::DdpgPolicy: return "ddpg";
  }
  return "?";
}

std::optional<Tracking> tracking_from_string(const std::string& s) {
  for (auto v : {Tracking::None, Tracking::Grid, Tracking::DdpgPolicy})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

namespace {

std::vector<double> guide_gains(const ScenarioConfig& config, const std::vector<double>& coords, const Point3& p) {
  std::vector<double> g;
  for (std::size_t w = 0; w < config.waveguides.size(); ++w) {
    const PinchSite site{coords[w], true};
    g.push_back(effective_gain(config.waveguides[w], std::span(&site, 1), p, config.radio, config.obstacles));
  }
  return g;
}

double best_rate(const ScenarioConfig& config, const std::vector<double>& gains) {
  double best = 0.0;
  for (std::size_t w = 0; w < gains.size(); ++w)
    best = std::max(best, oma_rate(gains[w], config.waveguides[w].tx_power, config.radio.noise_power));
  return best;
}

}  // namespace

MobilityReport mobility_track(const ScenarioConfig& config, Tracking tracking, const MobilityOptions& options,
                              const agents::ActionPolicy* policy) {
  if (config.users.size() != 1) throw std::invalid_argument("mobility tracking follows exactly one device");
  if (config.waveguides.empty()) throw std::invalid_argument("mobility tracking needs a waveguide");
  if (options.ticks < 1 || !(options.tick_seconds > 0.0)) throw std::invalid_argument("bad tick settings");
  if (tracking == Tracking::DdpgPolicy && !policy) throw std::invalid_argument("DDPG tracking needs a policy");
  const User& device = config.users[0];

  std::optional<agents::PinchEnv> env;
  agents::EnvState state;
  if (tracking == Tracking::DdpgPolicy) {
    agents::EnvOptions eo;
    eo.episode_length = options.ticks;
    eo.tick_seconds = options.tick_seconds;
    env.emplace(config, agents::ActionKind::Continuous, eo);
    state = env->reset();
  }

  MobilityReport report;
  int last_serving = -1, run = 0;
  for (int t = 0; t < options.ticks; ++t) {
    MobilityTick tick;
    tick.tick = t;
    tick.time = t * options.tick_seconds;
    tick.position = user_position_at(device, tick.time);

    switch (tracking) {
      case Tracking::None:
        for (const auto& w : config.waveguides) tick.coords.push_back(w.length / 2.0);
        break;
      case Tracking::Grid: {
        ScenarioConfig here = config;
        here.users[0].position = tick.position;
        here.users[0].waypoints.clear();
        const auto best = coordinate_grid(
            here, [&](const PinchConfiguration& p) { return best_rate(here, guide_gains(here, flat_coords(p), tick.position)); },
            options.passes);
        tick.coords = flat_coords(best.best);
        break;
      }
      case Tracking::DdpgPolicy: {
        const auto step = env->step((*policy)(*env, state));
        state = step.state;
        tick.coords = state.coords;
        break;
      }
    }

    const auto gains = guide_gains(config, tick.coords, tick.position);
    const auto it = std::max_element(gains.begin(), gains.end());
    if (*it > 0.0) {
      tick.serving = static_cast<int>(it - gains.begin());
      tick.rate = oma_rate(*it, config.waveguides[static_cast<std::size_t>(tick.serving)].tx_power,
                           config.radio.noise_power);
      if (last_serving >= 0 && tick.serving != last_serving) ++report.handovers;
      last_serving = tick.serving;
    }
    tick.outage = tick.rate < options.outage_rate;
    run = tick.outage ? run + 1 : 0;
    report.staleness = std::max(report.staleness, run);
    if (tick.outage) report.outage_fraction += 1.0;
    report.ticks.push_back(std::move(tick));
  }
  report.outage_fraction /= options.ticks;
  return report;
}

}  // namespace pinch::edge
