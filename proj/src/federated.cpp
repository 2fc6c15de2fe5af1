#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "pinch/edgeai.hpp"
#include "pinch/propagation.hpp"
#include "pinch/rates.hpp"
#include "pinch/search.hpp"
#include "pinch/seeding.hpp"

namespace pinch::edge {

std::string to_string(DeviceClass c) {
  switch (c) {
    case DeviceClass::Normal: return "NORMAL";
    case DeviceClass::PaAssist: return "PA_ASSIST";
    case DeviceClass::Drop: return "DROP";
  }
  return "?";
}

DeviceClass classify_device(double value, double quality, const ClassThresholds& t) {
  if (!(value >= 0.0 && value <= 1.0) || !(quality >= 0.0 && quality <= 1.0))
    throw std::invalid_argument("data value and channel quality must lie in [0, 1]");
  if (quality < t.quality_low) {
    if (value >= t.value_high) return DeviceClass::PaAssist;
    if (value < t.value_low) return DeviceClass::Drop;
  }
  return DeviceClass::Normal;
}

std::vector<DeviceClass> classify_devices(std::span<const double> values, std::span<const double> quality,
                                          const ClassThresholds& t) {
  if (values.size() != quality.size()) throw std::invalid_argument("one channel quality per device");
  std::vector<DeviceClass> out;
  out.reserve(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) out.push_back(classify_device(values[k], quality[k], t));
  return out;
}

std::string to_string(FlScheme s) {
  switch (s) {
    case FlScheme::NoPa: return "NO_PA";
    case FlScheme::FixedPa: return "FIXED_PA";
    case FlScheme::OptimizedPa: return "OPTIMIZED_PA";
  }
  return "?";
}

std::optional<FlScheme> fl_scheme_from_string(const std::string& s) {
  for (auto v : {FlScheme::NoPa, FlScheme::FixedPa, FlScheme::OptimizedPa})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

FlConfig default_fl_config() {
  FlConfig c;
  auto& s = c.scenario;
  s.room = {{0, 0, 0}, {10, 10, 3}};
  Waveguide w;
  w.feed = {0.0, 2.0, 3.0};
  w.length = 10.0;
  w.grid_size = 20;
  s.waveguides = {w};
  // wall between the ceiling antenna and the strip under the guide, and a low rack in that strip
  s.obstacles = {{{4.5, 2.6, 0.0}, {10.0, 3.0, 2.5}}, {{6.6, 0.0, 0.0}, {7.0, 2.4, 2.0}}};
  const std::vector<Point3> spots{{2.0, 7.0, 0}, {4.0, 8.5, 0}, {7.0, 7.5, 0}, {8.5, 5.0, 0}, {1.5, 4.0, 0},
                                  {5.5, 6.5, 0}, {5.8, 1.0, 0}, {6.0, 0.6, 0}, {9.0, 1.0, 0}, {8.5, 0.6, 0}};
  for (std::size_t k = 0; k < spots.size(); ++k) {
    User u;
    u.id = static_cast<int>(k);
    u.position = spots[k];
    s.users.push_back(u);
  }
  return c;
}

std::uint64_t fl_model_seed(std::uint64_t seed) { return derive_seed(seed, "fl/model"); }

std::uint64_t fl_local_seed(std::uint64_t seed, std::size_t device) {
  return derive_seed(seed, "fl/local/" + std::to_string(device));
}

namespace {

Point3 class_mean(const FlConfig& c, int cls) {
  const double angle = 2.0 * kPi * cls / c.classes + kPi / 4.0;
  const double r = c.class_spread * std::sqrt(2.0);
  return {r * std::cos(angle), r * std::sin(angle), 0.0};
}

void fill_samples(const FlConfig& c, int cls, Eigen::Index col, nn::Matrix& x, nn::Matrix& y,
                  std::normal_distribution<double>& normal, std::mt19937_64& rng) {
  const Point3 m = class_mean(c, cls);
  const double a = normal(rng), b = normal(rng);
  x(0, col) = m.x + a;
  x(1, col) = m.y + b;
  y.col(col).setZero();
  y(cls, col) = 1.0;
}

// Largest-remainder split of n into shares proportional to p.
std::vector<int> apportion(int n, const std::vector<double>& p) {
  std::vector<int> out(p.size());
  std::vector<std::pair<double, std::size_t>> rest;
  int used = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double exact = p[i] * n;
    out[i] = static_cast<int>(std::floor(exact));
    used += out[i];
    rest.emplace_back(exact - out[i], i);
  }
  std::stable_sort(rest.begin(), rest.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < n; ++i, ++used) ++out[rest[i % rest.size()].second];
  return out;
}

double uplink_bits_per_second(const FlConfig& c, double gain) {
  return c.bandwidth_hz * oma_rate(gain, c.device_power, c.scenario.radio.noise_power);
}

double ap_gain(const FlConfig& c, const Point3& p) {
  return std::norm(channel_coeff(c.access_point, 0.0, p, c.scenario.radio, c.scenario.obstacles));
}

double pa_gain(const FlConfig& c, double s, const Point3& p) {
  const PinchSite site{s, true};
  return effective_gain(c.scenario.waveguides.at(0), std::span(&site, 1), p, c.scenario.radio, c.scenario.obstacles);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

void check(const FlConfig& c) {
  if (c.scenario.users.empty()) throw std::invalid_argument("federated learning needs at least one device");
  if (c.scenario.waveguides.empty()) throw std::invalid_argument("federated learning needs a waveguide for the PA");
  if (c.classes < 2 || c.train_samples < 1 || c.test_samples < 1 || c.rounds < 0 || c.hidden < 1 ||
      c.batch_size < 1)
    throw std::invalid_argument("bad federated learning sizes");
  if (!(c.dirichlet_alpha > 0.0) || !(c.bandwidth_hz > 0.0) || !(c.device_power > 0.0) ||
      !(c.deadline_factor > 0.0) || !(c.compute_base_seconds > 0.0) || !(c.compute_seconds_per_sample >= 0.0) ||
      !(c.compute_jitter >= 0.0 && c.compute_jitter < 1.0))
    throw std::invalid_argument("bad federated learning constants");
  if (!c.data_value.empty() && c.data_value.size() != c.scenario.users.size())
    throw std::invalid_argument("data_value needs one entry per device");
}

}  // namespace

FlData make_fl_data(const FlConfig& config, std::uint64_t seed) {
  check(config);
  const std::size_t n_dev = config.scenario.users.size();
  const int classes = config.classes;
  std::mt19937_64 split_rng(derive_seed(seed, "fl/split"));
  std::mt19937_64 data_rng(derive_seed(seed, "fl/data"));
  std::mt19937_64 test_rng(derive_seed(seed, "fl/test"));
  std::mt19937_64 compute_rng(derive_seed(seed, "fl/compute"));
  std::gamma_distribution<double> gamma(config.dirichlet_alpha, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(-config.compute_jitter, config.compute_jitter);

  // counts[k][c]: Dirichlet proportions over devices, per class
  std::vector<std::vector<int>> counts(n_dev, std::vector<int>(static_cast<std::size_t>(classes), 0));
  std::vector<int> class_total(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    const int n_c = config.train_samples / classes + (c < config.train_samples % classes ? 1 : 0);
    class_total[static_cast<std::size_t>(c)] = n_c;
    std::vector<double> p(n_dev);
    double sum = 0.0;
    for (auto& v : p) sum += (v = gamma(split_rng));
    for (auto& v : p) v = sum > 0.0 ? v / sum : 1.0 / static_cast<double>(n_dev);
    const auto share = apportion(n_c, p);
    for (std::size_t k = 0; k < n_dev; ++k) counts[k][static_cast<std::size_t>(c)] = share[k];
  }

  FlData out;
  double best_ap = 0.0;
  for (std::size_t k = 0; k < n_dev; ++k) {
    FlDevice d;
    d.id = static_cast<int>(k);
    d.position = config.scenario.users[k].position;
    d.class_counts = counts[k];
    const int n = std::accumulate(counts[k].begin(), counts[k].end(), 0);
    d.x.resize(2, n);
    d.y.resize(classes, n);
    Eigen::Index col = 0;
    for (int c = 0; c < classes; ++c)
      for (int i = 0; i < counts[k][static_cast<std::size_t>(c)]; ++i, ++col) {
        fill_samples(config, c, col, d.x, d.y, normal, data_rng);
        d.labels.push_back(c);
      }
    double value = 0.0;
    for (int c = 0; c < classes; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (class_total[ci] > 0) value = std::max(value, static_cast<double>(counts[k][ci]) / class_total[ci]);
    }
    d.data_value = config.data_value.empty() ? value : config.data_value[k];
    d.compute_seconds =
        (config.compute_base_seconds + config.compute_seconds_per_sample * n) * (1.0 + jitter(compute_rng));
    d.ap_rate = uplink_bits_per_second(config, ap_gain(config, d.position));
    best_ap = std::max(best_ap, d.ap_rate);
    out.devices.push_back(std::move(d));
  }
  for (auto& d : out.devices) {
    d.quality = best_ap > 0.0 ? d.ap_rate / best_ap : 0.0;
    d.cls = classify_device(d.data_value, d.quality, config.thresholds);
  }

  out.test_x.resize(2, config.test_samples);
  nn::Matrix unused(classes, config.test_samples);
  for (int i = 0; i < config.test_samples; ++i) {
    fill_samples(config, i % classes, i, out.test_x, unused, normal, test_rng);
    out.test_labels.push_back(i % classes);
  }
  return out;
}

nn::MlpModel make_fl_model(const FlConfig& config, std::uint64_t seed) {
  return nn::MlpModel::create({2, config.hidden, config.classes}, fl_model_seed(seed));
}

double accuracy(const nn::MlpModel& model, const nn::Matrix& x, std::span<const int> labels) {
  if (static_cast<std::size_t>(x.cols()) != labels.size() || labels.empty())
    throw std::invalid_argument("one label per test sample");
  const nn::Matrix out = nn::forward(model, x);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    Eigen::Index arg = 0;
    out.col(i).maxCoeff(&arg);
    if (arg == labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

FlRun fl_run(const FlConfig& config, FlScheme scheme, std::uint64_t seed) {
  const FlData data = make_fl_data(config, seed);
  const auto& devices = data.devices;
  const std::size_t n_dev = devices.size();
  const auto& guide = config.scenario.waveguides[0];

  FlRun run;
  run.scheme = scheme;
  run.model = make_fl_model(config, seed);
  const double model_bits = static_cast<double>(run.model.parameter_count()) * config.bits_per_parameter;
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto upload = [&](double rate) { return config.ideal_uplink ? 0.0 : rate > 0.0 ? model_bits / rate : inf; };

  std::vector<double> baseline(n_dev);
  for (std::size_t k = 0; k < n_dev; ++k) baseline[k] = devices[k].compute_seconds + upload(devices[k].ap_rate);
  run.deadline = config.deadline_factor * median(baseline);

  std::vector<std::size_t> assisted;
  for (std::size_t k = 0; k < n_dev; ++k)
    if (devices[k].cls == DeviceClass::PaAssist) assisted.push_back(k);

  std::vector<std::mt19937_64> local_rng;
  for (std::size_t k = 0; k < n_dev; ++k) local_rng.emplace_back(fl_local_seed(seed, k));
  nn::TrainConfig local;
  local.learning_rate = config.learning_rate;
  local.batch_size = config.batch_size;
  local.optimizer = nn::OptimizerKind::SGD;

  for (int round = 0; round < config.rounds; ++round) {
    FlRoundLog log;
    log.round = round;

    std::optional<double> pa;
    if (scheme == FlScheme::FixedPa || (scheme == FlScheme::OptimizedPa && assisted.empty())) {
      pa = guide.length / 2.0;
    } else if (scheme == FlScheme::OptimizedPa) {
      auto min_rate = [&](const PinchConfiguration& p) {
        const double s = p.active_coords(0).at(0);
        double worst = inf;
        for (auto k : assisted) worst = std::min(worst, pa_gain(config, s, devices[k].position));
        return worst;
      };
      pa = coordinate_grid(config.scenario, min_rate, config.grid_passes).best.active_coords(0).at(0);
    }
    log.pa_coordinate = pa;

    run.uplink_rate.assign(n_dev, 0.0);
    for (std::size_t k = 0; k < n_dev; ++k) {
      double rate = devices[k].ap_rate;
      if (pa && devices[k].cls == DeviceClass::PaAssist)
        rate = std::max(rate, uplink_bits_per_second(config, pa_gain(config, *pa, devices[k].position)));
      run.uplink_rate[k] = rate;
      log.upload_seconds.push_back(upload(rate));
      log.device_seconds.push_back(devices[k].compute_seconds + log.upload_seconds.back());
      const bool on_time = std::isfinite(log.device_seconds[k]) && log.device_seconds[k] <= run.deadline;
      if (on_time) {
        log.selected.push_back(static_cast<int>(k));
        if (!(baseline[k] <= run.deadline)) ++log.rescued;
      }
    }
    log.dropped = static_cast<int>(n_dev - log.selected.size());
    if (log.selected.empty()) {
      std::ostringstream msg;
      msg << to_string(scheme) << " round " << round << ": no device meets the " << run.deadline
          << " s deadline";
      throw FlAborted(msg.str());
    }

    // local epochs in ascending device order, then a sample-weighted average
    double total = 0.0;
    for (int k : log.selected) total += static_cast<double>(devices[static_cast<std::size_t>(k)].labels.size());
    std::vector<double> sum(nn::flatten_parameters(run.model).size(), 0.0);
    for (int k : log.selected) {
      const auto& d = devices[static_cast<std::size_t>(k)];
      const double w = total > 0.0 ? static_cast<double>(d.labels.size()) / total : 1.0 / log.selected.size();
      log.weights.push_back(w);
      auto model = run.model;
      if (!d.labels.empty()) {
        nn::Optimizer opt(model, local.optimizer, local.learning_rate);
        nn::train_epoch(model, opt, d.x, d.y, local, local_rng[static_cast<std::size_t>(k)]);
      }
      const auto p = nn::flatten_parameters(model);
      for (std::size_t i = 0; i < p.size(); ++i) sum[i] += w * p[i];
    }
    nn::assign_parameters(run.model, sum);

    log.round_seconds = 0.0;
    for (int k : log.selected) log.round_seconds = std::max(log.round_seconds, log.device_seconds[static_cast<std::size_t>(k)]);
    log.accuracy = accuracy(run.model, data.test_x, data.test_labels);
    run.rounds.push_back(std::move(log));
  }
  return run;
}

}  // namespace pinch::edge
