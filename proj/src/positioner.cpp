#include <algorithm>
#include <cmath>
#include <random>

#include "pinch/agents.hpp"
#include "pinch/rates.hpp"
#include "pinch/search.hpp"

namespace pinch::agents {

namespace {

double distance_to_guide(const Waveguide& w, const Point3& p) {
  const Point3 rel = p - w.feed;
  const Point3 along = dot(rel, w.axis) * w.axis;
  return (rel - along).norm();
}

struct Prediction {
  int index = 0;
  double coordinate = 0.0;  // raw model output in metres
};

Prediction predict(const nn::MlpModel& model, const ScenarioConfig& config) {
  const auto& w = config.waveguides.at(0);
  const double frac = nn::forward(model, positioner_features(config))(0);
  Prediction p;
  p.coordinate = frac * w.length;
  const int n = w.grid_size;
  p.index = n == 1 ? 0 : static_cast<int>(std::lround(std::clamp(frac, 0.0, 1.0) * (n - 1)));
  return p;
}

}  // namespace

Vector positioner_features(const ScenarioConfig& config) {
  if (config.waveguides.size() != 1 || config.users.size() != 2)
    throw std::invalid_argument("the positioner expects one waveguide and two users");
  const auto& w = config.waveguides[0];
  std::vector<Point3> users{config.users[0].position, config.users[1].position};
  std::stable_sort(users.begin(), users.end(), [&](const Point3& a, const Point3& b) {
    return distance_to_guide(w, a) < distance_to_guide(w, b);
  });
  const auto& r = config.room;
  Vector f(6);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto i = static_cast<Eigen::Index>(3 * k);
    f(i) = (users[k].x - r.lo.x) / (r.hi.x - r.lo.x);
    f(i + 1) = (users[k].y - r.lo.y) / (r.hi.y - r.lo.y);
    f(i + 2) = (users[k].z - r.lo.z) / (r.hi.z - r.lo.z);
  }
  return f;
}

double positioner_objective(const ScenarioConfig& config, double s) {
  const auto assign = nearest_assignment(config);
  return evaluate(config, PinchConfiguration::single({s}), equal_power(config, assign), assign).sum_rate;
}

PositionerDataset make_positioner_dataset(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 master(seed);
  PositionerDataset d;
  d.features.resize(6, static_cast<Eigen::Index>(count));
  d.labels.resize(1, static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    auto c = make_scenario(ScenarioId::A, master());
    const auto assign = nearest_assignment(c);
    const auto power = equal_power(c, assign);
    const auto best = brute_force(c, [&](const PinchConfiguration& p) { return evaluate(c, p, power, assign).sum_rate; });
    const auto col = static_cast<Eigen::Index>(i);
    d.features.col(col) = positioner_features(c);
    d.labels(0, col) = best.best.active_coords(0).at(0) / c.waveguides[0].length;
    d.oracle_values.push_back(best.best_value);
    d.instances.push_back(std::move(c));
  }
  return d;
}

nn::MlpModel train_positioner(const PositionerDataset& data, const PositionerTrainConfig& config) {
  if (data.features.cols() == 0) throw std::invalid_argument("empty positioner dataset");
  std::vector<int> sizes{static_cast<int>(data.features.rows())};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(1);
  auto model = nn::MlpModel::create(sizes, config.train.seed);
  model.fit_normalization(data.features);
  nn::train(model, data.features, data.labels, config.train);
  return model;
}

int predict_candidate(const nn::MlpModel& model, const ScenarioConfig& config) { return predict(model, config).index; }

PositionerReport evaluate_positioner(const nn::MlpModel& model, const PositionerDataset& data) {
  if (data.instances.empty()) throw std::invalid_argument("empty positioner dataset");
  PositionerReport r;
  const auto before = nn::forward_pass_count();
  double coord_error = 0.0;
  for (std::size_t i = 0; i < data.instances.size(); ++i) {
    const auto& c = data.instances[i];
    const auto p = predict(model, c);
    const double s = candidate_positions(c.waveguides[0])[static_cast<std::size_t>(p.index)];
    const double oracle = data.oracle_values[i];
    r.rate_ratio.push_back(oracle > 0.0 ? positioner_objective(c, s) / oracle : 1.0);
    coord_error += std::abs(p.coordinate - data.labels(0, static_cast<Eigen::Index>(i)) * c.waveguides[0].length);
  }
  const auto n = static_cast<double>(data.instances.size());
  r.forward_passes_per_instance = static_cast<double>(nn::forward_pass_count() - before) / n;
  r.mean_coordinate_error = coord_error / n;
  auto sorted = r.rate_ratio;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  r.median_ratio = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  return r;
}

}  // namespace pinch::agents
