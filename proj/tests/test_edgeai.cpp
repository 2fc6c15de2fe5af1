#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "pinch/edgeai.hpp"
#include "pinch/propagation.hpp"
#include "pinch/search.hpp"

using namespace pinch;
using namespace pinch::edge;

namespace {

FlConfig short_run(int rounds) {
  auto c = default_fl_config();
  c.rounds = rounds;
  return c;
}

void check_same_trace(const FlRun& a, const FlRun& b) {
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t r = 0; r < a.rounds.size(); ++r) {
    CHECK(a.rounds[r].selected == b.rounds[r].selected);
    CHECK(a.rounds[r].weights == b.rounds[r].weights);
    CHECK(a.rounds[r].accuracy == b.rounds[r].accuracy);
    CHECK(a.rounds[r].round_seconds == b.rounds[r].round_seconds);
  }
  CHECK(nn::identical(a.model, b.model));
}

}  // namespace

TEST_CASE("device classification rule") {
  CHECK(classify_device(1.0, 0.0) == DeviceClass::PaAssist);
  CHECK(classify_device(1.0, 1.0) == DeviceClass::Normal);
  CHECK(classify_device(0.0, 0.0) == DeviceClass::Drop);
  CHECK(classify_device(0.1, 0.2) == DeviceClass::Normal);  // between the value thresholds
  ClassThresholds t{0.8, 0.3, 0.4};
  CHECK(classify_device(0.79, 0.1, t) == DeviceClass::Normal);
  CHECK(classify_device(0.8, 0.39, t) == DeviceClass::PaAssist);
  CHECK(classify_device(0.29, 0.39, t) == DeviceClass::Drop);
  CHECK(classify_device(0.29, 0.4, t) == DeviceClass::Normal);
  CHECK_THROWS_AS(classify_device(1.2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(classify_device(0.5, -0.1), std::invalid_argument);
  const std::vector<double> v{1.0, 1.0, 0.0}, q{0.0, 1.0, 0.0};
  CHECK(classify_devices(v, q) == std::vector{DeviceClass::PaAssist, DeviceClass::Normal, DeviceClass::Drop});
  CHECK(fl_scheme_from_string("OPTIMIZED_PA") == FlScheme::OptimizedPa);
  CHECK_FALSE(fl_scheme_from_string("optimized").has_value());
}

TEST_CASE("default FL geometry: the wall, the rack and the PA") {
  const auto cfg = default_fl_config();
  const auto data = make_fl_data(cfg, 1);
  REQUIRE(data.devices.size() == 10);
  const auto& w = cfg.scenario.waveguides[0];
  for (const auto& d : data.devices) {
    const bool walled = d.id >= 6;
    CHECK((d.ap_rate == 0.0) == walled);
    CHECK((d.quality < cfg.thresholds.quality_low) == walled);
    const bool near = d.id == 6 || d.id == 7;
    if (walled) CHECK(los_blocked(pa_point(w, w.length / 2), d.position, cfg.scenario.obstacles) == !near);
  }
  // one candidate reaches all four walled devices
  const auto cands = candidate_positions(w);
  CHECK(std::any_of(cands.begin(), cands.end(), [&](double s) {
    return std::all_of(data.devices.begin() + 6, data.devices.end(),
                       [&](const FlDevice& d) { return !los_blocked(pa_point(w, s), d.position, cfg.scenario.obstacles); });
  }));
  // the Dirichlet split hands out every training sample once
  int total = 0;
  for (const auto& d : data.devices) {
    CHECK(static_cast<int>(d.labels.size()) == d.x.cols());
    CHECK(d.data_value >= 0.0);
    CHECK(d.data_value <= 1.0);
    CHECK(d.compute_seconds > 0.0);
    total += static_cast<int>(d.labels.size());
  }
  CHECK(total == cfg.train_samples);
  CHECK(data.test_x.cols() == cfg.test_samples);
}

TEST_CASE("ideal uplinks make the three schemes identical") {
  auto cfg = short_run(8);
  cfg.ideal_uplink = true;
  const auto none = fl_run(cfg, FlScheme::NoPa, 4);
  check_same_trace(none, fl_run(cfg, FlScheme::FixedPa, 4));
  check_same_trace(none, fl_run(cfg, FlScheme::OptimizedPa, 4));
}

TEST_CASE("a single device is centralized training") {
  auto cfg = short_run(12);
  cfg.scenario.users.resize(1);
  const std::uint64_t seed = 9;
  const auto run = fl_run(cfg, FlScheme::OptimizedPa, seed);
  const auto data = make_fl_data(cfg, seed);

  auto model = make_fl_model(cfg, seed);
  nn::TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.rounds;
  tc.optimizer = nn::OptimizerKind::SGD;
  tc.seed = fl_local_seed(seed, 0);
  nn::train(model, data.devices[0].x, data.devices[0].y, tc);
  CHECK(nn::identical(model, run.model));
  CHECK(run.final_accuracy() == accuracy(model, data.test_x, data.test_labels));
  for (const auto& r : run.rounds) CHECK(r.weights == std::vector<double>{1.0});
}

TEST_CASE("round duration law, FedAvg weights and the deadline") {
  const auto cfg = short_run(5);
  for (auto scheme : {FlScheme::NoPa, FlScheme::FixedPa, FlScheme::OptimizedPa}) {
    const auto run = fl_run(cfg, scheme, 2);
    for (const auto& r : run.rounds) {
      double longest = 0.0, sum = 0.0;
      for (std::size_t i = 0; i < r.selected.size(); ++i) {
        const double t = r.device_seconds[static_cast<std::size_t>(r.selected[i])];
        CHECK(t <= run.deadline);
        longest = std::max(longest, t);
        sum += r.weights[i];
      }
      CHECK(r.round_seconds == longest);
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      CHECK(r.dropped == static_cast<int>(cfg.scenario.users.size() - r.selected.size()));
      CHECK(r.pa_coordinate.has_value() == (scheme != FlScheme::NoPa));
    }
  }
}

TEST_CASE("PA schemes never lower a PA_ASSIST device's uplink and rescue at least as many") {
  const auto cfg = short_run(1);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = make_fl_data(cfg, seed);
    const auto none = fl_run(cfg, FlScheme::NoPa, seed);
    const auto fixed = fl_run(cfg, FlScheme::FixedPa, seed);
    const auto opt = fl_run(cfg, FlScheme::OptimizedPa, seed);
    for (std::size_t k = 0; k < data.devices.size(); ++k) {
      if (data.devices[k].cls != DeviceClass::PaAssist) {
        CHECK(opt.uplink_rate[k] == none.uplink_rate[k]);
        continue;
      }
      CHECK(fixed.uplink_rate[k] >= none.uplink_rate[k]);
      CHECK(opt.uplink_rate[k] >= none.uplink_rate[k]);
    }
    CHECK(none.rounds[0].rescued == 0);
    CHECK(opt.rounds[0].rescued >= fixed.rounds[0].rescued);
    CHECK(opt.rounds[0].selected.size() >= none.rounds[0].selected.size());
  }
}

TEST_CASE("FL runs are reproducible and abort when nobody makes the deadline") {
  const auto cfg = short_run(4);
  check_same_trace(fl_run(cfg, FlScheme::OptimizedPa, 6), fl_run(cfg, FlScheme::OptimizedPa, 6));

  auto blocked = short_run(2);
  blocked.scenario.users.resize(2);
  blocked.scenario.users[0].position = {6.0, 1.0, 0.0};
  blocked.scenario.users[1].position = {9.0, 1.0, 0.0};
  CHECK_THROWS_AS(fl_run(blocked, FlScheme::NoPa, 1), FlAborted);

  auto bad = short_run(2);
  bad.data_value = {0.5};
  CHECK_THROWS_AS(fl_run(bad, FlScheme::NoPa, 1), std::invalid_argument);
}

TEST_CASE("AirComp closed forms") {
  AirCompSetup s;
  s.gains = {1.0, 1.0, 1.0};
  s.tx_scalars = {1.0, 1.0, 1.0};
  const std::vector<double> x{0.5, -2.0, 4.0};
  CHECK(aircomp_estimate(s, x, 0.0) == doctest::Approx(2.5 / 3.0).epsilon(1e-15));
  CHECK(aircomp_mse(s) == 0.0);

  s.noise_power = 0.09;
  s.receive_scale = 2.0;
  s.gains = {2.0, 4.0, 0.5};
  s.tx_scalars = {1.0, 0.5, 4.0};
  CHECK(aircomp_mse(s) == doctest::Approx(0.09 / (9.0 * 4.0)).epsilon(1e-15));
  s.signal_variance = 0.0;
  s.gains = {0.3, 0.0, 2.0};
  CHECK(aircomp_mse(s) == doctest::Approx(0.09 / (9.0 * 4.0)).epsilon(1e-15));

  s.receive_scale = 0.0;
  CHECK_THROWS_AS(aircomp_mse(s), std::invalid_argument);
  CHECK_THROWS_AS(channel_inversion({0.0, 0.0}, 1.0, 0.1, 0.0), std::invalid_argument);
}

TEST_CASE("AirComp Monte Carlo matches the analytic MSE with a device in deep fade") {
  const auto s = channel_inversion({1.0, 0.8, 0.02, 1.3, 0.6}, 1.0, 0.1, 0.01);
  for (double b : s.tx_scalars) CHECK(b * b <= s.power_cap);
  CHECK(s.tx_scalars[2] == 1.0);
  const std::vector<double> x{0.1, 0.2, 0.3, 0.4, 0.5};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto r = aircomp_aggregate(s, x, seed);
    CHECK(r.trials == 100000);
    CHECK(std::abs(r.mse_empirical - r.mse_analytic) <= 3.0 * r.standard_error);
  }
}

TEST_CASE("AirComp with a PA") {
  auto c = testing::one_guide(21);
  c.users.clear();
  const std::vector<Point3> ring{{7, 5, 0}, {5, 7, 0}, {3, 5, 0}, {5, 3, 0}};
  for (std::size_t k = 0; k < ring.size(); ++k) c.users.push_back({static_cast<int>(k), ring[k]});

  SUBCASE("equidistant devices leave nothing to fix") {
    const auto r = aircomp_with_pa(c);
    CHECK(r.pa_coordinate == 5.0);
    CHECK(std::abs(r.mse_no_pa - r.mse_optimized) <= 1e-9 * r.mse_no_pa);
  }
  SUBCASE("a blocked device is rescued by a closer activation") {
    c.users[3].position = {8.0, 2.0, 0.0};
    c.obstacles.push_back({{6.8, 2.2, 0.0}, {7.6, 3.2, 2.0}});
    const auto r = aircomp_with_pa(c);
    CHECK(r.gains_no_pa[3] == 0.0);
    CHECK(r.gains_optimized[3] > 0.0);
    CHECK(r.mse_optimized < r.mse_no_pa);
  }
  SUBCASE("no signal variance leaves only the noise term") {
    AirCompOptions o;
    o.signal_variance = 0.0;
    c.users[3].position = {8.0, 2.0, 0.0};
    c.obstacles.push_back({{6.8, 2.2, 0.0}, {7.6, 3.2, 2.0}});
    const auto r = aircomp_with_pa(c, o);
    for (const auto* g : {&r.gains_no_pa, &r.gains_optimized}) {
      const auto s = channel_inversion(*g, o.power_cap, o.cutoff, c.radio.noise_power, 0.0);
      const double k = static_cast<double>(g->size());
      const double noise_only = c.radio.noise_power / (k * k * s.receive_scale * s.receive_scale);
      CHECK(aircomp_mse(s) == doctest::Approx(noise_only).epsilon(1e-12));
    }
  }
}

namespace {

ScenarioConfig hotspot_room() {
  auto c = testing::one_guide(10);
  c.users = {{0, {1.0, 4.0, 0.0}}, {1, {5.0, 6.0, 0.0}}, {2, {9.0, 4.0, 0.0}}};
  return c;
}

void check_same_slots(const std::vector<HotspotSlot>& a, const std::vector<HotspotSlot>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].objective == b[t].objective);
    CHECK(a[t].min_rate == b[t].min_rate);
    CHECK(a[t].served_load == b[t].served_load);
    CHECK(a[t].coords == b[t].coords);
  }
}

}  // namespace

TEST_CASE("hotspot scheduling") {
  const auto c = hotspot_room();
  SUBCASE("time-uniform traffic") {
    TrafficMap m{std::vector<std::vector<double>>(6, {1.0, 2.0, 1.0})};
    check_same_slots(hotspot_schedule(c, m, HotspotPolicy::Static), hotspot_schedule(c, m, HotspotPolicy::Adaptive));
  }
  SUBCASE("single slot") {
    TrafficMap m{{{3.0, 1.0, 0.0}}};
    check_same_slots(hotspot_schedule(c, m, HotspotPolicy::Static), hotspot_schedule(c, m, HotspotPolicy::Adaptive));
  }
  SUBCASE("the hotspot moves across the room at T/2") {
    const int slots = 8;
    TrafficMap m;
    for (int t = 0; t < slots; ++t) m.demand.push_back(t < slots / 2 ? std::vector{6.0, 1.0, 1.0} : std::vector{1.0, 1.0, 6.0});
    const auto fixed = hotspot_schedule(c, m, HotspotPolicy::Static);
    const auto adapt = hotspot_schedule(c, m, HotspotPolicy::Adaptive);
    for (int t = slots / 2; t < slots; ++t) {
      const auto& d = m.demand[static_cast<std::size_t>(t)];
      const auto oracle = brute_force(c, [&](const PinchConfiguration& p) { return hotspot_objective(c, p, d); });
      const auto i = static_cast<std::size_t>(t);
      CHECK(adapt[i].objective >= fixed[i].objective);
      CHECK(adapt[i].objective == oracle.best_value);
    }
    CHECK(adapt.back().objective > fixed.back().objective);
    CHECK(adapt.back().coords[0] > fixed.back().coords[0]);
  }
  SUBCASE("malformed demand") {
    TrafficMap m{{{1.0, -1.0, 1.0}}};
    CHECK_THROWS_AS(hotspot_schedule(c, m, HotspotPolicy::Static), std::invalid_argument);
    TrafficMap short_row{{{1.0, 1.0}}};
    CHECK_THROWS_AS(hotspot_schedule(c, short_row, HotspotPolicy::Static), std::invalid_argument);
  }
}

namespace {

ScenarioConfig walker(Point3 from, Point3 to) {
  auto c = testing::one_guide(20);
  c.users[0].position = from;
  c.users[0].waypoints = {{0.0, from}, {10.0, to}};
  return c;
}

}  // namespace

TEST_CASE("mobility tracking") {
  MobilityOptions o;
  SUBCASE("static unblocked device") {
    auto c = testing::one_guide(20);
    const auto r = mobility_track(c, Tracking::Grid, o);
    CHECK(r.handovers == 0);
    CHECK(r.outage_fraction == 0.0);
    CHECK(r.staleness == 0);
  }
  SUBCASE("walking past an obstacle") {
    auto c = walker({1, 3, 0}, {9, 3, 0});
    c.obstacles.push_back({{4.5, 3.3, 0.0}, {5.5, 4.0, 2.8}});
    const auto none = mobility_track(c, Tracking::None, o);
    const auto grid = mobility_track(c, Tracking::Grid, o);
    CHECK(none.outage_fraction > 0.0);
    CHECK(none.staleness >= 1);
    CHECK(grid.outage_fraction <= none.outage_fraction);
    CHECK(grid.outage_fraction < none.outage_fraction);
  }
  SUBCASE("crossing the midplane between two guides") {
    auto c = testing::two_guides(10);
    c.users.resize(1);
    c.users[0].position = {5, 1, 0};
    c.users[0].waypoints = {{0.0, {5, 1, 0}}, {10.0, {5, 9, 0}}};
    const auto r = mobility_track(c, Tracking::None, o);
    CHECK(r.handovers >= 1);
    CHECK(r.ticks.front().serving == 0);
    CHECK(r.ticks.back().serving == 1);
  }
  SUBCASE("a policy that never moves matches NONE") {
    auto c = walker({1, 4, 0}, {9, 4, 0});
    const agents::ActionPolicy still = [](const agents::PinchEnv&, const agents::EnvState&) {
      return std::vector<double>{0.0};
    };
    const auto a = mobility_track(c, Tracking::DdpgPolicy, o, &still);
    const auto b = mobility_track(c, Tracking::None, o);
    REQUIRE(a.ticks.size() == b.ticks.size());
    for (std::size_t t = 0; t < a.ticks.size(); ++t) {
      CHECK(a.ticks[t].coords == b.ticks[t].coords);
      CHECK(a.ticks[t].rate == b.ticks[t].rate);
    }
    CHECK_THROWS_AS(mobility_track(c, Tracking::DdpgPolicy, o), std::invalid_argument);
  }
}
