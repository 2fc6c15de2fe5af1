#include <doctest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "pinch/scenario.hpp"
#include "pinch/scenario_io.hpp"

using namespace pinch;

TEST_CASE("validate flags a zero grid size") {
  auto c = testing::one_guide();
  c.waveguides[0].grid_size = 0;
  const auto v = validate(c);
  REQUIRE(v.size() == 1);
  CHECK(v[0].field.find("grid_size") != std::string::npos);
}

TEST_CASE("well-formed single guide single user config validates cleanly") {
  CHECK(validate(testing::one_guide()).empty());
}

TEST_CASE("active PAs closer than half a wavelength violate spacing") {
  auto c = testing::one_guide();
  const double half_lambda = 299792458.0 / (2.0 * 28e9);  // ~0.00536 m
  CHECK(c.min_spacing == doctest::Approx(half_lambda).epsilon(1e-12));
  CHECK(half_lambda == doctest::Approx(0.00536).epsilon(1e-3));

  PinchConfiguration p;
  p.sites = {{{2.0, true}, {2.001, true}}};
  const auto v = validate(c, p);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule.find("min_spacing") != std::string::npos);

  p.sites = {{{2.0, true}, {2.001, false}}};
  CHECK(validate(c, p).empty());
  p.sites = {{{2.0, false}}};
  CHECK_FALSE(validate(c, p).empty());
}

TEST_CASE("validate reports each broken invariant by field") {
  auto c = testing::one_guide();
  c.waveguides[0].axis = {1, 1, 0};
  c.radio.wavelength *= 1.001;
  c.radio.noise_power = 0;
  c.users[0].position = {20, 0, 0};
  c.obstacles.push_back({{1, 1, 1}, {0, 2, 2}});
  const auto v = validate(c);
  auto has = [&](const char* f) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.field.find(f) != std::string::npos; });
  };
  CHECK(has("axis"));
  CHECK(has("wavelength"));
  CHECK(has("noise_power"));
  CHECK(has("users[0].position"));
  CHECK(has("obstacles[0]"));
}

TEST_CASE("waypoint speed above v_max is a violation") {
  auto c = testing::one_guide();
  c.users[0].waypoints = {{0, {0, 0, 0}}, {1, {5, 0, 0}}};
  CHECK_FALSE(validate(c).empty());
  c.users[0].waypoints = {{0, {0, 0, 0}}, {10, {5, 0, 0}}};
  CHECK(validate(c).empty());
}

TEST_CASE("candidate positions") {
  Waveguide w;
  w.length = 10;
  w.grid_size = 2;
  CHECK(candidate_positions(w) == std::vector<double>{0, 10});
  w.grid_size = 5;
  CHECK(candidate_positions(w) == std::vector<double>{0, 2.5, 5, 7.5, 10});
  w.grid_size = 1;
  CHECK(candidate_positions(w) == std::vector<double>{5});

  for (int n = 1; n < 40; ++n) {
    w.grid_size = n;
    const auto c = candidate_positions(w);
    CHECK(c.size() == static_cast<std::size_t>(n));
    CHECK(std::is_sorted(c.begin(), c.end()));
    CHECK(c == candidate_positions(w));
  }
}

TEST_CASE("user position interpolation and clamping") {
  User u;
  u.waypoints = {{0, {0, 0, 0}}, {10, {10, 0, 0}}};
  CHECK(user_position_at(u, 5) == Point3{5, 0, 0});
  CHECK(user_position_at(u, -1) == Point3{0, 0, 0});
  CHECK(user_position_at(u, 99) == Point3{10, 0, 0});
}

TEST_CASE("user position is continuous across waypoint boundaries") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coord(0, 10), step(0.5, 3);
  User u;
  double t = 0;
  for (int i = 0; i < 6; ++i) {
    u.waypoints.push_back({t, {coord(rng), coord(rng), 0}});
    t += step(rng);
  }
  for (const auto& wp : u.waypoints) {
    const auto left = user_position_at(u, wp.t - 1e-9);
    const auto right = user_position_at(u, wp.t + 1e-9);
    const auto at = user_position_at(u, wp.t);
    CHECK(distance(at, wp.position) < 1e-12);
    CHECK(distance(left, right) < 1e-6);
  }
}

TEST_CASE("scenario JSON round-trips and rejects unknown keys") {
  auto c = testing::two_guides();
  c.obstacles.push_back({{4, 4, 0}, {5, 6, 2}});
  c.users[0].waypoints = {{0, {1, 1, 0}}, {5, {2, 1, 0}}};
  const auto doc = scenario_to_json(c);
  const auto back = scenario_from_json(doc);
  CHECK(scenario_to_json(back) == doc);
  CHECK(back.access == AccessMode::MULTI_WAVEGUIDE);

  auto bad = doc;
  bad["colour"] = "blue";
  CHECK_THROWS_AS(scenario_from_json(bad), ConfigError);
  bad = doc;
  bad["waveguides"][0]["pitch"] = 1;
  CHECK_THROWS_AS(scenario_from_json(bad), ConfigError);
  bad = doc;
  bad["access_mode"] = "CDMA";
  CHECK_THROWS_AS(scenario_from_json(bad), ConfigError);
  bad = doc;
  bad["waveguides"][0].erase("length");
  CHECK_THROWS_AS(scenario_from_json(bad), ConfigError);
}

TEST_CASE("radio defaults derive wavelength and eta from frequency") {
  nlohmann::json doc = scenario_to_json(testing::one_guide());
  doc["radio"] = {{"frequency", 10e9}};
  const auto c = scenario_from_json(doc);
  CHECK(c.radio.wavelength == doctest::Approx(kSpeedOfLight / 10e9));
  CHECK(c.radio.eta == doctest::Approx(std::pow(kSpeedOfLight / 10e9, 2) / (16 * kPi * kPi)));
  CHECK(validate(c).empty());
}
