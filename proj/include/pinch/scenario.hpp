#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pinch {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Point3 operator*(double k, const Point3& a) { return {k * a.x, k * a.y, k * a.z}; }
  friend bool operator==(const Point3&, const Point3&) = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double distance(const Point3& a, const Point3& b) { return (a - b).norm(); }
inline double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

/// A dielectric waveguide. Coordinates `s` along it run from the feed (s = 0)
/// to the far end (s = length) in the direction of `axis`.
struct Waveguide {
  int id = 0;
  Point3 feed;
  Point3 axis{1.0, 0.0, 0.0};
  double length = 1.0;
  int grid_size = 1;
  double tx_power = 1.0;

  Point3 far_end() const { return feed + length * axis; }
};

/// One pinch site on a waveguide. Inactive sites are transparent to the guided wave.
struct PinchSite {
  double s = 0.0;
  bool active = true;

  friend bool operator==(const PinchSite&, const PinchSite&) = default;
};

/// Activation state of every waveguide: `sites[w]` lists the pinch sites on waveguide w.
struct PinchConfiguration {
  std::vector<std::vector<PinchSite>> sites;

  /// One active PA per waveguide at the given coordinates.
  static PinchConfiguration single(const std::vector<double>& coords);

  std::vector<double> active_coords(std::size_t waveguide) const;
  std::size_t active_count(std::size_t waveguide) const;

  friend bool operator==(const PinchConfiguration&, const PinchConfiguration&) = default;
};

struct Waypoint {
  double t = 0.0;
  Point3 position;
};

struct User {
  int id = 0;
  Point3 position;
  double qos_min_rate = 0.0;
  std::vector<Waypoint> waypoints;  // empty means static at `position`
  double v_max = 1.5;               // pedestrian scale, m/s
};

/// Axis-aligned box.
struct Obstacle {
  Point3 lo;
  Point3 hi;
};

struct RadioConstants {
  double frequency = 28e9;
  double wavelength = kSpeedOfLight / 28e9;
  double n_eff = 1.4;
  double eta = 0.0;            // path-loss scale, m^2
  double noise_power = 1e-11;  // watts
  double attenuation_db_per_m = 0.0;

  /// Free-space defaults at carrier `f`: lambda = c/f, eta = c^2 / (16 pi^2 f^2).
  static RadioConstants at_frequency(double f);
};

enum class AccessMode { OMA, NOMA, MULTI_WAVEGUIDE };

std::string to_string(AccessMode m);
std::optional<AccessMode> access_mode_from_string(const std::string& s);

struct RoomBounds {
  Point3 lo;
  Point3 hi{10.0, 10.0, 3.0};

  bool contains(const Point3& p, double tol = 1e-9) const {
    return p.x >= lo.x - tol && p.x <= hi.x + tol && p.y >= lo.y - tol && p.y <= hi.y + tol &&
           p.z >= lo.z - tol && p.z <= hi.z + tol;
  }
};

struct ScenarioConfig {
  RoomBounds room;
  std::vector<Waveguide> waveguides;
  std::vector<User> users;
  std::vector<Obstacle> obstacles;
  RadioConstants radio = RadioConstants::at_frequency(28e9);
  double min_spacing = RadioConstants::at_frequency(28e9).wavelength / 2.0;
  AccessMode access = AccessMode::OMA;
  std::uint64_t seed = 1;
  double circuit_power = 1.0;  // watts, energy-efficiency denominator offset
};

struct Violation {
  std::string field;
  std::string rule;
};

std::vector<Violation> validate(const ScenarioConfig& config);

/// Checks `pinch` against the waveguides of `config` in addition to the config itself.
std::vector<Violation> validate(const ScenarioConfig& config, const PinchConfiguration& pinch);

/// N coordinates uniformly spaced on [0, L], both ends included; N = 1 gives {L/2}.
std::vector<double> candidate_positions(const Waveguide& w);

/// Piecewise-linear position along the waypoints, clamped outside their time range.
Point3 user_position_at(const User& u, double t);

}  // namespace pinch
