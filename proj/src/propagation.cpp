#include "pinch/propagation.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace pinch {

Point3 pa_point(const Waveguide& w, double s) {
  if (!(s >= 0.0 && s <= w.length)) throw std::out_of_range("pinch coordinate outside [0, L]");
  return w.feed + s * w.axis;
}

namespace {

// Slab test of the segment a + t (b - a), t in [0, 1], against a closed box.
bool segment_hits_box(const Point3& a, const Point3& b, const Obstacle& box) {
  const double origin[3] = {a.x, a.y, a.z};
  const double dir[3] = {b.x - a.x, b.y - a.y, b.z - a.z};
  const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
  const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};
  double t0 = 0.0;
  double t1 = 1.0;
  for (int i = 0; i < 3; ++i) {
    if (dir[i] == 0.0) {
      if (origin[i] < lo[i] || origin[i] > hi[i]) return false;
      continue;
    }
    double ta = (lo[i] - origin[i]) / dir[i];
    double tb = (hi[i] - origin[i]) / dir[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

bool los_blocked(const Point3& a, const Point3& b, std::span<const Obstacle> obstacles) {
  return std::any_of(obstacles.begin(), obstacles.end(), [&](const Obstacle& o) { return segment_hits_box(a, b, o); });
}

Complex channel_coeff(const Point3& pa, double s, const Point3& user, const RadioConstants& radio,
                      std::span<const Obstacle> obstacles) {
  const double d = distance(pa, user);
  if (!(d > 0.0)) throw std::invalid_argument("channel_coeff: PA and user coincide");
  if (los_blocked(pa, user, obstacles)) return {0.0, 0.0};
  const double two_pi = 2.0 * kPi;
  const double phase = -two_pi * d / radio.wavelength - two_pi * radio.n_eff * s / radio.wavelength;
  const double amplitude = std::sqrt(radio.eta) / d * std::pow(10.0, -radio.attenuation_db_per_m * s / 20.0);
  return std::polar(amplitude, phase);
}

double combine_gain(std::span<const Complex> coeffs) {
  if (coeffs.empty()) throw std::invalid_argument("effective gain needs at least one active PA");
  Complex sum{0.0, 0.0};
  for (const auto& h : coeffs) sum += h;
  return std::norm(sum) / static_cast<double>(coeffs.size());
}

double effective_gain(const Waveguide& w, std::span<const PinchSite> sites, const Point3& user,
                      const RadioConstants& radio, std::span<const Obstacle> obstacles) {
  std::vector<Complex> coeffs;
  for (const auto& site : sites)
    if (site.active) coeffs.push_back(channel_coeff(pa_point(w, site.s), site.s, user, radio, obstacles));
  return combine_gain(coeffs);
}

LinkState compute_links(const ScenarioConfig& config, const PinchConfiguration& pinch) {
  std::vector<Point3> positions;
  positions.reserve(config.users.size());
  for (const auto& u : config.users) positions.push_back(u.position);
  return compute_links(config, pinch, positions);
}

LinkState compute_links(const ScenarioConfig& config, const PinchConfiguration& pinch,
                        std::span<const Point3> user_positions) {
  if (pinch.sites.size() != config.waveguides.size())
    throw std::invalid_argument("pinch configuration must list sites for every waveguide");
  LinkState state;
  state.links.resize(user_positions.size());
  for (std::size_t k = 0; k < user_positions.size(); ++k) {
    state.links[k].resize(config.waveguides.size());
    for (std::size_t w = 0; w < config.waveguides.size(); ++w) {
      auto& link = state.links[k][w];
      const auto& guide = config.waveguides[w];
      for (const auto& site : pinch.sites[w]) {
        if (!site.active) continue;
        const Point3 pa = pa_point(guide, site.s);
        const bool blocked = los_blocked(pa, user_positions[k], config.obstacles);
        link.blocked.push_back(blocked);
        link.coeffs.push_back(blocked ? Complex{} : channel_coeff(pa, site.s, user_positions[k], config.radio, {}));
      }
      link.gain = link.coeffs.empty() ? 0.0 : combine_gain(link.coeffs);
    }
  }
  return state;
}

}  // namespace pinch
