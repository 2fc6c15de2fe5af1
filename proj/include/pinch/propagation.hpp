#pragma once

#include <complex>
#include <span>
#include <vector>

#include "pinch/scenario.hpp"

namespace pinch {

using Complex = std::complex<double>;

/// Channel state for every (user, waveguide) pair of a scenario.
struct LinkState {
  struct Link {
    std::vector<Complex> coeffs;  // one per active PA, in site order
    std::vector<bool> blocked;
    double gain = 0.0;
  };
  // links[user][waveguide]
  std::vector<std::vector<Link>> links;

  double gain(std::size_t user, std::size_t waveguide) const { return links[user][waveguide].gain; }
};

/// Radiating point at coordinate s; throws std::out_of_range unless 0 <= s <= L.
Point3 pa_point(const Waveguide& w, double s);

/// True iff the closed segment [a, b] touches any obstacle box.
bool los_blocked(const Point3& a, const Point3& b, std::span<const Obstacle> obstacles);

/// Free-space LoS coefficient from the PA at guide coordinate s to the user.
/// Zero when the path is blocked. Throws std::invalid_argument when the points coincide.
Complex channel_coeff(const Point3& pa, double s, const Point3& user, const RadioConstants& radio,
                      std::span<const Obstacle> obstacles);

/// |sum_m h_m / sqrt(M)|^2. Throws std::invalid_argument on an empty list.
double combine_gain(std::span<const Complex> coeffs);

/// Effective gain of waveguide `w` toward `user` given its pinch sites. Equal
/// power split across the active PAs; inactive sites contribute nothing.
double effective_gain(const Waveguide& w, std::span<const PinchSite> sites, const Point3& user,
                      const RadioConstants& radio, std::span<const Obstacle> obstacles);

/// Full link state for the users of `config` at their static positions (or at `positions` when given).
LinkState compute_links(const ScenarioConfig& config, const PinchConfiguration& pinch);
LinkState compute_links(const ScenarioConfig& config, const PinchConfiguration& pinch,
                        std::span<const Point3> user_positions);

}  // namespace pinch
