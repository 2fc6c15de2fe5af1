#pragma once

#include <span>
#include <vector>

#include "pinch/propagation.hpp"
#include "pinch/scenario.hpp"

namespace pinch {

/// Transmit power per user, in watts. A waveguide radiates the sum over its users.
struct PowerAllocation {
  std::vector<double> per_user;
};

/// Rates in bits/s/Hz (unit bandwidth).
struct RateReport {
  std::vector<double> rates;
  double sum_rate = 0.0;
  double min_rate = 0.0;
  double total_power = 0.0;
  double energy_efficiency = 0.0;  // sum rate / (total power + circuit power)
  std::vector<int> qos_violations;  // user ids below their minimum rate
};

/// log2(1 + p g / noise)
double oma_rate(double gain, double power, double noise);

struct NomaRates {
  double rate1 = 0.0;
  double rate2 = 0.0;
  int strong = 0;  // 0 if user 1 performs SIC (decoded last), 1 for user 2
};

/// Two-user downlink NOMA. The user with the larger gain (ties: lower id) cancels
/// the other's signal; the weaker user treats the stronger user's signal as noise and
/// its rate is capped by what the stronger user can decode of its message.
NomaRates noma_rates(double g1, double g2, double p1, double p2, double noise, int id1 = 0, int id2 = 1);

/// Per-user SINR with one serving waveguide each; other waveguides interfere with
/// the total power of their own users. Throws std::invalid_argument on an unassigned user.
std::vector<double> multi_waveguide_sinr(const ScenarioConfig& config, const PinchConfiguration& pinch,
                                         std::span<const int> assignment, const PowerAllocation& power);
std::vector<double> multi_waveguide_sinr(const ScenarioConfig& config, const LinkState& links,
                                         std::span<const int> assignment, const PowerAllocation& power);

/// Each user served by the waveguide with the smallest perpendicular distance (ties: lower index).
std::vector<int> nearest_assignment(const ScenarioConfig& config);

/// Each waveguide's tx_power split evenly across its assigned users.
PowerAllocation equal_power(const ScenarioConfig& config, std::span<const int> assignment);

/// Rates under the config's access mode. OMA users sharing a waveguide split it in
/// equal time slots; NOMA pairs at most two users per waveguide; MULTI_WAVEGUIDE
/// uses the SINR with inter-waveguide interference.
RateReport evaluate(const ScenarioConfig& config, const PinchConfiguration& pinch, const PowerAllocation& power,
                    std::span<const int> assignment);
RateReport evaluate(const ScenarioConfig& config, const LinkState& links, const PowerAllocation& power,
                    std::span<const int> assignment);

}  // namespace pinch
