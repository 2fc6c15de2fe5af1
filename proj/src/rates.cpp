#include "pinch/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pinch {

double oma_rate(double gain, double power, double noise) { return std::log2(1.0 + power * gain / noise); }

NomaRates noma_rates(double g1, double g2, double p1, double p2, double noise, int id1, int id2) {
  const bool first_strong = g1 > g2 || (g1 == g2 && id1 <= id2);
  const double gs = first_strong ? g1 : g2;
  const double gw = first_strong ? g2 : g1;
  const double ps = first_strong ? p1 : p2;
  const double pw = first_strong ? p2 : p1;

  const double strong_rate = std::log2(1.0 + ps * gs / noise);
  const double weak_own = std::log2(1.0 + pw * gw / (ps * gw + noise));
  const double weak_at_strong = std::log2(1.0 + pw * gs / (ps * gs + noise));
  const double weak_rate = std::min(weak_own, weak_at_strong);

  NomaRates r;
  r.strong = first_strong ? 0 : 1;
  r.rate1 = first_strong ? strong_rate : weak_rate;
  r.rate2 = first_strong ? weak_rate : strong_rate;
  return r;
}

namespace {

void check_assignment(const ScenarioConfig& config, std::size_t users, std::span<const int> assignment) {
  if (assignment.size() != users) throw std::invalid_argument("assignment must cover every user");
  for (int w : assignment)
    if (w < 0 || static_cast<std::size_t>(w) >= config.waveguides.size())
      throw std::invalid_argument("user not assigned to a waveguide");
}

std::vector<double> waveguide_power(const ScenarioConfig& config, std::span<const int> assignment,
                                    const PowerAllocation& power) {
  if (power.per_user.size() != assignment.size()) throw std::invalid_argument("power allocation must cover every user");
  std::vector<double> total(config.waveguides.size(), 0.0);
  for (std::size_t k = 0; k < assignment.size(); ++k) {
    const double p = power.per_user[k];
    if (!(p >= 0.0)) throw std::invalid_argument("transmit power must be non-negative");
    total[static_cast<std::size_t>(assignment[k])] += p;
  }
  for (std::size_t w = 0; w < total.size(); ++w)
    if (total[w] > config.waveguides[w].tx_power * (1.0 + 1e-12))
      throw std::invalid_argument("per-waveguide power exceeds tx_power");
  return total;
}

}  // namespace

std::vector<double> multi_waveguide_sinr(const ScenarioConfig& config, const PinchConfiguration& pinch,
                                         std::span<const int> assignment, const PowerAllocation& power) {
  return multi_waveguide_sinr(config, compute_links(config, pinch), assignment, power);
}

std::vector<double> multi_waveguide_sinr(const ScenarioConfig& config, const LinkState& links,
                                         std::span<const int> assignment, const PowerAllocation& power) {
  check_assignment(config, links.links.size(), assignment);
  const auto total = waveguide_power(config, assignment, power);
  std::vector<double> sinr(assignment.size());
  for (std::size_t k = 0; k < assignment.size(); ++k) {
    const auto own = static_cast<std::size_t>(assignment[k]);
    double interference = 0.0;
    for (std::size_t w = 0; w < total.size(); ++w)
      if (w != own) interference += total[w] * links.gain(k, w);
    sinr[k] = power.per_user[k] * links.gain(k, own) / (config.radio.noise_power + interference);
  }
  return sinr;
}

std::vector<int> nearest_assignment(const ScenarioConfig& config) {
  std::vector<int> out;
  out.reserve(config.users.size());
  for (const auto& u : config.users) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < config.waveguides.size(); ++w) {
      const auto& g = config.waveguides[w];
      const double s = std::clamp(dot(u.position - g.feed, g.axis), 0.0, g.length);
      const double d = distance(g.feed + s * g.axis, u.position);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(w);
      }
    }
    out.push_back(best);
  }
  return out;
}

PowerAllocation equal_power(const ScenarioConfig& config, std::span<const int> assignment) {
  std::vector<int> count(config.waveguides.size(), 0);
  for (int w : assignment) ++count.at(static_cast<std::size_t>(w));
  PowerAllocation p;
  for (int w : assignment)
    p.per_user.push_back(config.waveguides[static_cast<std::size_t>(w)].tx_power / count[static_cast<std::size_t>(w)]);
  return p;
}

RateReport evaluate(const ScenarioConfig& config, const PinchConfiguration& pinch, const PowerAllocation& power,
                    std::span<const int> assignment) {
  return evaluate(config, compute_links(config, pinch), power, assignment);
}

RateReport evaluate(const ScenarioConfig& config, const LinkState& links, const PowerAllocation& power,
                    std::span<const int> assignment) {
  const std::size_t n = links.links.size();
  check_assignment(config, n, assignment);
  const auto total = waveguide_power(config, assignment, power);
  const double noise = config.radio.noise_power;

  RateReport report;
  report.rates.assign(n, 0.0);

  std::vector<std::vector<std::size_t>> members(config.waveguides.size());
  for (std::size_t k = 0; k < n; ++k) members[static_cast<std::size_t>(assignment[k])].push_back(k);

  switch (config.access) {
    case AccessMode::OMA:
      for (std::size_t k = 0; k < n; ++k) {
        const auto w = static_cast<std::size_t>(assignment[k]);
        report.rates[k] = oma_rate(links.gain(k, w), power.per_user[k], noise) / static_cast<double>(members[w].size());
      }
      break;
    case AccessMode::NOMA:
      for (std::size_t w = 0; w < members.size(); ++w) {
        const auto& m = members[w];
        if (m.size() > 2) throw std::invalid_argument("NOMA supports at most two users per waveguide");
        if (m.size() == 1) {
          report.rates[m[0]] = oma_rate(links.gain(m[0], w), power.per_user[m[0]], noise);
        } else if (m.size() == 2) {
          const auto r = noma_rates(links.gain(m[0], w), links.gain(m[1], w), power.per_user[m[0]], power.per_user[m[1]],
                                    noise, config.users[m[0]].id, config.users[m[1]].id);
          report.rates[m[0]] = r.rate1;
          report.rates[m[1]] = r.rate2;
        }
      }
      break;
    case AccessMode::MULTI_WAVEGUIDE: {
      const auto sinr = multi_waveguide_sinr(config, links, assignment, power);
      for (std::size_t k = 0; k < n; ++k) report.rates[k] = std::log2(1.0 + sinr[k]);
      break;
    }
  }

  report.min_rate = n ? std::numeric_limits<double>::infinity() : 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    report.sum_rate += report.rates[k];
    report.min_rate = std::min(report.min_rate, report.rates[k]);
    if (report.rates[k] < config.users[k].qos_min_rate) report.qos_violations.push_back(config.users[k].id);
  }
  for (double p : total) report.total_power += p;
  const double denom = report.total_power + config.circuit_power;
  report.energy_efficiency = denom > 0.0 ? report.sum_rate / denom : 0.0;
  return report;
}

}  // namespace pinch
