#include "pinch/scenario.hpp"

#include <algorithm>
#include <sstream>

namespace pinch {

PinchConfiguration PinchConfiguration::single(const std::vector<double>& coords) {
  PinchConfiguration p;
  p.sites.reserve(coords.size());
  for (double s : coords) p.sites.push_back({PinchSite{s, true}});
  return p;
}

std::vector<double> PinchConfiguration::active_coords(std::size_t waveguide) const {
  std::vector<double> out;
  if (waveguide >= sites.size()) return out;
  for (const auto& site : sites[waveguide])
    if (site.active) out.push_back(site.s);
  return out;
}

std::size_t PinchConfiguration::active_count(std::size_t waveguide) const {
  if (waveguide >= sites.size()) return 0;
  return static_cast<std::size_t>(
      std::count_if(sites[waveguide].begin(), sites[waveguide].end(), [](const PinchSite& s) { return s.active; }));
}

RadioConstants RadioConstants::at_frequency(double f) {
  RadioConstants r;
  r.frequency = f;
  r.wavelength = kSpeedOfLight / f;
  r.eta = (kSpeedOfLight * kSpeedOfLight) / (16.0 * kPi * kPi * f * f);
  return r;
}

std::string to_string(AccessMode m) {
  switch (m) {
    case AccessMode::OMA: return "OMA";
    case AccessMode::NOMA: return "NOMA";
    case AccessMode::MULTI_WAVEGUIDE: return "MULTI_WAVEGUIDE";
  }
  return "?";
}

std::optional<AccessMode> access_mode_from_string(const std::string& s) {
  if (s == "OMA") return AccessMode::OMA;
  if (s == "NOMA") return AccessMode::NOMA;
  if (s == "MULTI_WAVEGUIDE") return AccessMode::MULTI_WAVEGUIDE;
  return std::nullopt;
}

namespace {

std::string indexed(const std::string& list, std::size_t i, const std::string& field) {
  std::ostringstream os;
  os << list << '[' << i << "]." << field;
  return os.str();
}

bool box_ordered(const Point3& lo, const Point3& hi) { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }

}  // namespace

std::vector<Violation> validate(const ScenarioConfig& c) {
  std::vector<Violation> v;
  auto add = [&v](std::string field, std::string rule) { v.push_back({std::move(field), std::move(rule)}); };

  if (!c.room.lo.finite() || !c.room.hi.finite()) add("room", "bounds must be finite");
  if (!box_ordered(c.room.lo, c.room.hi)) add("room", "min corner must be <= max corner componentwise");

  if (c.waveguides.empty()) add("waveguides", "at least one waveguide (K >= 1)");
  for (std::size_t i = 0; i < c.waveguides.size(); ++i) {
    const auto& w = c.waveguides[i];
    if (!w.feed.finite()) add(indexed("waveguides", i, "feed"), "must be finite");
    if (!w.axis.finite() || std::abs(w.axis.norm() - 1.0) > 1e-9) add(indexed("waveguides", i, "axis"), "|axis| = 1 within 1e-9");
    if (!(w.length > 0.0) || !std::isfinite(w.length)) add(indexed("waveguides", i, "length"), "L > 0");
    if (w.grid_size < 1) add(indexed("waveguides", i, "grid_size"), "N >= 1");
    if (!(w.tx_power >= 0.0) || !std::isfinite(w.tx_power)) add(indexed("waveguides", i, "tx_power"), "tx_power >= 0");
    if (w.feed.finite() && !c.room.contains(w.feed)) add(indexed("waveguides", i, "feed"), "inside room bounds");
    if (w.feed.finite() && std::isfinite(w.length) && w.axis.finite() && !c.room.contains(w.far_end()))
      add(indexed("waveguides", i, "length"), "far end inside room bounds");
  }

  for (std::size_t i = 0; i < c.users.size(); ++i) {
    const auto& u = c.users[i];
    if (!u.position.finite()) add(indexed("users", i, "position"), "must be finite");
    else if (!c.room.contains(u.position)) add(indexed("users", i, "position"), "inside room bounds");
    if (!(u.qos_min_rate >= 0.0)) add(indexed("users", i, "qos_min_rate"), "qos_min_rate >= 0");
    if (!(u.v_max >= 0.0)) add(indexed("users", i, "v_max"), "v_max >= 0");
    for (std::size_t k = 0; k < u.waypoints.size(); ++k) {
      const auto& wp = u.waypoints[k];
      if (!wp.position.finite() || !std::isfinite(wp.t)) {
        add(indexed("users", i, "waypoints"), "must be finite");
        continue;
      }
      if (!c.room.contains(wp.position)) add(indexed("users", i, "waypoints"), "inside room bounds");
      if (k == 0) continue;
      const auto& prev = u.waypoints[k - 1];
      const double dt = wp.t - prev.t;
      const double dist = distance(wp.position, prev.position);
      if (dt < 0.0) add(indexed("users", i, "waypoints"), "times non-decreasing");
      else if (dist > 0.0 && (dt == 0.0 || dist / dt > u.v_max * (1.0 + 1e-12)))
        add(indexed("users", i, "waypoints"), "implied speed <= v_max");
    }
  }

  for (std::size_t i = 0; i < c.obstacles.size(); ++i) {
    const auto& o = c.obstacles[i];
    if (!o.lo.finite() || !o.hi.finite()) add(indexed("obstacles", i, "box"), "must be finite");
    else if (!box_ordered(o.lo, o.hi)) add(indexed("obstacles", i, "box"), "min corner <= max corner componentwise");
  }

  const auto& r = c.radio;
  if (!(r.frequency > 0.0)) add("radio.frequency", "f > 0");
  else if (std::abs(r.wavelength - kSpeedOfLight / r.frequency) > 1e-9 * (kSpeedOfLight / r.frequency))
    add("radio.wavelength", "lambda = c/f within 1e-9 relative");
  if (!(r.n_eff >= 1.0)) add("radio.n_eff", "n_eff >= 1");
  if (!(r.noise_power > 0.0)) add("radio.noise_power", "noise power > 0");
  if (!(r.attenuation_db_per_m >= 0.0)) add("radio.attenuation_db_per_m", "attenuation >= 0");
  if (!(r.eta > 0.0) || !std::isfinite(r.eta)) add("radio.eta", "eta > 0");
  if (!(c.min_spacing >= 0.0)) add("min_spacing", "min_spacing >= 0");
  if (!(c.circuit_power >= 0.0)) add("circuit_power", "circuit_power >= 0");
  return v;
}

std::vector<Violation> validate(const ScenarioConfig& c, const PinchConfiguration& pinch) {
  auto v = validate(c);
  if (pinch.sites.size() != c.waveguides.size()) {
    v.push_back({"pinch", "one site list per waveguide"});
    return v;
  }
  for (std::size_t w = 0; w < pinch.sites.size(); ++w) {
    const auto& list = pinch.sites[w];
    const double L = c.waveguides[w].length;
    for (std::size_t i = 0; i < list.size(); ++i)
      if (!(list[i].s >= 0.0 && list[i].s <= L)) v.push_back({indexed("pinch", w, "s"), "0 <= s <= L"});
    auto active = pinch.active_coords(w);
    // a waveguide with deployed sites must radiate somewhere
    if (!list.empty() && active.empty()) v.push_back({indexed("pinch", w, "active"), "at least one active PA"});
    std::sort(active.begin(), active.end());
    for (std::size_t i = 1; i < active.size(); ++i)
      if (active[i] - active[i - 1] < c.min_spacing) {
        v.push_back({indexed("pinch", w, "spacing"), "active PAs separated by >= min_spacing"});
        break;
      }
  }
  return v;
}

std::vector<double> candidate_positions(const Waveguide& w) {
  const int n = std::max(w.grid_size, 1);
  if (n == 1) return {w.length / 2.0};
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = w.length * static_cast<double>(i) / (n - 1);
  out.back() = w.length;
  return out;
}

Point3 user_position_at(const User& u, double t) {
  const auto& wp = u.waypoints;
  if (wp.empty()) return u.position;
  if (t <= wp.front().t) return wp.front().position;
  if (t >= wp.back().t) return wp.back().position;
  auto it = std::upper_bound(wp.begin(), wp.end(), t, [](double v, const Waypoint& p) { return v < p.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double span = b.t - a.t;
  if (span <= 0.0) return b.position;
  const double f = (t - a.t) / span;
  return a.position + f * (b.position - a.position);
}

}  // namespace pinch
