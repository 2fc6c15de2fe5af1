#include "pinch/search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <thread>

#include "pinch/rates.hpp"

namespace pinch {

SlotLayout SlotLayout::one_per_waveguide(const ScenarioConfig& config) {
  return SlotLayout{std::vector<int>(config.waveguides.size(), 1)};
}

std::size_t SlotLayout::total() const {
  std::size_t n = 0;
  for (int s : slots_per_waveguide) n += static_cast<std::size_t>(s);
  return n;
}

std::size_t SlotLayout::waveguide_of(std::size_t slot) const {
  for (std::size_t w = 0; w < slots_per_waveguide.size(); ++w) {
    const auto n = static_cast<std::size_t>(slots_per_waveguide[w]);
    if (slot < n) return w;
    slot -= n;
  }
  throw std::out_of_range("slot index beyond layout");
}

namespace {

void check_layout(const ScenarioConfig& config, const SlotLayout& layout) {
  if (layout.slots_per_waveguide.size() != config.waveguides.size())
    throw SearchError("slot layout must list every waveguide");
  for (int s : layout.slots_per_waveguide)
    if (s < 0) throw SearchError("negative slot count");
  if (layout.total() == 0) throw SearchError("slot layout activates nothing");
}

std::vector<int> slot_grid_sizes(const ScenarioConfig& config, const SlotLayout& layout) {
  std::vector<int> sizes;
  for (std::size_t w = 0; w < config.waveguides.size(); ++w)
    for (int j = 0; j < layout.slots_per_waveguide[w]; ++j) sizes.push_back(std::max(config.waveguides[w].grid_size, 1));
  return sizes;
}

struct Incumbent {
  GridIndex index;
  double value = -std::numeric_limits<double>::infinity();
  std::uint64_t evaluations = 0;
  bool found = false;

  // Callers visit candidates in increasing lexicographic order, so strict
  // improvement keeps the smallest index among ties.
  void offer(const GridIndex& idx, double v) {
    if (!found || v > value) {
      index = idx;
      value = v;
      found = true;
    }
  }
};

void decode(std::uint64_t linear, const std::vector<int>& sizes, GridIndex& out) {
  for (std::size_t i = sizes.size(); i-- > 0;) {
    const auto n = static_cast<std::uint64_t>(sizes[i]);
    out[i] = static_cast<int>(linear % n);
    linear /= n;
  }
}

bool advance(GridIndex& idx, const std::vector<int>& sizes) {
  for (std::size_t i = sizes.size(); i-- > 0;) {
    if (++idx[i] < sizes[i]) return true;
    idx[i] = 0;
  }
  return false;
}

Incumbent scan_range(const ScenarioConfig& config, const SlotLayout& layout, const Objective& objective,
                     const std::vector<int>& sizes, std::uint64_t begin, std::uint64_t end, bool single_slot_per_guide) {
  Incumbent inc;
  if (begin >= end) return inc;
  GridIndex idx(sizes.size());
  decode(begin, sizes, idx);
  for (std::uint64_t i = begin; i < end; ++i) {
    if (single_slot_per_guide || spacing_feasible(config, layout, idx)) {
      const double v = objective(grid_configuration(config, layout, idx));
      ++inc.evaluations;
      inc.offer(idx, v);
    }
    advance(idx, sizes);
  }
  return inc;
}

SearchResult finish(const ScenarioConfig& config, const SlotLayout& layout, const Incumbent& inc,
                    const SearchOptions& options) {
  if (!inc.found) throw SearchError("no spacing-feasible configuration on the grid");
  SearchResult r;
  r.best_index = inc.index;
  r.best = grid_configuration(config, layout, inc.index);
  r.best_value = inc.value;
  r.evaluations = inc.evaluations;
  r.estimated_seconds = time_estimate(static_cast<double>(inc.evaluations), options.seconds_per_eval);
  return r;
}

}  // namespace

PinchConfiguration grid_configuration(const ScenarioConfig& config, const SlotLayout& layout, const GridIndex& index) {
  if (index.size() != layout.total()) throw SearchError("grid index does not match the slot layout");
  PinchConfiguration p;
  p.sites.resize(config.waveguides.size());
  std::size_t slot = 0;
  for (std::size_t w = 0; w < config.waveguides.size(); ++w) {
    const auto candidates = candidate_positions(config.waveguides[w]);
    auto& sites = p.sites[w];
    for (double s : candidates) sites.push_back({s, false});
    for (int j = 0; j < layout.slots_per_waveguide[w]; ++j, ++slot) {
      const int c = index[slot];
      if (c < 0 || static_cast<std::size_t>(c) >= candidates.size()) throw SearchError("grid index out of range");
      sites[static_cast<std::size_t>(c)].active = true;
    }
  }
  return p;
}

bool spacing_feasible(const ScenarioConfig& config, const SlotLayout& layout, const GridIndex& index) {
  std::size_t slot = 0;
  for (std::size_t w = 0; w < config.waveguides.size(); ++w) {
    const int m = layout.slots_per_waveguide[w];
    if (m > 1) {
      const auto candidates = candidate_positions(config.waveguides[w]);
      std::vector<double> coords;
      for (int j = 0; j < m; ++j) coords.push_back(candidates.at(static_cast<std::size_t>(index[slot + static_cast<std::size_t>(j)])));
      std::sort(coords.begin(), coords.end());
      for (std::size_t i = 1; i < coords.size(); ++i)
        if (coords[i] - coords[i - 1] < config.min_spacing || coords[i] == coords[i - 1]) return false;
    }
    slot += static_cast<std::size_t>(m);
  }
  return true;
}

SearchResult brute_force(const ScenarioConfig& config, const Objective& objective, const SearchOptions& options,
                         std::optional<SlotLayout> layout_opt) {
  const SlotLayout layout = layout_opt.value_or(SlotLayout::one_per_waveguide(config));
  check_layout(config, layout);
  const auto sizes = slot_grid_sizes(config, layout);

  std::uint64_t total = 1;
  for (int n : sizes) {
    if (total > options.max_evaluations / static_cast<std::uint64_t>(n))
      throw SearchError("brute force grid exceeds the evaluation budget");
    total *= static_cast<std::uint64_t>(n);
  }
  if (total > options.max_evaluations) throw SearchError("brute force grid exceeds the evaluation budget");

  const bool single = std::all_of(layout.slots_per_waveguide.begin(), layout.slots_per_waveguide.end(),
                                  [](int s) { return s <= 1; });
  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(std::min<std::uint64_t>(total, 1024))));

  Incumbent merged;
  if (workers == 1) {
    merged = scan_range(config, layout, objective, sizes, 0, total, single);
  } else {
    std::vector<Incumbent> parts(workers);
    std::vector<std::thread> threads;
    for (unsigned i = 0; i < workers; ++i) {
      const std::uint64_t begin = total * i / workers;
      const std::uint64_t end = total * (i + 1) / workers;
      threads.emplace_back([&, i, begin, end] { parts[i] = scan_range(config, layout, objective, sizes, begin, end, single); });
    }
    for (auto& t : threads) t.join();
    // partitions are contiguous and in order, so the same strict-improvement rule applies
    for (const auto& part : parts) {
      merged.evaluations += part.evaluations;
      if (part.found) merged.offer(part.index, part.value);
    }
  }
  auto r = finish(config, layout, merged, options);
  r.passes = 1;
  return r;
}

GridIndex default_start(const ScenarioConfig& config, const SlotLayout& layout) {
  GridIndex idx;
  for (std::size_t w = 0; w < config.waveguides.size(); ++w) {
    const int n = std::max(config.waveguides[w].grid_size, 1);
    const int m = layout.slots_per_waveguide[w];
    for (int j = 0; j < m; ++j) {
      // m slots spread evenly; a single slot sits mid-grid
      const int c = m == 1 ? (n - 1) / 2 : static_cast<int>(std::lround(static_cast<double>(j) * (n - 1) / (m - 1)));
      idx.push_back(c);
    }
  }
  return idx;
}

SearchResult coordinate_grid(const ScenarioConfig& config, const Objective& objective, int passes,
                             const SearchOptions& options, std::optional<SlotLayout> layout_opt,
                             std::optional<GridIndex> start) {
  if (passes < 1) throw SearchError("coordinate grid needs at least one pass");
  const SlotLayout layout = layout_opt.value_or(SlotLayout::one_per_waveguide(config));
  check_layout(config, layout);
  const auto sizes = slot_grid_sizes(config, layout);
  GridIndex current = start.value_or(default_start(config, layout));
  if (current.size() != sizes.size()) throw SearchError("start index does not match the slot layout");
  if (!spacing_feasible(config, layout, current)) throw SearchError("infeasible spacing at the start configuration");

  Incumbent inc;
  std::vector<double> trace;
  for (int pass = 0; pass < passes; ++pass) {
    for (std::size_t slot = 0; slot < sizes.size(); ++slot) {
      Incumbent sweep;
      GridIndex probe = current;
      for (int c = 0; c < sizes[slot]; ++c) {
        probe[slot] = c;
        if (!spacing_feasible(config, layout, probe)) continue;
        const double v = objective(grid_configuration(config, layout, probe));
        ++inc.evaluations;
        sweep.offer(probe, v);
      }
      current = sweep.index;
      inc.index = sweep.index;
      inc.value = sweep.value;
      inc.found = true;
      trace.push_back(sweep.value);
    }
  }
  auto r = finish(config, layout, inc, options);
  r.passes = passes;
  r.trace = std::move(trace);
  return r;
}

std::uint64_t brute_force_count(std::uint64_t n, std::uint64_t k) {
  std::uint64_t total = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    if (n != 0 && total > std::numeric_limits<std::uint64_t>::max() / n) throw std::overflow_error("N^K overflows");
    total *= n;
  }
  return total;
}

std::uint64_t grid_count(std::uint64_t passes, std::uint64_t k, std::uint64_t n) { return passes * k * n; }

double time_estimate(double evaluations, double seconds_per_eval) { return evaluations * seconds_per_eval; }

std::string format_duration(double seconds) {
  struct Unit {
    const char* name;
    double seconds;
  };
  static constexpr Unit units[] = {{"yr", 365.25 * 86400.0}, {"d", 86400.0}, {"h", 3600.0}, {"min", 60.0}, {"s", 0.1}};
  Unit unit{"ms", 1e-3};
  for (const auto& u : units)
    if (seconds >= u.seconds) {
      unit = u;
      break;
    }
  if (unit.seconds == 0.1) unit.seconds = 1.0;
  const double value = seconds / unit.seconds;
  char digits[32];
  std::snprintf(digits, sizeof digits, "%.3g", value);
  const double shown = std::strtod(digits, nullptr);
  // values re-expressed in minutes or longer are quoted as approximations
  const bool exact = unit.seconds <= 1.0 && std::abs(shown - value) <= 1e-12 * std::max(1.0, std::abs(value));
  return std::string(exact ? "" : "≈") + digits + " " + unit.name;
}

std::vector<ComplexityRow> complexity_table(double tau) {
  std::vector<ComplexityRow> rows;
  auto brute = [&](int n, int k) {
    const auto e = brute_force_count(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k));
    rows.push_back({"brute_force", n, k, std::nullopt, e, time_estimate(static_cast<double>(e), tau)});
  };
  brute(20, 6);
  brute(30, 4);
  brute(30, 8);
  const auto g = grid_count(3, 6, 20);
  rows.push_back({"grid", 20, 6, 3, g, time_estimate(static_cast<double>(g), tau)});
  // a trained positioner answers with one forward pass and no objective calls
  rows.push_back({"deep_learning", std::nullopt, std::nullopt, std::nullopt, 1, time_estimate(1.0, tau)});
  return rows;
}

std::vector<double> default_power_levels(int count) {
  std::vector<double> levels;
  for (int k = 1; k <= count; ++k) levels.push_back(static_cast<double>(k) / count);
  return levels;
}

namespace {

PowerAllocation split_power(const ScenarioConfig& config, const std::vector<int>& assignment,
                            const std::vector<double>& per_waveguide) {
  std::vector<int> count(config.waveguides.size(), 0);
  for (int w : assignment) ++count[static_cast<std::size_t>(w)];
  PowerAllocation p;
  for (int w : assignment) {
    const auto wi = static_cast<std::size_t>(w);
    p.per_user.push_back(per_waveguide[wi] / count[wi]);
  }
  return p;
}

}  // namespace

JointResult alternating_joint(const ScenarioConfig& config, const std::vector<double>& power_levels,
                              std::optional<SlotLayout> layout_opt, int max_rounds, const SearchOptions& options) {
  if (power_levels.empty()) throw SearchError("power level set is empty");
  for (double f : power_levels)
    if (!(f >= 0.0 && f <= 1.0)) throw SearchError("power levels are fractions of tx_power in [0, 1]");
  const SlotLayout layout = layout_opt.value_or(SlotLayout::one_per_waveguide(config));
  check_layout(config, layout);
  const auto assignment = nearest_assignment(config);
  const std::size_t k = config.waveguides.size();

  std::vector<int> level(k, static_cast<int>(power_levels.size()) - 1);
  auto watts = [&](const std::vector<int>& lv) {
    std::vector<double> out(k);
    for (std::size_t w = 0; w < k; ++w) out[w] = power_levels[static_cast<std::size_t>(lv[w])] * config.waveguides[w].tx_power;
    return out;
  };
  auto ee = [&](const PinchConfiguration& pinch, const std::vector<double>& per_waveguide) {
    return evaluate(config, pinch, split_power(config, assignment, per_waveguide), assignment).energy_efficiency;
  };

  GridIndex position = default_start(config, layout);
  if (!spacing_feasible(config, layout, position)) throw SearchError("infeasible spacing: cannot place the PAs on the grid");

  JointResult out;
  std::uint64_t evaluations = 0;
  double value = ee(grid_configuration(config, layout, position), watts(level));
  out.ee_trace.push_back(value);

  for (int round = 0; round < max_rounds; ++round) {
    const double before = value;
    const auto fixed = watts(level);
    const Objective by_position = [&](const PinchConfiguration& p) { return ee(p, fixed); };
    auto pos = coordinate_grid(config, by_position, 1, options, layout, position);
    evaluations += pos.evaluations;
    position = pos.best_index;
    value = pos.best_value;
    out.ee_trace.push_back(value);

    const auto pinch = grid_configuration(config, layout, position);
    std::vector<int> probe(k, 0);
    std::vector<int> best_level = level;
    double best = -std::numeric_limits<double>::infinity();
    bool found = false;
    do {
      const double v = ee(pinch, watts(probe));
      ++evaluations;
      if (!found || v > best) {
        best = v;
        best_level = probe;
        found = true;
      }
    } while (advance(probe, std::vector<int>(k, static_cast<int>(power_levels.size()))));
    // keep the incumbent power unless the sweep strictly beats it
    if (best > value) {
      level = best_level;
      value = best;
    }
    out.ee_trace.push_back(value);
    out.rounds = round + 1;
    if (value - before < 1e-6) break;
  }

  out.search.best_index = position;
  out.search.best = grid_configuration(config, layout, position);
  out.search.best_value = value;
  out.search.evaluations = evaluations;
  out.search.estimated_seconds = time_estimate(static_cast<double>(evaluations), options.seconds_per_eval);
  out.search.passes = out.rounds;
  out.waveguide_power = watts(level);
  return out;
}

}  // namespace pinch
