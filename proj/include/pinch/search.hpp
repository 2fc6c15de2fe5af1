#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinch/scenario.hpp"

namespace pinch {

class SearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How many PAs each waveguide activates. Slots are ordered waveguide-major.
struct SlotLayout {
  std::vector<int> slots_per_waveguide;

  static SlotLayout one_per_waveguide(const ScenarioConfig& config);
  std::size_t total() const;
  std::size_t waveguide_of(std::size_t slot) const;
};

/// Candidate index per slot.
using GridIndex = std::vector<int>;
using Objective = std::function<double(const PinchConfiguration&)>;

/// Every candidate site of every waveguide, active where a slot selects it.
PinchConfiguration grid_configuration(const ScenarioConfig& config, const SlotLayout& layout, const GridIndex& index);

/// Distinct candidates per waveguide and active coordinates at least min_spacing apart.
bool spacing_feasible(const ScenarioConfig& config, const SlotLayout& layout, const GridIndex& index);

struct SearchOptions {
  double seconds_per_eval = 1e-3;               // tau for the time estimate
  std::uint64_t max_evaluations = 100'000'000;  // brute-force budget guard
  unsigned workers = 1;                         // brute-force partitions; objective must be thread-safe when > 1
};

struct SearchResult {
  PinchConfiguration best;
  GridIndex best_index;
  double best_value = 0.0;
  std::uint64_t evaluations = 0;  // objective calls
  double estimated_seconds = 0.0;
  int passes = 0;
  std::vector<double> trace;  // incumbent after each coordinate sweep
};

/// Exhaustive search in lexicographic index order; ties keep the smallest index vector.
/// Throws SearchError when the grid exceeds options.max_evaluations.
SearchResult brute_force(const ScenarioConfig& config, const Objective& objective, const SearchOptions& options = {},
                         std::optional<SlotLayout> layout = std::nullopt);

/// Cyclic coordinate ascent: each sweep tries every candidate of one slot with the
/// others held fixed. Starts from `start` or the middle of each grid.
SearchResult coordinate_grid(const ScenarioConfig& config, const Objective& objective, int passes,
                             const SearchOptions& options = {}, std::optional<SlotLayout> layout = std::nullopt,
                             std::optional<GridIndex> start = std::nullopt);

GridIndex default_start(const ScenarioConfig& config, const SlotLayout& layout);

std::uint64_t brute_force_count(std::uint64_t n, std::uint64_t k);
std::uint64_t grid_count(std::uint64_t passes, std::uint64_t k, std::uint64_t n);
double time_estimate(double evaluations, double seconds_per_eval);

/// Human duration in the largest fitting unit, three significant digits. Minutes
/// and longer, or any rounded value, get a leading "≈" ("≈17.8 h", "0.36 s", "1 ms").
std::string format_duration(double seconds);

struct ComplexityRow {
  std::string method;
  std::optional<int> n;
  std::optional<int> k;
  std::optional<int> passes;
  std::uint64_t evaluations = 0;
  double est_time_seconds = 0.0;
};

/// Search-versus-learning cost table at tau seconds per objective evaluation.
std::vector<ComplexityRow> complexity_table(double seconds_per_eval = 1e-3);

struct JointResult {
  SearchResult search;
  std::vector<double> waveguide_power;  // watts per waveguide
  std::vector<double> ee_trace;         // after every half-step, starting with the initial point
  int rounds = 0;
};

/// Uniform levels k/count * tx_power, k = 1..count, as fractions of tx_power.
std::vector<double> default_power_levels(int count = 8);

/// Alternates a coordinate pass over PA positions with an exhaustive sweep over
/// per-waveguide power levels (fractions of tx_power) to maximize energy efficiency.
/// Stops when a round gains less than 1e-6 or after max_rounds.
JointResult alternating_joint(const ScenarioConfig& config, const std::vector<double>& power_levels,
                              std::optional<SlotLayout> layout = std::nullopt, int max_rounds = 20,
                              const SearchOptions& options = {});

}  // namespace pinch
