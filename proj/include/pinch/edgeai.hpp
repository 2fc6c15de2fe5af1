#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinch/agents.hpp"
#include "pinch/neural.hpp"
#include "pinch/scenario.hpp"

namespace pinch::edge {

// ---------------------------------------------------------------------------
// Device classification

enum class DeviceClass { Normal, PaAssist, Drop };

std::string to_string(DeviceClass c);

struct ClassThresholds {
  double value_high = 0.2;
  double value_low = 0.05;
  double quality_low = 0.5;
};

/// value >= value_high with quality < quality_low asks for PA help; a low value with a
/// poor channel is not worth it. Throws std::invalid_argument outside [0, 1].
DeviceClass classify_device(double value, double quality, const ClassThresholds& t = {});
std::vector<DeviceClass> classify_devices(std::span<const double> values, std::span<const double> quality,
                                          const ClassThresholds& t = {});

// ---------------------------------------------------------------------------
// Federated learning

enum class FlScheme { NoPa, FixedPa, OptimizedPa };

std::string to_string(FlScheme s);
std::optional<FlScheme> fl_scheme_from_string(const std::string& s);

struct FlConfig {
  ScenarioConfig scenario;                 // users are the devices; waveguide 0 carries the PA
  Point3 access_point{5.0, 5.0, 3.0};      // conventional antenna serving every uplink
  int rounds = 100;
  int classes = 4;
  int train_samples = 2000;
  int test_samples = 2000;
  double dirichlet_alpha = 0.3;
  double class_spread = 1.5;               // class means at (+-spread, +-spread), unit variance
  int hidden = 32;
  double learning_rate = 0.02;
  int batch_size = 32;
  double bandwidth_hz = 1e4;
  double bits_per_parameter = 32.0;
  double device_power = 0.01;              // watts
  double compute_base_seconds = 1.0;
  double compute_seconds_per_sample = 2e-3;
  double compute_jitter = 0.25;            // per-device speed factor in [1 - j, 1 + j]
  double deadline_factor = 2.0;            // multiple of the median no-PA round time
  ClassThresholds thresholds;
  std::vector<double> data_value;          // per device; empty derives it from the local labels
  bool ideal_uplink = false;               // zero upload time for everyone
  int grid_passes = 2;
};

/// Ten devices in a 10 x 10 x 3 m room: six in clear view of the ceiling antenna, four
/// behind a wall near the waveguide, two of those also behind a low rack from its midpoint.
FlConfig default_fl_config();

struct FlDevice {
  int id = 0;
  Point3 position;
  nn::Matrix x;                 // 2 x n
  nn::Matrix y;                 // classes x n, one-hot
  std::vector<int> labels;
  std::vector<int> class_counts;
  double data_value = 0.0;
  double quality = 0.0;         // access-point rate over the best access-point rate
  double compute_seconds = 0.0;
  double ap_rate = 0.0;         // bits/s through the conventional antenna
  DeviceClass cls = DeviceClass::Normal;
};

struct FlData {
  std::vector<FlDevice> devices;
  nn::Matrix test_x;
  std::vector<int> test_labels;
};

std::uint64_t fl_model_seed(std::uint64_t seed);
std::uint64_t fl_local_seed(std::uint64_t seed, std::size_t device);

/// Seeded data, channels and classes. Identical for every scheme.
FlData make_fl_data(const FlConfig& config, std::uint64_t seed);

nn::MlpModel make_fl_model(const FlConfig& config, std::uint64_t seed);
double accuracy(const nn::MlpModel& model, const nn::Matrix& x, std::span<const int> labels);

struct FlRoundLog {
  int round = 0;
  std::vector<int> selected;
  std::vector<double> weights;           // aggregation weight per selected device
  std::vector<double> upload_seconds;    // per device; infinity when unreachable
  std::vector<double> device_seconds;    // compute + upload per device
  double round_seconds = 0.0;
  double accuracy = 0.0;
  int dropped = 0;
  int rescued = 0;                       // PA_ASSIST devices on time only thanks to the PA
  std::optional<double> pa_coordinate;
};

struct FlRun {
  FlScheme scheme = FlScheme::NoPa;
  double deadline = 0.0;
  std::vector<double> uplink_rate;       // bits/s per device under this scheme
  std::vector<FlRoundLog> rounds;
  nn::MlpModel model;
  double final_accuracy() const { return rounds.empty() ? 0.0 : rounds.back().accuracy; }
};

class FlAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// FedAvg over config.rounds rounds. Throws FlAborted when no device meets the deadline.
FlRun fl_run(const FlConfig& config, FlScheme scheme, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Over-the-air aggregation

struct AirCompSetup {
  std::vector<double> gains;       // channel amplitudes
  std::vector<double> tx_scalars;  // b_k
  double receive_scale = 1.0;      // a
  double noise_power = 0.0;
  double power_cap = 1.0;          // bound on b_k^2
  double signal_variance = 1.0;
};

struct AirCompResult {
  double estimate = 0.0;
  double mse_analytic = 0.0;
  double mse_empirical = 0.0;
  double standard_error = 0.0;     // of mse_empirical
  int trials = 0;
};

/// (sum_k b_k h_k x_k + n) / (K a)
double aircomp_estimate(const AirCompSetup& setup, std::span<const double> x, double noise);
double aircomp_mse(const AirCompSetup& setup);

/// Estimate for `x` with one noise draw, plus the Monte Carlo MSE over i.i.d. zero-mean
/// Gaussian signals. Throws std::invalid_argument on a zero receive scale or a size mismatch.
AirCompResult aircomp_aggregate(const AirCompSetup& setup, std::span<const double> x, std::uint64_t seed,
                                int trials = 100000);

/// Devices at or above `cutoff` invert their channel; the rest transmit at the cap.
AirCompSetup channel_inversion(std::vector<double> gains, double power_cap, double cutoff, double noise_power,
                               double signal_variance = 1.0);

struct AirCompOptions {
  Point3 access_point{5.0, 5.0, 3.0};
  double power_cap = 0.01;
  double cutoff = 1e-5;
  double signal_variance = 1.0;
  int passes = 2;
};

struct AirCompComparison {
  double mse_no_pa = 0.0;
  double mse_optimized = 0.0;
  double pa_coordinate = 0.0;
  std::vector<double> gains_no_pa;
  std::vector<double> gains_optimized;
};

/// Users of `config` are the devices; the PA rides waveguide 0. Noise is the radio noise power.
AirCompComparison aircomp_with_pa(const ScenarioConfig& config, const AirCompOptions& options = {});

// ---------------------------------------------------------------------------
// Hotspots

enum class HotspotPolicy { Static, Adaptive };

std::string to_string(HotspotPolicy p);

struct TrafficMap {
  std::vector<std::vector<double>> demand;  // [slot][user], non-negative
};

struct HotspotSlot {
  int slot = 0;
  double objective = 0.0;    // min over users with demand of rate / demand
  double min_rate = 0.0;     // over users with demand
  double served_load = 0.0;  // demand-weighted mean rate
  std::vector<double> coords;
};

double hotspot_objective(const ScenarioConfig& config, const PinchConfiguration& pinch, std::span<const double> demand);

/// STATIC keeps the slot-0 placement; ADAPTIVE re-runs coordinate_grid every slot,
/// warm-started from the previous slot.
std::vector<HotspotSlot> hotspot_schedule(const ScenarioConfig& config, const TrafficMap& traffic,
                                          HotspotPolicy policy, int passes = 2);

// ---------------------------------------------------------------------------
// Mobility

enum class Tracking { None, Grid, DdpgPolicy };

std::string to_string(Tracking t);
std::optional<Tracking> tracking_from_string(const std::string& s);

struct MobilityOptions {
  double outage_rate = 8.0;  // bits/s/Hz
  double tick_seconds = 1.0;
  int ticks = 10;
  int passes = 2;
};

struct MobilityTick {
  int tick = 0;
  double time = 0.0;
  Point3 position;
  int serving = -1;  // -1 while every waveguide is blocked
  double rate = 0.0;
  bool outage = false;
  std::vector<double> coords;
};

struct MobilityReport {
  std::vector<MobilityTick> ticks;
  double outage_fraction = 0.0;
  int handovers = 0;
  int staleness = 0;  // longest run of outage ticks
};

/// Follows the one user of `config` along its waypoints. NONE parks each PA at its guide
/// midpoint, GRID re-optimizes every tick, DDPG_POLICY steps `policy` in a continuous
/// environment built from the same config.
MobilityReport mobility_track(const ScenarioConfig& config, Tracking tracking, const MobilityOptions& options = {},
                              const agents::ActionPolicy* policy = nullptr);

}  // namespace pinch::edge
