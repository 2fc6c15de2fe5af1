#pragma once

#include <concepts>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pinch/agents.hpp"

namespace pinch::harness {

inline constexpr const char* kCodeVersion = "0.1.0";

/// Generator for one named consumer of a run seed.
std::mt19937_64 rng_stream(std::uint64_t seed, std::string_view label);

class DuplicateStream : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Hands out one stream per label and refuses a label twice.
class RngRegistry {
 public:
  explicit RngRegistry(std::uint64_t seed) : seed_(seed) {}

  std::mt19937_64 stream(std::string_view label);
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::set<std::string, std::less<>> labels_;
};

/// Shortest decimal that round-trips; "inf", "-inf" and "nan" for the rest.
std::string format_number(double v);
std::string csv_escape(std::string_view field);

/// RFC 4180 rows with LF line ends. The header fixes the column count.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);

  CsvWriter& operator<<(std::string_view field);
  CsvWriter& operator<<(const char* field) { return *this << std::string_view(field); }
  CsvWriter& operator<<(const std::string& field) { return *this << std::string_view(field); }
  CsvWriter& operator<<(double v) { return *this << format_number(v); }
  template <std::integral T>
    requires(!std::is_same_v<T, bool> && !std::is_same_v<T, char>)
  CsvWriter& operator<<(T v) {
    return *this << std::string_view(std::to_string(v));
  }

  /// Throws std::logic_error unless the row has exactly one field per column.
  void end_row();
  std::size_t rows() const { return rows_; }

 private:
  std::ostream& out_;
  std::size_t columns_;
  std::vector<std::string> pending_;
  std::size_t rows_ = 0;
};

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string code_version = kCodeVersion;
  std::string output_dir;
  std::string started;
  std::string finished;          // empty until finalize()
  std::vector<std::string> args;
  std::vector<std::string> outputs;  // relative to output_dir

  nlohmann::json to_json() const;
  /// Writes manifest.json with the start time; finalize() rewrites it with the end time.
  void begin(const std::filesystem::path& dir);
  void finalize(const std::filesystem::path& dir);
};

RunManifest read_manifest(const std::filesystem::path& dir);

/// Keys mirror AgentConfig field names; unknown keys throw ConfigError.
agents::AgentConfig agent_config_from_json(const nlohmann::json& doc);
nlohmann::json agent_config_to_json(const agents::AgentConfig& config);

/// Entry point shared by the `pinch` binary and the tests.
/// Returns 0 on success, 1 on a usage or configuration error, 2 on a runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pinch::harness
