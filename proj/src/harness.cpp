#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "pinch/harness.hpp"
#include "pinch/scenario_io.hpp"
#include "pinch/seeding.hpp"

namespace pinch::harness {

std::mt19937_64 rng_stream(std::uint64_t seed, std::string_view label) {
  return std::mt19937_64(derive_seed(seed, label));
}

std::mt19937_64 RngRegistry::stream(std::string_view label) {
  if (!labels_.emplace(label).second) throw DuplicateStream("rng stream label used twice: " + std::string(label));
  return rng_stream(seed_, label);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(std::ostream& out, std::vector<std::string> header) : out_(out), columns_(header.size()) {
  if (header.empty()) throw std::invalid_argument("CSV header needs at least one column");
  pending_ = std::move(header);
  end_row();
  rows_ = 0;
}

CsvWriter& CsvWriter::operator<<(std::string_view field) {
  pending_.emplace_back(field);
  return *this;
}

void CsvWriter::end_row() {
  if (pending_.size() != columns_)
    throw std::logic_error("CSV row has " + std::to_string(pending_.size()) + " fields, expected " +
                           std::to_string(columns_));
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    if (i) out_ << ',';
    out_ << csv_escape(pending_[i]);
  }
  out_ << '\n';
  pending_.clear();
  ++rows_;
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << doc.dump(2) << '\n';
}

}  // namespace

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},           {"config_path", config_path}, {"seed", seed},
          {"code_version", code_version}, {"output_dir", output_dir},   {"started", started},
          {"finished", finished},         {"args", args},               {"outputs", outputs}};
}

void RunManifest::begin(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  started = utc_now();
  finished.clear();
  write_json(dir / "manifest.json", to_json());
}

void RunManifest::finalize(const std::filesystem::path& dir) {
  finished = utc_now();
  write_json(dir / "manifest.json", to_json());
}

RunManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw ConfigError("no manifest in " + dir.string());
  const auto doc = nlohmann::json::parse(f);
  RunManifest m;
  m.command = doc.at("command");
  m.config_path = doc.at("config_path");
  m.seed = doc.at("seed");
  m.code_version = doc.at("code_version");
  m.output_dir = doc.at("output_dir");
  m.started = doc.at("started");
  m.finished = doc.at("finished");
  m.args = doc.at("args").get<std::vector<std::string>>();
  m.outputs = doc.at("outputs").get<std::vector<std::string>>();
  return m;
}

#define PINCH_AGENT_FIELDS(X)                                                                          \
  X(gamma) X(epsilon_start) X(epsilon_end) X(epsilon_decay_fraction) X(target_sync) X(buffer_capacity) \
  X(batch_size) X(learning_rate) X(actor_learning_rate) X(noise_start) X(noise_end) X(hidden_units)    \
  X(hidden_layers) X(reward_scale) X(preactivation_penalty) X(bootstrap_on_timeout)

agents::AgentConfig agent_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("agent config must be a JSON object");
  agents::AgentConfig c;
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    try {
#define READ(f)                      \
  if (key == #f) {                   \
    value.get_to(c.f);               \
    known = true;                    \
  }
      PINCH_AGENT_FIELDS(READ)
#undef READ
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("agent config key '" + key + "': " + e.what());
    }
    if (!known) throw ConfigError("unknown agent config key '" + key + "'");
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("agent config: ") + e.what());
  }
  return c;
}

nlohmann::json agent_config_to_json(const agents::AgentConfig& c) {
  nlohmann::json doc = nlohmann::json::object();
#define WRITE(f) doc[#f] = c.f;
  PINCH_AGENT_FIELDS(WRITE)
#undef WRITE
  return doc;
}

}  // namespace pinch::harness
