#include "pinch/scenario_io.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

namespace pinch {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  std::set<std::string> keys;
  for (const char* k : allowed) keys.insert(k);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

const json& required(const json& j, const std::string& where, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + ": missing key '" + key + "'");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

double number_or(const json& j, const std::string& where, const char* key, double fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : number(*it, where + "." + key);
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<int>();
}

Point3 point(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
  return {number(j[0], where), number(j[1], where), number(j[2], where)};
}

json point_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }

Waveguide parse_waveguide(const json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, where, {"id", "feed", "axis", "length", "grid_size", "tx_power"});
  Waveguide w;
  w.id = integer(required(j, where, "id"), where + ".id");
  w.feed = point(required(j, where, "feed"), where + ".feed");
  w.axis = point(required(j, where, "axis"), where + ".axis");
  w.length = number(required(j, where, "length"), where + ".length");
  w.grid_size = integer(required(j, where, "grid_size"), where + ".grid_size");
  w.tx_power = number(required(j, where, "tx_power"), where + ".tx_power");
  return w;
}

User parse_user(const json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, where, {"id", "position", "qos_min_rate", "waypoints", "v_max"});
  User u;
  u.id = integer(required(j, where, "id"), where + ".id");
  u.position = point(required(j, where, "position"), where + ".position");
  u.qos_min_rate = number_or(j, where, "qos_min_rate", 0.0);
  u.v_max = number_or(j, where, "v_max", u.v_max);
  if (auto it = j.find("waypoints"); it != j.end()) {
    if (!it->is_array()) throw ConfigError(where + ".waypoints: expected an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const auto& wj = (*it)[k];
      const std::string wwhere = where + ".waypoints[" + std::to_string(k) + "]";
      require_object(wj, wwhere);
      reject_unknown(wj, wwhere, {"time", "position"});
      u.waypoints.push_back({number(required(wj, wwhere, "time"), wwhere + ".time"),
                             point(required(wj, wwhere, "position"), wwhere + ".position")});
    }
  }
  return u;
}

Obstacle parse_obstacle(const json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, where, {"min", "max"});
  return {point(required(j, where, "min"), where + ".min"), point(required(j, where, "max"), where + ".max")};
}

RadioConstants parse_radio(const json& j) {
  const std::string where = "radio";
  require_object(j, where);
  reject_unknown(j, where, {"frequency", "wavelength", "n_eff", "eta", "noise_power", "attenuation_db_per_m"});
  const double f = number_or(j, where, "frequency", 28e9);
  if (!(f > 0.0)) throw ConfigError("radio.frequency: must be positive");
  RadioConstants r = RadioConstants::at_frequency(f);
  r.wavelength = number_or(j, where, "wavelength", r.wavelength);
  r.n_eff = number_or(j, where, "n_eff", r.n_eff);
  r.eta = number_or(j, where, "eta", r.eta);
  r.noise_power = number_or(j, where, "noise_power", r.noise_power);
  r.attenuation_db_per_m = number_or(j, where, "attenuation_db_per_m", r.attenuation_db_per_m);
  return r;
}

template <class T, class F>
std::vector<T> parse_list(const json& j, const std::string& where, F parse) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace

ScenarioConfig scenario_from_json(const json& doc) {
  require_object(doc, "scenario");
  reject_unknown(doc, "scenario",
                 {"room", "waveguides", "users", "obstacles", "radio", "min_spacing", "access_mode", "seed", "circuit_power"});
  ScenarioConfig c;

  const auto& room = required(doc, "scenario", "room");
  require_object(room, "room");
  reject_unknown(room, "room", {"min", "max"});
  c.room.lo = point(required(room, "room", "min"), "room.min");
  c.room.hi = point(required(room, "room", "max"), "room.max");

  c.waveguides = parse_list<Waveguide>(required(doc, "scenario", "waveguides"), "waveguides", parse_waveguide);
  if (auto it = doc.find("users"); it != doc.end()) c.users = parse_list<User>(*it, "users", parse_user);
  if (auto it = doc.find("obstacles"); it != doc.end()) c.obstacles = parse_list<Obstacle>(*it, "obstacles", parse_obstacle);
  if (auto it = doc.find("radio"); it != doc.end()) c.radio = parse_radio(*it);
  c.min_spacing = number_or(doc, "scenario", "min_spacing", c.radio.wavelength / 2.0);
  c.circuit_power = number_or(doc, "scenario", "circuit_power", c.circuit_power);
  if (auto it = doc.find("access_mode"); it != doc.end()) {
    if (!it->is_string()) throw ConfigError("access_mode: expected a string");
    auto mode = access_mode_from_string(it->get<std::string>());
    if (!mode) throw ConfigError("access_mode: one of OMA, NOMA, MULTI_WAVEGUIDE");
    c.access = *mode;
  }
  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0))
      throw ConfigError("seed: expected a non-negative integer");
    c.seed = it->get<std::uint64_t>();
  }
  return c;
}

json scenario_to_json(const ScenarioConfig& c) {
  json doc;
  doc["room"] = {{"min", point_json(c.room.lo)}, {"max", point_json(c.room.hi)}};
  doc["waveguides"] = json::array();
  for (const auto& w : c.waveguides)
    doc["waveguides"].push_back({{"id", w.id},
                                 {"feed", point_json(w.feed)},
                                 {"axis", point_json(w.axis)},
                                 {"length", w.length},
                                 {"grid_size", w.grid_size},
                                 {"tx_power", w.tx_power}});
  doc["users"] = json::array();
  for (const auto& u : c.users) {
    json uj = {{"id", u.id}, {"position", point_json(u.position)}, {"qos_min_rate", u.qos_min_rate}, {"v_max", u.v_max}};
    if (!u.waypoints.empty()) {
      uj["waypoints"] = json::array();
      for (const auto& wp : u.waypoints) uj["waypoints"].push_back({{"time", wp.t}, {"position", point_json(wp.position)}});
    }
    doc["users"].push_back(std::move(uj));
  }
  doc["obstacles"] = json::array();
  for (const auto& o : c.obstacles) doc["obstacles"].push_back({{"min", point_json(o.lo)}, {"max", point_json(o.hi)}});
  doc["radio"] = {{"frequency", c.radio.frequency},
                  {"wavelength", c.radio.wavelength},
                  {"n_eff", c.radio.n_eff},
                  {"eta", c.radio.eta},
                  {"noise_power", c.radio.noise_power},
                  {"attenuation_db_per_m", c.radio.attenuation_db_per_m}};
  doc["min_spacing"] = c.min_spacing;
  doc["access_mode"] = to_string(c.access);
  doc["seed"] = c.seed;
  doc["circuit_power"] = c.circuit_power;
  return doc;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return scenario_from_json(doc);
}

void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << scenario_to_json(config).dump(2) << '\n';
}

}  // namespace pinch
