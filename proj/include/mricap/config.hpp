#pragma once

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mricap/errors.hpp"
#include "mricap/types.hpp"

namespace mricap {

namespace detail {

using json = nlohmann::json;

inline void require_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional = {}) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> allowed;
  for (const char* k : required) {
    allowed.insert(k);
    if (!obj.contains(k))
      throw ConfigError(where + ": missing required field '" + k + "'");
  }
  for (const char* k : optional) allowed.insert(k);
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError(where + ": unknown field '" + key + "'");
}

inline double get_number(const json& obj, const std::string& where,
                         const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_number())
    throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline std::vector<double> get_series(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(where + ": expected numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline ResourceSpec parse_resource(const json& obj, const std::string& name,
                                   std::size_t n_profiles) {
  const std::string where = "resources." + name;
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  if (!obj.contains("type"))
    throw ConfigError(where + ": missing required field 'type'");
  const std::string type = obj.at("type").get<std::string>();
  if (type == "thermal") {
    require_keys(obj, where, {"type", "icap", "for_rate"},
                 {"mttr_hours", "outage_mode"});
    ThermalSpec th;
    th.icap = get_number(obj, where, "icap");
    th.for_rate = get_number(obj, where, "for_rate");
    if (obj.contains("mttr_hours"))
      th.mttr_hours = get_number(obj, where, "mttr_hours");
    if (obj.contains("outage_mode")) {
      const std::string mode = obj.at("outage_mode").get<std::string>();
      if (mode == "markov")
        th.outage_mode = OutageMode::markov;
      else if (mode == "iid")
        th.outage_mode = OutageMode::iid;
      else
        throw ConfigError(where + ".outage_mode: expected 'markov' or 'iid'");
    }
    return th;
  }
  if (type == "intermittent") {
    require_keys(obj, where, {"type", "icap", "profiles"});
    IntermittentSpec ir;
    ir.icap = get_number(obj, where, "icap");
    const auto& profs = obj.at("profiles");
    if (!profs.is_array() || profs.empty())
      throw ConfigError(where + ".profiles: expected an array of series");
    for (std::size_t i = 0; i < profs.size(); ++i)
      ir.profiles.push_back(get_series(
          profs[i], where + ".profiles[" + std::to_string(i) + "]"));
    // A single series is shared across all load profiles.
    if (ir.profiles.size() == 1 && n_profiles > 1)
      ir.profiles.assign(n_profiles, ir.profiles.front());
    return ir;
  }
  if (type == "storage") {
    require_keys(obj, where,
                 {"type", "discharge_cap", "charge_cap", "energy_limit"},
                 {"initial_soc_fraction"});
    StorageSpec st;
    st.discharge_cap = get_number(obj, where, "discharge_cap");
    st.charge_cap = get_number(obj, where, "charge_cap");
    st.energy_limit = get_number(obj, where, "energy_limit");
    if (obj.contains("initial_soc_fraction"))
      st.initial_soc_fraction = get_number(obj, where, "initial_soc_fraction");
    return st;
  }
  if (type == "perfect") {
    require_keys(obj, where, {"type", "icap"});
    PerfectSpec pf;
    pf.icap = get_number(obj, where, "icap");
    return pf;
  }
  throw ConfigError(where + ".type: unknown resource type '" + type + "'");
}

}  // namespace detail

// Parses and validates a system config document. Parsing is strict: unknown
// fields are rejected and every invariant is enforced.
inline BaseCase parse_system_config(const std::string& text) {
  detail::json doc;
  try {
    doc = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  detail::require_keys(doc, "config",
                       {"horizon_hours", "voll", "load_profiles", "resources"});
  BaseCase base;
  if (!doc.at("horizon_hours").is_number_integer())
    throw ConfigError("horizon_hours: expected an integer");
  base.load.horizon_hours = doc.at("horizon_hours").get<int>();
  base.voll = detail::get_number(doc, "config", "voll");

  const auto& lps = doc.at("load_profiles");
  if (!lps.is_array())
    throw ConfigError("load_profiles: expected an array");
  for (std::size_t p = 0; p < lps.size(); ++p) {
    const std::string where = "load_profiles[" + std::to_string(p) + "]";
    detail::require_keys(lps[p], where, {"weight", "demand"});
    LoadProfile prof;
    prof.weight = detail::get_number(lps[p], where, "weight");
    prof.demand = detail::get_series(lps[p].at("demand"), where + ".demand");
    base.load.profiles.push_back(std::move(prof));
  }

  const auto& res = doc.at("resources");
  if (!res.is_object())
    throw ConfigError("resources: expected an object (name -> spec)");
  for (const auto& [name, spec] : res.items())
    base.resources.emplace(
        name, detail::parse_resource(spec, name, base.load.profiles.size()));

  validate(base);
  return base;
}

inline BaseCase load_system_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_system_config(ss.str());
}

// Serializes a base case back to the config schema (used by `calibrate` to
// write the adjusted system).
inline std::string write_system_config(const BaseCase& base) {
  nlohmann::ordered_json doc;
  doc["horizon_hours"] = base.load.horizon_hours;
  doc["voll"] = base.voll;
  auto& lps = doc["load_profiles"] = nlohmann::ordered_json::array();
  for (const auto& prof : base.load.profiles) {
    nlohmann::ordered_json p;
    p["weight"] = prof.weight;
    p["demand"] = prof.demand;
    lps.push_back(std::move(p));
  }
  auto& res = doc["resources"] = nlohmann::ordered_json::object();
  for (const auto& [name, r] : base.resources) {
    nlohmann::ordered_json obj;
    obj["type"] = resource_type_name(r);
    if (const auto* th = std::get_if<ThermalSpec>(&r)) {
      obj["icap"] = th->icap;
      obj["for_rate"] = th->for_rate;
      obj["mttr_hours"] = th->mttr_hours;
      obj["outage_mode"] =
          th->outage_mode == OutageMode::markov ? "markov" : "iid";
    } else if (const auto* ir = std::get_if<IntermittentSpec>(&r)) {
      obj["icap"] = ir->icap;
      obj["profiles"] = ir->profiles;
    } else if (const auto* st = std::get_if<StorageSpec>(&r)) {
      obj["discharge_cap"] = st->discharge_cap;
      obj["charge_cap"] = st->charge_cap;
      obj["energy_limit"] = st->energy_limit;
      obj["initial_soc_fraction"] = st->initial_soc_fraction;
    } else {
      obj["icap"] = std::get<PerfectSpec>(r).icap;
    }
    res[name] = std::move(obj);
  }
  return doc.dump(2) + "\n";
}

}  // namespace mricap
