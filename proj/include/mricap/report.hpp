#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mricap/accreditation.hpp"
#include "mricap/demand_curve.hpp"
#include "mricap/engine.hpp"
#include "mricap/errors.hpp"
#include "mricap/market.hpp"

namespace mricap {

inline constexpr const char* kToolVersion = "0.1.0";

// Everything needed to reproduce a run, recorded in every output file.
// Worker count and wall-clock time are execution details, not inputs; they
// go to the log only, so reruns stay byte-identical for any worker count.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 42;
  long replications = 10'000;
  double delta = 1.0;
  std::vector<std::string> outputs;
  int workers = 1;                  // not serialized
  double wall_clock_seconds = 0.0;  // not serialized
};

inline std::string manifest_comment(const RunManifest& m) {
  std::string outs;
  for (const auto& o : m.outputs) {
    if (!outs.empty()) outs += ";";
    outs += o;
  }
  return "# manifest command=" + m.command + " config=" + m.config_path +
         " seed=" + std::to_string(m.seed) +
         " reps=" + std::to_string(m.replications) +
         " delta=" + format_fixed(m.delta) + " version=" + kToolVersion +
         " outputs=" + outs;
}

inline nlohmann::ordered_json manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["config"] = m.config_path;
  j["seed"] = m.seed;
  j["replications"] = m.replications;
  j["delta"] = m.delta;
  j["version"] = kToolVersion;
  j["outputs"] = m.outputs;
  return j;
}

inline std::string metrics_to_json(const AdequacyMetrics& m,
                                   const RunManifest& manifest) {
  nlohmann::ordered_json j;
  j["eue"] = m.eue;
  j["lole"] = m.lole;
  j["lolh"] = m.lolh;
  j["expected_mri_hours"] = m.expected_mri_hours;
  j["se_eue"] = m.se_eue;
  j["se_lole"] = m.se_lole;
  j["se_lolh"] = m.se_lolh;
  j["se_expected_mri_hours"] = m.se_expected_mri_hours;
  j["replications"] = m.replications;
  j["seed"] = m.seed;
  j["manifest"] = manifest_json(manifest);
  return j.dump(2) + "\n";
}

namespace detail {

inline std::string opt_fixed(const std::optional<double>& v) {
  return v.has_value() ? format_fixed(*v) : std::string();
}

}  // namespace detail

inline std::string accreditation_to_csv(const AccreditationReport& r,
                                        const RunManifest& manifest) {
  std::string out = manifest_comment(manifest) + "\n";
  out +=
      "name,icap,ucap,aelcc,melcc,mri,rmri,mric,mri_c_component,"
      "mri_e_component,se_mri\n";
  for (const auto& e : r.entries) {
    out += e.name + "," + format_fixed(e.icap) + "," +
           detail::opt_fixed(e.ucap) + "," + detail::opt_fixed(e.aelcc) +
           "," + detail::opt_fixed(e.melcc) + "," + detail::opt_fixed(e.mri) +
           "," + detail::opt_fixed(e.rmri) + "," + detail::opt_fixed(e.mric) +
           "," + detail::opt_fixed(e.mri_c) + "," +
           detail::opt_fixed(e.mri_e) + "," + format_fixed(e.se_mri) + "\n";
  }
  return out;
}

inline std::string accreditation_to_json(const AccreditationReport& r,
                                         const RunManifest& manifest) {
  nlohmann::ordered_json j;
  j["reference"] = r.reference;
  j["mri_perfect"] = r.mri_perfect;
  j["se_mri_perfect"] = r.se_mri_perfect;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : r.entries) {
    nlohmann::ordered_json je;
    je["name"] = e.name;
    je["icap"] = e.icap;
    if (e.is_group) je["group_members"] = e.group_members;
    if (e.is_group_sum) je["sum_of_members"] = true;
    auto put = [&](const char* key, const std::optional<double>& v) {
      if (v.has_value()) je[key] = *v;
    };
    put("ucap", e.ucap);
    put("aelcc", e.aelcc);
    put("melcc", e.melcc);
    put("mri", e.mri);
    put("rmri", e.rmri);
    put("mric", e.mric);
    put("mri_c_component", e.mri_c);
    put("mri_e_component", e.mri_e);
    je["se_mri"] = e.se_mri;
    je["se_rmri"] = e.se_rmri;
    je["se_mric"] = e.se_mric;
    if (!e.warnings.empty()) je["warnings"] = e.warnings;
    j["entries"].push_back(std::move(je));
  }
  j["manifest"] = manifest_json(manifest);
  return j.dump(2) + "\n";
}

// Per-hour trace of one simulated scenario.
inline std::string trace_to_csv(const ScenarioOutcome& o,
                                const BaseCase& base,
                                const RunManifest& manifest) {
  const auto& demand =
      base.load.profiles[static_cast<std::size_t>(o.load_profile_index)]
          .demand;
  std::string out = manifest_comment(manifest) + "\n";
  out += "hour,load,available_total,storage_flow,margin,ue,is_mri_hour\n";
  std::vector<char> mri(demand.size(), 0);
  for (int t : o.mri_hours) mri[static_cast<std::size_t>(t)] = 1;
  for (std::size_t t = 0; t < demand.size(); ++t) {
    const double avail = o.pre_margins[t] + demand[t];
    out += std::to_string(t) + "," + format_fixed(demand[t]) + "," +
           format_fixed(avail) + "," + format_fixed(o.storage_flows[t]) +
           "," + format_fixed(o.post_margins[t]) + "," +
           format_fixed(o.unserved[t]) + "," + (mri[t] ? "1" : "0") + "\n";
  }
  return out;
}

inline std::string clearing_to_json(const ClearingResult& r,
                                    const RunManifest& manifest) {
  nlohmann::ordered_json j;
  j["clearing_price"] = r.clearing_price;
  j["cleared_total"] = r.cleared_total;
  j["surplus"] = r.surplus;
  j["binding_constraint"] = r.binding_constraint;
  j["schedule"] = nlohmann::ordered_json::array();
  for (const auto& s : r.schedule) {
    nlohmann::ordered_json js;
    js["name"] = s.name;
    js["price"] = s.price;
    js["offered"] = s.offered;
    js["cleared"] = s.cleared;
    js["payment"] = s.payment;
    j["schedule"].push_back(std::move(js));
  }
  j["manifest"] = manifest_json(manifest);
  return j.dump(2) + "\n";
}

inline std::string schedule_to_csv(const ClearingResult& r,
                                   const RunManifest& manifest) {
  std::string out = manifest_comment(manifest) + "\n";
  out += "name,price,offered,cleared,payment\n";
  for (const auto& s : r.schedule)
    out += s.name + "," + format_fixed(s.price) + "," +
           format_fixed(s.offered) + "," + format_fixed(s.cleared) + "," +
           format_fixed(s.payment) + "\n";
  return out;
}

inline std::vector<Offer> offers_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("offers: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("offers") ||
      !doc.at("offers").is_array())
    throw ConfigError("offers: expected an object with an 'offers' array");
  for (const auto& [key, value] : doc.items())
    if (key != "offers")
      throw ConfigError("offers: unknown field '" + key + "'");
  std::vector<Offer> out;
  for (const auto& jo : doc.at("offers")) {
    for (const auto& [key, value] : jo.items())
      if (key != "name" && key != "price" && key != "quantity")
        throw ConfigError("offers: unknown field '" + key + "'");
    Offer o;
    if (!jo.contains("name") || !jo.contains("price") ||
        !jo.contains("quantity"))
      throw ConfigError("offers: each offer needs name, price, quantity");
    o.name = jo.at("name").get<std::string>();
    o.price = jo.at("price").get<double>();
    o.quantity = jo.at("quantity").get<double>();
    out.push_back(std::move(o));
  }
  return out;
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mricap
