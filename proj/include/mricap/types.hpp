#pragma once

#include <cmath>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "mricap/errors.hpp"

namespace mricap {

enum class OutageMode { markov, iid };

// Two-state thermal unit: full capacity when up, zero when down.
struct ThermalSpec {
  double icap = 0.0;      // MW, on-state capacity (native capacity)
  double for_rate = 0.0;  // forced outage rate in [0, 1]
  double mttr_hours = 24.0;
  OutageMode outage_mode = OutageMode::markov;

  // Per-hour Markov transition probabilities chosen so the stationary
  // unavailability equals the forced outage rate.
  double repair_prob() const { return 1.0 / mttr_hours; }
  double failure_prob() const {
    return repair_prob() * for_rate / (1.0 - for_rate);
  }
};

struct IntermittentSpec {
  double icap = 0.0;  // MW, profile-normalizing native capacity
  // One hourly output series per load profile index (weather pairing).
  std::vector<std::vector<double>> profiles;
};

struct StorageSpec {
  double discharge_cap = 0.0;  // MW, native capacity
  double charge_cap = 0.0;     // MW
  double energy_limit = 0.0;   // MWh
  double initial_soc_fraction = 1.0;

  double duration_hours() const { return energy_limit / discharge_cap; }
};

// Always available at full capacity; the accreditation reference.
struct PerfectSpec {
  double icap = 0.0;  // MW
};

using ResourceSpec =
    std::variant<ThermalSpec, IntermittentSpec, StorageSpec, PerfectSpec>;

inline double native_capacity(const ResourceSpec& r) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, StorageSpec>) {
          return s.discharge_cap;
        } else {
          return s.icap;
        }
      },
      r);
}

inline const char* resource_type_name(const ResourceSpec& r) {
  switch (r.index()) {
    case 0: return "thermal";
    case 1: return "intermittent";
    case 2: return "storage";
    default: return "perfect";
  }
}

struct LoadProfile {
  double weight = 0.0;  // probability
  std::vector<double> demand;  // MW, length horizon_hours
};

struct LoadModel {
  std::vector<LoadProfile> profiles;
  int horizon_hours = 0;
};

// The full system description: the point at which every derivative-based
// accreditation quantity is evaluated. Immutable by convention once
// validated; perturbations copy.
struct BaseCase {
  LoadModel load;
  std::map<std::string, ResourceSpec> resources;  // name-ordered
  double voll = 0.0;  // $/MWh
};

namespace detail {

inline void validate_resource(const std::string& name, const ResourceSpec& r,
                              std::size_t n_profiles, int horizon) {
  const std::string where = "resources." + name;
  if (const auto* th = std::get_if<ThermalSpec>(&r)) {
    if (!(th->icap > 0.0))
      throw ConfigError(where + ".icap: must be > 0");
    if (!(th->for_rate >= 0.0 && th->for_rate <= 1.0))
      throw ConfigError(where + ".for_rate: must be in [0, 1]");
    if (!(th->mttr_hours > 0.0))
      throw ConfigError(where + ".mttr_hours: must be > 0");
    if (th->outage_mode == OutageMode::markov && th->for_rate < 1.0 &&
        th->failure_prob() > 1.0)
      throw ConfigError(where +
                        ": markov failure probability exceeds 1 "
                        "(for_rate too high for this mttr_hours)");
  } else if (const auto* ir = std::get_if<IntermittentSpec>(&r)) {
    if (!(ir->icap > 0.0))
      throw ConfigError(where + ".icap: must be > 0");
    if (ir->profiles.size() != n_profiles)
      throw ConfigError(where + ".profiles: expected " +
                        std::to_string(n_profiles) + " series, got " +
                        std::to_string(ir->profiles.size()));
    for (const auto& series : ir->profiles) {
      if (static_cast<int>(series.size()) != horizon)
        throw ConfigError(where + ".profiles: series length " +
                          std::to_string(series.size()) + " != horizon " +
                          std::to_string(horizon));
      for (double v : series)
        if (!(v >= 0.0) || !std::isfinite(v))
          throw ConfigError(where + ".profiles: outputs must be >= 0");
    }
  } else if (const auto* st = std::get_if<StorageSpec>(&r)) {
    if (!(st->discharge_cap > 0.0))
      throw ConfigError(where + ".discharge_cap: must be > 0");
    if (!(st->charge_cap >= 0.0))
      throw ConfigError(where + ".charge_cap: must be >= 0");
    if (!(st->energy_limit > 0.0))
      throw ConfigError(where + ".energy_limit: must be > 0");
    if (!(st->initial_soc_fraction >= 0.0 && st->initial_soc_fraction <= 1.0))
      throw ConfigError(where + ".initial_soc_fraction: must be in [0, 1]");
  } else {
    const auto& pf = std::get<PerfectSpec>(r);
    if (!(pf.icap >= 0.0))
      throw ConfigError(where + ".icap: must be >= 0");
  }
}

}  // namespace detail

inline void validate(const BaseCase& base) {
  const int T = base.load.horizon_hours;
  if (T < 1) throw ConfigError("horizon_hours: must be >= 1");
  if (base.load.profiles.empty())
    throw ConfigError("load_profiles: at least one profile required");
  double wsum = 0.0;
  for (std::size_t p = 0; p < base.load.profiles.size(); ++p) {
    const auto& prof = base.load.profiles[p];
    if (!(prof.weight >= 0.0))
      throw ConfigError("load_profiles[" + std::to_string(p) +
                        "].weight: must be >= 0");
    wsum += prof.weight;
    if (static_cast<int>(prof.demand.size()) != T)
      throw ConfigError("load_profiles[" + std::to_string(p) +
                        "].demand: length " +
                        std::to_string(prof.demand.size()) + " != horizon " +
                        std::to_string(T));
    for (double d : prof.demand)
      if (!(d >= 0.0) || !std::isfinite(d))
        throw ConfigError("load_profiles[" + std::to_string(p) +
                          "].demand: values must be >= 0");
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw ConfigError("load_profiles: weights not normalized (sum = " +
                      std::to_string(wsum) + ")");
  if (base.resources.empty())
    throw ConfigError("resources: at least one resource required");
  if (!(base.voll >= 0.0))
    throw ConfigError("voll: must be >= 0");
  for (const auto& [name, r] : base.resources)
    detail::validate_resource(name, r, base.load.profiles.size(), T);
}

}  // namespace mricap
