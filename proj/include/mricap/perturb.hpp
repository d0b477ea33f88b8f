#pragma once

#include <set>
#include <string>
#include <vector>

#include "mricap/errors.hpp"
#include "mricap/types.hpp"

namespace mricap {

// Proportional scaling of a resource's capacity-driven parameters. Thermal
// scales its on-state capacity (the off state stays at zero), intermittent
// scales every hourly output, storage scales power and energy together so
// dE/E == dC/C, perfect scales its capacity.
inline ResourceSpec scale_resource(const ResourceSpec& r, double factor) {
  ResourceSpec out = r;
  std::visit(
      [factor](auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ThermalSpec>) {
          s.icap *= factor;
        } else if constexpr (std::is_same_v<T, IntermittentSpec>) {
          s.icap *= factor;
          for (auto& series : s.profiles)
            for (auto& v : series) v *= factor;
        } else if constexpr (std::is_same_v<T, StorageSpec>) {
          s.discharge_cap *= factor;
          s.charge_cap *= factor;
          s.energy_limit *= factor;
        } else {
          s.icap *= factor;
        }
      },
      out);
  return out;
}

// Returns a copy of the base case with the named resource's native capacity
// changed by delta MW, all capacity-driven parameters scaled proportionally.
inline BaseCase perturb_resource(const BaseCase& base, const std::string& name,
                                 double delta) {
  auto it = base.resources.find(name);
  if (it == base.resources.end())
    throw ConfigError("perturb: unknown resource '" + name + "'");
  const double c = native_capacity(it->second);
  if (c + delta < 0.0)
    throw ConfigError("perturb: resource '" + name +
                      "' capacity would become negative");
  BaseCase out = base;
  if (std::holds_alternative<PerfectSpec>(it->second)) {
    // Perfect capacity has a single parameter; add directly (well defined
    // even from zero).
    std::get<PerfectSpec>(out.resources.at(name)).icap = c + delta;
    return out;
  }
  if (c == 0.0) {
    if (delta == 0.0) return out;
    throw ConfigError("perturb: resource '" + name +
                      "' has zero native capacity, proportional scaling "
                      "undefined");
  }
  out.resources.at(name) = scale_resource(it->second, (c + delta) / c);
  return out;
}

// A named group of resources treated as one virtual resource of size
// C_g = sum of member native capacities.
struct GroupView {
  std::vector<std::string> members;
  double native_capacity = 0.0;
};

inline GroupView group_view(const BaseCase& base,
                            const std::vector<std::string>& members) {
  if (members.empty()) throw ConfigError("group: empty member list");
  std::set<std::string> seen;
  GroupView g;
  g.members = members;
  for (const auto& name : members) {
    if (!seen.insert(name).second)
      throw ConfigError("group: duplicate member '" + name + "'");
    auto it = base.resources.find(name);
    if (it == base.resources.end())
      throw ConfigError("group: unknown resource '" + name + "'");
    g.native_capacity += native_capacity(it->second);
  }
  return g;
}

// Perturbing the group by delta scales every member by (C_g + delta) / C_g.
inline BaseCase perturb_group(const BaseCase& base,
                              const std::vector<std::string>& members,
                              double delta) {
  GroupView g = group_view(base, members);
  if (g.native_capacity + delta < 0.0)
    throw ConfigError("group: capacity would become negative");
  if (g.native_capacity == 0.0) {
    if (delta == 0.0) return base;
    throw ConfigError("group: zero native capacity, scaling undefined");
  }
  const double factor = (g.native_capacity + delta) / g.native_capacity;
  BaseCase out = base;
  for (const auto& name : members)
    out.resources.at(name) = scale_resource(base.resources.at(name), factor);
  return out;
}

// --- targeted perturbations used by the accreditation estimators ---

// Scales only the power limits (discharge and charge) of a storage unit.
inline BaseCase scale_storage_power(const BaseCase& base,
                                    const std::string& name, double factor) {
  auto it = base.resources.find(name);
  if (it == base.resources.end() ||
      !std::holds_alternative<StorageSpec>(it->second))
    throw ConfigError("'" + name + "' is not a storage resource");
  BaseCase out = base;
  auto& st = std::get<StorageSpec>(out.resources.at(name));
  st.discharge_cap *= factor;
  st.charge_cap *= factor;
  return out;
}

// Scales only the energy limit of a storage unit.
inline BaseCase scale_storage_energy(const BaseCase& base,
                                     const std::string& name, double factor) {
  auto it = base.resources.find(name);
  if (it == base.resources.end() ||
      !std::holds_alternative<StorageSpec>(it->second))
    throw ConfigError("'" + name + "' is not a storage resource");
  BaseCase out = base;
  std::get<StorageSpec>(out.resources.at(name)).energy_limit *= factor;
  return out;
}

// Scales one hour's output of an intermittent resource in every profile.
inline BaseCase scale_intermittent_hour(const BaseCase& base,
                                        const std::string& name, int hour,
                                        double factor) {
  auto it = base.resources.find(name);
  if (it == base.resources.end() ||
      !std::holds_alternative<IntermittentSpec>(it->second))
    throw ConfigError("'" + name + "' is not an intermittent resource");
  BaseCase out = base;
  auto& ir = std::get<IntermittentSpec>(out.resources.at(name));
  for (auto& series : ir.profiles) {
    if (hour < 0 || hour >= static_cast<int>(series.size()))
      throw ConfigError("hour index out of range");
    series[static_cast<std::size_t>(hour)] *= factor;
  }
  return out;
}

inline BaseCase add_resource(const BaseCase& base, const std::string& name,
                             ResourceSpec spec) {
  if (base.resources.count(name))
    throw ConfigError("add_resource: name '" + name + "' already in use");
  BaseCase out = base;
  out.resources.emplace(name, std::move(spec));
  return out;
}

inline BaseCase remove_resource(const BaseCase& base, const std::string& name) {
  auto it = base.resources.find(name);
  if (it == base.resources.end())
    throw ConfigError("remove_resource: unknown resource '" + name + "'");
  BaseCase out = base;
  out.resources.erase(name);
  return out;
}

// Picks a resource name not present in the base case, for probe injections.
inline std::string fresh_name(const BaseCase& base, std::string stem) {
  while (base.resources.count(stem)) stem += "_";
  return stem;
}

// Scales every resource in the mix by the same factor (the proportional
// system direction used for demand curves).
inline BaseCase scale_system(const BaseCase& base, double factor) {
  if (!(factor >= 0.0)) throw ConfigError("scale_system: factor must be >= 0");
  BaseCase out = base;
  for (auto& [name, r] : out.resources) r = scale_resource(r, factor);
  return out;
}

inline double system_native_capacity(const BaseCase& base) {
  double c = 0.0;
  for (const auto& [name, r] : base.resources) c += native_capacity(r);
  return c;
}

}  // namespace mricap
