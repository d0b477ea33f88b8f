#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "mricap/types.hpp"

namespace mricap {

// Runtime view of one storage unit during a scenario.
struct StorageUnit {
  double discharge_cap = 0.0;  // MW
  double charge_cap = 0.0;     // MW
  double energy_cap = 0.0;     // MWh
  double initial_soc = 0.0;    // MWh
};

inline StorageUnit make_storage_unit(const StorageSpec& s) {
  return {s.discharge_cap, s.charge_cap, s.energy_limit,
          s.initial_soc_fraction * s.energy_limit};
}

// Storages are dispatched in descending duration (energy over power) so the
// most energy-flexible unit moves first; callers break remaining ties by
// name to keep results deterministic.
inline bool longer_duration(const StorageUnit& a, const StorageUnit& b) {
  return a.energy_cap * b.discharge_cap > b.energy_cap * a.discharge_cap;
}

namespace detail {

// Chronological greedy with within-scenario perfect foresight: surplus hours
// charge (up to charge power and energy headroom), shortfall hours discharge
// (up to discharge power, state of charge, and the remaining shortfall).
// Charging only draws on surplus and discharge never exceeds the shortfall,
// so no stored energy is spent outside shortfall hours; with no efficiency
// loss this schedule minimizes total scenario unserved energy, serving
// earlier shortfall hours first. Returns total UE; post margins and hourly
// net flows are written when the pointers are non-null.
inline double dispatch_pass(std::span<const double> pre_margins,
                            std::span<const StorageUnit> storages,
                            std::vector<double>& soc_scratch,
                            double* post_out, double* flows_out) {
  const std::size_t T = pre_margins.size();
  soc_scratch.resize(storages.size());
  for (std::size_t j = 0; j < storages.size(); ++j)
    soc_scratch[j] = storages[j].initial_soc;

  double total_ue = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double m = pre_margins[t];
    double flow = 0.0;
    if (m > 0.0) {
      for (std::size_t j = 0; j < storages.size() && m > 0.0; ++j) {
        const double take = std::min(
            {storages[j].charge_cap, m, storages[j].energy_cap - soc_scratch[j]});
        if (take > 0.0) {
          soc_scratch[j] += take;
          m -= take;
          flow -= take;
        }
      }
    } else if (m < 0.0) {
      for (std::size_t j = 0; j < storages.size() && m < 0.0; ++j) {
        const double give =
            std::min({storages[j].discharge_cap, -m, soc_scratch[j]});
        if (give > 0.0) {
          soc_scratch[j] -= give;
          m += give;
          flow += give;
        }
      }
      if (m < 0.0) total_ue -= m;
    }
    if (post_out) post_out[t] = m;
    if (flows_out) flows_out[t] = flow;
  }
  return total_ue;
}

}  // namespace detail

struct DispatchResult {
  std::vector<double> post_margins;  // MW, pre margin + discharge - charge
  std::vector<double> flows;         // MW, +discharge / -charge, all units
  double total_ue = 0.0;             // MWh over the scenario
};

// Full dispatch: post-dispatch margins, hourly net storage flow, total UE.
inline DispatchResult dispatch_storage(std::span<const double> pre_margins,
                                       std::span<const StorageUnit> storages) {
  DispatchResult out;
  out.post_margins.resize(pre_margins.size());
  out.flows.resize(pre_margins.size());
  std::vector<double> soc;
  out.total_ue = detail::dispatch_pass(pre_margins, storages, soc,
                                       out.post_margins.data(),
                                       out.flows.data());
  return out;
}

// UE-only dispatch for hot paths (finite differences, epsilon probes).
inline double dispatch_total_ue(std::span<const double> pre_margins,
                                std::span<const StorageUnit> storages,
                                std::vector<double>& soc_scratch) {
  return detail::dispatch_pass(pre_margins, storages, soc_scratch, nullptr,
                               nullptr);
}

}  // namespace mricap
