#pragma once

// Small systems with hand-enumerable adequacy used across the test suites.

#include <string>
#include <vector>

#include "mricap/types.hpp"

namespace testsys {

using namespace mricap;

inline LoadModel flat_load(std::vector<double> demand) {
  LoadModel lm;
  lm.horizon_hours = static_cast<int>(demand.size());
  lm.profiles.push_back({1.0, std::move(demand)});
  return lm;
}

// load [100,100], perfect 60 MW, iid thermal 50 MW with FOR 0.5.
// Exact: EUE 40.0 MWh, LOLH 1.0 h, LOLE 0.75 days, MRI hours 1.0.
inline BaseCase oracle_2h() {
  BaseCase b;
  b.load = flat_load({100.0, 100.0});
  b.voll = 9000.0;
  b.resources.emplace("Firm", PerfectSpec{60.0});
  b.resources.emplace("TH",
                      ThermalSpec{50.0, 0.5, 24.0, OutageMode::iid});
  return b;
}

// load [100,100,100], perfect 90 MW, storage 20 MW / 10 MWh at full charge.
// Deterministic: pre margins [-10,-10,-10], storage covers hour 0 only;
// EUE 20.0 MWh, LOLH 2, LOLE 1, MRI hours {0,1,2}.
inline BaseCase oracle_3h() {
  BaseCase b;
  b.load = flat_load({100.0, 100.0, 100.0});
  b.voll = 9000.0;
  b.resources.emplace("Firm", PerfectSpec{90.0});
  b.resources.emplace("ES", StorageSpec{20.0, 20.0, 10.0, 1.0});
  return b;
}

}  // namespace testsys
