#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "mricap/dispatch.hpp"
#include "mricap/rng.hpp"

using namespace mricap;
using Catch::Matchers::WithinAbs;

namespace {

double raw_ue(const std::vector<double>& margins) {
  double ue = 0.0;
  for (double m : margins)
    if (m < 0.0) ue -= m;
  return ue;
}

}  // namespace

TEST_CASE("full storage shaves the first shortfall hours") {
  std::vector<double> pre{-10.0, -10.0, -10.0};
  StorageUnit es{20.0, 20.0, 10.0, 10.0};
  DispatchResult r = dispatch_storage(pre, std::vector{es});
  CHECK_THAT(r.total_ue, WithinAbs(20.0, 1e-12));
  CHECK_THAT(r.post_margins[0], WithinAbs(0.0, 1e-12));
  CHECK_THAT(r.post_margins[1], WithinAbs(-10.0, 1e-12));
  CHECK_THAT(r.flows[0], WithinAbs(10.0, 1e-12));
  CHECK_THAT(r.flows[1], WithinAbs(0.0, 1e-12));
}

TEST_CASE("no storage leaves margins untouched") {
  std::vector<double> pre{5.0, -3.0, 0.0};
  DispatchResult r = dispatch_storage(pre, {});
  CHECK(r.post_margins == pre);
  CHECK_THAT(r.total_ue, WithinAbs(3.0, 1e-12));
}

TEST_CASE("empty storage cannot serve with nothing to charge from") {
  std::vector<double> pre{0.0, -20.0};
  StorageUnit es{20.0, 20.0, 10.0, 0.0};
  DispatchResult r = dispatch_storage(pre, std::vector{es});
  CHECK_THAT(r.total_ue, WithinAbs(20.0, 1e-12));
  CHECK_THAT(r.flows[0], WithinAbs(0.0, 1e-12));
}

TEST_CASE("surplus recharges for later shortfalls") {
  std::vector<double> pre{30.0, -10.0, 40.0, -15.0};
  StorageUnit es{20.0, 5.0, 10.0, 0.0};
  DispatchResult r = dispatch_storage(pre, std::vector{es});
  // Hour 0 charges 5 (charge cap), hour 1 discharges 5, hour 2 charges 5,
  // hour 3 discharges 5.
  CHECK_THAT(r.post_margins[0], WithinAbs(25.0, 1e-12));
  CHECK_THAT(r.post_margins[1], WithinAbs(-5.0, 1e-12));
  CHECK_THAT(r.post_margins[3], WithinAbs(-10.0, 1e-12));
  CHECK_THAT(r.total_ue, WithinAbs(15.0, 1e-12));
}

TEST_CASE("longer-duration storage dispatches first") {
  StorageUnit shortdur{10.0, 10.0, 10.0, 10.0};  // 1 h
  StorageUnit longdur{10.0, 10.0, 40.0, 40.0};   // 4 h
  std::vector<double> pre{-5.0};
  DispatchResult r =
      dispatch_storage(pre, std::vector{longdur, shortdur});
  CHECK_THAT(r.post_margins[0], WithinAbs(0.0, 1e-12));
  // Order is the caller's: here the long one was listed first and covers it.
  CHECK_THAT(r.total_ue, WithinAbs(0.0, 1e-12));
}

TEST_CASE("dispatch properties on random scenarios") {
  Xoshiro256 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const int T = 1 + static_cast<int>(rng.uniform() * 48);
    std::vector<double> pre(T);
    for (auto& m : pre) m = (rng.uniform() - 0.5) * 60.0;
    std::vector<StorageUnit> storages;
    const int S = static_cast<int>(rng.uniform() * 3);
    for (int j = 0; j < S; ++j) {
      StorageUnit u;
      u.discharge_cap = 1.0 + rng.uniform() * 20.0;
      u.charge_cap = rng.uniform() * 20.0;
      u.energy_cap = 1.0 + rng.uniform() * 40.0;
      u.initial_soc = rng.uniform() * u.energy_cap;
      storages.push_back(u);
    }
    DispatchResult r = dispatch_storage(pre, storages);

    // Total UE identity and no-worse-than-no-storage.
    double ue = 0.0;
    for (int t = 0; t < T; ++t) ue += std::max(0.0, -r.post_margins[t]);
    CHECK_THAT(r.total_ue, WithinAbs(ue, 1e-9));
    CHECK(r.total_ue <= raw_ue(pre) + 1e-9);

    // Post margins reconcile with flows; flows respect power limits.
    double p_dis = 0.0, p_chg = 0.0;
    for (const auto& u : storages) {
      p_dis += u.discharge_cap;
      p_chg += u.charge_cap;
    }
    for (int t = 0; t < T; ++t) {
      CHECK_THAT(r.post_margins[t], WithinAbs(pre[t] + r.flows[t], 1e-9));
      CHECK(r.flows[t] <= p_dis + 1e-9);
      CHECK(-r.flows[t] <= p_chg + 1e-9);
      // Discharge never overshoots the shortfall; charge never dips into it.
      if (r.flows[t] > 1e-12) CHECK(r.post_margins[t] <= 1e-9);
      if (r.flows[t] < -1e-12) CHECK(r.post_margins[t] >= -1e-9);
    }

    // Energy conservation: total discharge <= initial soc + total charge.
    double dis = 0.0, chg = 0.0;
    for (int t = 0; t < T; ++t) {
      if (r.flows[t] > 0.0) dis += r.flows[t];
      else chg -= r.flows[t];
    }
    double soc0 = 0.0;
    for (const auto& u : storages) soc0 += u.initial_soc;
    CHECK(dis <= soc0 + chg + 1e-9);
  }
}

TEST_CASE("adding pre-margin capacity never increases dispatched UE") {
  Xoshiro256 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = 1 + static_cast<int>(rng.uniform() * 24);
    std::vector<double> pre(T);
    for (auto& m : pre) m = (rng.uniform() - 0.5) * 40.0;
    StorageUnit u{1.0 + rng.uniform() * 10.0, rng.uniform() * 10.0,
                  1.0 + rng.uniform() * 20.0, 0.0};
    u.initial_soc = rng.uniform() * u.energy_cap;
    DispatchResult before = dispatch_storage(pre, std::vector{u});
    std::vector<double> bumped = pre;
    const int t = static_cast<int>(rng.uniform() * T);
    bumped[t] += rng.uniform() * 10.0;
    DispatchResult after = dispatch_storage(bumped, std::vector{u});
    CHECK(after.total_ue <= before.total_ue + 1e-9);
  }
}
