#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mricap/demand_curve.hpp"
#include "mricap/report.hpp"
#include "test_systems.hpp"

using namespace mricap;
using Catch::Matchers::WithinAbs;

namespace {

const Evaluator kExact = Evaluator::exact_with();

DemandCurve sample_curve() {
  DemandCurve c;
  c.space = CurveSpace::native;
  c.voll = 9000.0;
  c.points = {{100.0, 50.0}, {200.0, 30.0}, {300.0, 10.0}, {400.0, 0.0}};
  return c;
}

}  // namespace

TEST_CASE("native demand curve on the 2-hour system matches enumeration") {
  BaseCase base = testsys::oracle_2h();
  // C_SYS = 110; EUE(s) = 2 * [0.5 max(0, 100 - 110 s) + 0.5 max(0, 100 - 60 s)]
  // so the marginal benefit is VOLL * (110 [s < 0.909] + 60 [s < 1.667]) / 110.
  std::vector<double> sweep{0.8, 1.0, 1.2, 1.8};
  CurveBuildInfo info;
  DemandCurve curve = native_demand_curve(base, sweep, kExact, &info);
  REQUIRE(curve.points.size() == 4);
  const double voll = 9000.0;
  CHECK_THAT(curve.points[0].quantity_mw, WithinAbs(88.0, 1e-9));
  CHECK_THAT(curve.points[0].price_per_mw,
             WithinAbs(voll * 170.0 / 110.0, 1e-6));
  CHECK_THAT(curve.points[1].price_per_mw,
             WithinAbs(voll * 60.0 / 110.0, 1e-6));
  CHECK_THAT(curve.points[2].price_per_mw,
             WithinAbs(voll * 60.0 / 110.0, 1e-6));
  // Far beyond the load the curve saturates at zero.
  CHECK_THAT(curve.points[3].price_per_mw, WithinAbs(0.0, 1e-9));
  CHECK(info.repaired_points.empty());
}

TEST_CASE("price at the base point equals VOLL times the system MRI") {
  BaseCase base = testsys::oracle_2h();
  DemandCurve curve = native_demand_curve(base, {1.0}, kExact);
  // Cross-check against the capacity-weighted resource MRIs.
  EvalResult be = kExact(base);
  FdEstimate m_firm = mri(base, "Firm", kExact, {}, &be);
  FdEstimate m_th = mri(base, "TH", kExact, {}, &be);
  const double mri_sys = (m_firm.value * 60.0 + m_th.value * 50.0) / 110.0;
  CHECK_THAT(curve.points[0].price_per_mw,
             WithinAbs(base.voll * mri_sys, 1e-6));
}

TEST_CASE("system demand rMRI is the capacity-weighted average") {
  auto entry = [](const char* name, double icap, double rmri) {
    AccreditationEntry e;
    e.name = name;
    e.icap = icap;
    e.rmri = rmri;
    return e;
  };
  SECTION("all-perfect mix") {
    std::vector<AccreditationEntry> entries{entry("A", 100.0, 1.0),
                                            entry("B", 300.0, 1.0)};
    CHECK_THAT(system_demand_rmri(entries), WithinAbs(1.0, 1e-12));
  }
  SECTION("equal capacities average the rMRIs") {
    std::vector<AccreditationEntry> entries{entry("A", 100.0, 1.0),
                                            entry("B", 100.0, 0.0)};
    CHECK_THAT(system_demand_rmri(entries), WithinAbs(0.5, 1e-12));
  }
  SECTION("empty list rejected") {
    CHECK_THROWS_AS(system_demand_rmri({}), ConfigError);
  }
}

TEST_CASE("weighted-average rMRI matches the directional derivative") {
  BaseCase base = testsys::oracle_2h();
  EvalResult be = kExact(base);

  // Route 1: capacity-weighted average of resource rMRIs.
  FdEstimate k = mri_perfect(base, kExact, {}, &be);
  FdEstimate m_firm = mri(base, "Firm", kExact, {}, &be);
  FdEstimate m_th = mri(base, "TH", kExact, {}, &be);
  const double rmri_avg =
      (m_firm.value / k.value * 60.0 + m_th.value / k.value * 50.0) / 110.0;

  // Route 2: directional derivative along the whole mix.
  FdEstimate dir = group_mri(base, {"Firm", "TH"}, kExact, {}, &be);
  CHECK_THAT(rmri_avg, WithinAbs(dir.value / k.value, 1e-9));
}

TEST_CASE("MRIC transform scales coordinates reciprocally") {
  DemandCurve native = sample_curve();

  SECTION("rmri_sys of one is the identity") {
    DemandCurve m = to_mric_curve(native, 1.0);
    for (std::size_t i = 0; i < native.points.size(); ++i) {
      CHECK(m.points[i].quantity_mw == native.points[i].quantity_mw);
      CHECK(m.points[i].price_per_mw == native.points[i].price_per_mw);
    }
  }
  SECTION("point arithmetic") {
    DemandCurve one;
    one.space = CurveSpace::native;
    one.voll = 9000.0;
    one.points = {{1000.0, 12.0}};
    DemandCurve m = to_mric_curve(one, 0.8);
    CHECK_THAT(m.points[0].quantity_mw, WithinAbs(800.0, 1e-12));
    CHECK_THAT(m.points[0].price_per_mw, WithinAbs(15.0, 1e-12));
  }
  SECTION("area under the curve is preserved over matching ranges") {
    Xoshiro256 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      DemandCurve c;
      c.space = CurveSpace::native;
      c.voll = 1.0;
      double q = rng.uniform() * 10.0;
      double p = 50.0 + rng.uniform() * 50.0;
      const int n = 2 + static_cast<int>(rng.uniform() * 5);
      for (int i = 0; i < n; ++i) {
        c.points.push_back({q, p});
        q += 0.5 + rng.uniform() * 20.0;
        p -= rng.uniform() * 20.0;
        p = std::max(p, 0.0);
      }
      const double r = 0.2 + rng.uniform() * 0.8;
      DemandCurve m = to_mric_curve(c, r);
      const double qa = c.points.front().quantity_mw;
      const double qb = c.points.back().quantity_mw;
      const double a_native = curve_area(c, qa, qb);
      const double a_mric = curve_area(m, qa * r, qb * r);
      CHECK_THAT(a_mric, WithinAbs(a_native, 1e-9 * std::max(1.0, a_native)));
    }
  }
  SECTION("transform then inverse is the identity") {
    DemandCurve m = to_mric_curve(native, 0.73);
    DemandCurve back = to_native_curve(m);
    for (std::size_t i = 0; i < native.points.size(); ++i) {
      CHECK_THAT(back.points[i].quantity_mw,
                 WithinAbs(native.points[i].quantity_mw, 1e-9));
      CHECK_THAT(back.points[i].price_per_mw,
                 WithinAbs(native.points[i].price_per_mw, 1e-9));
    }
  }
  SECTION("invalid rmri_sys rejected, above-one flagged") {
    CHECK_THROWS_AS(to_mric_curve(native, 0.0), ConfigError);
    CHECK_THROWS_AS(to_mric_curve(native, -0.5), ConfigError);
    std::vector<std::string> warnings;
    to_mric_curve(native, 1.2, &warnings);
    CHECK(!warnings.empty());
  }
}

TEST_CASE("isotonic projection pools adjacent violators") {
  using detail::isotonic_nonincreasing;
  CHECK(isotonic_nonincreasing({5.0, 4.0, 3.0}) ==
        std::vector<double>{5.0, 4.0, 3.0});
  CHECK(isotonic_nonincreasing({3.0, 4.0}) == std::vector<double>{3.5, 3.5});
  auto fixed = isotonic_nonincreasing({5.0, 1.0, 2.0, 0.5});
  CHECK(fixed[0] == 5.0);
  CHECK_THAT(fixed[1], WithinAbs(1.5, 1e-12));
  CHECK_THAT(fixed[2], WithinAbs(1.5, 1e-12));
  CHECK(fixed[3] == 0.5);
}

TEST_CASE("curve CSV round-trips bit-stably") {
  DemandCurve c = to_mric_curve(sample_curve(), 0.8);
  const std::string csv = curve_to_csv(c);
  DemandCurve back = curve_from_csv(csv);
  CHECK(curve_to_csv(back) == csv);
  CHECK(back.space == CurveSpace::mric);
  CHECK_THAT(back.rmri_sys, WithinAbs(0.8, 1e-9));

  SECTION("manifest comments are skipped on read") {
    DemandCurve again = curve_from_csv("# manifest command=curves\n" + csv);
    CHECK(curve_to_csv(again) == csv);
  }
  SECTION("malformed input rejected") {
    CHECK_THROWS_AS(curve_from_csv("not,a,curve\n"), ConfigError);
    CHECK_THROWS_AS(curve_from_csv(""), ConfigError);
    // Prices must be nonincreasing.
    CHECK_THROWS_AS(
        curve_from_csv("quantity_mw,price_per_mw,space,rmri_sys\n"
                       "1.000000,1.000000,native,1.000000\n"
                       "2.000000,2.000000,native,1.000000\n"),
        ConfigError);
  }
}

TEST_CASE("curve builder rejects bad sweeps") {
  BaseCase base = testsys::oracle_2h();
  CHECK_THROWS_AS(native_demand_curve(base, {}, kExact), ConfigError);
  CHECK_THROWS_AS(native_demand_curve(base, {1.0, 0.9}, kExact), ConfigError);
  CHECK_THROWS_AS(native_demand_curve(base, {-1.0, 1.0}, kExact),
                  ConfigError);
}
