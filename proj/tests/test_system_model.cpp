#include <catch2/catch_amalgamated.hpp>

#include "mricap/config.hpp"
#include "mricap/perturb.hpp"
#include "mricap/rng.hpp"
#include "mricap/types.hpp"
#include "test_systems.hpp"

using namespace mricap;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

const char* kSmallConfig = R"({
  "horizon_hours": 2,
  "voll": 9000.0,
  "load_profiles": [
    {"weight": 0.5, "demand": [100.0, 120.0]},
    {"weight": 0.5, "demand": [90.0, 110.0]}
  ],
  "resources": {
    "TH1": {"type": "thermal", "icap": 750.0, "for_rate": 0.1041},
    "WIND": {"type": "intermittent", "icap": 10.0,
             "profiles": [[3.0, 6.0], [2.0, 5.0]]},
    "ES": {"type": "storage", "discharge_cap": 20.0, "charge_cap": 20.0,
           "energy_limit": 10.0},
    "P": {"type": "perfect", "icap": 500.0}
  }
})";

bool same_resource(const ResourceSpec& a, const ResourceSpec& b) {
  if (a.index() != b.index()) return false;
  if (const auto* th = std::get_if<ThermalSpec>(&a)) {
    const auto& o = std::get<ThermalSpec>(b);
    return th->icap == o.icap && th->for_rate == o.for_rate &&
           th->mttr_hours == o.mttr_hours && th->outage_mode == o.outage_mode;
  }
  if (const auto* ir = std::get_if<IntermittentSpec>(&a)) {
    const auto& o = std::get<IntermittentSpec>(b);
    return ir->icap == o.icap && ir->profiles == o.profiles;
  }
  if (const auto* st = std::get_if<StorageSpec>(&a)) {
    const auto& o = std::get<StorageSpec>(b);
    return st->discharge_cap == o.discharge_cap &&
           st->charge_cap == o.charge_cap &&
           st->energy_limit == o.energy_limit &&
           st->initial_soc_fraction == o.initial_soc_fraction;
  }
  return std::get<PerfectSpec>(a).icap == std::get<PerfectSpec>(b).icap;
}

bool same_case(const BaseCase& a, const BaseCase& b) {
  if (a.resources.size() != b.resources.size()) return false;
  for (const auto& [name, r] : a.resources) {
    auto it = b.resources.find(name);
    if (it == b.resources.end() || !same_resource(r, it->second)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("parse_system_config accepts a well-formed document") {
  BaseCase base = parse_system_config(kSmallConfig);
  CHECK(base.load.horizon_hours == 2);
  CHECK(base.voll == 9000.0);
  CHECK(base.resources.size() == 4);
  const auto& th = std::get<ThermalSpec>(base.resources.at("TH1"));
  CHECK(th.icap == 750.0);
  CHECK(th.for_rate == 0.1041);
  CHECK(th.mttr_hours == 24.0);           // default
  CHECK(th.outage_mode == OutageMode::markov);  // default
  const auto& es = std::get<StorageSpec>(base.resources.at("ES"));
  CHECK(es.initial_soc_fraction == 1.0);  // default
}

TEST_CASE("degenerate single perfect resource with zero load is valid") {
  const char* cfg = R"({
    "horizon_hours": 1, "voll": 1000.0,
    "load_profiles": [{"weight": 1.0, "demand": [0.0]}],
    "resources": {"P": {"type": "perfect", "icap": 10.0}}
  })";
  BaseCase base = parse_system_config(cfg);
  CHECK(base.resources.size() == 1);
}

TEST_CASE("parse errors name the offending field") {
  SECTION("weights not normalized") {
    std::string cfg = kSmallConfig;
    auto pos = cfg.find("\"weight\": 0.5");
    cfg.replace(pos, 13, "\"weight\": 0.4");
    CHECK_THROWS_MATCHES(parse_system_config(cfg), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("weights not normalized")));
  }
  SECTION("unknown top-level key rejected") {
    std::string cfg = kSmallConfig;
    cfg.insert(cfg.find("\"voll\""), "\"extra\": 1, ");
    CHECK_THROWS_MATCHES(
        parse_system_config(cfg), ConfigError,
        Catch::Matchers::MessageMatches(ContainsSubstring("extra")));
  }
  SECTION("unknown resource field rejected") {
    std::string cfg = kSmallConfig;
    cfg.insert(cfg.find("\"icap\": 750.0"), "\"fuel\": \"gas\", ");
    CHECK_THROWS_MATCHES(
        parse_system_config(cfg), ConfigError,
        Catch::Matchers::MessageMatches(ContainsSubstring("TH1")));
  }
  SECTION("bad for_rate") {
    std::string cfg = kSmallConfig;
    auto pos = cfg.find("\"for_rate\": 0.1041");
    cfg.replace(pos, 18, "\"for_rate\": 1.5");
    CHECK_THROWS_MATCHES(
        parse_system_config(cfg), ConfigError,
        Catch::Matchers::MessageMatches(ContainsSubstring("for_rate")));
  }
  SECTION("intermittent profile count must match load profiles") {
    std::string cfg = kSmallConfig;
    auto pos = cfg.find(", [2.0, 5.0]");
    cfg.replace(pos, 12, "");
    // A single profile is broadcast, so drop one from a 2-profile resource
    // by giving it three instead.
    std::string cfg3 = kSmallConfig;
    pos = cfg3.find("[[3.0, 6.0], [2.0, 5.0]]");
    cfg3.replace(pos, 24, "[[3.0, 6.0], [2.0, 5.0], [1.0, 1.0]]");
    CHECK_THROWS_MATCHES(
        parse_system_config(cfg3), ConfigError,
        Catch::Matchers::MessageMatches(ContainsSubstring("profiles")));
  }
  SECTION("invalid JSON") {
    CHECK_THROWS_AS(parse_system_config("{nope"), ConfigError);
  }
}

TEST_CASE("single intermittent series is shared across load profiles") {
  std::string cfg = kSmallConfig;
  auto pos = cfg.find("[[3.0, 6.0], [2.0, 5.0]]");
  cfg.replace(pos, 24, "[[3.0, 6.0]]");
  BaseCase base = parse_system_config(cfg);
  const auto& ir = std::get<IntermittentSpec>(base.resources.at("WIND"));
  REQUIRE(ir.profiles.size() == 2);
  CHECK(ir.profiles[0] == ir.profiles[1]);
}

TEST_CASE("config round-trips through write_system_config") {
  BaseCase base = parse_system_config(kSmallConfig);
  BaseCase again = parse_system_config(write_system_config(base));
  CHECK(same_case(base, again));
  CHECK(again.load.horizon_hours == base.load.horizon_hours);
}

TEST_CASE("perturb_resource applies proportional scaling per type") {
  BaseCase base = parse_system_config(kSmallConfig);

  SECTION("storage scales power and energy together") {
    BaseCase p = perturb_resource(base, "ES", 2.0);
    const auto& st = std::get<StorageSpec>(p.resources.at("ES"));
    CHECK_THAT(st.discharge_cap, WithinAbs(22.0, 1e-12));
    CHECK_THAT(st.charge_cap, WithinAbs(22.0, 1e-12));
    CHECK_THAT(st.energy_limit, WithinAbs(11.0, 1e-12));
  }
  SECTION("intermittent scales every hourly output") {
    BaseCase b2;
    b2.load = testsys::flat_load({10.0, 10.0});
    b2.voll = 1.0;
    b2.resources.emplace(
        "W", IntermittentSpec{6.0, {{3.0, 6.0}}});
    BaseCase p = perturb_resource(b2, "W", 6.0);
    const auto& ir = std::get<IntermittentSpec>(p.resources.at("W"));
    CHECK(ir.profiles[0] == std::vector<double>{6.0, 12.0});
    CHECK_THAT(ir.icap, WithinAbs(12.0, 1e-12));
  }
  SECTION("thermal scales the on-state capacity") {
    BaseCase p = perturb_resource(base, "TH1", 1.0);
    CHECK_THAT(std::get<ThermalSpec>(p.resources.at("TH1")).icap,
               WithinAbs(751.0, 1e-12));
  }
  SECTION("delta zero is the identity") {
    for (const auto& [name, r] : base.resources)
      CHECK(same_case(perturb_resource(base, name, 0.0), base));
  }
  SECTION("errors") {
    CHECK_THROWS_AS(perturb_resource(base, "NOPE", 1.0), ConfigError);
    CHECK_THROWS_AS(perturb_resource(base, "ES", -25.0), ConfigError);
  }
}

TEST_CASE("perturbations compose additively") {
  BaseCase base = parse_system_config(kSmallConfig);
  Xoshiro256 rng(7);
  for (const auto& [name, r] : base.resources) {
    for (int trial = 0; trial < 20; ++trial) {
      const double d1 = (rng.uniform() - 0.3) * 10.0;
      const double d2 = (rng.uniform() - 0.3) * 10.0;
      const double c = native_capacity(r);
      if (c + d1 < 0.0 || c + d1 + d2 < 0.0) continue;
      BaseCase two = perturb_resource(perturb_resource(base, name, d1), name,
                                      d2);
      BaseCase one = perturb_resource(base, name, d1 + d2);
      CHECK_THAT(native_capacity(two.resources.at(name)),
                 WithinAbs(native_capacity(one.resources.at(name)), 1e-9));
    }
  }
}

TEST_CASE("group view sums native capacity and scales members") {
  BaseCase base = parse_system_config(kSmallConfig);

  SECTION("capacity sum") {
    GroupView g = group_view(base, {"TH1", "ES"});
    CHECK_THAT(g.native_capacity, WithinAbs(770.0, 1e-12));
  }
  SECTION("singleton group equals the member perturbation") {
    BaseCase via_group = perturb_group(base, {"TH1"}, 5.0);
    BaseCase direct = perturb_resource(base, "TH1", 5.0);
    CHECK(same_case(via_group, direct));
  }
  SECTION("two identical units split a group delta evenly") {
    BaseCase b2;
    b2.load = testsys::flat_load({10.0});
    b2.voll = 1.0;
    b2.resources.emplace("A", PerfectSpec{100.0});
    b2.resources.emplace("B", PerfectSpec{100.0});
    BaseCase p = perturb_group(b2, {"A", "B"}, 2.0);
    CHECK_THAT(std::get<PerfectSpec>(p.resources.at("A")).icap,
               WithinAbs(101.0, 1e-12));
    CHECK_THAT(std::get<PerfectSpec>(p.resources.at("B")).icap,
               WithinAbs(101.0, 1e-12));
  }
  SECTION("errors") {
    CHECK_THROWS_AS(group_view(base, {}), ConfigError);
    CHECK_THROWS_AS(group_view(base, {"TH1", "TH1"}), ConfigError);
    CHECK_THROWS_AS(group_view(base, {"TH1", "NOPE"}), ConfigError);
  }
}

TEST_CASE("markov transition rates reproduce the forced outage rate") {
  ThermalSpec th{100.0, 0.1041, 24.0, OutageMode::markov};
  const double mu = th.repair_prob();
  const double lambda = th.failure_prob();
  // Stationary unavailability lambda / (lambda + mu) equals FOR.
  CHECK_THAT(lambda / (lambda + mu), WithinAbs(th.for_rate, 1e-12));
}

TEST_CASE("markov mode rejects unreachable transition probabilities") {
  BaseCase b;
  b.load = testsys::flat_load({10.0});
  b.voll = 1.0;
  // FOR 0.99 with mttr 24 implies a failure probability above 1.
  b.resources.emplace("T",
                      ThermalSpec{10.0, 0.99, 24.0, OutageMode::markov});
  CHECK_THROWS_AS(validate(b), ConfigError);
  // The same rate is fine in iid mode, and FOR exactly 1 means always down.
  b.resources.at("T") = ThermalSpec{10.0, 0.99, 24.0, OutageMode::iid};
  CHECK_NOTHROW(validate(b));
  b.resources.at("T") = ThermalSpec{10.0, 1.0, 24.0, OutageMode::markov};
  CHECK_NOTHROW(validate(b));
}
