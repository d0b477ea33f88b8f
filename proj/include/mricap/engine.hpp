#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mricap/dispatch.hpp"
#include "mricap/errors.hpp"
#include "mricap/perturb.hpp"
#include "mricap/rng.hpp"
#include "mricap/types.hpp"

namespace mricap {

// Margins within this band of zero count as zero-margin hours; below the
// negative edge counts as loss of load.
inline constexpr double kMarginTol = 1e-9;

struct SimOptions {
  long replications = 10'000;
  std::uint64_t seed = 42;
  int workers = 1;
  // Zero-margin MRI hour detection. Each zero-margin hour is probed by
  // injecting a small test capacity and re-running dispatch; detection can
  // be disabled when the extra dispatch passes are unwanted.
  bool tag_zero_margin_hours = true;
  double zero_margin_eps_mw = 1e-3;
  double ue_improvement_tol_mwh = 1e-9;
  long trace_replication = -1;  // >= 0: capture a full outcome for that rep
};

struct AdequacyMetrics {
  double eue = 0.0;                 // MWh / period
  double lole = 0.0;                // days / period
  double lolh = 0.0;                // hours / period
  double expected_mri_hours = 0.0;  // hours / period
  double se_eue = 0.0;
  double se_lole = 0.0;
  double se_lolh = 0.0;
  double se_expected_mri_hours = 0.0;
  long replications = 0;  // 0 for exact enumeration
  std::uint64_t seed = 0;
};

// Everything observed in one simulated scenario.
struct ScenarioOutcome {
  int load_profile_index = 0;
  std::vector<std::string> resource_names;        // base-case order
  std::vector<std::vector<double>> available;     // [resource][hour] MW
  std::vector<double> pre_margins;                // MW, before storage
  std::vector<double> post_margins;               // MW, after storage
  std::vector<double> storage_flows;              // MW, +discharge/-charge
  std::vector<double> unserved;                   // MWh per hour
  double total_ue = 0.0;
  int lol_hours = 0;
  int lol_days = 0;
  std::vector<int> mri_hours;
};

// One adequacy evaluation. Per-replication series are kept so callers can
// form common-random-number differences and delta-method standard errors;
// they are empty for exact enumeration.
struct EvalResult {
  AdequacyMetrics metrics;
  bool exact = false;
  std::vector<double> rep_ue;
  std::vector<double> rep_lol_days;
  std::vector<double> rep_lol_hours;
  std::vector<double> rep_mri_hours;
  std::optional<ScenarioOutcome> trace;
};

namespace detail {

inline constexpr std::uint64_t kScenarioStream = 0x9a1bb3ea61aff1d7ull;

struct CompiledThermal {
  std::string name;
  std::uint64_t hash = 0;
  double cap = 0.0;
  double for_rate = 0.0;
  double lambda = 0.0;  // per-hour failure probability
  double mu = 0.0;      // per-hour repair probability
  OutageMode mode = OutageMode::markov;
};

struct CompiledCase {
  const BaseCase* src = nullptr;
  int T = 0;
  int n_days = 0;
  std::vector<double> cum_weight;
  // Per profile: non-thermal available capacity minus demand, i.e. the
  // margins before thermal units and storage are applied.
  std::vector<std::vector<double>> net_fixed;
  std::vector<CompiledThermal> thermals;  // name order
  std::vector<StorageUnit> storages;      // duration desc, name asc
};

inline CompiledCase compile_case(const BaseCase& base) {
  CompiledCase cc;
  cc.src = &base;
  cc.T = base.load.horizon_hours;
  cc.n_days = (cc.T + 23) / 24;
  double acc = 0.0;
  for (const auto& prof : base.load.profiles) {
    acc += prof.weight;
    cc.cum_weight.push_back(acc);
  }
  if (!cc.cum_weight.empty()) cc.cum_weight.back() = 1.0;

  const std::size_t P = base.load.profiles.size();
  cc.net_fixed.assign(P, std::vector<double>(cc.T, 0.0));
  for (std::size_t p = 0; p < P; ++p)
    for (int t = 0; t < cc.T; ++t)
      cc.net_fixed[p][t] = -base.load.profiles[p].demand[t];

  std::vector<std::pair<std::string, StorageUnit>> storages;
  for (const auto& [name, r] : base.resources) {
    if (const auto* th = std::get_if<ThermalSpec>(&r)) {
      CompiledThermal ct;
      ct.name = name;
      ct.hash = fnv1a64(name);
      ct.cap = th->icap;
      ct.for_rate = th->for_rate;
      ct.mu = th->repair_prob();
      ct.lambda = th->for_rate < 1.0 ? th->failure_prob() : 1.0;
      ct.mode = th->outage_mode;
      cc.thermals.push_back(std::move(ct));
    } else if (const auto* ir = std::get_if<IntermittentSpec>(&r)) {
      for (std::size_t p = 0; p < P; ++p)
        for (int t = 0; t < cc.T; ++t)
          cc.net_fixed[p][t] += ir->profiles[p][t];
    } else if (const auto* st = std::get_if<StorageSpec>(&r)) {
      storages.emplace_back(name, make_storage_unit(*st));
    } else {
      const double cap = std::get<PerfectSpec>(r).icap;
      for (std::size_t p = 0; p < P; ++p)
        for (int t = 0; t < cc.T; ++t) cc.net_fixed[p][t] += cap;
    }
  }
  std::stable_sort(storages.begin(), storages.end(),
                   [](const auto& a, const auto& b) {
                     if (longer_duration(a.second, b.second)) return true;
                     if (longer_duration(b.second, a.second)) return false;
                     return a.first < b.first;
                   });
  for (auto& [name, unit] : storages) cc.storages.push_back(unit);
  return cc;
}

inline int pick_profile(const CompiledCase& cc, double u) {
  auto it =
      std::upper_bound(cc.cum_weight.begin(), cc.cum_weight.end(), u);
  if (it == cc.cum_weight.end()) --it;
  return static_cast<int>(it - cc.cum_weight.begin());
}

// Fills 1/0 availability for one thermal unit; the stream is a function of
// (seed, resource name, replication) only.
inline void thermal_path(const CompiledThermal& th, std::uint64_t seed,
                         std::uint64_t rep, int T, std::uint8_t* on) {
  Xoshiro256 rng = stream_rng(seed, th.hash, rep);
  if (th.mode == OutageMode::iid) {
    for (int t = 0; t < T; ++t) on[t] = rng.uniform() >= th.for_rate;
    return;
  }
  if (th.for_rate >= 1.0) {
    std::fill(on, on + T, std::uint8_t{0});
    return;
  }
  // Initial state from the stationary distribution, then hourly transitions.
  bool down = rng.uniform() < th.for_rate;
  for (int t = 0; t < T; ++t) {
    on[t] = !down;
    if (t + 1 < T) {
      const double u = rng.uniform();
      down = down ? !(u < th.mu) : (u < th.lambda);
    }
  }
}

struct RepStats {
  double ue = 0.0;
  double lol_hours = 0.0;
  double lol_days = 0.0;
  double mri_hours = 0.0;
};

struct SimScratch {
  std::vector<std::vector<std::uint8_t>> on;
  std::vector<double> margins;
  std::vector<double> case_margins;
  std::vector<double> post;
  std::vector<double> flows;
  std::vector<double> probe;
  std::vector<double> soc;
};

// Counts MRI hours (optionally collecting them): all loss-of-load hours plus
// zero-margin hours where a small injected capacity strictly reduces the
// scenario's unserved energy once storage re-dispatches.
inline int count_mri_hours(std::span<const double> pre,
                           std::span<const double> post,
                           std::span<const StorageUnit> storages,
                           double total_ue, const SimOptions& opts,
                           SimScratch& s, std::vector<int>* hours_out) {
  int count = 0;
  const int T = static_cast<int>(pre.size());
  for (int t = 0; t < T; ++t) {
    if (post[t] < -kMarginTol) {
      ++count;
      if (hours_out) hours_out->push_back(t);
      continue;
    }
    if (storages.empty() || !opts.tag_zero_margin_hours) continue;
    if (std::abs(post[t]) <= kMarginTol) {
      s.probe.assign(pre.begin(), pre.end());
      s.probe[t] += opts.zero_margin_eps_mw;
      const double probed_ue = dispatch_total_ue(s.probe, storages, s.soc);
      if (probed_ue < total_ue - opts.ue_improvement_tol_mwh) {
        ++count;
        if (hours_out) hours_out->push_back(t);
      }
    }
  }
  if (hours_out) std::sort(hours_out->begin(), hours_out->end());
  return count;
}

// Dispatches and accumulates the scenario statistics for margins already
// containing all non-storage capacity.
inline RepStats finish_scenario(std::span<const double> pre_margins,
                                std::span<const StorageUnit> storages,
                                const SimOptions& opts, SimScratch& s) {
  const int T = static_cast<int>(pre_margins.size());
  s.post.resize(T);
  const double total_ue =
      dispatch_pass(pre_margins, storages, s.soc, s.post.data(), nullptr);

  RepStats st;
  st.ue = total_ue;
  int last_lol_day = -1;
  for (int t = 0; t < T; ++t) {
    if (s.post[t] < -kMarginTol) {
      st.lol_hours += 1.0;
      const int day = t / 24;
      if (day != last_lol_day) {
        st.lol_days += 1.0;
        last_lol_day = day;
      }
    }
  }
  st.mri_hours = count_mri_hours(pre_margins, s.post, storages, total_ue,
                                 opts, s, nullptr);
  return st;
}

}  // namespace detail

// Simulates one scenario from explicit outage draws (1 = available). Draws
// are required for every thermal resource and must have horizon length.
inline ScenarioOutcome simulate_scenario(
    const BaseCase& base, int profile_index,
    const std::map<std::string, std::vector<std::uint8_t>>& outage_draws,
    const SimOptions& opts = {}) {
  const int T = base.load.horizon_hours;
  if (profile_index < 0 ||
      profile_index >= static_cast<int>(base.load.profiles.size()))
    throw ConfigError("simulate_scenario: profile index out of range");
  ScenarioOutcome out;
  out.load_profile_index = profile_index;
  const auto& demand = base.load.profiles[profile_index].demand;
  out.pre_margins.assign(demand.begin(), demand.end());
  for (auto& m : out.pre_margins) m = -m;

  std::vector<StorageUnit> storages;
  std::vector<std::pair<std::string, StorageUnit>> named_storages;
  for (const auto& [name, r] : base.resources) {
    out.resource_names.push_back(name);
    std::vector<double> avail(T, 0.0);
    if (const auto* th = std::get_if<ThermalSpec>(&r)) {
      auto it = outage_draws.find(name);
      if (it == outage_draws.end())
        throw ConfigError("simulate_scenario: missing draws for thermal '" +
                          name + "'");
      if (static_cast<int>(it->second.size()) != T)
        throw ConfigError("simulate_scenario: draw length mismatch for '" +
                          name + "'");
      for (int t = 0; t < T; ++t)
        avail[t] = it->second[t] ? th->icap : 0.0;
    } else if (const auto* ir = std::get_if<IntermittentSpec>(&r)) {
      avail = ir->profiles[profile_index];
    } else if (const auto* st = std::get_if<StorageSpec>(&r)) {
      std::fill(avail.begin(), avail.end(), st->discharge_cap);
      named_storages.emplace_back(name, make_storage_unit(*st));
    } else {
      std::fill(avail.begin(), avail.end(), std::get<PerfectSpec>(r).icap);
    }
    if (!std::holds_alternative<StorageSpec>(r))
      for (int t = 0; t < T; ++t) out.pre_margins[t] += avail[t];
    out.available.push_back(std::move(avail));
  }
  std::stable_sort(named_storages.begin(), named_storages.end(),
                   [](const auto& a, const auto& b) {
                     if (longer_duration(a.second, b.second)) return true;
                     if (longer_duration(b.second, a.second)) return false;
                     return a.first < b.first;
                   });
  for (auto& [name, unit] : named_storages) storages.push_back(unit);

  DispatchResult disp = dispatch_storage(out.pre_margins, storages);
  out.post_margins = std::move(disp.post_margins);
  out.storage_flows = std::move(disp.flows);
  out.total_ue = disp.total_ue;
  out.unserved.resize(T);
  int last_lol_day = -1;
  for (int t = 0; t < T; ++t) {
    out.unserved[t] = std::max(0.0, -out.post_margins[t]);
    if (out.post_margins[t] < -kMarginTol) {
      ++out.lol_hours;
      if (t / 24 != last_lol_day) {
        ++out.lol_days;
        last_lol_day = t / 24;
      }
    }
  }
  detail::SimScratch scratch;
  detail::count_mri_hours(out.pre_margins, out.post_margins, storages,
                          out.total_ue, opts, scratch, &out.mri_hours);
  return out;
}

// Recomputes the MRI hour set of a completed scenario.
inline std::vector<int> tag_mri_hours(const ScenarioOutcome& outcome,
                                      const BaseCase& base,
                                      const SimOptions& opts = {}) {
  std::vector<std::pair<std::string, StorageUnit>> named;
  for (const auto& [name, r] : base.resources)
    if (const auto* st = std::get_if<StorageSpec>(&r))
      named.emplace_back(name, make_storage_unit(*st));
  std::stable_sort(named.begin(), named.end(),
                   [](const auto& a, const auto& b) {
                     if (longer_duration(a.second, b.second)) return true;
                     if (longer_duration(b.second, a.second)) return false;
                     return a.first < b.first;
                   });
  std::vector<StorageUnit> storages;
  for (auto& [name, unit] : named) storages.push_back(unit);
  std::vector<int> hours;
  detail::SimScratch scratch;
  detail::count_mri_hours(outcome.pre_margins, outcome.post_margins, storages,
                          outcome.total_ue, opts, scratch, &hours);
  return hours;
}

namespace detail {

// A batch evaluation plan: case 0 is the reference; every other case is
// expressed as deltas against it so the replication loop touches only what
// actually differs. All cases must share the load model and the thermal
// outage structure (names, rates, modes); capacities may differ freely.
struct BatchPlan {
  CompiledCase base;
  struct CaseDelta {
    std::vector<std::pair<int, double>> thermal_cap_delta;
    bool has_fixed_delta = false;
    std::vector<std::vector<double>> fixed_delta;  // [profile][hour]
    std::vector<StorageUnit> storages;
  };
  std::vector<CaseDelta> cases;
};

inline BatchPlan make_batch_plan(const std::vector<const BaseCase*>& cases) {
  if (cases.empty()) throw ConfigError("batch: no cases");
  BatchPlan plan;
  plan.base = compile_case(*cases[0]);
  const auto& b0 = plan.base;
  for (const BaseCase* cp : cases) {
    CompiledCase cc = (cp == cases[0]) ? CompiledCase{} : compile_case(*cp);
    const CompiledCase& c = (cp == cases[0]) ? b0 : cc;
    if (cp != cases[0]) {
      if (c.T != b0.T || c.net_fixed.size() != b0.net_fixed.size() ||
          c.cum_weight != b0.cum_weight)
        throw ConfigError("batch: cases must share the load model");
      if (c.thermals.size() != b0.thermals.size())
        throw ConfigError("batch: cases must share the thermal fleet");
      for (std::size_t j = 0; j < c.thermals.size(); ++j) {
        const auto& a = c.thermals[j];
        const auto& b = b0.thermals[j];
        if (a.name != b.name || a.for_rate != b.for_rate ||
            a.lambda != b.lambda || a.mu != b.mu || a.mode != b.mode)
          throw ConfigError(
              "batch: thermal outage parameters must match across cases");
      }
      for (std::size_t p = 0; p < c.net_fixed.size(); ++p)
        for (int t = 0; t < c.T; ++t)
          if (cases[0]->load.profiles[p].demand[t] !=
              cp->load.profiles[p].demand[t])
            throw ConfigError("batch: cases must share the load model");
    }
    BatchPlan::CaseDelta d;
    d.storages = c.storages;
    for (std::size_t j = 0; j < c.thermals.size(); ++j)
      if (c.thermals[j].cap != b0.thermals[j].cap)
        d.thermal_cap_delta.emplace_back(
            static_cast<int>(j), c.thermals[j].cap - b0.thermals[j].cap);
    for (std::size_t p = 0; p < c.net_fixed.size(); ++p) {
      for (int t = 0; t < c.T; ++t) {
        if (c.net_fixed[p][t] != b0.net_fixed[p][t]) {
          d.has_fixed_delta = true;
          break;
        }
      }
      if (d.has_fixed_delta) break;
    }
    if (d.has_fixed_delta) {
      d.fixed_delta.assign(c.net_fixed.size(), std::vector<double>(c.T, 0.0));
      for (std::size_t p = 0; p < c.net_fixed.size(); ++p)
        for (int t = 0; t < c.T; ++t)
          d.fixed_delta[p][t] = c.net_fixed[p][t] - b0.net_fixed[p][t];
    }
    plan.cases.push_back(std::move(d));
  }
  return plan;
}

inline void run_replication(const BatchPlan& plan, const SimOptions& opts,
                            std::uint64_t rep, SimScratch& s,
                            std::vector<RepStats>& stats_out) {
  const CompiledCase& cc = plan.base;
  const int T = cc.T;
  Xoshiro256 scen = stream_rng(opts.seed, kScenarioStream, rep);
  const int p = pick_profile(cc, scen.uniform());

  s.on.resize(cc.thermals.size());
  s.margins.assign(cc.net_fixed[p].begin(), cc.net_fixed[p].end());
  for (std::size_t j = 0; j < cc.thermals.size(); ++j) {
    s.on[j].resize(T);
    thermal_path(cc.thermals[j], opts.seed, rep, T, s.on[j].data());
    const double cap = cc.thermals[j].cap;
    if (cap != 0.0) {
      const std::uint8_t* on = s.on[j].data();
      for (int t = 0; t < T; ++t)
        if (on[t]) s.margins[t] += cap;
    }
  }

  for (std::size_t k = 0; k < plan.cases.size(); ++k) {
    const auto& d = plan.cases[k];
    const double* pre = s.margins.data();
    if (!d.thermal_cap_delta.empty() || d.has_fixed_delta) {
      s.case_margins.assign(s.margins.begin(), s.margins.end());
      for (const auto& [j, dcap] : d.thermal_cap_delta) {
        const std::uint8_t* on = s.on[static_cast<std::size_t>(j)].data();
        for (int t = 0; t < T; ++t)
          if (on[t]) s.case_margins[t] += dcap;
      }
      if (d.has_fixed_delta) {
        const auto& fd = d.fixed_delta[p];
        for (int t = 0; t < T; ++t) s.case_margins[t] += fd[t];
      }
      pre = s.case_margins.data();
    }
    stats_out[k] = finish_scenario(std::span(pre, static_cast<std::size_t>(T)),
                                   d.storages, opts, s);
  }
}

inline void reduce_metrics(EvalResult& r, const SimOptions& opts) {
  const long n = opts.replications;
  auto mean_se = [n](const std::vector<double>& xs, double& mean, double& se) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    mean = sum / static_cast<double>(n);
    if (n < 2) {
      se = 0.0;
      return;
    }
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  };
  auto& m = r.metrics;
  mean_se(r.rep_ue, m.eue, m.se_eue);
  mean_se(r.rep_lol_days, m.lole, m.se_lole);
  mean_se(r.rep_lol_hours, m.lolh, m.se_lolh);
  mean_se(r.rep_mri_hours, m.expected_mri_hours, m.se_expected_mri_hours);
  m.replications = n;
  m.seed = opts.seed;
}

}  // namespace detail

// Evaluates several cases over one shared set of replications. Outage paths
// and scenario picks are identical across cases (and identical to what
// single-case runs would draw), so pairwise differences are common random
// number differences. Results do not depend on the worker count.
inline std::vector<EvalResult> estimate_metrics_batch(
    const std::vector<const BaseCase*>& cases, const SimOptions& opts) {
  if (opts.replications < 1)
    throw ConfigError("replications must be >= 1");
  for (const BaseCase* c : cases) validate(*c);
  detail::BatchPlan plan = detail::make_batch_plan(cases);
  const long N = opts.replications;
  const std::size_t K = plan.cases.size();

  std::vector<EvalResult> results(K);
  for (auto& r : results) {
    r.rep_ue.resize(N);
    r.rep_lol_days.resize(N);
    r.rep_lol_hours.resize(N);
    r.rep_mri_hours.resize(N);
  }

  auto run_range = [&](long lo, long hi) {
    detail::SimScratch scratch;
    std::vector<detail::RepStats> stats(K);
    for (long rep = lo; rep < hi; ++rep) {
      detail::run_replication(plan, opts, static_cast<std::uint64_t>(rep),
                              scratch, stats);
      for (std::size_t k = 0; k < K; ++k) {
        results[k].rep_ue[rep] = stats[k].ue;
        results[k].rep_lol_days[rep] = stats[k].lol_days;
        results[k].rep_lol_hours[rep] = stats[k].lol_hours;
        results[k].rep_mri_hours[rep] = stats[k].mri_hours;
      }
    }
  };

  const int W = std::max(1, opts.workers);
  if (W == 1 || N < 2 * W) {
    run_range(0, N);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < W; ++w) {
      const long lo = N * w / W;
      const long hi = N * (w + 1) / W;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  for (auto& r : results) detail::reduce_metrics(r, opts);

  if (opts.trace_replication >= 0 && opts.trace_replication < N) {
    const std::uint64_t rep =
        static_cast<std::uint64_t>(opts.trace_replication);
    for (std::size_t k = 0; k < K; ++k) {
      const BaseCase& b = *cases[k];
      Xoshiro256 scen = stream_rng(opts.seed, detail::kScenarioStream, rep);
      const int p = detail::pick_profile(plan.base, scen.uniform());
      std::map<std::string, std::vector<std::uint8_t>> draws;
      detail::CompiledCase cc = detail::compile_case(b);
      for (const auto& th : cc.thermals) {
        std::vector<std::uint8_t> on(cc.T);
        detail::thermal_path(th, opts.seed, rep, cc.T, on.data());
        draws.emplace(th.name, std::move(on));
      }
      results[k].trace = simulate_scenario(b, p, draws, opts);
    }
  }
  return results;
}

// Monte Carlo estimate of EUE / LOLE / LOLH / expected MRI hours. Identical
// (base, replications, seed) produce identical output for any worker count.
inline EvalResult estimate_metrics(const BaseCase& base,
                                   const SimOptions& opts) {
  return std::move(estimate_metrics_batch({&base}, opts)[0]);
}

// Exact metrics by full enumeration (iid outage mode only). Without storage
// the hours decouple and are enumerated per hour; with storage the full
// joint outage paths are walked. Term counts above the cap are refused.
inline EvalResult enumerate_exact(const BaseCase& base,
                                  const SimOptions& opts = {},
                                  long long term_cap = 10'000'000) {
  validate(base);
  detail::CompiledCase cc = detail::compile_case(base);
  for (const auto& th : cc.thermals)
    if (th.mode != OutageMode::iid)
      throw NumericalError(
          "enumerate_exact: markov outage mode unsupported (use iid)");
  const int n = static_cast<int>(cc.thermals.size());
  const std::size_t P = cc.net_fixed.size();

  EvalResult r;
  r.exact = true;
  auto& m = r.metrics;

  if (cc.storages.empty()) {
    const long long combos = 1ll << n;
    const long long terms =
        static_cast<long long>(P) * cc.T * combos;
    if (n > 20 || terms > term_cap)
      throw NumericalError("enumerate_exact: state space exceeds cap (" +
                           std::to_string(terms) + " terms)");
    for (std::size_t p = 0; p < P; ++p) {
      const double w = base.load.profiles[p].weight;
      std::vector<double> p_lol(cc.T, 0.0);
      for (int t = 0; t < cc.T; ++t) {
        for (long long mask = 0; mask < combos; ++mask) {
          double prob = 1.0;
          double margin = cc.net_fixed[p][t];
          for (int j = 0; j < n; ++j) {
            if (mask >> j & 1) {
              prob *= 1.0 - cc.thermals[j].for_rate;
              margin += cc.thermals[j].cap;
            } else {
              prob *= cc.thermals[j].for_rate;
            }
          }
          if (prob == 0.0) continue;
          if (margin < 0.0) m.eue += w * prob * -margin;
          if (margin < -kMarginTol) p_lol[t] += prob;
        }
        m.lolh += w * p_lol[t];
      }
      // Hours are independent in iid mode, so the day LOL probability is one
      // minus the product of hourly no-LOL probabilities.
      for (int day = 0; day < cc.n_days; ++day) {
        double q = 1.0;
        for (int t = day * 24; t < std::min((day + 1) * 24, cc.T); ++t)
          q *= 1.0 - p_lol[t];
        m.lole += w * (1.0 - q);
      }
    }
    // Without storage, zero-margin hours cannot reduce unserved energy.
    m.expected_mri_hours = m.lolh;
    return r;
  }

  const long long bits = static_cast<long long>(n) * cc.T;
  if (bits > 62)
    throw NumericalError("enumerate_exact: state space exceeds cap");
  const long long paths = 1ll << bits;
  if (static_cast<long long>(P) * paths > term_cap)
    throw NumericalError("enumerate_exact: state space exceeds cap (" +
                         std::to_string(static_cast<long long>(P) * paths) +
                         " terms)");
  detail::SimScratch scratch;
  std::vector<double> margins(cc.T);
  for (std::size_t p = 0; p < P; ++p) {
    const double w = base.load.profiles[p].weight;
    for (long long mask = 0; mask < paths; ++mask) {
      double prob = 1.0;
      for (int t = 0; t < cc.T; ++t) margins[t] = cc.net_fixed[p][t];
      for (int j = 0; j < n; ++j) {
        for (int t = 0; t < cc.T; ++t) {
          if (mask >> (j * cc.T + t) & 1) {
            prob *= 1.0 - cc.thermals[j].for_rate;
            margins[t] += cc.thermals[j].cap;
          } else {
            prob *= cc.thermals[j].for_rate;
          }
        }
      }
      if (prob == 0.0) continue;
      detail::RepStats st =
          detail::finish_scenario(margins, cc.storages, opts, scratch);
      m.eue += w * prob * st.ue;
      m.lole += w * prob * st.lol_days;
      m.lolh += w * prob * st.lol_hours;
      m.expected_mri_hours += w * prob * st.mri_hours;
    }
  }
  return r;
}

// An adequacy evaluation backend: fixed-settings Monte Carlo or exact
// enumeration. Accreditation, curve and market routines are generic over
// this, which lets every estimator run against the enumeration oracle.
struct Evaluator {
  enum class Mode { monte_carlo, exact };
  Mode mode = Mode::monte_carlo;
  SimOptions sim;
  long long exact_term_cap = 10'000'000;

  EvalResult operator()(const BaseCase& b) const {
    return mode == Mode::exact ? enumerate_exact(b, sim, exact_term_cap)
                               : estimate_metrics(b, sim);
  }
  std::vector<EvalResult> batch(
      const std::vector<const BaseCase*>& cases) const {
    if (mode == Mode::exact) {
      std::vector<EvalResult> out;
      out.reserve(cases.size());
      for (const BaseCase* c : cases)
        out.push_back(enumerate_exact(*c, sim, exact_term_cap));
      return out;
    }
    return estimate_metrics_batch(cases, sim);
  }
  static Evaluator monte_carlo_with(SimOptions o) {
    return Evaluator{Mode::monte_carlo, o, 10'000'000};
  }
  static Evaluator exact_with(SimOptions o = {},
                              long long cap = 10'000'000) {
    return Evaluator{Mode::exact, o, cap};
  }
};

struct CalibrationResult {
  BaseCase calibrated;
  double achieved_lole = 0.0;
  double slack_icap = 0.0;
  int evaluations = 0;
  std::vector<std::string> notes;
};

// Bisects the slack perfect resource's capacity until |LOLE - target| <= tol
// under the evaluator's fixed settings. LOLE is assumed monotone
// nonincreasing in the slack capacity over the bracket; non-monotone
// evaluations beyond Monte Carlo noise are recorded in the notes.
inline CalibrationResult calibrate_to_lole(
    const BaseCase& base, const std::string& slack_name, double target_lole,
    double tol, const Evaluator& eval, double bracket_lo = -1.0,
    double bracket_hi = -1.0, int max_iter = 60) {
  auto it = base.resources.find(slack_name);
  if (it == base.resources.end())
    throw ConfigError("calibrate: unknown resource '" + slack_name + "'");
  if (!std::holds_alternative<PerfectSpec>(it->second))
    throw ConfigError("calibrate: slack resource must be of type perfect");
  if (!(tol > 0.0)) throw ConfigError("calibrate: tol must be > 0");

  CalibrationResult res;
  res.calibrated = base;
  auto set_slack = [&](double icap) {
    std::get<PerfectSpec>(res.calibrated.resources.at(slack_name)).icap = icap;
  };
  auto lole_at = [&](double icap) {
    set_slack(icap);
    ++res.evaluations;
    return eval(res.calibrated);
  };

  const double current = std::get<PerfectSpec>(it->second).icap;
  EvalResult at_current = lole_at(current);
  if (std::abs(at_current.metrics.lole - target_lole) <= tol) {
    res.achieved_lole = at_current.metrics.lole;
    res.slack_icap = current;
    set_slack(current);
    return res;
  }

  double lo = bracket_lo, hi = bracket_hi;
  if (lo < 0.0) lo = 0.0;
  if (hi < 0.0) {
    double peak = 0.0;
    for (const auto& prof : base.load.profiles)
      for (double d : prof.demand) peak = std::max(peak, d);
    hi = 2.0 * peak;
  }
  if (!(hi > lo)) throw ConfigError("calibrate: empty bracket");

  EvalResult at_lo = lole_at(lo);
  EvalResult at_hi = lole_at(hi);
  if (at_lo.metrics.lole < target_lole - tol)
    throw NumericalError(
        "calibrate: bracket does not straddle target (LOLE at bracket low " +
        std::to_string(at_lo.metrics.lole) + " < target)");
  if (at_hi.metrics.lole > target_lole + tol)
    throw NumericalError(
        "calibrate: bracket does not straddle target (LOLE at bracket high " +
        std::to_string(at_hi.metrics.lole) + " > target)");

  double lole_lo = at_lo.metrics.lole, lole_hi = at_hi.metrics.lole;
  for (int iter = 0; iter < max_iter; ++iter) {
    const double mid = 0.5 * (lo + hi);
    EvalResult at_mid = lole_at(mid);
    const double lm = at_mid.metrics.lole;
    const double noise = 4.0 * at_mid.metrics.se_lole;
    if (lm > lole_lo + noise || lm < lole_hi - noise)
      res.notes.push_back("non-monotone LOLE evaluation at slack=" +
                          std::to_string(mid) + " (lole=" +
                          std::to_string(lm) + ")");
    if (std::abs(lm - target_lole) <= tol) {
      res.achieved_lole = lm;
      res.slack_icap = mid;
      set_slack(mid);
      return res;
    }
    if (lm > target_lole) {
      lo = mid;
      lole_lo = lm;
    } else {
      hi = mid;
      lole_hi = lm;
    }
  }
  throw NumericalError("calibrate: did not converge to |LOLE - target| <= " +
                       std::to_string(tol) + " within " +
                       std::to_string(max_iter) + " iterations");
}

}  // namespace mricap
