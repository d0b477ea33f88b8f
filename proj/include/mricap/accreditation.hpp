#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mricap/engine.hpp"
#include "mricap/errors.hpp"
#include "mricap/perturb.hpp"
#include "mricap/types.hpp"

namespace mricap {

struct EstimatorSettings {
  double delta_mw = 1.0;        // EUE finite differences
  double lole_delta_mw = 10.0;  // LOLE responds poorly to small steps
  bool two_sided = false;
  double max_se_fraction = 0.5;  // warn above this se / |estimate| ratio
};

// A finite-difference estimate with its per-replication contributions kept
// for covariance-aware follow-up statistics (empty under exact evaluation).
struct FdEstimate {
  double value = 0.0;
  double se = 0.0;
  std::vector<double> rep_diff;
  std::vector<std::string> warnings;
};

namespace detail {

enum class FdMetric { eue, lole };

inline const std::vector<double>& rep_series(const EvalResult& r,
                                             FdMetric m) {
  return m == FdMetric::eue ? r.rep_ue : r.rep_lol_days;
}

inline double metric_value(const EvalResult& r, FdMetric m) {
  return m == FdMetric::eue ? r.metrics.eue : r.metrics.lole;
}

inline FdEstimate fd_difference(const EvalResult& hi, const EvalResult& lo,
                                double delta, FdMetric metric) {
  FdEstimate out;
  out.value = (metric_value(hi, metric) - metric_value(lo, metric)) / delta;
  const auto& a = rep_series(hi, metric);
  const auto& b = rep_series(lo, metric);
  if (a.empty() || b.empty()) return out;  // exact evaluation
  const std::size_t n = a.size();
  out.rep_diff.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.rep_diff[i] = (a[i] - b[i]) / delta;
  if (n > 1) {
    double ss = 0.0;
    for (double d : out.rep_diff) {
      const double e = d - out.value;
      ss += e * e;
    }
    out.se = std::sqrt(ss / static_cast<double>(n - 1) /
                       static_cast<double>(n));
  }
  return out;
}

inline void apply_estimate_warnings(FdEstimate& est,
                                    const EstimatorSettings& settings,
                                    const std::string& what) {
  if (est.value < 0.0) {
    est.warnings.push_back(what + ": negative estimate " +
                           std::to_string(est.value) + " clamped to 0");
    est.value = 0.0;
  }
  if (est.value > 0.0 && est.se > settings.max_se_fraction * est.value)
    est.warnings.push_back(what + ": standard error " +
                           std::to_string(est.se) + " exceeds " +
                           std::to_string(settings.max_se_fraction) +
                           " of the estimate");
}

// Delta-method standard error of num/den for correlated CRN estimates:
// Var(a/k) ~ Var(a_r - R k_r) / (N kbar^2).
inline double ratio_se(double ratio, const FdEstimate& num,
                       const FdEstimate& den) {
  if (num.rep_diff.empty() || den.rep_diff.empty() || den.value == 0.0)
    return 0.0;
  const std::size_t n = num.rep_diff.size();
  if (n < 2 || den.rep_diff.size() != n) return 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    mean += num.rep_diff[i] - ratio * den.rep_diff[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = num.rep_diff[i] - ratio * den.rep_diff[i] - mean;
    ss += e * e;
  }
  const double var = ss / static_cast<double>(n - 1) / static_cast<double>(n);
  return std::sqrt(var) / std::abs(den.value);
}

}  // namespace detail

// Unforced capacity of a thermal unit: ICAP discounted by its outage rate.
inline double ucap(const ResourceSpec& r) {
  const auto* th = std::get_if<ThermalSpec>(&r);
  if (!th) throw ConfigError("ucap: defined for thermal resources only");
  return th->icap * (1.0 - th->for_rate);
}

// MRI of a named resource: the drop in EUE per MW of proportional capacity
// added at the base case, estimated with common random numbers.
inline FdEstimate mri(const BaseCase& base, const std::string& name,
                      const Evaluator& eval,
                      const EstimatorSettings& settings = {},
                      const EvalResult* base_eval = nullptr) {
  auto it = base.resources.find(name);
  if (it == base.resources.end())
    throw ConfigError("mri: unknown resource '" + name + "'");
  if (!(native_capacity(it->second) > 0.0))
    throw ConfigError("mri: resource '" + name +
                      "' has no positive native capacity");
  const double d = settings.delta_mw;
  FdEstimate est;
  if (settings.two_sided && native_capacity(it->second) >= d) {
    BaseCase up = perturb_resource(base, name, d);
    BaseCase down = perturb_resource(base, name, -d);
    auto evals = eval.batch({&down, &up});
    est = detail::fd_difference(evals[0], evals[1], 2.0 * d,
                                detail::FdMetric::eue);
  } else {
    BaseCase up = perturb_resource(base, name, d);
    if (base_eval) {
      EvalResult pert = eval(up);
      est = detail::fd_difference(*base_eval, pert, d, detail::FdMetric::eue);
    } else {
      auto evals = eval.batch({&base, &up});
      est = detail::fd_difference(evals[0], evals[1], d,
                                  detail::FdMetric::eue);
    }
  }
  detail::apply_estimate_warnings(est, settings, "mri(" + name + ")");
  return est;
}

// MRI of one marginal MW of always-available capacity; also the expected
// number of MRI hours per period.
inline FdEstimate mri_perfect(const BaseCase& base, const Evaluator& eval,
                              const EstimatorSettings& settings = {},
                              const EvalResult* base_eval = nullptr) {
  const double d = settings.delta_mw;
  BaseCase probe =
      add_resource(base, fresh_name(base, "perfect_probe"), PerfectSpec{d});
  FdEstimate est;
  if (base_eval) {
    EvalResult pert = eval(probe);
    est = detail::fd_difference(*base_eval, pert, d, detail::FdMetric::eue);
  } else {
    auto evals = eval.batch({&base, &probe});
    est = detail::fd_difference(evals[0], evals[1], d, detail::FdMetric::eue);
  }
  detail::apply_estimate_warnings(est, settings, "mri_perfect");
  return est;
}

// Group MRI via the proportional group perturbation.
inline FdEstimate group_mri(const BaseCase& base,
                            const std::vector<std::string>& members,
                            const Evaluator& eval,
                            const EstimatorSettings& settings = {},
                            const EvalResult* base_eval = nullptr) {
  const double d = settings.delta_mw;
  BaseCase up = perturb_group(base, members, d);
  FdEstimate est;
  if (base_eval) {
    EvalResult pert = eval(up);
    est = detail::fd_difference(*base_eval, pert, d, detail::FdMetric::eue);
  } else {
    auto evals = eval.batch({&base, &up});
    est = detail::fd_difference(evals[0], evals[1], d, detail::FdMetric::eue);
  }
  detail::apply_estimate_warnings(est, settings, "group_mri");
  return est;
}

struct MricResult {
  double mri = 0.0;
  double rmri = 0.0;
  double mric = 0.0;
  double se_mri = 0.0;
  double se_rmri = 0.0;
  double se_mric = 0.0;
  std::vector<std::string> warnings;
};

// Combines a resource (or group) MRI with the perfect-capacity reference:
// rMRI = MRI / MRI_perfect, MRIC = C * rMRI. Standard errors account for
// the correlation of the two CRN estimates.
inline MricResult combine_mric(double native_cap, const FdEstimate& res_mri,
                               const FdEstimate& ref_mri) {
  if (!(ref_mri.value > 0.0))
    throw NumericalError(
        "mric: reference MRI is zero; the adequacy constraint is not "
        "binding and accreditation is undefined");
  MricResult out;
  out.mri = res_mri.value;
  out.se_mri = res_mri.se;
  out.rmri = res_mri.value / ref_mri.value;
  out.se_rmri = detail::ratio_se(out.rmri, res_mri, ref_mri);
  out.mric = native_cap * out.rmri;
  out.se_mric = native_cap * out.se_rmri;
  out.warnings = res_mri.warnings;
  for (const auto& w : ref_mri.warnings) out.warnings.push_back(w);
  return out;
}

inline MricResult mric(const BaseCase& base, const std::string& name,
                       const Evaluator& eval,
                       const EstimatorSettings& settings = {}) {
  EvalResult base_eval = eval(base);
  FdEstimate res = mri(base, name, eval, settings, &base_eval);
  FdEstimate ref = mri_perfect(base, eval, settings, &base_eval);
  return combine_mric(native_capacity(base.resources.at(name)), res, ref);
}

struct StorageMriComponents {
  FdEstimate capacity;  // per MW of power (discharge + charge scaled)
  FdEstimate energy;    // per MWh of energy limit
};

// Separate capacity and energy sensitivities of a storage unit, perturbing
// the power limits and the energy limit at the same relative step as the
// total perturbation so the decomposition identity
// MRI * C == MRI_C * C + MRI_E * E holds in the linear regime.
inline StorageMriComponents mri_components_storage(
    const BaseCase& base, const std::string& name, const Evaluator& eval,
    const EstimatorSettings& settings = {},
    const EvalResult* base_eval = nullptr) {
  auto it = base.resources.find(name);
  if (it == base.resources.end() ||
      !std::holds_alternative<StorageSpec>(it->second))
    throw ConfigError("mri_components_storage: '" + name +
                      "' is not a storage resource");
  const auto& st = std::get<StorageSpec>(it->second);
  const double factor = (st.discharge_cap + settings.delta_mw) /
                        st.discharge_cap;
  const double delta_e = st.energy_limit * (factor - 1.0);

  BaseCase power_case = scale_storage_power(base, name, factor);
  BaseCase energy_case = scale_storage_energy(base, name, factor);

  StorageMriComponents out;
  if (base_eval) {
    EvalResult pe = eval(power_case);
    EvalResult ee = eval(energy_case);
    out.capacity = detail::fd_difference(*base_eval, pe, settings.delta_mw,
                                         detail::FdMetric::eue);
    out.energy =
        detail::fd_difference(*base_eval, ee, delta_e, detail::FdMetric::eue);
  } else {
    auto evals = eval.batch({&base, &power_case, &energy_case});
    out.capacity = detail::fd_difference(evals[0], evals[1],
                                         settings.delta_mw,
                                         detail::FdMetric::eue);
    out.energy = detail::fd_difference(evals[0], evals[2], delta_e,
                                       detail::FdMetric::eue);
  }
  detail::apply_estimate_warnings(out.capacity, settings,
                                  "mri_c(" + name + ")");
  detail::apply_estimate_warnings(out.energy, settings,
                                  "mri_e(" + name + ")");
  return out;
}

// Per-hour MRI of an intermittent resource: sensitivity of EUE to that
// hour's output, scaled across all profiles. Hours with zero mean output
// get a zero estimate (their weight in the hourly decomposition is zero).
inline std::vector<FdEstimate> mri_hourly_intermittent(
    const BaseCase& base, const std::string& name,
    const std::vector<int>& hours, const Evaluator& eval,
    const EstimatorSettings& settings = {},
    const EvalResult* base_eval = nullptr) {
  auto it = base.resources.find(name);
  if (it == base.resources.end() ||
      !std::holds_alternative<IntermittentSpec>(it->second))
    throw ConfigError("mri_hourly_intermittent: '" + name +
                      "' is not an intermittent resource");
  if (hours.empty())
    throw ConfigError("mri_hourly_intermittent: empty hour set");
  const auto& ir = std::get<IntermittentSpec>(it->second);

  std::vector<double> mean_output(hours.size(), 0.0);
  for (std::size_t h = 0; h < hours.size(); ++h) {
    const int t = hours[h];
    if (t < 0 || t >= base.load.horizon_hours)
      throw ConfigError("mri_hourly_intermittent: hour out of range");
    for (std::size_t p = 0; p < ir.profiles.size(); ++p)
      mean_output[h] += base.load.profiles[p].weight * ir.profiles[p][t];
  }

  std::vector<BaseCase> cases;
  std::vector<int> case_of_hour(hours.size(), -1);
  for (std::size_t h = 0; h < hours.size(); ++h) {
    if (mean_output[h] <= 0.0) continue;
    const double factor = (mean_output[h] + settings.delta_mw) /
                          mean_output[h];
    case_of_hour[h] = static_cast<int>(cases.size());
    cases.push_back(scale_intermittent_hour(base, name, hours[h], factor));
  }

  std::vector<const BaseCase*> ptrs;
  EvalResult local_base;
  const EvalResult* b = base_eval;
  if (!b) {
    local_base = eval(base);
    b = &local_base;
  }
  for (const auto& c : cases) ptrs.push_back(&c);
  std::vector<EvalResult> evals;
  if (!ptrs.empty()) {
    ptrs.insert(ptrs.begin(), &base);
    evals = eval.batch(ptrs);
  }

  std::vector<FdEstimate> out(hours.size());
  for (std::size_t h = 0; h < hours.size(); ++h) {
    if (case_of_hour[h] < 0) continue;  // zero output: zero estimate
    out[h] = detail::fd_difference(evals[0], evals[case_of_hour[h] + 1],
                                   settings.delta_mw, detail::FdMetric::eue);
    detail::apply_estimate_warnings(out[h], settings,
                                    "mri_hour(" + name + ")");
  }
  return out;
}

struct AelccOptions {
  double tol_lole = 1e-3;
  int max_iter = 40;
  double bracket_factor = 2.0;  // search [0, factor * native capacity]
};

struct AelccResult {
  enum class Status { converged, bracket_point, degenerate };
  std::optional<double> aelcc;  // MW of reference capacity
  double cf = 0.0;
  double lole_base = 0.0;
  double lole_removed = 0.0;
  double achieved_delta_lole = 0.0;
  int evaluations = 0;
  Status status = Status::converged;
  std::vector<std::string> warnings;
};

// Average ELCC of a set of members: the reference capacity that restores the
// base-case LOLE once the members are removed. The replacement grows the
// reference resource itself when it is still in the case, or re-adds it
// under its own name when it was removed; either way the replacement at the
// members' own size reproduces the base case exactly when the members equal
// the reference. The default reference is perfect capacity.
inline AelccResult aelcc(const BaseCase& base,
                         const std::vector<std::string>& members,
                         const Evaluator& eval,
                         const AelccOptions& opts = {},
                         const std::optional<std::string>& reference =
                             std::nullopt) {
  GroupView g = group_view(base, members);
  AelccResult res;

  EvalResult base_eval = eval(base);
  res.lole_base = base_eval.metrics.lole;
  ++res.evaluations;

  BaseCase removed = base;
  for (const auto& name : members) removed = remove_resource(removed, name);
  if (removed.resources.empty())
    throw ConfigError("aelcc: cannot remove every resource");
  EvalResult removed_eval = eval(removed);
  res.lole_removed = removed_eval.metrics.lole;
  ++res.evaluations;

  if (std::abs(res.lole_removed - res.lole_base) <= opts.tol_lole) {
    res.status = AelccResult::Status::degenerate;
    res.warnings.push_back(
        "aelcc: LOLE insensitive to removing the resource; accreditation "
        "degenerate");
    return res;
  }
  if (res.lole_removed < res.lole_base) {
    res.status = AelccResult::Status::degenerate;
    res.warnings.push_back(
        "aelcc: LOLE decreased when the resource was removed");
    return res;
  }

  ResourceSpec ref_spec = PerfectSpec{1.0};
  std::string ref_in_case;  // non-empty: grow this resource instead
  std::string clone_name = fresh_name(removed, "perfect_replacement");
  if (reference) {
    auto it = base.resources.find(*reference);
    if (it == base.resources.end())
      throw ConfigError("aelcc: unknown reference '" + *reference + "'");
    ref_spec = it->second;
    if (removed.resources.count(*reference))
      ref_in_case = *reference;
    else
      clone_name = *reference;  // it was removed; re-add under its own name
  }
  const double ref_cap = native_capacity(ref_spec);
  if (!(ref_cap > 0.0))
    throw ConfigError("aelcc: reference has no positive native capacity");

  auto lole_with = [&](double x) {
    BaseCase c = ref_in_case.empty()
                     ? add_resource(removed, clone_name,
                                    scale_resource(ref_spec, x / ref_cap))
                     : perturb_resource(removed, ref_in_case, x);
    ++res.evaluations;
    return eval(c).metrics.lole;
  };

  double lo = 0.0;
  double hi = opts.bracket_factor * g.native_capacity;
  const double lole_hi = lole_with(hi);
  if (lole_hi > res.lole_base + opts.tol_lole)
    throw NumericalError(
        "aelcc: bracket failure; replacement capacity " +
        std::to_string(hi) + " MW cannot restore the base LOLE");

  const double width_tol = 1e-9 * hi;
  double mid = hi, lole_mid = lole_hi;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    mid = 0.5 * (lo + hi);
    lole_mid = lole_with(mid);
    if (std::abs(lole_mid - res.lole_base) <= opts.tol_lole) {
      res.aelcc = mid;
      res.cf = mid / g.native_capacity;
      res.achieved_delta_lole = std::abs(lole_mid - res.lole_base);
      return res;
    }
    if (lole_mid > res.lole_base)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= width_tol) break;
  }
  // The bracket pinched onto a discontinuity of LOLE: report the step
  // location rather than failing.
  res.aelcc = 0.5 * (lo + hi);
  res.cf = *res.aelcc / g.native_capacity;
  res.achieved_delta_lole = std::abs(lole_mid - res.lole_base);
  res.status = AelccResult::Status::bracket_point;
  res.warnings.push_back(
      "aelcc: LOLE tolerance not met (|dLOLE| = " +
      std::to_string(res.achieved_delta_lole) +
      "); converged on a bracket point");
  return res;
}

enum class MelccMetric { lole, eue };

struct MelccResult {
  std::optional<double> melcc;  // MW
  double cf = 0.0;
  double d_resource = 0.0;      // metric drop per MW of the resource
  double d_reference = 0.0;     // metric drop per MW of perfect capacity
  std::vector<std::string> warnings;
};

// Marginal ELCC: the ratio of the metric's response to a small resource
// perturbation over its response to the same amount of perfect capacity.
// LOLE is the conventional metric; the EUE variant reproduces rMRI.
inline MelccResult melcc(const BaseCase& base, const std::string& name,
                         const Evaluator& eval,
                         const EstimatorSettings& settings = {},
                         MelccMetric metric = MelccMetric::lole,
                         const EvalResult* base_eval = nullptr) {
  auto it = base.resources.find(name);
  if (it == base.resources.end())
    throw ConfigError("melcc: unknown resource '" + name + "'");
  const double d = metric == MelccMetric::lole ? settings.lole_delta_mw
                                               : settings.delta_mw;
  const auto fdm = metric == MelccMetric::lole ? detail::FdMetric::lole
                                               : detail::FdMetric::eue;
  BaseCase up = perturb_resource(base, name, d);
  BaseCase probe =
      add_resource(base, fresh_name(base, "perfect_probe"), PerfectSpec{d});

  FdEstimate res_fd, ref_fd;
  if (base_eval) {
    EvalResult e_up = eval(up);
    EvalResult e_probe = eval(probe);
    res_fd = detail::fd_difference(*base_eval, e_up, d, fdm);
    ref_fd = detail::fd_difference(*base_eval, e_probe, d, fdm);
  } else {
    auto evals = eval.batch({&base, &up, &probe});
    res_fd = detail::fd_difference(evals[0], evals[1], d, fdm);
    ref_fd = detail::fd_difference(evals[0], evals[2], d, fdm);
  }
  MelccResult out;
  out.d_resource = res_fd.value;
  out.d_reference = ref_fd.value;
  if (ref_fd.value == 0.0) {
    out.warnings.push_back(
        res_fd.value == 0.0
            ? "melcc(" + name +
                  "): metric responded to neither perturbation; undefined"
            : "melcc(" + name +
                  "): zero reference response; undefined");
    return out;
  }
  out.cf = res_fd.value / ref_fd.value;
  out.melcc = native_capacity(it->second) * out.cf;
  return out;
}

enum class Method { ucap, mric, aelcc, melcc };

struct AccreditationEntry {
  std::string name;
  double icap = 0.0;
  bool is_group = false;
  bool is_group_sum = false;
  std::vector<std::string> group_members;  // filled for group rows
  std::optional<double> ucap;
  std::optional<double> aelcc;
  std::optional<double> melcc;
  std::optional<double> mri;      // hours / period
  std::optional<double> rmri;
  std::optional<double> mric;     // MW
  std::optional<double> mri_c;    // storage capacity component, per MW
  std::optional<double> mri_e;    // storage energy component, per MWh
  double se_mri = 0.0;
  double se_rmri = 0.0;
  double se_mric = 0.0;
  double d_lole = 0.0;            // stored LOLE response (melcc rebasing)
  std::vector<std::string> warnings;
};

struct AccreditationReport {
  std::vector<AccreditationEntry> entries;
  std::string reference = "perfect";
  double mri_perfect = 0.0;
  double se_mri_perfect = 0.0;
  double d_lole_perfect = 0.0;
  double reference_mri = 0.0;    // equals mri_perfect under the default
  double d_lole_reference = 0.0;
  std::uint64_t seed = 0;
  long replications = 0;
  double delta_mw = 0.0;
};

struct AccreditOptions {
  std::vector<Method> methods{Method::ucap, Method::mric};
  EstimatorSettings est;
  AelccOptions aelcc_opts;
  std::optional<std::pair<std::string, std::vector<std::string>>> group;
  std::optional<std::string> reference;
};

namespace detail {

inline bool wants(const AccreditOptions& o, Method m) {
  return std::find(o.methods.begin(), o.methods.end(), m) != o.methods.end();
}

}  // namespace detail

// Rescales a report to a different reference resource. The marginal methods
// rescale algebraically from the stored responses (one uniform factor);
// AELCC is re-run against the new reference resource, which is what makes
// its reference dependence visible.
inline AccreditationReport rebase_reference(const AccreditationReport& report,
                                            const BaseCase& base,
                                            const std::string& new_reference,
                                            const Evaluator& eval,
                                            const AelccOptions& aelcc_opts =
                                                {},
                                            bool rerun_aelcc = true) {
  const AccreditationEntry* ref_entry = nullptr;
  for (const auto& e : report.entries)
    if (e.name == new_reference && !e.is_group && !e.is_group_sum)
      ref_entry = &e;
  if (!ref_entry)
    throw ConfigError("rebase: reference '" + new_reference +
                      "' not in the report");

  AccreditationReport out = report;
  out.reference = new_reference;

  if (ref_entry->mri.has_value()) {
    const double ref_mri = *ref_entry->mri;
    if (!(ref_mri > 0.0))
      throw NumericalError("rebase: reference MRI is zero");
    out.reference_mri = ref_mri;
    const double beta = ref_mri / report.mri_perfect;
    for (auto& e : out.entries) {
      if (e.mri.has_value()) {
        e.rmri = *e.mri / ref_mri;
        e.mric = e.is_group_sum ? *e.mric / beta : e.icap * *e.rmri;
        e.se_rmri /= beta;
        e.se_mric /= beta;
      }
    }
  }
  if (ref_entry->melcc.has_value()) {
    const double d_ref = ref_entry->d_lole;
    if (d_ref == 0.0)
      throw NumericalError("rebase: reference LOLE response is zero");
    out.d_lole_reference = d_ref;
    for (auto& e : out.entries)
      if (e.melcc.has_value()) {
        if (e.is_group_sum) {
          e.melcc = *e.melcc * report.d_lole_perfect / d_ref;
        } else {
          e.melcc = e.icap * e.d_lole / d_ref;
        }
      }
  }
  if (rerun_aelcc && ref_entry->aelcc.has_value()) {
    for (auto& e : out.entries) {
      if (!e.aelcc.has_value() || e.is_group_sum) continue;
      try {
        AelccResult r =
            aelcc(base, e.is_group ? e.group_members
                                   : std::vector<std::string>{e.name},
                  eval, aelcc_opts, new_reference);
        e.aelcc = r.aelcc;
        for (auto& w : r.warnings) e.warnings.push_back(w);
      } catch (const NumericalError& err) {
        e.aelcc.reset();
        e.warnings.push_back(err.what());
      }
    }
    double sum = 0.0;
    bool all = true;
    std::vector<std::string> members;
    for (const auto& e : out.entries)
      if (e.is_group) members = e.group_members;
    for (const auto& e : out.entries) {
      if (e.is_group || e.is_group_sum) continue;
      if (members.empty() || std::find(members.begin(), members.end(),
                                       e.name) != members.end()) {
        if (e.aelcc.has_value())
          sum += *e.aelcc;
        else
          all = false;
      }
    }
    for (auto& e : out.entries)
      if (e.is_group_sum) {
        if (all)
          e.aelcc = sum;
        else
          e.aelcc.reset();
      }
  }
  return out;
}

// Computes the requested accreditation columns for every resource in the
// base case. All EUE/LOLE evaluations share the evaluator's replication set,
// so every column of the report is a common-random-numbers estimate against
// the same base evaluation.
inline AccreditationReport run_accreditation(const BaseCase& base,
                                             const Evaluator& eval,
                                             const AccreditOptions& opts) {
  validate(base);
  AccreditationReport report;
  report.seed = eval.sim.seed;
  report.replications =
      eval.mode == Evaluator::Mode::exact ? 0 : eval.sim.replications;
  report.delta_mw = opts.est.delta_mw;

  const bool want_mric = detail::wants(opts, Method::mric);
  const bool want_ucap = detail::wants(opts, Method::ucap);
  const bool want_aelcc = detail::wants(opts, Method::aelcc);
  const bool want_melcc = detail::wants(opts, Method::melcc);
  // AELCC computes against the requested reference directly; the marginal
  // columns are computed against perfect capacity and rescaled afterwards.
  const std::optional<std::string> aelcc_ref =
      (opts.reference && *opts.reference != "perfect") ? opts.reference
                                                       : std::nullopt;

  // Assemble every case needed by the marginal methods and evaluate them in
  // one batch over a shared replication set.
  std::vector<BaseCase> cases;
  std::vector<const BaseCase*> ptrs;
  auto push_case = [&](BaseCase c) {
    cases.push_back(std::move(c));
    return static_cast<int>(cases.size() - 1);
  };
  push_case(base);  // index 0

  const double d = opts.est.delta_mw;
  const double dl = opts.est.lole_delta_mw;

  int idx_probe = -1, idx_probe_lole = -1, idx_group = -1,
      idx_group_lole = -1;
  std::map<std::string, int> idx_mri, idx_mri_lole, idx_stc, idx_ste;
  std::map<std::string, double> delta_e_of;

  if (want_mric || want_melcc)
    idx_probe = push_case(add_resource(
        base, fresh_name(base, "perfect_probe"), PerfectSpec{d}));
  if (want_melcc)
    idx_probe_lole = push_case(add_resource(
        base, fresh_name(base, "perfect_probe_lole"), PerfectSpec{dl}));

  for (const auto& [name, r] : base.resources) {
    if (want_mric) {
      idx_mri[name] = push_case(perturb_resource(base, name, d));
      if (const auto* st = std::get_if<StorageSpec>(&r)) {
        const double factor = (st->discharge_cap + d) / st->discharge_cap;
        delta_e_of[name] = st->energy_limit * (factor - 1.0);
        idx_stc[name] = push_case(scale_storage_power(base, name, factor));
        idx_ste[name] = push_case(scale_storage_energy(base, name, factor));
      }
    }
    if (want_melcc)
      idx_mri_lole[name] = push_case(perturb_resource(base, name, dl));
  }
  if (opts.group && want_mric)
    idx_group = push_case(perturb_group(base, opts.group->second, d));
  if (opts.group && want_melcc)
    idx_group_lole = push_case(perturb_group(base, opts.group->second, dl));

  for (const auto& c : cases) ptrs.push_back(&c);
  std::vector<EvalResult> evals = eval.batch(ptrs);
  const EvalResult& base_eval = evals[0];

  FdEstimate ref_mri;
  FdEstimate ref_lole;
  if (idx_probe >= 0) {
    ref_mri = detail::fd_difference(base_eval, evals[idx_probe], d,
                                    detail::FdMetric::eue);
    detail::apply_estimate_warnings(ref_mri, opts.est, "mri_perfect");
    report.mri_perfect = ref_mri.value;
    report.se_mri_perfect = ref_mri.se;
    report.reference_mri = ref_mri.value;
  }
  if (idx_probe_lole >= 0) {
    ref_lole = detail::fd_difference(base_eval, evals[idx_probe_lole], dl,
                                     detail::FdMetric::lole);
    report.d_lole_perfect = ref_lole.value;
    report.d_lole_reference = ref_lole.value;
  }

  auto fill_marginals = [&](AccreditationEntry& e, int mri_idx,
                            int lole_idx, double cap,
                            const std::string& label) {
    if (mri_idx >= 0) {
      FdEstimate fd = detail::fd_difference(base_eval, evals[mri_idx], d,
                                            detail::FdMetric::eue);
      detail::apply_estimate_warnings(fd, opts.est, "mri(" + label + ")");
      MricResult mr = combine_mric(cap, fd, ref_mri);
      e.mri = mr.mri;
      e.rmri = mr.rmri;
      e.mric = mr.mric;
      e.se_mri = mr.se_mri;
      e.se_rmri = mr.se_rmri;
      e.se_mric = mr.se_mric;
      for (auto& w : mr.warnings) e.warnings.push_back(w);
    }
    if (lole_idx >= 0) {
      FdEstimate fd = detail::fd_difference(base_eval, evals[lole_idx], dl,
                                            detail::FdMetric::lole);
      e.d_lole = fd.value;
      if (ref_lole.value == 0.0) {
        e.warnings.push_back("melcc(" + label +
                             "): zero reference response; undefined");
      } else {
        e.melcc = cap * fd.value / ref_lole.value;
      }
    }
  };

  for (const auto& [name, r] : base.resources) {
    AccreditationEntry e;
    e.name = name;
    e.icap = native_capacity(r);
    if (want_ucap && std::holds_alternative<ThermalSpec>(r))
      e.ucap = ucap(r);
    fill_marginals(e, want_mric ? idx_mri[name] : -1,
                   want_melcc ? idx_mri_lole[name] : -1, e.icap, name);
    if (want_mric && std::holds_alternative<StorageSpec>(r)) {
      FdEstimate fc = detail::fd_difference(base_eval, evals[idx_stc[name]],
                                            d, detail::FdMetric::eue);
      FdEstimate fe = detail::fd_difference(base_eval, evals[idx_ste[name]],
                                            delta_e_of[name],
                                            detail::FdMetric::eue);
      detail::apply_estimate_warnings(fc, opts.est, "mri_c(" + name + ")");
      detail::apply_estimate_warnings(fe, opts.est, "mri_e(" + name + ")");
      e.mri_c = fc.value;
      e.mri_e = fe.value;
    }
    if (want_aelcc) {
      try {
        AelccResult ar = aelcc(base, {name}, eval, opts.aelcc_opts,
                               aelcc_ref);
        e.aelcc = ar.aelcc;
        for (auto& w : ar.warnings) e.warnings.push_back(w);
      } catch (const NumericalError& err) {
        e.warnings.push_back(err.what());
      }
    }
    report.entries.push_back(std::move(e));
  }

  if (opts.group) {
    const auto& [label, members] = *opts.group;
    GroupView g = group_view(base, members);
    AccreditationEntry ge;
    ge.name = label;
    ge.is_group = true;
    ge.group_members = members;
    ge.icap = g.native_capacity;
    fill_marginals(ge, idx_group, idx_group_lole, g.native_capacity, label);
    if (want_aelcc) {
      try {
        AelccResult ar = aelcc(base, members, eval, opts.aelcc_opts,
                               aelcc_ref);
        ge.aelcc = ar.aelcc;
        for (auto& w : ar.warnings) ge.warnings.push_back(w);
      } catch (const NumericalError& err) {
        ge.warnings.push_back(err.what());
      }
    }

    AccreditationEntry se;
    se.name = label + "(sum of members)";
    se.is_group_sum = true;
    double sum_icap = 0.0, sum_mric = 0.0, sum_aelcc = 0.0, sum_melcc = 0.0,
           sum_mri_weighted = 0.0;
    bool all_mric = want_mric, all_aelcc = want_aelcc,
         all_melcc = want_melcc;
    for (const auto& e : report.entries) {
      if (std::find(members.begin(), members.end(), e.name) == members.end())
        continue;
      sum_icap += e.icap;
      if (e.mric.has_value()) {
        sum_mric += *e.mric;
        sum_mri_weighted += *e.mri * e.icap;
      } else {
        all_mric = false;
      }
      if (e.aelcc.has_value())
        sum_aelcc += *e.aelcc;
      else
        all_aelcc = false;
      if (e.melcc.has_value())
        sum_melcc += *e.melcc;
      else
        all_melcc = false;
    }
    se.icap = sum_icap;
    if (all_mric) {
      se.mric = sum_mric;
      se.mri = sum_mri_weighted / sum_icap;  // capacity-weighted member MRI
      se.rmri = report.mri_perfect > 0.0
                    ? *se.mri / report.mri_perfect
                    : 0.0;
    }
    if (all_aelcc) se.aelcc = sum_aelcc;
    if (all_melcc) se.melcc = sum_melcc;
    report.entries.push_back(std::move(ge));
    report.entries.push_back(std::move(se));
  }

  if (aelcc_ref)
    return rebase_reference(report, base, *aelcc_ref, eval, opts.aelcc_opts,
                            /*rerun_aelcc=*/false);
  return report;
}

}  // namespace mricap
