#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mricap/accreditation.hpp"
#include "mricap/demand_curve.hpp"
#include "mricap/engine.hpp"
#include "mricap/errors.hpp"
#include "mricap/perturb.hpp"

namespace mricap {

struct Offer {
  std::string name;
  double price = 0.0;     // $/MW-period
  double quantity = 0.0;  // MW in the curve's coordinate space
};

struct ClearedOffer {
  std::string name;
  double price = 0.0;
  double offered = 0.0;
  double cleared = 0.0;
  double payment = 0.0;  // cleared * clearing price
};

struct ClearingResult {
  std::vector<ClearedOffer> schedule;  // merit order
  double clearing_price = 0.0;
  double cleared_total = 0.0;
  double surplus = 0.0;  // integral of demand minus offered supply cost
  std::string binding_constraint;
};

// Uniform-price clearing of a merit-order supply stack against a piecewise
// linear demand curve. Clears the largest quantity whose marginal benefit
// covers the marginal offer price, which maximizes surplus; the marginal
// price group is prorated by offered quantity. Nothing clears beyond the
// curve's last point (demand is undefined there).
inline ClearingResult clear_auction(std::vector<Offer> offers,
                                    const DemandCurve& curve) {
  validate_curve(curve);
  for (const auto& o : offers) {
    if (!(o.quantity > 0.0))
      throw ConfigError("offer '" + o.name + "': quantity must be > 0");
    if (!(o.price >= 0.0))
      throw ConfigError("offer '" + o.name + "': price must be >= 0");
  }
  ClearingResult res;
  if (offers.empty()) {
    res.clearing_price = curve.points.front().price_per_mw;
    res.binding_constraint = "no-offers";
    return res;
  }
  std::stable_sort(offers.begin(), offers.end(),
                   [](const Offer& a, const Offer& b) {
                     if (a.price != b.price) return a.price < b.price;
                     return a.name < b.name;
                   });
  const double q_last = curve.points.back().quantity_mw;

  // Rightmost quantity (within the curve domain) whose marginal benefit is
  // at least p.
  auto q_max_at = [&](double p) {
    if (p <= curve.points.back().price_per_mw) return q_last;
    if (p > curve.points.front().price_per_mw) return 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      if (curve.points[i].price_per_mw < p) {
        const auto& lo = curve.points[i - 1];
        const auto& hi = curve.points[i];
        return lo.quantity_mw + (lo.price_per_mw - p) *
                                    (hi.quantity_mw - lo.quantity_mw) /
                                    (lo.price_per_mw - hi.price_per_mw);
      }
    }
    return q_last;
  };

  double cum = 0.0;
  std::size_t i = 0;
  bool stopped_on_demand = false;
  while (i < offers.size()) {
    // Offers tie at equal prices and share proration.
    std::size_t j = i;
    double group_qty = 0.0;
    while (j < offers.size() && offers[j].price == offers[i].price) {
      group_qty += offers[j].quantity;
      ++j;
    }
    const double q_max = q_max_at(offers[i].price);
    const double avail = std::max(0.0, q_max - cum);
    const double factor =
        group_qty <= avail ? 1.0 : (avail > 0.0 ? avail / group_qty : 0.0);
    for (std::size_t k = i; k < j; ++k) {
      ClearedOffer co;
      co.name = offers[k].name;
      co.price = offers[k].price;
      co.offered = offers[k].quantity;
      co.cleared = offers[k].quantity * factor;
      res.schedule.push_back(co);
    }
    cum += group_qty * factor;
    if (factor < 1.0) {
      stopped_on_demand = true;
      // Later (costlier) groups cannot clear either; record them at zero.
      for (std::size_t k = j; k < offers.size(); ++k)
        res.schedule.push_back(
            {offers[k].name, offers[k].price, offers[k].quantity, 0.0, 0.0});
      break;
    }
    i = j;
  }

  res.cleared_total = cum;
  res.clearing_price = curve_price_at(curve, cum);
  if (stopped_on_demand)
    res.binding_constraint =
        cum >= q_last - 1e-12 ? "demand-curve-end" : "demand-intersection";
  else
    res.binding_constraint = "supply-exhausted";

  double offer_cost = 0.0;
  for (auto& co : res.schedule) {
    co.payment = co.cleared * res.clearing_price;
    offer_cost += co.cleared * co.price;
  }
  res.surplus = curve_area(curve, 0.0, cum) - offer_cost;
  return res;
}

struct ProcurementOption {
  std::string name;
  ResourceSpec spec;
  double cost = 0.0;  // $ per period, all-in
  // When the option is an existing base-case resource, accredit it through
  // that resource's own perturbation (its market rMRI). New entrants are
  // accredited as small injections of their own type.
  std::optional<std::string> accredit_as;
};

struct RequirementSide {
  std::vector<std::string> chosen;
  double cost = 0.0;
  double lhs = 0.0;  // constraint left-hand side for the chosen subset
  double rhs = 0.0;
  double achieved_eue = 0.0;
};

struct RequirementComparison {
  RequirementSide native;
  RequirementSide mric;
  double requirement_mw = 0.0;
  double rmri_sys = 0.0;
  std::map<std::string, double> option_rmri;
};

// Compares the native-capacity requirement (sum of C_i) with the MRIC
// requirement (sum of rMRI_i * C_i against rMRI_sys * requirement) on a
// small option set: exhaustive search for the cost-minimal feasible subset
// under each constraint, then the true EUE of each chosen mix. Option rMRIs
// are marginal injections evaluated at the base case.
inline RequirementComparison compare_requirements(
    const std::vector<ProcurementOption>& options, const BaseCase& base,
    double requirement_mw, const Evaluator& eval,
    const EstimatorSettings& settings = {}) {
  if (options.empty()) throw ConfigError("compare_requirements: no options");
  if (options.size() > 20)
    throw ConfigError(
        "compare_requirements: option set too large for exhaustive search "
        "(max 20)");
  {
    std::map<std::string, int> seen;
    for (const auto& o : options)
      if (++seen[o.name] > 1)
        throw ConfigError("compare_requirements: duplicate option name '" +
                          o.name + "'");
  }

  RequirementComparison out;
  out.requirement_mw = requirement_mw;

  // Marginal rMRI of every option and of every base resource, all against
  // one shared base evaluation.
  const double d = settings.delta_mw;
  std::vector<BaseCase> cases;
  cases.push_back(base);
  cases.push_back(add_resource(base, fresh_name(base, "perfect_probe"),
                               PerfectSpec{d}));
  for (const auto& o : options) {
    const double c = native_capacity(o.spec);
    if (!(c > 0.0))
      throw ConfigError("compare_requirements: option '" + o.name +
                        "' has no positive capacity");
    if (o.accredit_as) {
      if (!base.resources.count(*o.accredit_as))
        throw ConfigError("compare_requirements: option '" + o.name +
                          "' accredit_as references unknown resource '" +
                          *o.accredit_as + "'");
      cases.push_back(perturb_resource(base, *o.accredit_as, d));
    } else {
      cases.push_back(add_resource(base, fresh_name(base, "option_probe"),
                                   scale_resource(o.spec, d / c)));
    }
  }
  std::vector<std::string> base_names;
  for (const auto& [name, r] : base.resources) {
    base_names.push_back(name);
    cases.push_back(perturb_resource(base, name, d));
  }
  std::vector<const BaseCase*> ptrs;
  for (const auto& c : cases) ptrs.push_back(&c);
  std::vector<EvalResult> evals = eval.batch(ptrs);

  FdEstimate ref = detail::fd_difference(evals[0], evals[1], d,
                                         detail::FdMetric::eue);
  if (!(ref.value > 0.0))
    throw NumericalError(
        "compare_requirements: reference MRI is zero at the base case");
  for (std::size_t k = 0; k < options.size(); ++k) {
    FdEstimate fd = detail::fd_difference(evals[0], evals[2 + k], d,
                                          detail::FdMetric::eue);
    out.option_rmri[options[k].name] = std::max(0.0, fd.value) / ref.value;
  }
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < base_names.size(); ++k) {
    FdEstimate fd = detail::fd_difference(
        evals[0], evals[2 + options.size() + k], d, detail::FdMetric::eue);
    const double c = native_capacity(base.resources.at(base_names[k]));
    num += std::max(0.0, fd.value) / ref.value * c;
    den += c;
  }
  out.rmri_sys = num / den;

  // Exhaustive subset search; ties break toward fewer members, then the
  // earlier subset in input-order bit encoding.
  auto search = [&](auto feasible_lhs, double rhs) {
    std::optional<unsigned> best;
    double best_cost = 0.0;
    int best_size = 0;
    for (unsigned mask = 1; mask < (1u << options.size()); ++mask) {
      double lhs = 0.0, cost = 0.0;
      int size = 0;
      for (std::size_t k = 0; k < options.size(); ++k)
        if (mask >> k & 1) {
          lhs += feasible_lhs(options[k]);
          cost += options[k].cost;
          ++size;
        }
      if (lhs < rhs - 1e-9) continue;
      if (!best || cost < best_cost ||
          (cost == best_cost && size < best_size) ||
          (cost == best_cost && size == best_size && mask < *best)) {
        best = mask;
        best_cost = cost;
        best_size = size;
      }
    }
    return best;
  };

  auto fill_side = [&](RequirementSide& side, std::optional<unsigned> mask,
                       auto feasible_lhs, double rhs,
                       const char* which) {
    side.rhs = rhs;
    if (!mask)
      throw NumericalError(std::string("compare_requirements: no feasible "
                                       "subset under the ") +
                           which + " constraint");
    BaseCase chosen_case;
    chosen_case.load = base.load;
    chosen_case.voll = base.voll;
    for (std::size_t k = 0; k < options.size(); ++k)
      if (*mask >> k & 1) {
        side.chosen.push_back(options[k].name);
        side.cost += options[k].cost;
        side.lhs += feasible_lhs(options[k]);
        chosen_case.resources.emplace(options[k].name, options[k].spec);
      }
    side.achieved_eue = eval(chosen_case).metrics.eue;
  };

  auto native_lhs = [](const ProcurementOption& o) {
    return native_capacity(o.spec);
  };
  auto mric_lhs = [&](const ProcurementOption& o) {
    return out.option_rmri.at(o.name) * native_capacity(o.spec);
  };
  fill_side(out.native, search(native_lhs, requirement_mw), native_lhs,
            requirement_mw, "native");
  fill_side(out.mric, search(mric_lhs, out.rmri_sys * requirement_mw),
            mric_lhs, out.rmri_sys * requirement_mw, "mric");
  return out;
}

struct LevelCurvePoint {
  double c1 = 0.0;
  double c2_actual = 0.0;
  double c2_native_linear = 0.0;
  double c2_mric_linear = 0.0;
  bool ok = false;
  std::string note;
};

struct LevelCurveResult {
  std::vector<LevelCurvePoint> points;
  double base_c1 = 0.0, base_c2 = 0.0;
  double rmri_1 = 0.0, rmri_2 = 0.0;
  double eue_base = 0.0;
};

struct LevelCurveOptions {
  double eue_rel_tol = 1e-6;   // |EUE - EUE_base| <= max(rel*EUE_base, abs)
  double eue_abs_tol = 1e-9;
  int max_iter = 200;
};

// Traces the constant-EUE curve of a two-resource system over a grid of
// first-resource capacities, alongside the two linear approximations: the
// native-capacity line of slope -1 and the MRIC line whose slope comes from
// the base-case rMRI gradient. All three pass through the base point.
inline LevelCurveResult level_curves(const BaseCase& base,
                                     const std::string& r1,
                                     const std::string& r2,
                                     const std::vector<double>& c1_scales,
                                     const Evaluator& eval,
                                     const EstimatorSettings& settings = {},
                                     const LevelCurveOptions& opts = {}) {
  if (r1 == r2) throw ConfigError("level_curves: r1 and r2 must differ");
  LevelCurveResult out;
  out.base_c1 = native_capacity(base.resources.at(r1));
  out.base_c2 = native_capacity(base.resources.at(r2));

  EvalResult base_eval = eval(base);
  out.eue_base = base_eval.metrics.eue;
  if (!(out.eue_base > 0.0))
    throw NumericalError("level_curves: base case has zero EUE");
  FdEstimate k = mri_perfect(base, eval, settings, &base_eval);
  FdEstimate m1 = mri(base, r1, eval, settings, &base_eval);
  FdEstimate m2 = mri(base, r2, eval, settings, &base_eval);
  if (!(k.value > 0.0) || !(m2.value > 0.0))
    throw NumericalError("level_curves: EUE insensitive to resource 2");
  out.rmri_1 = m1.value / k.value;
  out.rmri_2 = m2.value / k.value;
  const double slope = out.rmri_1 / out.rmri_2;
  const double tol =
      std::max(opts.eue_rel_tol * out.eue_base, opts.eue_abs_tol);

  for (double s : c1_scales) {
    LevelCurvePoint pt;
    pt.c1 = s * out.base_c1;
    pt.c2_native_linear = out.base_c2 + (out.base_c1 - pt.c1);
    pt.c2_mric_linear = out.base_c2 + slope * (out.base_c1 - pt.c1);
    BaseCase at_c1 = perturb_resource(base, r1, pt.c1 - out.base_c1);

    auto eue_at = [&](double c2) {
      return eval(perturb_resource(at_c1, r2, c2 - out.base_c2))
          .metrics.eue;
    };
    // EUE decreases in c2; bracket the base EUE.
    double lo = 0.0;
    double hi = out.base_c2;
    double eue_lo = eue_at(lo);
    if (eue_lo < out.eue_base - tol) {
      pt.note = "level curve requires negative capacity";
      out.points.push_back(pt);
      continue;
    }
    double eue_hi = eue_at(hi);
    int expansions = 0;
    while (eue_hi > out.eue_base && expansions < 24) {
      lo = hi;
      hi = std::max(1.0, hi) * 2.0;
      eue_hi = eue_at(hi);
      ++expansions;
    }
    if (eue_hi > out.eue_base + tol) {
      pt.note = "bracket expansion failed";
      out.points.push_back(pt);
      continue;
    }
    bool done = false;
    for (int iter = 0; iter < opts.max_iter && !done; ++iter) {
      const double mid = 0.5 * (lo + hi);
      const double e = eue_at(mid);
      if (std::abs(e - out.eue_base) <= tol) {
        pt.c2_actual = mid;
        pt.ok = true;
        done = true;
      } else if (e > out.eue_base) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (!done && hi - lo <= 1e-10 * std::max(1.0, out.base_c2)) {
        // Pinched onto a discontinuity (Monte Carlo step); report the point.
        pt.c2_actual = 0.5 * (lo + hi);
        pt.ok = true;
        pt.note = "converged on a bracket point";
        done = true;
      }
    }
    if (!done) pt.note = "bisection did not converge";
    out.points.push_back(pt);
  }
  return out;
}

inline std::string levels_to_csv(const LevelCurveResult& r,
                                 const std::string& manifest_comment = "") {
  std::string out;
  if (!manifest_comment.empty()) out += manifest_comment + "\n";
  out += "c1,c2_actual,c2_native_linear,c2_mric_linear\n";
  for (const auto& p : r.points) {
    if (!p.ok) continue;  // omitted, flagged upstream
    out += format_fixed(p.c1) + "," + format_fixed(p.c2_actual) + "," +
           format_fixed(p.c2_native_linear) + "," +
           format_fixed(p.c2_mric_linear) + "\n";
  }
  return out;
}

}  // namespace mricap
