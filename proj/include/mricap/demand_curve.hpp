#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "mricap/accreditation.hpp"
#include "mricap/engine.hpp"
#include "mricap/errors.hpp"
#include "mricap/perturb.hpp"

namespace mricap {

enum class CurveSpace { native, mric };

struct CurvePoint {
  double quantity_mw = 0.0;
  double price_per_mw = 0.0;  // $/MW-period
};

// Monotone nonincreasing marginal-benefit curve for system capacity, in
// native-capacity or MRIC coordinates.
struct DemandCurve {
  std::vector<CurvePoint> points;  // quantities strictly increasing
  CurveSpace space = CurveSpace::native;
  double voll = 0.0;
  double rmri_sys = 1.0;  // meaningful in mric space
};

struct CurveBuildInfo {
  std::vector<double> price_se;
  std::vector<std::size_t> repaired_points;
  std::vector<std::string> warnings;
};

namespace detail {

// Pool-adjacent-violators projection onto nonincreasing sequences.
inline std::vector<double> isotonic_nonincreasing(
    const std::vector<double>& y) {
  struct Block {
    double sum;
    int count;
  };
  std::vector<Block> blocks;
  for (double v : y) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1) {
      auto& a = blocks[blocks.size() - 2];
      auto& b = blocks.back();
      if (a.sum / a.count >= b.sum / b.count) break;
      a.sum += b.sum;
      a.count += b.count;
      blocks.pop_back();
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const auto& b : blocks)
    out.insert(out.end(), b.count, b.sum / b.count);
  return out;
}

}  // namespace detail

inline void validate_curve(const DemandCurve& c) {
  if (c.points.empty()) throw ConfigError("demand curve: no points");
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    if (!(c.points[i].price_per_mw >= 0.0))
      throw ConfigError("demand curve: negative price");
    if (i > 0) {
      if (!(c.points[i].quantity_mw > c.points[i - 1].quantity_mw))
        throw ConfigError("demand curve: quantities not strictly increasing");
      if (c.points[i].price_per_mw > c.points[i - 1].price_per_mw + 1e-9)
        throw ConfigError("demand curve: prices not nonincreasing");
    }
  }
}

// Marginal benefit at quantity q: flat extension left of the first point,
// linear interpolation between points, flat extension right of the last.
inline double curve_price_at(const DemandCurve& c, double q) {
  const auto& pts = c.points;
  if (q <= pts.front().quantity_mw) return pts.front().price_per_mw;
  if (q >= pts.back().quantity_mw) return pts.back().price_per_mw;
  auto it = std::lower_bound(
      pts.begin(), pts.end(), q,
      [](const CurvePoint& p, double v) { return p.quantity_mw < v; });
  const CurvePoint& hi = *it;
  const CurvePoint& lo = *(it - 1);
  const double w = (q - lo.quantity_mw) / (hi.quantity_mw - lo.quantity_mw);
  return lo.price_per_mw + w * (hi.price_per_mw - lo.price_per_mw);
}

// Integral of the piecewise-linear curve over [qa, qb] (flat extensions
// apply outside the point range).
inline double curve_area(const DemandCurve& c, double qa, double qb) {
  if (qb < qa) throw ConfigError("curve_area: qb < qa");
  double area = 0.0;
  // Collect breakpoints within [qa, qb].
  std::vector<double> qs{qa};
  for (const auto& p : c.points)
    if (p.quantity_mw > qa && p.quantity_mw < qb) qs.push_back(p.quantity_mw);
  qs.push_back(qb);
  for (std::size_t i = 0; i + 1 < qs.size(); ++i)
    area += 0.5 * (curve_price_at(c, qs[i]) + curve_price_at(c, qs[i + 1])) *
            (qs[i + 1] - qs[i]);
  return area;
}

// Builds the native-capacity demand curve by sweeping proportional scalings
// of the whole base-case mix. Each price is VOLL times the drop in EUE per
// MW of extra capacity along the same proportional direction, a common
// random numbers directional derivative. Small monotonicity violations
// (within twice the combined standard error) are repaired by isotonic
// projection and flagged; larger ones fail the build.
inline DemandCurve native_demand_curve(const BaseCase& base,
                                       const std::vector<double>& sweep,
                                       const Evaluator& eval,
                                       CurveBuildInfo* info = nullptr) {
  if (sweep.empty()) throw ConfigError("demand curve: empty sweep");
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    if (!(sweep[i] > 0.0))
      throw ConfigError("demand curve: sweep factors must be > 0");
    if (i > 0 && !(sweep[i] > sweep[i - 1]))
      throw ConfigError("demand curve: sweep factors must be increasing");
  }
  const double c0 = system_native_capacity(base);
  if (!(c0 > 0.0))
    throw ConfigError("demand curve: system has no native capacity");

  std::vector<BaseCase> cases;
  cases.reserve(2 * sweep.size());
  for (double s : sweep) {
    cases.push_back(scale_system(base, s));
    // One extra MW of system capacity along the mix direction.
    cases.push_back(scale_system(base, s + 1.0 / c0));
  }
  std::vector<const BaseCase*> ptrs;
  for (const auto& c : cases) ptrs.push_back(&c);
  std::vector<EvalResult> evals = eval.batch(ptrs);

  std::vector<double> price(sweep.size()), se(sweep.size());
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    FdEstimate fd = detail::fd_difference(evals[2 * i], evals[2 * i + 1],
                                          1.0, detail::FdMetric::eue);
    price[i] = base.voll * fd.value;
    se[i] = base.voll * fd.se;
  }

  std::vector<std::size_t> repaired;
  bool violated = false;
  for (std::size_t i = 0; i + 1 < sweep.size(); ++i) {
    const double excess = price[i + 1] - price[i];
    if (excess > 1e-9) {
      violated = true;
      const double gate =
          2.0 * std::sqrt(se[i] * se[i] + se[i + 1] * se[i + 1]);
      if (excess > gate)
        throw NumericalError(
            "demand curve: non-monotone prices beyond Monte Carlo noise at "
            "sweep point " +
            std::to_string(sweep[i + 1]) + " (excess " +
            std::to_string(excess) + ", 2*SE gate " + std::to_string(gate) +
            ")");
    }
  }
  if (violated) {
    std::vector<double> fixed = detail::isotonic_nonincreasing(price);
    for (std::size_t i = 0; i < price.size(); ++i)
      if (fixed[i] != price[i]) repaired.push_back(i);
    price = std::move(fixed);
  }

  DemandCurve curve;
  curve.space = CurveSpace::native;
  curve.voll = base.voll;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    // CRN monotonicity keeps finite differences nonnegative; clear any
    // residual negative zero.
    curve.points.push_back({sweep[i] * c0, std::max(0.0, price[i])});
  }
  if (info) {
    info->price_se = std::move(se);
    info->repaired_points = std::move(repaired);
    if (!info->repaired_points.empty())
      info->warnings.push_back(
          "demand curve: repaired small monotonicity violations at " +
          std::to_string(info->repaired_points.size()) + " point(s)");
  }
  validate_curve(curve);
  return curve;
}

// Native-capacity-weighted average rMRI of the mix (the system demand rMRI).
inline double system_demand_rmri(
    const std::vector<AccreditationEntry>& entries) {
  double num = 0.0, den = 0.0;
  for (const auto& e : entries) {
    if (e.is_group || e.is_group_sum || !e.rmri.has_value()) continue;
    num += *e.rmri * e.icap;
    den += e.icap;
  }
  if (entries.empty() || den <= 0.0)
    throw ConfigError("system_demand_rmri: no usable entries");
  return num / den;
}

// Converts a native curve to MRIC coordinates: quantities scale by the
// system demand rMRI and prices by its reciprocal, preserving the area
// under the curve over corresponding ranges.
inline DemandCurve to_mric_curve(const DemandCurve& native, double rmri_sys,
                                 std::vector<std::string>* warnings =
                                     nullptr) {
  if (native.space != CurveSpace::native)
    throw ConfigError("to_mric_curve: expected a native-space curve");
  if (!(rmri_sys > 0.0))
    throw ConfigError("to_mric_curve: rmri_sys must be > 0");
  if (rmri_sys > 1.0 && warnings)
    warnings->push_back("to_mric_curve: rmri_sys " +
                        std::to_string(rmri_sys) +
                        " exceeds 1; proceeding anyway");
  DemandCurve out;
  out.space = CurveSpace::mric;
  out.voll = native.voll;
  out.rmri_sys = rmri_sys;
  for (const auto& p : native.points)
    out.points.push_back(
        {p.quantity_mw * rmri_sys, p.price_per_mw / rmri_sys});
  return out;
}

// Inverse transform, for round-trip checks and for clearing in either space.
inline DemandCurve to_native_curve(const DemandCurve& mric) {
  if (mric.space != CurveSpace::mric)
    throw ConfigError("to_native_curve: expected an mric-space curve");
  DemandCurve out;
  out.space = CurveSpace::native;
  out.voll = mric.voll;
  out.rmri_sys = 1.0;
  for (const auto& p : mric.points)
    out.points.push_back(
        {p.quantity_mw / mric.rmri_sys, p.price_per_mw * mric.rmri_sys});
  return out;
}

// --- bit-stable CSV serialization (fixed six decimal places) ---

inline std::string format_fixed(double v, int places = 6) {
  if (v == 0.0) v = 0.0;  // normalize negative zero
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", places, v);
  return buf;
}

inline std::string curve_to_csv(const DemandCurve& c,
                                const std::string& manifest_comment = "") {
  std::string out;
  if (!manifest_comment.empty()) out += manifest_comment + "\n";
  out += "quantity_mw,price_per_mw,space,rmri_sys\n";
  const char* space = c.space == CurveSpace::native ? "native" : "mric";
  for (const auto& p : c.points) {
    out += format_fixed(p.quantity_mw) + "," + format_fixed(p.price_per_mw) +
           "," + space + "," + format_fixed(c.rmri_sys) + "\n";
  }
  return out;
}

inline DemandCurve curve_from_csv(const std::string& text) {
  DemandCurve c;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  bool space_set = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "quantity_mw,price_per_mw,space,rmri_sys")
        throw ConfigError("curve csv: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string q, p, s, r;
    if (!std::getline(row, q, ',') || !std::getline(row, p, ',') ||
        !std::getline(row, s, ',') || !std::getline(row, r, ','))
      throw ConfigError("curve csv: malformed row '" + line + "'");
    CurveSpace space;
    if (s == "native")
      space = CurveSpace::native;
    else if (s == "mric")
      space = CurveSpace::mric;
    else
      throw ConfigError("curve csv: unknown space '" + s + "'");
    if (!space_set) {
      c.space = space;
      c.rmri_sys = std::stod(r);
      space_set = true;
    } else if (space != c.space) {
      throw ConfigError("curve csv: mixed coordinate spaces");
    }
    c.points.push_back({std::stod(q), std::stod(p)});
  }
  if (!header_seen) throw ConfigError("curve csv: missing header");
  validate_curve(c);
  return c;
}

}  // namespace mricap
