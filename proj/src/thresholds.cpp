#include "gfrag/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace gfrag {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LineFit {
  double slope = 0.0, intercept = 0.0, rms = 0.0;
  int count = 0;
};

LineFit fit_line(const std::vector<double>& u, const std::vector<double>& v) {
  LineFit f;
  f.count = static_cast<int>(u.size());
  if (f.count < 2) return f;
  double su = 0, sv = 0, suu = 0, suv = 0;
  for (int i = 0; i < f.count; ++i) {
    su += u[i];
    sv += v[i];
    suu += u[i] * u[i];
    suv += u[i] * v[i];
  }
  const double n = f.count;
  const double den = n * suu - su * su;
  if (den == 0.0) return f;
  f.slope = (n * suv - su * sv) / den;
  f.intercept = (sv - f.slope * su) / n;
  double ss = 0;
  for (int i = 0; i < f.count; ++i) {
    const double d = v[i] - (f.intercept + f.slope * u[i]);
    ss += d * d;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

}  // namespace

FilteredLimsup filtered_limsup(const std::function<double(double)>& g,
                               const AbsorptionRate& a,
                               const FilterOptions& opts) {
  if (!(opts.probe_lo > 0.0) || !(opts.probe_hi > opts.probe_lo))
    throw std::invalid_argument("filtered_limsup: bad probe range");
  for (size_t i = 1; i < opts.schedule.size(); ++i)
    if (!(opts.schedule[i] > opts.schedule[i - 1]))
      throw std::invalid_argument("filtered_limsup: schedule not increasing");

  FilteredLimsup out;
  out.probe_lo = opts.probe_lo;
  out.probe_hi = opts.probe_hi;

  const double decades = std::log10(opts.probe_hi / opts.probe_lo);
  const int n =
      std::max(16, static_cast<int>(std::ceil(decades *
                                              opts.samples_per_decade))) +
      1;
  std::vector<double> ys(n), as(n), gs(n);
  for (int i = 0; i < n; ++i) {
    ys[i] = opts.probe_lo *
            std::pow(opts.probe_hi / opts.probe_lo,
                     static_cast<double>(i) / (n - 1));
    as[i] = a.eval(ys[i]);
    gs[i] = g(ys[i]);
  }

  double c_last = 0.0;
  for (double c : opts.schedule) {
    double sup = -kInf, arg = 0.0;
    bool any = false;
    for (int i = 0; i < n; ++i) {
      if (as[i] >= c) {
        any = true;
        if (gs[i] > sup) {
          sup = gs[i];
          arg = ys[i];
        }
      }
    }
    if (!any) {
      out.empty_filtration = true;
      break;
    }
    out.sup_curve.emplace_back(c, sup);
    out.sup_arg.emplace_back(c, arg);
    c_last = c;
  }

  if (out.sup_curve.empty()) {
    out.empty_filtration = true;
    return out;
  }
  out.plateau = out.sup_curve.back().second;
  out.L = out.plateau;

  const size_t m = out.sup_curve.size();
  if (m >= 3) {
    const double s1 = out.sup_curve[m - 3].second;
    const double s2 = out.sup_curve[m - 2].second;
    const double s3 = out.sup_curve[m - 1].second;
    if (std::isfinite(s1) && std::isfinite(s2) && std::isfinite(s3)) {
      const double d1 = s2 - s1, d2 = s3 - s2;
      const double den = d2 - d1;
      if (std::abs(den) > 1e-14 * std::max(1.0, std::abs(s3))) {
        const double extr = s3 - d2 * d2 / den;
        // Reject wild extrapolations (non-geometric decay of the steps).
        if (std::abs(extr - s3) <= 10.0 * std::abs(d2)) out.L = extr;
      }
    } else {
      out.L = kInf;
    }
  } else if (!std::isfinite(out.plateau)) {
    out.L = kInf;
  }

  // Tail fit g ~ A + B/(1+y) over the last probed decade inside the final
  // sublevel set.
  std::vector<double> u, v;
  for (int i = 0; i < n; ++i) {
    if (ys[i] >= opts.probe_hi / 10.0 && as[i] >= c_last &&
        std::isfinite(gs[i])) {
      u.push_back(1.0 / (1.0 + ys[i]));
      v.push_back(gs[i]);
    }
  }
  if (u.size() >= 4) {
    const LineFit f = fit_line(u, v);
    out.tail_fit = f.intercept;
    out.fit_residual = f.rms;
  } else {
    out.tail_fit = out.plateau;
  }

  constexpr double band = 1e-6;
  if (std::isfinite(out.L) &&
      ((out.L > 1.0 + band && out.tail_fit < 1.0 - band) ||
       (out.L < 1.0 - band && out.tail_fit > 1.0 + band)))
    out.inconclusive = true;
  return out;
}

DeschReport desch_condition(const Kernel& k, const AbsorptionRate& a,
                            const WeightedSpace& space,
                            const FilterOptions& opts, double margin) {
  space.validate();
  DeschReport rep;
  rep.space = space;
  rep.margin = margin;
  const bool shifted = space.kind == Weight::Shifted;
  const double alpha = space.alpha;
  rep.ratio_name = shifted ? "n_{1,alpha}(y)/(1+y)^alpha"
                           : "n_alpha(y)/y^alpha";
  std::function<double(double)> g;
  if (shifted)
    g = [&k, alpha](double y) {
      return k.n_one_alpha(y, alpha) / std::pow(1.0 + y, alpha);
    };
  else
    g = [&k, alpha](double y) {
      return k.n_alpha(y, alpha) / std::pow(y, alpha);
    };
  rep.detail = filtered_limsup(g, a, opts);

  // A rate that never reaches the first cutoff: either a == 0 (B vanishes)
  // or a bounded positive (B is a bounded perturbation).
  double a_sup = 0.0;
  {
    const int n = 200;
    for (int i = 0; i <= n; ++i) {
      const double y = opts.probe_lo *
                       std::pow(opts.probe_hi / opts.probe_lo,
                                static_cast<double>(i) / n);
      a_sup = std::max(a_sup, a.eval(y));
    }
  }
  if (a_sup == 0.0) {
    rep.trivially_satisfied = true;
    rep.L = 0.0;
    rep.satisfied = true;
    return rep;
  }
  if (!a.unbounded_at_infinity && !a.unbounded_at_zero) {
    rep.bounded_rate = true;
    rep.L = rep.detail.L;
    // Bounded a: generation needs no smallness, only finite moments of the
    // kernel over the probes.
    double worst = 0.0;
    for (const auto& [c, s] : rep.detail.sup_curve)
      worst = std::max(worst, s);
    rep.satisfied = std::isfinite(worst);
    return rep;
  }

  rep.L = rep.detail.L;
  if (shifted && a.unbounded_at_zero) rep.unsatisfiable_at_zero = true;
  if (shifted && alpha <= 1.0) {
    rep.alpha_low_fact = true;
    rep.L = std::max(rep.L, 1.0);  // proven lower bound (mass conservation)
  }
  rep.satisfied = !rep.unsatisfiable_at_zero && !rep.detail.inconclusive &&
                  !rep.detail.empty_filtration &&
                  std::isfinite(rep.L) && rep.L < 1.0 - margin;
  return rep;
}

double threshold_alpha_tilde(const Kernel& k, const AbsorptionRate& a,
                             Weight kind, const FilterOptions& opts) {
  auto L_of = [&](double alpha) {
    return desch_condition(k, a, WeightedSpace{kind, alpha}, opts).L;
  };

  double lo = 1.0;
  double l_lo = L_of(lo);
  if (l_lo < 1.0 - 1e-9) return 1.0;  // floor: thresholds start at 1

  double hi = 2.0;
  double l_hi = L_of(hi);
  double prev = l_lo;
  while (!(l_hi < 1.0) && hi < 64.0 * (1.0 + 1e-12)) {
    if (std::isfinite(l_hi) && std::isfinite(prev) && l_hi > prev + 1e-6)
      throw std::runtime_error(
          "threshold: moment ratio increased with alpha; kernel data is not "
          "a valid fragment distribution");
    prev = l_hi;
    lo = hi;
    hi *= 2.0;
    l_hi = L_of(hi);
  }
  if (!(l_hi < 1.0)) return kInf;

  while (hi - lo > 1e-4) {
    const double mid = 0.5 * (lo + hi);
    if (L_of(mid) < 1.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

EtaEstimate eta_estimate(const Kernel& k, double tail_lo, double tail_hi,
                         int samples) {
  if (!(tail_lo > 0.0) || !(tail_hi > tail_lo) || samples < 8)
    throw std::invalid_argument("eta_estimate: bad tail probe");
  EtaEstimate out;

  auto window = [&](double lo, double hi, bool& any_inf) {
    std::vector<double> u, v;
    for (int i = 0; i < samples; ++i) {
      const double y =
          lo * std::pow(hi / lo, static_cast<double>(i) / (samples - 1));
      const double n0 = k.n_zero(y);
      if (!std::isfinite(n0)) {
        any_inf = true;
        continue;
      }
      if (n0 <= 0.0) continue;
      u.push_back(std::log1p(y));
      v.push_back(std::log(n0));
    }
    return fit_line(u, v);
  };

  bool any_inf = false;
  const LineFit f1 = window(tail_lo, tail_hi, any_inf);
  const LineFit f2 = window(tail_lo * 100.0, tail_hi * 100.0, any_inf);
  if (any_inf) {
    out.infinite_moment = true;
    out.eta = kInf;
    return out;
  }
  if (f1.count < 4 || f2.count < 4) {
    out.uncertainty = kInf;
    return out;  // too few usable probes; floor value with no confidence
  }
  out.slope = f2.slope;
  out.uncertainty = std::abs(f2.slope - f1.slope) + f2.rms;
  if (f2.slope - f1.slope > 0.5) {
    out.superpolynomial = true;
    out.eta = kInf;
    return out;
  }
  out.eta = std::max(1.0, f2.slope);
  return out;
}

ThresholdReport threshold_report(const Kernel& k, const AbsorptionRate& a,
                                 Weight kind, const FilterOptions& opts) {
  ThresholdReport rep;
  rep.alpha_tilde = threshold_alpha_tilde(k, a, kind, opts);
  rep.eta = eta_estimate(k);
  for (double alpha : {1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0})
    rep.alpha_probes.emplace_back(
        alpha, desch_condition(k, a, WeightedSpace{kind, alpha}, opts).L);
  return rep;
}

std::vector<SublevelVerdict> thin_sublevel_check(
    const AbsorptionRate& a, const GrowthRate& r, const RegimeReport& regime,
    const std::vector<double>& cs) {
  auto march = [&](double c, bool upward) {
    // Decade-by-decade integral of 1_{a<c}/r with 64 log subintervals per
    // decade; the indicator is sampled at subinterval midpoints.
    std::vector<double> pieces;
    double total = 0.0;
    const int max_dec = 8;
    for (int d = 0; d < max_dec; ++d) {
      double lo = upward ? std::pow(10.0, d) : std::pow(10.0, -(d + 1));
      if (!upward && r.domain_lo > 0.0 && lo < r.domain_lo)
        lo = r.domain_lo;
      const double hi = upward ? lo * 10.0 : std::pow(10.0, -d);
      if (!(lo < hi)) break;
      const int m = 64;
      double piece = 0.0;
      for (int i = 0; i < m; ++i) {
        const double e0 = lo * std::pow(hi / lo, static_cast<double>(i) / m);
        const double e1 =
            lo * std::pow(hi / lo, static_cast<double>(i + 1) / m);
        const double mid = std::sqrt(e0 * e1);
        if (a.eval(mid) < c)
          piece += integrate_gl([&r](double x) { return 1.0 / r.eval(x); },
                                e0, e1, 1);
      }
      pieces.push_back(piece);
      total += piece;
      if (total > 1e6) return std::make_pair(TailVerdict::Divergent, total);
    }
    const size_t np = pieces.size();
    if (np >= 2) {
      const double last = pieces[np - 1], prev = pieces[np - 2];
      if (last == 0.0 && prev == 0.0)
        return std::make_pair(TailVerdict::Convergent, total);
      if (last < 1e-10 * std::max(total, 1.0))
        return std::make_pair(TailVerdict::Convergent, total);
      if (prev > 0.0 && last / prev < 0.5)
        return std::make_pair(TailVerdict::Convergent, total);
      if (prev > 0.0 && last >= 0.8 * prev)
        return std::make_pair(TailVerdict::Divergent, total);
    }
    return std::make_pair(TailVerdict::Inconclusive, total);
  };

  std::vector<SublevelVerdict> out;
  for (double c : cs) {
    if (!(c > 0.0))
      throw std::invalid_argument("thin_sublevel_check: cutoffs must be > 0");
    SublevelVerdict v;
    v.c = c;
    const auto up = march(c, true);
    v.at_infinity = up.first;
    v.requires_zero_side = regime.regime == Regime::FullySingular;
    double down_total = 0.0;
    if (v.requires_zero_side) {
      const auto dn = march(c, false);
      v.at_zero = dn.first;
      down_total = dn.second;
    } else {
      v.at_zero = TailVerdict::Convergent;
    }
    v.thin = v.at_infinity == TailVerdict::Convergent &&
             v.at_zero == TailVerdict::Convergent;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "integral of 1_{a<c}/r: %.4g toward infinity%s",
                  up.second,
                  v.requires_zero_side ? " (zero side probed too)" : "");
    v.evidence = buf;
    if (v.requires_zero_side) {
      char buf2[80];
      std::snprintf(buf2, sizeof(buf2), "; %.4g toward zero", down_total);
      v.evidence += buf2;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace gfrag
