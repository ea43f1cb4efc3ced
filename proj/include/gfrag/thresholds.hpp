#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gfrag/fragmentation.hpp"
#include "gfrag/grid.hpp"
#include "gfrag/growth.hpp"
#include "gfrag/quadrature.hpp"

namespace gfrag {

// Probe layout for the filtered limsup of a moment ratio over the sublevel
// filtration {a >= c}.
struct FilterOptions {
  double probe_lo = 1e-6;
  double probe_hi = 1e8;
  int samples_per_decade = 24;
  // Geometric cutoff schedule; cutoffs that empty the probe set are dropped
  // (with a warning flag).
  std::vector<double> schedule = {1.0, 10.0, 100.0, 1e3, 1e4};
};

// limsup_{a(y) -> inf} g(y) estimated as lim_c sup_{a >= c} g.  The sup
// curve is exact over the probes (so non-increasing in c by set inclusion);
// the limit is extrapolated two ways and both are reported.
struct FilteredLimsup {
  double L = 0.0;           // Aitken extrapolation of the sup curve
  double plateau = 0.0;     // sup at the largest nonempty cutoff
  double tail_fit = 0.0;    // asymptote of the g ~ A + B/(1+y) tail fit
  double fit_residual = 0.0;
  bool empty_filtration = false;  // schedule ran past sup a on the probes
  bool inconclusive = false;      // plateau and tail fit straddle 1
  std::vector<std::pair<double, double>> sup_curve;  // (c, sup)
  std::vector<std::pair<double, double>> sup_arg;    // (c, argmax y)
  double probe_lo = 0.0, probe_hi = 0.0;
};

FilteredLimsup filtered_limsup(const std::function<double(double)>& g,
                               const AbsorptionRate& a,
                               const FilterOptions& opts = {});

// Perturbation-smallness condition: the filtered limsup L of the moment
// ratio (n_{1,alpha}/(1+y)^alpha for the shifted weight, n_alpha/y^alpha
// for the power weight) must fall strictly below 1.
struct DeschReport {
  WeightedSpace space;
  double L = 0.0;
  bool satisfied = false;
  double margin = 1e-3;
  // a unbounded at zero makes the shifted-weight condition unsatisfiable
  // (the filtration drags y -> 0 where the ratio cannot drop below 1).
  bool unsatisfiable_at_zero = false;
  // For alpha <= 1 in the shifted spaces the limsup is >= 1 by mass
  // conservation; L is reported as at least that lower bound.
  bool alpha_low_fact = false;
  // a == 0 on the probes: B vanishes and the condition holds vacuously.
  bool trivially_satisfied = false;
  // a bounded (no unbounded flags): B is a bounded perturbation and
  // generation needs no smallness; satisfied unless a moment is infinite.
  bool bounded_rate = false;
  std::string ratio_name;
  FilteredLimsup detail;
};

DeschReport desch_condition(const Kernel& k, const AbsorptionRate& a,
                            const WeightedSpace& space,
                            const FilterOptions& opts = {},
                            double margin = 1e-3);

// Threshold exponent: infimum of alpha with the Desch condition satisfied,
// found by bisection on L(alpha) - 1 (L is non-increasing in alpha).
// Returns +inf when no probed alpha satisfies the condition.
double threshold_alpha_tilde(const Kernel& k, const AbsorptionRate& a,
                             Weight kind, const FilterOptions& opts = {});

// Polynomial growth exponent of the mean fragment count n_0 on the tail,
// by least-squares slope of log n_0 against log(1+y); floored at 1.
struct EtaEstimate {
  double eta = 1.0;
  double slope = 0.0;
  double uncertainty = 0.0;    // slope drift between the two fit windows
  bool superpolynomial = false;
  bool infinite_moment = false;  // n_0 = +inf at a probed y
};

EtaEstimate eta_estimate(const Kernel& k, double tail_lo = 1e2,
                         double tail_hi = 1e6, int samples = 64);

struct ThresholdReport {
  double alpha_tilde = 0.0;
  EtaEstimate eta;
  std::vector<std::pair<double, double>> alpha_probes;  // (alpha, L)
};

ThresholdReport threshold_report(const Kernel& k, const AbsorptionRate& a,
                                 Weight kind, const FilterOptions& opts = {});

// Numeric-evidence verdict on the thinness of the sublevel set {a < c}:
// the integral of 1_{a<c}/r must converge at infinity (partly singular
// regime) and additionally at zero (fully singular regime).
struct SublevelVerdict {
  double c = 0.0;
  TailVerdict at_infinity = TailVerdict::Inconclusive;
  TailVerdict at_zero = TailVerdict::Inconclusive;  // Convergent when unused
  bool requires_zero_side = false;
  bool thin = false;  // all required sides convergent
  std::string evidence;
};

std::vector<SublevelVerdict> thin_sublevel_check(const AbsorptionRate& a,
                                                 const GrowthRate& r,
                                                 const RegimeReport& regime,
                                                 const std::vector<double>& cs);

}  // namespace gfrag
