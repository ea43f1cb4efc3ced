#pragma once

#include <functional>
#include <string>
#include <vector>

namespace gfrag {

// Composite Gauss-Legendre integration of f over [a, b] in linear coordinates.
double integrate_gl(const std::function<double(double)>& f, double a, double b,
                    int panels = 8);

// Same rule applied in s = log x, i.e. integral of f(x) dx over [a, b] with
// 0 < a < b.  Robust for integrands with power-law behaviour near zero.
double integrate_log(const std::function<double(double)>& f, double a, double b,
                     int panels = 8);

// Adaptive Simpson with absolute/relative tolerance.  Used where the
// integrand has no known structure.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol = 1e-12, int max_depth = 48);

// Integral of f over (0, 1] where f(z)*z -> 0 as z -> 0 (algebraic
// singularities milder than 1/z).  Computed as a composite rule in log z
// down to exp(s_floor).
double integrate_unit_singular(const std::function<double(double)>& f,
                               double s_floor = -60.0, int panels = 48);

// Classification of an improper integral from decade-by-decade increments.
enum class TailVerdict { Convergent, Divergent, Inconclusive };

struct TailProbeResult {
  TailVerdict verdict = TailVerdict::Inconclusive;
  double value = 0.0;       // integral over the probed range
  double tail_estimate = 0.0;  // extrapolated remainder (convergent case)
  int decades_probed = 0;
  std::string evidence;     // human-readable summary of the increment pattern
};

// Probes integral of g over decades marching away from x_start:
// direction=+1 probes [x_start, x_start*10^decades), direction=-1 probes
// (x_start/10^decades, x_start].  Each decade is integrated in log
// coordinates.  Divergence is declared when the extrapolated total exceeds
// `threshold` and the increments do not decay; convergence when increments
// decay geometrically and the remainder estimate is below `rel_tol` of the
// running total.
TailProbeResult probe_improper_integral(const std::function<double(double)>& g,
                                        double x_start, int direction,
                                        int max_decades = 40,
                                        double threshold = 1e6,
                                        double rel_tol = 1e-10);

// Maximises a scalar function over [lo, hi] by log-spaced scan plus
// golden-section refinement.  Returns {argmax, max}.
struct ScanMaxResult {
  double arg = 0.0;
  double value = 0.0;
  bool at_lower_edge = false;
  bool at_upper_edge = false;
};
ScanMaxResult scan_max_log(const std::function<double(double)>& f, double lo,
                           double hi, int samples = 400);

}  // namespace gfrag
