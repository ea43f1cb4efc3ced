#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gfrag/grid.hpp"

namespace gfrag {

// Absorption / total fragmentation rate a(x) >= 0.  Builders for the
// power-sum families record the (coef, exponent) terms so downstream code
// can form closed-form primitives of a/r.
struct AbsorptionRate {
  std::string name;
  std::function<double(double)> eval;
  // a(x) = sum_i coef_i x^{pow_i} when `is_power_sum`.
  bool is_power_sum = false;
  std::vector<std::pair<double, double>> terms;  // (coef, exponent)
  bool unbounded_at_zero = false;
  bool unbounded_at_infinity = false;

  static AbsorptionRate zero();
  static AbsorptionRate constant(double c);
  static AbsorptionRate linear(double k);
  static AbsorptionRate affine(double k);  // k (1 + x)
  static AbsorptionRate power(double k, double p);
  static AbsorptionRate power_sum(
      const std::vector<std::pair<double, double>>& terms);
  static AbsorptionRate tabulated(std::vector<double> xs,
                                  std::vector<double> as);
};

enum class KernelFamily { Homogeneous, Separable, PowerLaw, Mixture, Tabulated };

// Daughter-distribution kernel b(x, y): density of fragments of size x from
// a parent of size y (zero for x >= y), normalized so the first moment
// integral of x b(x,y) dx over (0,y) equals y.
//
// Moment queries may legitimately return +infinity (e.g. the zeroth moment
// of a power-law kernel with nu <= -1).
class Kernel {
 public:
  std::string name;
  KernelFamily family = KernelFamily::Homogeneous;

  double b(double x, double y) const { return b_(x, y); }
  // n_alpha(y) = integral of x^alpha b(x,y) dx over (0,y)
  double n_alpha(double y, double alpha) const { return n_alpha_(y, alpha); }
  // n_{1,alpha}(y) = integral of (1+x)^alpha b(x,y) dx
  double n_one_alpha(double y, double alpha) const {
    return n_one_alpha_(y, alpha);
  }
  // n_0(y) = integral of b(x,y) dx (mean fragment count), may be +inf
  double n_zero(double y) const { return n_zero_(y); }

  // |n_1(y)/y - 1|: deviation from exact mass conservation of daughters.
  double conservativity_defect(double y) const;

  // Metadata used by the irreducibility checks.
  bool support_unbounded_in_y = true;  // b(x, .) > 0 for arbitrarily large y
  double inf_support_fraction = 0.0;   // p with inf supp b(., y) <= p y
  bool locally_bounded = true;

  static Kernel uniform_binary();
  static Kernel homogeneous(std::function<double(double)> h,
                            const std::string& name);
  static Kernel power_law(double nu);
  static Kernel separable(std::function<double(double)> beta,
                          const std::string& name);
  static Kernel mixture(std::vector<Kernel> parts, std::vector<double> weights);
  // Samples on a (z, y) grid with z = x/y in (0, 1); log-log bilinear
  // interpolation, zero outside the sampled z-range.
  static Kernel tabulated(std::vector<double> zs, std::vector<double> ys,
                          std::vector<std::vector<double>> vals);

  std::function<double(double, double)> b_;
  std::function<double(double, double)> n_alpha_;
  std::function<double(double, double)> n_one_alpha_;
  std::function<double(double)> n_zero_;
};

// (B phi)(x) = integral of a(y) b(x,y) phi(y) dy over (x, x_max), assembled
// on the grid with the trapezoid weights plus an explicit half-cell
// correction at the diagonal.
GridFunction apply_B(const Kernel& k, const AbsorptionRate& a,
                     const GridFunction& phi,
                     QuadRule rule = QuadRule::LogTrapezoid);

// Dense matrix of apply_B (row = target size, column = source node).
std::vector<std::vector<double>> assemble_B(const Kernel& k,
                                            const AbsorptionRate& a,
                                            const Grid& grid,
                                            QuadRule rule = QuadRule::LogTrapezoid);

struct IrreducibilityReport {
  // Hypothesis A: unbounded support of y -> a(y) b(x,y) for a.e. x.
  bool support_route = false;
  std::string support_evidence;
  // Hypothesis B: a > 0 a.e. plus inf supp b(., y) <= p y with p < 1.
  bool positivity_route = false;
  std::string positivity_evidence;
  double p_fraction = 1.0;      // numeric estimate of sup_y inf-support ratio
  double n_zero_margin = 0.0;   // inf_y n_0(y) - 1 over the probes
  bool verdict = false;         // either route certified
};

struct IrreducibilityOptions {
  double probe_lo = 1e-4;
  double probe_hi = 1e6;
  int probes = 60;
  double p_max = 0.99;
};

IrreducibilityReport irreducibility_report(const Kernel& k,
                                           const AbsorptionRate& a,
                                           const IrreducibilityOptions& opts = {});

}  // namespace gfrag
