#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfrag/interp.hpp"
#include "gfrag/quadrature.hpp"

namespace gfrag {

// Supremum estimate for ratios like r(z)/z.  `finite == false` means the
// scan found unbounded growth toward a probe boundary.
struct SupEstimate {
  double value = 0.0;
  bool finite = true;
  bool at_boundary = false;  // attained at the edge of the probe range
  bool exact = false;        // closed-form value, not a scan
};

enum class GrowthFamily { Constant, Linear, Affine, Power, Tabulated };

// Growth rate r(x) > 0 on (0, inf).  Builders attach closed-form primitives
// of 1/r and exact sup-constants where the family admits them.
struct GrowthRate {
  std::string name;
  GrowthFamily family = GrowthFamily::Tabulated;
  double k = 1.0;              // scale parameter for the closed-form families
  double p = 0.0;              // exponent (Power family)
  std::function<double(double)> eval;
  // integral of dt/r over [x, y]; empty when no closed form exists.
  std::function<double(double, double)> primitive_exact;
  std::optional<SupEstimate> varpi_exact;    // sup r(z)/z
  std::optional<SupEstimate> c_tilde_exact;  // sup r(z)/(1+z)
  std::optional<SupEstimate> c_hat_exact;    // sup_{z>1} r(z)/z
  // admissible evaluation range (tabulated rates refuse queries outside).
  double domain_lo = 0.0;
  double domain_hi = std::numeric_limits<double>::infinity();

  static GrowthRate constant(double c);
  static GrowthRate linear(double k);
  static GrowthRate affine(double k);  // r(x) = k (1 + x)
  static GrowthRate power(double k, double p);
  static GrowthRate tabulated(std::vector<double> xs, std::vector<double> rs);
};

enum class Regime { PartlySingular, FullySingular, Neither };

struct ClassifyOptions {
  double probe_lo = 1e-8;
  double probe_hi = 1e8;
  double divergence_threshold = 1e6;
  int max_decades = 48;
};

struct RegimeReport {
  Regime regime = Regime::Neither;
  TailProbeResult lower;  // integral of 1/r over (0, 1]
  TailProbeResult upper;  // integral of 1/r over [1, inf)
  SupEstimate varpi, c_tilde, c_hat, sublinear_c;
  double divergence_threshold = 1e6;
  double probe_lo = 0.0, probe_hi = 0.0;

  const char* regime_name() const;
  // alpha * C for the semigroup growth bound exp(alpha C t): C = sublinear_c
  // for the shifted weight, C = varpi for the power weight.  Throws when the
  // needed constant is not finite.
  double growth_bound(bool power_weight, double alpha) const;
};

// Thrown when the probe evidence is neither clearly convergent nor clearly
// divergent; carries the partial report.  Classification is never guessed.
class InconclusiveClassification : public std::runtime_error {
 public:
  InconclusiveClassification(const std::string& what, RegimeReport partial)
      : std::runtime_error(what), report(std::move(partial)) {}
  RegimeReport report;
};

RegimeReport classify_regime(const GrowthRate& r,
                             const ClassifyOptions& opts = {});

// Cumulative integral G(x) = integral of g over [x_ref, x] (signed) for
// g >= 0, backed by a log-spaced edge table with per-segment Gauss panels
// and a monotone cubic between table points (exact derivatives g at the
// table abscissae).  Used for primitives of 1/r and a/r when no closed form
// exists.
class CumulativeTable {
 public:
  CumulativeTable(std::function<double(double)> g, double lo, double hi,
                  double x_ref, int points_per_decade = 64);
  double operator()(double x) const;  // throws outside [lo, hi]
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  // Serialization for the on-disk cache (values only; the abscissae are
  // regenerated from the header fields).
  std::vector<double> raw_values() const { return vals_; }
  bool load_values(const std::vector<double>& vals);

 private:
  void build();
  std::function<double(double)> g_;
  double lo_, hi_, x_ref_;
  int n_;
  std::vector<double> s_, vals_, deriv_;
  MonotoneCubic interp_;
};

// Uniform access to the primitive of 1/r: closed form when the rate has
// one, otherwise a cumulative table over [lo, hi].
class GrowthPrimitive {
 public:
  GrowthPrimitive(const GrowthRate& r, double lo, double hi);
  // integral of dt/r over [x, y], antisymmetric in (x, y) by construction.
  double between(double x, double y) const;
  // Phi(x) = integral from x_ref = 1.
  double phi(double x) const;
  bool closed_form() const { return static_cast<bool>(exact_); }

 private:
  std::function<double(double, double)> exact_;
  std::shared_ptr<CumulativeTable> table_;
};

}  // namespace gfrag
