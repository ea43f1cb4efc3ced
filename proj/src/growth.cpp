#include "gfrag/growth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace gfrag {
namespace {

SupEstimate exact_sup(double v) {
  return SupEstimate{v, true, false, true};
}
SupEstimate exact_sup_boundary(double v) {
  return SupEstimate{v, true, true, true};
}
SupEstimate exact_infinite() {
  SupEstimate s;
  s.finite = false;
  s.exact = true;
  s.value = std::numeric_limits<double>::infinity();
  return s;
}

}  // namespace

GrowthRate GrowthRate::constant(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("growth constant: need c > 0");
  GrowthRate r;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "constant(c=%g)", c);
  r.name = buf;
  r.family = GrowthFamily::Constant;
  r.k = c;
  r.eval = [c](double) { return c; };
  r.primitive_exact = [c](double x, double y) { return (y - x) / c; };
  r.varpi_exact = exact_infinite();          // c/z blows up at zero
  r.c_tilde_exact = exact_sup_boundary(c);   // c/(1+z) -> c as z -> 0
  r.c_hat_exact = exact_sup_boundary(c);     // c/z -> c as z -> 1+
  return r;
}

GrowthRate GrowthRate::linear(double k) {
  if (!(k > 0.0)) throw std::invalid_argument("growth linear: need k > 0");
  GrowthRate r;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "linear(k=%g)", k);
  r.name = buf;
  r.family = GrowthFamily::Linear;
  r.k = k;
  r.eval = [k](double x) { return k * x; };
  r.primitive_exact = [k](double x, double y) { return std::log(y / x) / k; };
  r.varpi_exact = exact_sup(k);
  r.c_tilde_exact = exact_sup_boundary(k);   // k z/(1+z) -> k as z -> inf
  r.c_hat_exact = exact_sup(k);
  return r;
}

GrowthRate GrowthRate::affine(double k) {
  if (!(k > 0.0)) throw std::invalid_argument("growth affine: need k > 0");
  GrowthRate r;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "affine(k=%g)", k);
  r.name = buf;
  r.family = GrowthFamily::Affine;
  r.k = k;
  r.eval = [k](double x) { return k * (1.0 + x); };
  r.primitive_exact = [k](double x, double y) {
    return std::log1p((y - x) / (1.0 + x)) / k;
  };
  r.varpi_exact = exact_infinite();          // k(1+z)/z blows up at zero
  r.c_tilde_exact = exact_sup(k);
  r.c_hat_exact = exact_sup_boundary(2.0 * k);  // k(1+z)/z -> 2k as z -> 1+
  return r;
}

GrowthRate GrowthRate::power(double k, double p) {
  if (!(k > 0.0)) throw std::invalid_argument("growth power: need k > 0");
  GrowthRate r;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "power(k=%g,p=%g)", k, p);
  r.name = buf;
  r.family = GrowthFamily::Power;
  r.k = k;
  r.p = p;
  r.eval = [k, p](double x) { return k * std::pow(x, p); };
  if (p == 1.0) {
    r.primitive_exact = [k](double x, double y) { return std::log(y / x) / k; };
  } else {
    r.primitive_exact = [k, p](double x, double y) {
      return (std::pow(y, 1.0 - p) - std::pow(x, 1.0 - p)) / (k * (1.0 - p));
    };
  }
  // sup k z^{p-1}
  if (p == 1.0) r.varpi_exact = exact_sup(k);
  else r.varpi_exact = exact_infinite();
  // sup k z^p / (1+z)
  if (p > 0.0 && p < 1.0) {
    const double zs = p / (1.0 - p);
    r.c_tilde_exact = exact_sup(k * std::pow(zs, p) / (1.0 + zs));
  } else if (p == 0.0) {
    r.c_tilde_exact = exact_sup_boundary(k);
  } else if (p == 1.0) {
    r.c_tilde_exact = exact_sup_boundary(k);
  } else {
    r.c_tilde_exact = exact_infinite();
  }
  // sup_{z>1} k z^{p-1}
  if (p < 1.0) r.c_hat_exact = exact_sup_boundary(k);
  else if (p == 1.0) r.c_hat_exact = exact_sup(k);
  else r.c_hat_exact = exact_infinite();
  return r;
}

GrowthRate GrowthRate::tabulated(std::vector<double> xs,
                                 std::vector<double> rs) {
  if (xs.size() < 4 || xs.size() != rs.size())
    throw std::invalid_argument("growth tabulated: need >= 4 matched samples");
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(rs[i] > 0.0))
      throw std::invalid_argument("growth tabulated: samples must be positive");
    if (i > 0 && !(xs[i] > xs[i - 1]))
      throw std::invalid_argument("growth tabulated: x samples not increasing");
  }
  GrowthRate r;
  r.name = "tabulated";
  r.family = GrowthFamily::Tabulated;
  r.domain_lo = xs.front();
  r.domain_hi = xs.back();
  // Interpolate log r against log x: positivity is automatic.
  std::vector<double> s(xs.size()), v(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    s[i] = std::log(xs[i]);
    v[i] = std::log(rs[i]);
  }
  auto interp = std::make_shared<MonotoneCubic>(std::move(s), std::move(v));
  const double lo = r.domain_lo, hi = r.domain_hi;
  r.eval = [interp, lo, hi](double x) {
    if (!(x >= lo) || !(x <= hi))
      throw std::domain_error("tabulated growth rate queried outside its table");
    return std::exp((*interp)(std::log(x)));
  };
  return r;
}

const char* RegimeReport::regime_name() const {
  switch (regime) {
    case Regime::PartlySingular: return "partly_singular";
    case Regime::FullySingular: return "fully_singular";
    default: return "neither";
  }
}

double RegimeReport::growth_bound(bool power_weight, double alpha) const {
  const SupEstimate& c = power_weight ? varpi : sublinear_c;
  if (!c.finite)
    throw std::runtime_error(
        power_weight
            ? "growth bound: sup r(z)/z is not finite; the power-weight "
              "estimates do not apply"
            : "growth bound: sup r(z)/(1+z) is not finite; the shifted-weight "
              "estimates do not apply");
  return alpha * c.value;
}

namespace {

SupEstimate scan_sup(const std::function<double(double)>& ratio, double lo,
                     double hi) {
  SupEstimate out;
  const auto best = scan_max_log(ratio, lo, hi, 600);
  out.value = best.value;
  out.at_boundary = best.at_lower_edge || best.at_upper_edge;
  out.exact = false;
  if (out.at_boundary) {
    // Compare against one decade inward: sustained growth toward the edge
    // means the supremum is infinite.
    const double inner = best.at_lower_edge ? lo * 10.0 : hi / 10.0;
    const double v_in = ratio(inner);
    if (v_in > 0.0 && best.value / v_in > 1.05) {
      out.finite = false;
      out.value = std::numeric_limits<double>::infinity();
    }
  }
  return out;
}

}  // namespace

RegimeReport classify_regime(const GrowthRate& r, const ClassifyOptions& opts) {
  RegimeReport rep;
  rep.divergence_threshold = opts.divergence_threshold;
  rep.probe_lo = std::max(opts.probe_lo, r.domain_lo);
  rep.probe_hi = std::min(opts.probe_hi, r.domain_hi);
  auto inv_r = [&r](double x) { return 1.0 / r.eval(x); };

  int decades_down = opts.max_decades;
  int decades_up = opts.max_decades;
  if (r.domain_lo > 0.0)
    decades_down = std::max(1, static_cast<int>(
        std::floor(std::log10(1.0 / r.domain_lo))));
  if (std::isfinite(r.domain_hi))
    decades_up = std::max(1, static_cast<int>(
        std::floor(std::log10(r.domain_hi))));
  decades_down = std::min(decades_down, opts.max_decades);
  decades_up = std::min(decades_up, opts.max_decades);

  rep.lower = probe_improper_integral(inv_r, 1.0, -1, decades_down,
                                      opts.divergence_threshold);
  rep.upper = probe_improper_integral(inv_r, 1.0, +1, decades_up,
                                      opts.divergence_threshold);

  // Constants: exact values from the family when available, probed otherwise.
  auto ratio_z = [&r](double z) { return r.eval(z) / z; };
  auto ratio_1z = [&r](double z) { return r.eval(z) / (1.0 + z); };
  rep.varpi = r.varpi_exact ? *r.varpi_exact
                            : scan_sup(ratio_z, rep.probe_lo, rep.probe_hi);
  rep.c_tilde = r.c_tilde_exact
                    ? *r.c_tilde_exact
                    : scan_sup(ratio_1z, rep.probe_lo, rep.probe_hi);
  rep.c_hat = r.c_hat_exact
                  ? *r.c_hat_exact
                  : scan_sup(ratio_z, std::max(1.0, rep.probe_lo), rep.probe_hi);
  // inf{C : r <= C(1+z)} coincides with sup r/(1+z).
  rep.sublinear_c = rep.c_tilde;

  if (rep.lower.verdict == TailVerdict::Inconclusive ||
      rep.upper.verdict == TailVerdict::Inconclusive) {
    rep.regime = Regime::Neither;
    throw InconclusiveClassification(
        std::string("regime classification inconclusive: lower [") +
            rep.lower.evidence + "], upper [" + rep.upper.evidence + "]",
        rep);
  }
  if (rep.upper.verdict == TailVerdict::Convergent) {
    rep.regime = Regime::Neither;
  } else if (rep.lower.verdict == TailVerdict::Convergent) {
    rep.regime = Regime::PartlySingular;
  } else {
    rep.regime = Regime::FullySingular;
  }
  return rep;
}

CumulativeTable::CumulativeTable(std::function<double(double)> g, double lo,
                                 double hi, double x_ref,
                                 int points_per_decade)
    : g_(std::move(g)), lo_(lo), hi_(hi), x_ref_(x_ref) {
  if (!(lo > 0.0) || !(hi > lo))
    throw std::invalid_argument("CumulativeTable: need 0 < lo < hi");
  if (!(x_ref >= lo) || !(x_ref <= hi))
    throw std::invalid_argument("CumulativeTable: x_ref outside [lo, hi]");
  const double decades = std::log10(hi / lo);
  n_ = std::max(16, static_cast<int>(std::ceil(decades * points_per_decade)));
  build();
}

void CumulativeTable::build() {
  const double s0 = std::log(lo_), s1 = std::log(hi_);
  s_.resize(n_ + 1);
  vals_.resize(n_ + 1);
  deriv_.resize(n_ + 1);
  for (int i = 0; i <= n_; ++i) s_[i] = s0 + (s1 - s0) * i / n_;
  vals_[0] = 0.0;
  for (int i = 0; i < n_; ++i) {
    const double a = std::exp(s_[i]), b = std::exp(s_[i + 1]);
    vals_[i + 1] = vals_[i] + integrate_log(g_, a, b, 4);
  }
  for (int i = 0; i <= n_; ++i) {
    const double x = std::exp(s_[i]);
    deriv_[i] = g_(x) * x;  // d/ds of the cumulative, exact
  }
  // Shift so the reference point maps to zero.
  MonotoneCubic raw(s_, vals_, deriv_);
  const double at_ref = raw(std::log(x_ref_));
  for (auto& v : vals_) v -= at_ref;
  interp_ = MonotoneCubic(s_, vals_, deriv_);
}

bool CumulativeTable::load_values(const std::vector<double>& vals) {
  if (static_cast<int>(vals.size()) != n_ + 1) return false;
  vals_ = vals;
  interp_ = MonotoneCubic(s_, vals_, deriv_);
  return true;
}

double CumulativeTable::operator()(double x) const {
  if (!(x >= lo_ * (1.0 - 1e-12)) || !(x <= hi_ * (1.0 + 1e-12)))
    throw std::domain_error("CumulativeTable: query outside table range");
  return interp_(std::log(std::min(std::max(x, lo_), hi_)));
}

GrowthPrimitive::GrowthPrimitive(const GrowthRate& r, double lo, double hi) {
  if (r.primitive_exact) {
    exact_ = r.primitive_exact;
  } else {
    auto g = [eval = r.eval](double x) { return 1.0 / eval(x); };
    const double ref = std::min(std::max(1.0, lo), hi);
    table_ = std::make_shared<CumulativeTable>(g, lo, hi, ref, 128);
  }
}

double GrowthPrimitive::between(double x, double y) const {
  if (exact_) return exact_(x, y);
  return (*table_)(y) - (*table_)(x);
}

double GrowthPrimitive::phi(double x) const {
  if (exact_) return exact_(1.0, x);
  return (*table_)(x);
}

}  // namespace gfrag
