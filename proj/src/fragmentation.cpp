#include "gfrag/fragmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

#include "gfrag/quadrature.hpp"

namespace gfrag {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// integral of f over (0,1] that may diverge at zero: computed with two log
// floors; disagreement flags divergence.
double unit_integral_or_inf(const std::function<double(double)>& f) {
  const double i1 = integrate_unit_singular(f, -30.0, 24);
  const double i2 = integrate_unit_singular(f, -60.0, 48);
  if (!std::isfinite(i1) || !std::isfinite(i2)) return kInf;
  if (std::abs(i2 - i1) > 1e-8 * std::max(1.0, std::abs(i2))) return kInf;
  return i2;
}

// integral of f over (0, y] by decades marching down from y; +inf when the
// increments do not decay.
double lower_integral_or_inf(const std::function<double(double)>& f, double y) {
  double total = 0.0, prev = kInf;
  double hi = y;
  for (int d = 0; d < 60; ++d) {
    const double lo = hi / 10.0;
    const double piece = integrate_log(f, lo, hi, 8);
    if (!std::isfinite(piece)) return kInf;
    total += piece;
    if (d >= 2) {
      if (piece < 1e-14 * std::max(total, 1e-300)) return total;
      if (d >= 30 && prev > 0.0 && piece / prev > 0.8) return kInf;
    }
    prev = piece;
    hi = lo;
  }
  return total;
}

double binom(int n, int m) {
  double c = 1.0;
  for (int i = 0; i < m; ++i) c = c * (n - i) / (i + 1);
  return c;
}

bool near_integer(double a, int& out) {
  const double r = std::round(a);
  if (std::abs(a - r) < 1e-12 && r >= 0.0 && r <= 20.0) {
    out = static_cast<int>(r);
    return true;
  }
  return false;
}

}  // namespace

AbsorptionRate AbsorptionRate::zero() {
  AbsorptionRate a;
  a.name = "zero";
  a.eval = [](double) { return 0.0; };
  a.is_power_sum = true;
  return a;
}

AbsorptionRate AbsorptionRate::constant(double c) {
  if (!(c >= 0.0)) throw std::invalid_argument("absorption constant: c >= 0");
  AbsorptionRate a;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "constant(c=%g)", c);
  a.name = buf;
  a.eval = [c](double) { return c; };
  a.is_power_sum = true;
  a.terms = {{c, 0.0}};
  return a;
}

AbsorptionRate AbsorptionRate::linear(double k) {
  if (!(k > 0.0)) throw std::invalid_argument("absorption linear: k > 0");
  AbsorptionRate a;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "linear(k=%g)", k);
  a.name = buf;
  a.eval = [k](double x) { return k * x; };
  a.is_power_sum = true;
  a.terms = {{k, 1.0}};
  a.unbounded_at_infinity = true;
  return a;
}

AbsorptionRate AbsorptionRate::affine(double k) {
  if (!(k > 0.0)) throw std::invalid_argument("absorption affine: k > 0");
  AbsorptionRate a;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "affine(k=%g)", k);
  a.name = buf;
  a.eval = [k](double x) { return k * (1.0 + x); };
  a.is_power_sum = true;
  a.terms = {{k, 0.0}, {k, 1.0}};
  a.unbounded_at_infinity = true;
  return a;
}

AbsorptionRate AbsorptionRate::power(double k, double p) {
  if (!(k > 0.0)) throw std::invalid_argument("absorption power: k > 0");
  AbsorptionRate a;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "power(k=%g,p=%g)", k, p);
  a.name = buf;
  a.eval = [k, p](double x) { return k * std::pow(x, p); };
  a.is_power_sum = true;
  a.terms = {{k, p}};
  a.unbounded_at_zero = p < 0.0;
  a.unbounded_at_infinity = p > 0.0;
  return a;
}

AbsorptionRate AbsorptionRate::power_sum(
    const std::vector<std::pair<double, double>>& terms) {
  if (terms.empty())
    throw std::invalid_argument("absorption power_sum: no terms");
  AbsorptionRate a;
  std::string nm = "power_sum(";
  for (size_t i = 0; i < terms.size(); ++i) {
    if (!(terms[i].first >= 0.0))
      throw std::invalid_argument("absorption power_sum: coefficients >= 0");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%g*x^%g", i ? " + " : "",
                  terms[i].first, terms[i].second);
    nm += buf;
    if (terms[i].first > 0.0 && terms[i].second < 0.0)
      a.unbounded_at_zero = true;
    if (terms[i].first > 0.0 && terms[i].second > 0.0)
      a.unbounded_at_infinity = true;
  }
  a.name = nm + ")";
  a.is_power_sum = true;
  a.terms = terms;
  a.eval = [terms](double x) {
    double s = 0.0;
    for (const auto& [c, p] : terms) s += c * std::pow(x, p);
    return s;
  };
  return a;
}

AbsorptionRate AbsorptionRate::tabulated(std::vector<double> xs,
                                         std::vector<double> as) {
  if (xs.size() < 4 || xs.size() != as.size())
    throw std::invalid_argument("absorption tabulated: need >= 4 samples");
  std::vector<double> s(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(as[i] >= 0.0))
      throw std::invalid_argument("absorption tabulated: bad sample");
    if (i > 0 && !(xs[i] > xs[i - 1]))
      throw std::invalid_argument("absorption tabulated: x not increasing");
    s[i] = std::log(xs[i]);
  }
  auto interp = std::make_shared<MonotoneCubic>(std::move(s), std::move(as));
  const double lo = xs.front(), hi = xs.back();
  AbsorptionRate a;
  a.name = "tabulated";
  a.eval = [interp, lo, hi](double x) {
    // Constant extension outside the table keeps a defined everywhere.
    return std::max(0.0, (*interp)(std::log(std::min(std::max(x, lo), hi))));
  };
  return a;
}

double Kernel::conservativity_defect(double y) const {
  const double n1 = n_alpha(y, 1.0);
  if (!std::isfinite(n1)) return kInf;
  return std::abs(n1 / y - 1.0);
}

Kernel Kernel::uniform_binary() {
  Kernel k;
  k.name = "uniform_binary";
  k.family = KernelFamily::Homogeneous;
  k.b_ = [](double x, double y) {
    return (x > 0.0 && x < y) ? 2.0 / y : 0.0;
  };
  k.n_alpha_ = [](double y, double alpha) {
    return 2.0 * std::pow(y, alpha) / (alpha + 1.0);
  };
  k.n_one_alpha_ = [](double y, double alpha) {
    // 2((1+y)^{a+1} - 1)/(y (a+1)); expm1/log1p keeps it stable for tiny y.
    return 2.0 * std::expm1((alpha + 1.0) * std::log1p(y)) /
           (y * (alpha + 1.0));
  };
  k.n_zero_ = [](double) { return 2.0; };
  k.inf_support_fraction = 0.0;
  k.support_unbounded_in_y = true;
  k.locally_bounded = true;
  return k;
}

Kernel Kernel::homogeneous(std::function<double(double)> h,
                           const std::string& name) {
  const double m1 = unit_integral_or_inf([&h](double z) { return z * h(z); });
  if (!std::isfinite(m1) || std::abs(m1 - 1.0) > 1e-8)
    throw std::invalid_argument(
        "homogeneous kernel: integral of z h(z) over (0,1) must equal 1 "
        "(got " + std::to_string(m1) + ")");
  Kernel k;
  k.name = name;
  k.family = KernelFamily::Homogeneous;
  auto hs = std::make_shared<std::function<double(double)>>(std::move(h));
  k.b_ = [hs](double x, double y) {
    return (x > 0.0 && x < y) ? (*hs)(x / y) / y : 0.0;
  };
  auto cache = std::make_shared<std::map<double, double>>();
  k.n_alpha_ = [hs, cache](double y, double alpha) {
    auto it = cache->find(alpha);
    double mu;
    if (it != cache->end()) {
      mu = it->second;
    } else {
      mu = unit_integral_or_inf(
          [&](double z) { return std::pow(z, alpha) * (*hs)(z); });
      (*cache)[alpha] = mu;
    }
    return mu * std::pow(y, alpha);
  };
  k.n_one_alpha_ = [hs](double y, double alpha) {
    return unit_integral_or_inf(
        [&](double z) { return std::pow(1.0 + y * z, alpha) * (*hs)(z); });
  };
  k.n_zero_ = [hs](double) {
    return unit_integral_or_inf([&](double z) { return (*hs)(z); });
  };
  // Support metadata from a scan of h near zero.
  double zfirst = 1.0;
  for (int i = 0; i <= 400; ++i) {
    const double z = std::pow(10.0, -8.0 + 8.0 * i / 400.0);
    if ((*hs)(z) > 0.0) {
      zfirst = z;
      break;
    }
  }
  k.inf_support_fraction = zfirst <= 1e-7 ? 0.0 : zfirst;
  k.support_unbounded_in_y = k.inf_support_fraction == 0.0;
  return k;
}

Kernel Kernel::power_law(double nu) {
  if (!(nu > -2.0) || !(nu <= 0.0))
    throw std::invalid_argument("power_law kernel: need nu in (-2, 0]");
  Kernel k;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "power_law(nu=%g)", nu);
  k.name = buf;
  k.family = KernelFamily::PowerLaw;
  k.b_ = [nu](double x, double y) {
    if (!(x > 0.0) || !(x < y)) return 0.0;
    return (nu + 2.0) * std::pow(x, nu) / std::pow(y, nu + 1.0);
  };
  k.n_alpha_ = [nu](double y, double alpha) {
    if (nu + alpha + 1.0 <= 0.0) return kInf;
    return (nu + 2.0) / (nu + alpha + 1.0) * std::pow(y, alpha);
  };
  k.n_one_alpha_ = [nu](double y, double alpha) {
    if (nu <= -1.0) return kInf;  // the (1+x)^alpha >= 1 part already diverges
    int ai;
    if (near_integer(alpha, ai)) {
      double s = 0.0;
      for (int m = 0; m <= ai; ++m)
        s += binom(ai, m) * std::pow(y, m) * (nu + 2.0) / (nu + m + 1.0);
      return s;
    }
    return (nu + 2.0) * integrate_unit_singular([nu, y, alpha](double u) {
             return std::pow(u, nu) * std::pow(1.0 + y * u, alpha);
           });
  };
  k.n_zero_ = [nu](double) {
    return nu > -1.0 ? (nu + 2.0) / (nu + 1.0) : kInf;
  };
  k.inf_support_fraction = 0.0;
  k.support_unbounded_in_y = true;
  k.locally_bounded = nu >= 0.0;
  return k;
}

Kernel Kernel::separable(std::function<double(double)> beta,
                         const std::string& name) {
  auto bs = std::make_shared<std::function<double(double)>>(std::move(beta));
  auto s1 = [bs](double y) {
    return lower_integral_or_inf([&](double s) { return s * (*bs)(s); }, y);
  };
  const double s1_at_1 = s1(1.0);
  if (!std::isfinite(s1_at_1) || !(s1_at_1 > 0.0))
    throw std::invalid_argument(
        "separable kernel: integral of s beta(s) must be positive and finite");
  Kernel k;
  k.name = name;
  k.family = KernelFamily::Separable;
  k.b_ = [bs, s1](double x, double y) {
    if (!(x > 0.0) || !(x < y)) return 0.0;
    return (*bs)(x)*y / s1(y);
  };
  k.n_alpha_ = [bs, s1](double y, double alpha) {
    const double num = lower_integral_or_inf(
        [&](double s) { return std::pow(s, alpha) * (*bs)(s); }, y);
    return y * num / s1(y);
  };
  k.n_one_alpha_ = [bs, s1](double y, double alpha) {
    const double num = lower_integral_or_inf(
        [&](double s) { return std::pow(1.0 + s, alpha) * (*bs)(s); }, y);
    return y * num / s1(y);
  };
  k.n_zero_ = [bs, s1](double y) {
    const double num =
        lower_integral_or_inf([&](double s) { return (*bs)(s); }, y);
    return y * num / s1(y);
  };
  // Support scan over absolute abscissae.
  double xfirst = 1.0;
  for (int i = 0; i <= 400; ++i) {
    const double x = std::pow(10.0, -8.0 + 8.0 * i / 400.0);
    if ((*bs)(x) > 0.0) {
      xfirst = x;
      break;
    }
  }
  k.inf_support_fraction = xfirst <= 1e-7 ? 0.0 : 1.0;  // see report scan
  k.support_unbounded_in_y = true;
  return k;
}

Kernel Kernel::mixture(std::vector<Kernel> parts, std::vector<double> weights) {
  if (parts.empty() || parts.size() != weights.size())
    throw std::invalid_argument("mixture kernel: parts/weights mismatch");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("mixture: weights >= 0");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-10)
    throw std::invalid_argument("mixture kernel: weights must sum to 1");
  auto ps = std::make_shared<std::vector<Kernel>>(std::move(parts));
  auto ws = std::make_shared<std::vector<double>>(std::move(weights));
  Kernel k;
  k.name = "mixture";
  k.family = KernelFamily::Mixture;
  k.b_ = [ps, ws](double x, double y) {
    double s = 0.0;
    for (size_t i = 0; i < ps->size(); ++i) s += (*ws)[i] * (*ps)[i].b(x, y);
    return s;
  };
  k.n_alpha_ = [ps, ws](double y, double alpha) {
    double s = 0.0;
    for (size_t i = 0; i < ps->size(); ++i)
      s += (*ws)[i] * (*ps)[i].n_alpha(y, alpha);
    return s;
  };
  k.n_one_alpha_ = [ps, ws](double y, double alpha) {
    double s = 0.0;
    for (size_t i = 0; i < ps->size(); ++i)
      s += (*ws)[i] * (*ps)[i].n_one_alpha(y, alpha);
    return s;
  };
  k.n_zero_ = [ps, ws](double y) {
    double s = 0.0;
    for (size_t i = 0; i < ps->size(); ++i)
      s += (*ws)[i] * (*ps)[i].n_zero(y);
    return s;
  };
  double pmin = 1.0;
  bool unb = false, locb = true;
  for (size_t i = 0; i < ps->size(); ++i) {
    if ((*ws)[i] > 0.0) {
      pmin = std::min(pmin, (*ps)[i].inf_support_fraction);
      unb = unb || (*ps)[i].support_unbounded_in_y;
      locb = locb && (*ps)[i].locally_bounded;
    }
  }
  k.inf_support_fraction = pmin;
  k.support_unbounded_in_y = unb;
  k.locally_bounded = locb;
  return k;
}

Kernel Kernel::tabulated(std::vector<double> zs, std::vector<double> ys,
                         std::vector<std::vector<double>> vals) {
  if (zs.size() < 2 || ys.size() < 2 || vals.size() != ys.size())
    throw std::invalid_argument("tabulated kernel: inconsistent sample grid");
  for (const auto& row : vals)
    if (row.size() != zs.size())
      throw std::invalid_argument("tabulated kernel: ragged sample rows");
  for (size_t i = 0; i < zs.size(); ++i) {
    if (!(zs[i] > 0.0) || !(zs[i] < 1.0) || (i > 0 && !(zs[i] > zs[i - 1])))
      throw std::invalid_argument("tabulated kernel: z samples in (0,1) asc");
  }
  for (size_t j = 0; j < ys.size(); ++j)
    if (!(ys[j] > 0.0) || (j > 0 && !(ys[j] > ys[j - 1])))
      throw std::invalid_argument("tabulated kernel: y samples positive asc");

  struct Table {
    std::vector<double> lz, ly;
    std::vector<std::vector<double>> v;
  };
  auto tab = std::make_shared<Table>();
  tab->lz.resize(zs.size());
  tab->ly.resize(ys.size());
  for (size_t i = 0; i < zs.size(); ++i) tab->lz[i] = std::log(zs[i]);
  for (size_t j = 0; j < ys.size(); ++j) tab->ly[j] = std::log(ys[j]);
  tab->v = std::move(vals);

  auto lookup = [tab](double x, double y) -> double {
    if (!(x > 0.0) || !(x < y)) return 0.0;
    const double lz = std::log(x / y);
    if (lz < tab->lz.front() || lz > tab->lz.back()) return 0.0;
    // Clamp in y (constant log-extension) so the kernel stays defined.
    double ly = std::log(y);
    ly = std::min(std::max(ly, tab->ly.front()), tab->ly.back());
    auto iz = std::upper_bound(tab->lz.begin(), tab->lz.end(), lz);
    size_t i = std::min(static_cast<size_t>(
        std::max<std::ptrdiff_t>(iz - tab->lz.begin() - 1, 0)),
        tab->lz.size() - 2);
    auto jy = std::upper_bound(tab->ly.begin(), tab->ly.end(), ly);
    size_t j = std::min(static_cast<size_t>(
        std::max<std::ptrdiff_t>(jy - tab->ly.begin() - 1, 0)),
        tab->ly.size() - 2);
    const double tz = (lz - tab->lz[i]) / (tab->lz[i + 1] - tab->lz[i]);
    const double ty = (ly - tab->ly[j]) / (tab->ly[j + 1] - tab->ly[j]);
    const double v00 = tab->v[j][i], v01 = tab->v[j][i + 1];
    const double v10 = tab->v[j + 1][i], v11 = tab->v[j + 1][i + 1];
    // Blend log-values so power-law behaviour in z and y is reproduced
    // exactly; cells holding a nonpositive sample have no log and fall
    // back to value-space blending.
    if (v00 > 0.0 && v01 > 0.0 && v10 > 0.0 && v11 > 0.0) {
      const double lv =
          (1 - ty) * ((1 - tz) * std::log(v00) + tz * std::log(v01)) +
          ty * ((1 - tz) * std::log(v10) + tz * std::log(v11));
      return std::exp(lv);
    }
    return (1 - ty) * ((1 - tz) * v00 + tz * v01) +
           ty * ((1 - tz) * v10 + tz * v11);
  };

  Kernel k;
  k.name = "tabulated";
  k.family = KernelFamily::Tabulated;
  k.b_ = lookup;
  const double z_lo = zs.front(), z_hi = zs.back();
  auto moment = [lookup, z_lo, z_hi](double y,
                                     const std::function<double(double)>& w) {
    return y * integrate_log(
                   [&](double z) { return w(z * y) * lookup(z * y, y); },
                   z_lo, std::min(z_hi, 1.0 - 1e-12), 32);
  };
  k.n_alpha_ = [moment](double y, double alpha) {
    return moment(y, [alpha](double x) { return std::pow(x, alpha); });
  };
  k.n_one_alpha_ = [moment](double y, double alpha) {
    return moment(y, [alpha](double x) { return std::pow(1.0 + x, alpha); });
  };
  k.n_zero_ = [moment](double y) {
    return moment(y, [](double) { return 1.0; });
  };
  k.inf_support_fraction = z_lo;
  k.support_unbounded_in_y = false;  // clamped table: declared, not assumed
  k.locally_bounded = true;
  return k;
}

GridFunction apply_B(const Kernel& k, const AbsorptionRate& a,
                     const GridFunction& phi, QuadRule rule) {
  const Grid& g = phi.grid();
  const auto w = g.quad_weights(rule);
  const int n = g.size();
  std::vector<double> out(n, 0.0);
  for (int j = 0; j < n; ++j) {
    const double xj = g.node(j);
    double acc = 0.0;
    for (int kk = j + 1; kk < n; ++kk) {
      const double yk = g.node(kk);
      acc += w[kk] * a.eval(yk) * k.b(xj, yk) * phi[kk];
    }
    // Half cell (x_j, edge_{j+1}) not covered by the node sum.
    const double er = g.edge(j + 1);
    const double m = std::sqrt(xj * er);
    acc += (er - xj) * a.eval(m) * k.b(xj, m) * phi[j];
    out[j] = acc;
  }
  return GridFunction(phi.grid_ptr(), std::move(out));
}

std::vector<std::vector<double>> assemble_B(const Kernel& k,
                                            const AbsorptionRate& a,
                                            const Grid& g, QuadRule rule) {
  const auto w = g.quad_weights(rule);
  const int n = g.size();
  std::vector<std::vector<double>> B(n, std::vector<double>(n, 0.0));
  std::vector<double> a_at(n);
  for (int kk = 0; kk < n; ++kk) a_at[kk] = a.eval(g.node(kk));
  for (int j = 0; j < n; ++j) {
    const double xj = g.node(j);
    for (int kk = j + 1; kk < n; ++kk)
      B[j][kk] = w[kk] * a_at[kk] * k.b(xj, g.node(kk));
    const double er = g.edge(j + 1);
    const double m = std::sqrt(xj * er);
    B[j][j] = (er - xj) * a.eval(m) * k.b(xj, m);
  }
  return B;
}

IrreducibilityReport irreducibility_report(const Kernel& k,
                                           const AbsorptionRate& a,
                                           const IrreducibilityOptions& opts) {
  IrreducibilityReport rep;
  const int np = opts.probes;
  auto probe_at = [&](int i, double lo, double hi) {
    return lo * std::pow(hi / lo, static_cast<double>(i) / (np - 1));
  };

  // Hypothesis A: for each probed x, a(y) b(x,y) should stay positive up to
  // the top of the probe range.
  bool support_ok = k.support_unbounded_in_y;
  double worst_top = kInf;
  for (int i = 0; i < np && support_ok; ++i) {
    const double x = probe_at(i, opts.probe_lo, opts.probe_hi / 100.0);
    double top_positive = 0.0;
    for (int j = np - 1; j >= 0; --j) {
      const double y = probe_at(j, x * 1.0001, opts.probe_hi);
      if (a.eval(y) * k.b(x, y) > 0.0) {
        top_positive = y;
        break;
      }
    }
    worst_top = std::min(worst_top, top_positive);
    if (top_positive < opts.probe_hi * 0.99) support_ok = false;
  }
  rep.support_route = support_ok;
  {
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "a(y)b(x,y) positive up to y=%.3g across %d probe sizes%s",
                  worst_top, np,
                  k.support_unbounded_in_y
                      ? " (kernel declares unbounded support)"
                      : " (kernel declares bounded support)");
    rep.support_evidence = buf;
  }

  // Hypothesis B: a > 0 away from zero plus a uniform lower-support margin.
  double a_min = kInf;
  for (int i = 0; i < np; ++i)
    a_min = std::min(a_min, a.eval(probe_at(i, opts.probe_lo, opts.probe_hi)));
  const bool a_positive = a_min > 0.0;

  double p_hat = 0.0;
  double n0_min = kInf;
  for (int i = 0; i < np; ++i) {
    const double y = probe_at(i, opts.probe_lo * 10.0, opts.probe_hi / 10.0);
    double zfirst = 1.0;
    for (int j = 0; j <= 300; ++j) {
      const double z = std::pow(10.0, -8.0 + 8.0 * j / 300.0);
      if (k.b(z * y, y) > 0.0) {
        zfirst = z <= 2e-8 ? 0.0 : z;
        break;
      }
    }
    p_hat = std::max(p_hat, zfirst);
    const double n0 = k.n_zero(y);
    n0_min = std::min(n0_min, n0);
  }
  rep.p_fraction = std::max(p_hat, k.inf_support_fraction);
  rep.n_zero_margin = std::isfinite(n0_min) ? n0_min - 1.0 : kInf;

  const bool p_ok = rep.p_fraction <= opts.p_max;
  const bool margin_ok = rep.n_zero_margin > 1e-6;
  rep.positivity_route = a_positive && (p_ok || margin_ok || k.locally_bounded);
  {
    char buf[240];
    std::snprintf(
        buf, sizeof(buf),
        "min a over probes = %.3g; inf-support fraction <= %.3g; "
        "n0 margin = %.3g; locally bounded = %s",
        a_min, rep.p_fraction,
        std::isfinite(rep.n_zero_margin) ? rep.n_zero_margin : 1e300,
        k.locally_bounded ? "yes" : "no");
    rep.positivity_evidence = buf;
  }

  rep.verdict = rep.support_route || rep.positivity_route;
  return rep;
}

}  // namespace gfrag
