#include "gfrag/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace gfrag {
namespace {

// 16-point Gauss-Legendre abscissae/weights on [-1, 1].
constexpr int kGL = 16;
constexpr double kGLx[kGL] = {
    -0.9894009349916499, -0.9445750230732326, -0.8656312023878318,
    -0.7554044083550030, -0.6178762444026438, -0.4580167776572274,
    -0.2816035507792589, -0.0950125098376374, 0.0950125098376374,
    0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
    0.7554044083550030,  0.8656312023878318,  0.9445750230732326,
    0.9894009349916499};
constexpr double kGLw[kGL] = {
    0.0271524594117541, 0.0622535239386479, 0.0951585116824928,
    0.1246289712555339, 0.1495959888165767, 0.1691565193950025,
    0.1826034150449236, 0.1894506104550685, 0.1894506104550685,
    0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479,
    0.0271524594117541};

double gl_panel(const std::function<double(double)>& f, double a, double b) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < kGL; ++i) acc += kGLw[i] * f(mid + half * kGLx[i]);
  return acc * half;
}

double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_rec(const std::function<double(double)>& f, double a, double fa,
                    double b, double fb, double m, double fm, double whole,
                    double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adaptive_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate_gl(const std::function<double(double)>& f, double a, double b,
                    int panels) {
  if (a == b) return 0.0;
  double acc = 0.0;
  const double step = (b - a) / panels;
  for (int p = 0; p < panels; ++p)
    acc += gl_panel(f, a + p * step, a + (p + 1) * step);
  return acc;
}

double integrate_log(const std::function<double(double)>& f, double a, double b,
                     int panels) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("integrate_log: endpoints must be positive");
  if (a == b) return 0.0;
  const double sa = std::log(a), sb = std::log(b);
  auto g = [&f](double s) {
    const double x = std::exp(s);
    return f(x) * x;
  };
  return integrate_gl(g, sa, sb, panels);
}

double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol, int max_depth) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = simpson(a, fa, b, fb, fm);
  return adaptive_rec(f, a, fa, b, fb, m, fm, whole,
                      std::max(tol, 1e-300), max_depth);
}

double integrate_unit_singular(const std::function<double(double)>& f,
                               double s_floor, int panels) {
  auto g = [&f](double s) {
    const double z = std::exp(s);
    return f(z) * z;
  };
  return integrate_gl(g, s_floor, 0.0, panels);
}

TailProbeResult probe_improper_integral(const std::function<double(double)>& g,
                                        double x_start, int direction,
                                        int max_decades, double threshold,
                                        double rel_tol) {
  TailProbeResult out;
  std::vector<double> inc;
  double total = 0.0;
  double x = x_start;
  for (int d = 0; d < max_decades; ++d) {
    const double x_next = (direction > 0) ? x * 10.0 : x / 10.0;
    const double lo = std::min(x, x_next), hi = std::max(x, x_next);
    double piece = integrate_log(g, lo, hi, 12);
    if (!std::isfinite(piece)) {
      out.verdict = TailVerdict::Divergent;
      out.value = total;
      out.decades_probed = d;
      out.evidence = "non-finite decade increment";
      return out;
    }
    inc.push_back(piece);
    total += piece;
    x = x_next;
    out.decades_probed = d + 1;
    if (total > threshold) {
      out.verdict = TailVerdict::Divergent;
      out.value = total;
      out.evidence = "running integral exceeded threshold";
      return out;
    }
    // Saturation test over the last few decades.
    if (inc.size() >= 3) {
      const double a2 = inc[inc.size() - 1], a1 = inc[inc.size() - 2];
      if (a1 > 0.0 && a2 / a1 < 0.5 && a2 < rel_tol * std::max(total, 1e-300)) {
        const double q = a2 / a1;
        out.verdict = TailVerdict::Convergent;
        out.tail_estimate = a2 * q / (1.0 - q);
        out.value = total + out.tail_estimate;
        out.evidence = "increments decay geometrically";
        return out;
      }
      // Increments negligible outright (integrand locally zero).
      if (a2 == 0.0 && a1 == 0.0 && inc[inc.size() - 3] == 0.0 && d >= 5) {
        out.verdict = TailVerdict::Convergent;
        out.value = total;
        out.evidence = "increments identically zero";
        return out;
      }
    }
  }
  // Ran out of decades: decide by the trend of the final increments.
  if (inc.size() >= 4) {
    const double tail3 = inc[inc.size() - 1] + inc[inc.size() - 2] +
                         inc[inc.size() - 3];
    const double ratio = inc[inc.size() - 1] /
                         std::max(inc[inc.size() - 2], 1e-300);
    if (ratio >= 0.8) {
      // Non-decaying increments: the extrapolated total grows without bound.
      out.verdict = TailVerdict::Divergent;
      out.value = total;
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "increments non-decaying (last ratio %.3g) after %d decades;"
                    " extrapolation exceeds threshold",
                    ratio, out.decades_probed);
      out.evidence = buf;
      return out;
    }
    if (ratio < 0.5 || tail3 < rel_tol * std::max(total, 1e-300)) {
      out.verdict = TailVerdict::Convergent;
      out.tail_estimate = inc.back() * ratio / std::max(1.0 - ratio, 0.01);
      out.value = total + out.tail_estimate;
      out.evidence = "increments decaying at probe limit";
      return out;
    }
  }
  out.verdict = TailVerdict::Inconclusive;
  out.value = total;
  out.evidence = "increment pattern neither clearly convergent nor divergent";
  return out;
}

ScanMaxResult scan_max_log(const std::function<double(double)>& f, double lo,
                           double hi, int samples) {
  if (!(lo > 0.0) || !(hi > lo))
    throw std::invalid_argument("scan_max_log: need 0 < lo < hi");
  const double slo = std::log(lo), shi = std::log(hi);
  ScanMaxResult best;
  best.value = -std::numeric_limits<double>::infinity();
  int best_i = 0;
  for (int i = 0; i <= samples; ++i) {
    const double x = std::exp(slo + (shi - slo) * i / samples);
    const double v = f(x);
    if (v > best.value) {
      best.value = v;
      best.arg = x;
      best_i = i;
    }
  }
  if (best_i == 0) best.at_lower_edge = true;
  if (best_i == samples) best.at_upper_edge = true;
  if (!best.at_lower_edge && !best.at_upper_edge) {
    // Golden-section refinement on the bracketing log interval.
    double a = slo + (shi - slo) * (best_i - 1) / samples;
    double b = slo + (shi - slo) * (best_i + 1) / samples;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = f(std::exp(c)), fd = f(std::exp(d));
    for (int it = 0; it < 80 && (b - a) > 1e-13; ++it) {
      if (fc > fd) {
        b = d; d = c; fd = fc;
        c = b - gr * (b - a); fc = f(std::exp(c));
      } else {
        a = c; c = d; fc = fd;
        d = a + gr * (b - a); fd = f(std::exp(d));
      }
    }
    const double xm = std::exp(0.5 * (a + b));
    const double vm = f(xm);
    if (vm > best.value) {
      best.value = vm;
      best.arg = xm;
    }
  }
  return best;
}

}  // namespace gfrag
