#include "gfrag/interp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gfrag {

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const size_t n = x_.size();
  if (n < 2 || y_.size() != n)
    throw std::invalid_argument("MonotoneCubic: need two or more points");
  d_.assign(n, 0.0);
  std::vector<double> h(n - 1), delta(n - 1);
  for (size_t i = 0; i + 1 < n; ++i) {
    h[i] = x_[i + 1] - x_[i];
    if (!(h[i] > 0.0))
      throw std::invalid_argument("MonotoneCubic: abscissae not increasing");
    delta[i] = (y_[i + 1] - y_[i]) / h[i];
  }
  // Interior slopes: weighted harmonic mean when the data is locally
  // monotone, zero at local extrema (standard pchip).
  for (size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) {
      d_[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  // One-sided ends, clipped so the end interval stays shape-preserving.
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d * d0 <= 0.0) d = 0.0;
    else if (d0 * d1 <= 0.0 && std::abs(d) > 3.0 * std::abs(d0))
      d = 3.0 * d0;
    return d;
  };
  if (n == 2) {
    d_[0] = d_[1] = delta[0];
  } else {
    d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }
  limit_slopes();
}

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y,
                             std::vector<double> dy)
    : x_(std::move(x)), y_(std::move(y)), d_(std::move(dy)) {
  const size_t n = x_.size();
  if (n < 2 || y_.size() != n || d_.size() != n)
    throw std::invalid_argument("MonotoneCubic: inconsistent sizes");
  for (size_t i = 0; i + 1 < n; ++i)
    if (!(x_[i + 1] > x_[i]))
      throw std::invalid_argument("MonotoneCubic: abscissae not increasing");
  limit_slopes();
}

void MonotoneCubic::limit_slopes() {
  const size_t n = x_.size();
  for (size_t i = 0; i + 1 < n; ++i) {
    const double delta = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    if (delta == 0.0) {
      d_[i] = 0.0;
      d_[i + 1] = 0.0;
      continue;
    }
    const double a = d_[i] / delta, b = d_[i + 1] / delta;
    if (a < 0.0) d_[i] = 0.0;
    if (b < 0.0) d_[i + 1] = 0.0;
    // Fritsch-Carlson circle bound.
    const double s = a * a + b * b;
    if (s > 9.0) {
      const double tau = 3.0 / std::sqrt(s);
      d_[i] = tau * a * delta;
      d_[i + 1] = tau * b * delta;
    }
  }
}

int MonotoneCubic::find_interval(double x) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  int i = static_cast<int>(it - x_.begin()) - 1;
  i = std::max(0, std::min(i, static_cast<int>(x_.size()) - 2));
  return i;
}

double MonotoneCubic::operator()(double x) const {
  if (x <= x_.front()) return y_.front();
  if (x >= x_.back()) return y_.back();
  const int i = find_interval(x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * y_[i] + h * h10 * d_[i] + h01 * y_[i + 1] + h * h11 * d_[i + 1];
}

double MonotoneCubic::derivative(double x) const {
  if (x <= x_.front()) return d_.front();
  if (x >= x_.back()) return d_.back();
  const int i = find_interval(x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double dh00 = (6 * t * t - 6 * t) / h, dh10 = 3 * t * t - 4 * t + 1;
  const double dh01 = (-6 * t * t + 6 * t) / h, dh11 = 3 * t * t - 2 * t;
  return dh00 * y_[i] + dh10 * d_[i] + dh01 * y_[i + 1] + dh11 * d_[i + 1];
}

}  // namespace gfrag
