#pragma once

#include <vector>

namespace gfrag {

// Shape-preserving piecewise-cubic Hermite interpolant (Fritsch-Carlson
// slopes).  Monotone data produces a monotone interpolant; values never
// leave the local data range, so nonnegative data stays nonnegative.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;

  // Builds from sorted abscissae with automatically limited slopes.
  MonotoneCubic(std::vector<double> x, std::vector<double> y);

  // Builds with caller-supplied derivatives (e.g. exact ones).  Slopes are
  // still clamped to the Fritsch-Carlson monotone region so a monotone table
  // stays monotone.
  MonotoneCubic(std::vector<double> x, std::vector<double> y,
                std::vector<double> dy);

  // Evaluates inside [front, back]; the ends clamp (constant extension).
  double operator()(double x) const;
  double derivative(double x) const;

  double front() const { return x_.front(); }
  double back() const { return x_.back(); }
  bool empty() const { return x_.empty(); }

 private:
  void limit_slopes();
  int find_interval(double x) const;

  std::vector<double> x_, y_, d_;
};

}  // namespace gfrag
