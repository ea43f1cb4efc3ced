#include "gfrag/characteristics.hpp"

#include <cmath>
#include <stdexcept>

namespace gfrag {

CharacteristicFlow::CharacteristicFlow(GrowthRate r, RegimeReport regime,
                                       FlowOptions opts)
    : r_(std::move(r)),
      regime_(regime),
      opts_(opts),
      prim_(r_, std::max(opts.table_lo, r_.domain_lo),
            std::min(opts.table_hi, r_.domain_hi)) {
  if (regime_.regime == Regime::Neither)
    throw std::invalid_argument(
        "CharacteristicFlow: rate has integrable 1/r at infinity; no "
        "admissible regime");
}

double CharacteristicFlow::zero_integral(double y) const {
  if (regime_.regime != Regime::PartlySingular)
    throw std::logic_error(
        "zero_integral: finite only in the partly singular regime");
  // integral over (0,1] from the classification probe plus the primitive
  // between 1 and y (signed, so y < 1 subtracts).
  return regime_.lower.value + prim_.phi(y);
}

double CharacteristicFlow::solve_phi(double target, double lo, double hi) const {
  // Bisection bracket maintained around a safeguarded Newton iteration with
  // d phi/dx = 1/r.
  double flo = prim_.phi(lo) - target;
  double fhi = prim_.phi(hi) - target;
  if (flo > 0.0 || fhi < 0.0)
    throw std::runtime_error("characteristic solve: lost the root bracket");
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < opts_.max_iter; ++it) {
    const double fx = prim_.phi(x) - target;
    if (fx == 0.0) return x;
    if (fx > 0.0) hi = x; else lo = x;
    // Newton step: phi' = 1/r, so dx = -f * r(x).
    double x_new = x - fx * r_.eval(x);
    if (!(x_new > lo) || !(x_new < hi)) x_new = std::sqrt(lo * hi);
    if (std::abs(x_new - x) <= opts_.tol_rel * x_new) {
      // Polish once and accept.
      const double f2 = prim_.phi(x_new) - target;
      return x_new - f2 * r_.eval(x_new);
    }
    x = x_new;
  }
  if ((hi - lo) > 1e-6 * hi)
    throw std::runtime_error("characteristic solve: no convergence");
  return x;
}

std::optional<double> CharacteristicFlow::backward(double y, double t) const {
  if (!(y > 0.0)) throw std::invalid_argument("backward: need y > 0");
  if (!(t >= 0.0)) throw std::invalid_argument("backward: need t >= 0");
  if (t == 0.0) return y;
  if (regime_.regime == Regime::PartlySingular) {
    // Below (or on) the front there is no foot inside (0, y].
    if (zero_integral(y) <= t * (1.0 + 1e-15)) return std::nullopt;
  }
  const double target = prim_.phi(y) - t;
  // Expand the lower bracket geometrically until phi drops below target.
  double lo = y, hi = y;
  for (int it = 0; it < 4096; ++it) {
    lo *= 0.5;
    if (lo < 1e-300)
      throw std::runtime_error("backward: bracket expansion underflow");
    if (prim_.phi(lo) <= target) break;
  }
  if (prim_.phi(lo) > target)
    throw std::runtime_error("backward: could not bracket the foot");
  return solve_phi(target, lo, hi);
}

double CharacteristicFlow::forward(double x, double t) const {
  if (!(x > 0.0)) throw std::invalid_argument("forward: need x > 0");
  if (!(t >= 0.0)) throw std::invalid_argument("forward: need t >= 0");
  if (t == 0.0) return x;
  const double target = prim_.phi(x) + t;
  double lo = x, hi = x;
  for (int it = 0; it < 4096; ++it) {
    hi = 2.0 * hi + 1.0;
    if (hi > opts_.blow_up)
      throw std::runtime_error(
          "forward: characteristic exceeded the blow-up guard");
    if (prim_.phi(hi) >= target) break;
  }
  if (prim_.phi(hi) < target)
    throw std::runtime_error("forward: could not bracket the image");
  return solve_phi(target, lo, hi);
}

double CharacteristicFlow::front(double t) const {
  if (regime_.regime != Regime::PartlySingular)
    throw std::logic_error("front: defined only in the partly singular regime");
  if (!(t >= 0.0)) throw std::invalid_argument("front: need t >= 0");
  if (t == 0.0) return 0.0;
  // Solve phi(y0) = t - integral over (0,1].
  const double target = t - regime_.lower.value;
  double lo = 1.0, hi = 1.0;
  for (int it = 0; it < 4096 && prim_.phi(lo) > target; ++it) {
    lo *= 0.5;
    if (lo < 1e-300)
      throw std::runtime_error("front: bracket expansion underflow");
  }
  for (int it = 0; it < 4096 && prim_.phi(hi) < target; ++it) {
    hi = 2.0 * hi + 1.0;
    if (hi > opts_.blow_up)
      throw std::runtime_error("front: exceeded the blow-up guard");
  }
  return solve_phi(target, lo, hi);
}

std::optional<double> CharacteristicFlow::jacobian(double y, double t) const {
  const auto x = backward(y, t);
  if (!x) return std::nullopt;
  return r_.eval(*x) / r_.eval(y);
}

}  // namespace gfrag
