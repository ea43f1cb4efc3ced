#pragma once

#include <memory>
#include <optional>

#include "gfrag/growth.hpp"

namespace gfrag {

struct FlowOptions {
  double tol_rel = 1e-12;   // relative tolerance on the located abscissa
  int max_iter = 200;
  double blow_up = 1e30;    // forward characteristics beyond this abort
  // Primitive-table range for rates without a closed-form primitive.
  double table_lo = 1e-9;
  double table_hi = 1e12;
};

// Characteristic flow of dX/dt = r(X).  backward(y, t) is the foot of the
// characteristic reaching y after time t; in the partly singular regime a
// foot can lie below the front y0(t), in which case the value is
// std::nullopt ("below the front" is a value, not an error).
class CharacteristicFlow {
 public:
  CharacteristicFlow(GrowthRate r, RegimeReport regime, FlowOptions opts = {});

  const GrowthRate& rate() const { return r_; }
  const RegimeReport& regime() const { return regime_; }
  const GrowthPrimitive& primitive() const { return prim_; }

  // integral of 1/r over (0, y]; finite only in the partly singular regime.
  double zero_integral(double y) const;

  std::optional<double> backward(double y, double t) const;
  double forward(double x, double t) const;
  // Front position y0(t): integral of 1/r over (0, y0] = t.  Only defined in
  // the partly singular regime; throws a regime error otherwise.
  double front(double t) const;
  // dX/dy = r(X(y,t)) / r(y); nullopt below the front.
  std::optional<double> jacobian(double y, double t) const;

 private:
  // Solves phi(x) = target for x in [lo, hi] (phi strictly increasing).
  double solve_phi(double target, double lo, double hi) const;

  GrowthRate r_;
  RegimeReport regime_;
  FlowOptions opts_;
  GrowthPrimitive prim_;
};

}  // namespace gfrag
