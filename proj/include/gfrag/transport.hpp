#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "gfrag/characteristics.hpp"
#include "gfrag/fragmentation.hpp"
#include "gfrag/grid.hpp"
#include "gfrag/growth.hpp"

namespace gfrag {

// Primitive of a(x)/r(x): closed form when a is a power sum and r is one of
// the constant / linear / power / affine families, otherwise a cached
// cumulative table with on-the-fly quadrature extension beyond the table.
class AbsorptionPrimitive {
 public:
  AbsorptionPrimitive(const AbsorptionRate& a, const GrowthRate& r, double lo,
                      double hi);
  // integral of a/r over (x, y); antisymmetric in its arguments.
  double between(double x, double y) const;
  bool closed_form() const { return closed_; }

 private:
  double value_at(double x) const;
  std::function<double(double)> prim_;
  std::shared_ptr<CumulativeTable> table_;
  std::function<double(double)> integrand_;
  double table_lo_ = 0.0, table_hi_ = 0.0;
  bool closed_ = false;
};

// Supremum estimate with the location of the maximizer; boundary flags mean
// the reported value is only a lower bound for the true supremum.
struct NormEstimate {
  double value = 0.0;
  double arg = 0.0;
  bool at_lower_edge = false;
  bool at_upper_edge = false;
};

// Outcome of an a priori estimate check.  slack = lhs/||f|| - 1; the
// estimates are theorems, so slack beyond rounding indicates a quadrature
// (or implementation) defect.  f == 0 gives the vacuous slack -1.
struct SlackReport {
  double lambda = 0.0;
  double lhs = 0.0;
  double norm_f = 0.0;
  double slack = -1.0;
  int argmax_node = -1;
};

// Per-application diagnostics for the semigroup actions.
struct ApplyReport {
  bool front_crossed = false;   // some nodes sit below the front
  int first_above_front = 0;    // index of the first node with a finite foot
  int straddle_cell = -1;       // cell containing the front, -1 if none
  double front = 0.0;           // front position (partly singular regime)
};

// Weighted-space transport semigroup built from a characteristic flow: the
// free action U0(t), the absorbed action U(t), their operator norms, and
// the resolvent of the transport generator with its two a priori estimate
// oracles.
class TransportOperator {
 public:
  // `a` absent means the free semigroup (no absorption).  Throws
  // std::invalid_argument when the space is incompatible with the regime:
  // a partly singular rate has no generation theory in X_alpha, and the
  // relevant sublinearity constant must be finite for the chosen weight.
  TransportOperator(const GrowthRate& r, const RegimeReport& regime,
                    std::optional<AbsorptionRate> a, WeightedSpace space,
                    GridPtr grid, FlowOptions fopts = {});

  const CharacteristicFlow& flow() const { return flow_; }
  const WeightedSpace& space() const { return space_; }
  const GridPtr& grid() const { return grid_; }
  bool has_absorption() const { return a_.has_value(); }
  const AbsorptionRate& absorption() const;
  // alpha * C for the active weight (C = varpi or the sublinear constant).
  double growth_bound() const { return bound_; }

  double phi_node(int j) const { return phi_nodes_[j]; }
  double q_node(int j) const { return q_nodes_[j]; }
  double q_edge(int j) const { return q_edges_[j]; }
  // integral of a/r over (x, y); zero when no absorption is present.
  double q_between(double x, double y) const;

  // (U0(t) f)(y) = r(X) f(X) / r(y) at the backward foot X = X(y,t); zero
  // below the front.  Off-node values of f by monotone interpolation in
  // log x, zero outside the grid (absorbing boundary).
  GridFunction apply_U0(double t, const GridFunction& f,
                        ApplyReport* report = nullptr) const;
  // U(t) = U0(t) damped by exp(-integral of a/r along the characteristic).
  GridFunction apply_U(double t, const GridFunction& f,
                       ApplyReport* report = nullptr) const;

  // sup_x weight(y(x,t))/weight(x) over a wide probe range with golden
  // section refinement.
  NormEstimate operator_norm_U0(double t) const;
  // max over random nonnegative bump profiles of ||U0 f|| / ||f||, with the
  // image norm evaluated by the exact change of variables along the flow
  // (avoids resampling bias for profiles whose image falls between nodes).
  double empirical_norm_U0(double t, int samples, unsigned seed) const;

  // ((lambda - T)^{-1} f)(y_j) by per-row product integration: exact cell
  // integrals of the exponential kernel against piecewise-constant f.
  // Requires lambda >= growth_bound().
  GridFunction resolvent_T(double lambda, const GridFunction& f) const;
  // Dense lower-triangular matrix of the same quadrature resolvent.
  std::vector<std::vector<double>> resolvent_matrix(double lambda) const;
  // Entrywise logarithm of resolvent_matrix, computed without forming the
  // values themselves.  Transport across a long stretch of the size range
  // damps by exp(-(psi gaps)) that can undershoot the smallest subnormal
  // double, so log entries stay informative where the plain matrix reads 0.
  // Entries above the diagonal are -infinity.
  std::vector<std::vector<double>> resolvent_matrix_log(double lambda) const;

  // First a priori estimate: |(lambda - T)^{-1} f|(y) * weight(y) * r(y)
  // never exceeds ||f||.  Reports the worst node.
  SlackReport oracle_pointwise(double lambda, const GridFunction& f) const;
  // Second a priori estimate: integral of a * |(lambda - T)^{-1} f| * weight
  // never exceeds ||f||.  Evaluated by column-wise product integration
  // (exact cell integrals of (a/r) e^{-Q}), computed on |f|.
  SlackReport oracle_smoothing(double lambda, const GridFunction& f) const;

  // Relative gap between resolvent_T(lambda, f) and the truncated Laplace
  // transform of t -> U(t) f (composite Simpson, `steps` even).
  double laplace_check(double lambda, const GridFunction& f, double t_max,
                       int steps) const;

 private:
  void require_lambda(double lambda) const;
  double row_weight(int j, int k) const;  // per-row trapezoid weight
  // Exact integral of e^{-(psi_j - psi(y))} over sampling cell k (truncated
  // at the node for k = j), psi = lambda*phi + Q piecewise linear through
  // its edge/node values.
  double resolvent_cell(int j, int k, double lambda) const;
  double resolvent_cell_log(int j, int k, double lambda) const;

  CharacteristicFlow flow_;
  std::optional<AbsorptionRate> a_;
  WeightedSpace space_;
  GridPtr grid_;
  double bound_ = 0.0;
  std::optional<AbsorptionPrimitive> q_prim_;
  std::vector<double> phi_nodes_, phi_edges_;
  std::vector<double> q_nodes_, q_edges_;
  std::vector<double> wq_;       // trapezoid quadrature weights
  std::vector<double> wspace_;   // weight(x_j)
  std::vector<double> r_nodes_;  // r(x_j)
};

}  // namespace gfrag
