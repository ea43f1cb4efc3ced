#include "gfrag/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "gfrag/quadrature.hpp"

namespace gfrag {
namespace {

// Primitive of x^p (the p = -1 case is the logarithm).
double power_primitive(double x, double p) {
  if (std::abs(p + 1.0) < 1e-12) return std::log(x);
  return std::pow(x, p + 1.0) / (p + 1.0);
}

// Primitive of x^p / (1+x) for the exponents that occur in the closed-form
// absorption families; NaN when no closed form is known.
double affine_primitive(double x, double p) {
  if (std::abs(p) < 1e-12) return std::log1p(x);
  if (std::abs(p - 1.0) < 1e-12) return x - std::log1p(x);
  if (std::abs(p - 2.0) < 1e-12) return 0.5 * x * x - x + std::log1p(x);
  if (std::abs(p + 1.0) < 1e-12) return std::log(x) - std::log1p(x);
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

AbsorptionPrimitive::AbsorptionPrimitive(const AbsorptionRate& a,
                                         const GrowthRate& r, double lo,
                                         double hi) {
  integrand_ = [ae = a.eval, re = r.eval](double x) { return ae(x) / re(x); };

  if (a.is_power_sum && r.family != GrowthFamily::Tabulated) {
    // Each absorption term c x^pe against r reduces to a power (or log)
    // primitive; the affine rate needs its own small table of forms.
    struct Term {
      double coef, expo;
      bool affine;
    };
    std::vector<Term> terms;
    bool ok = true;
    for (const auto& [c, pe] : a.terms) {
      if (c == 0.0) continue;
      switch (r.family) {
        case GrowthFamily::Constant:
          terms.push_back({c / r.k, pe, false});
          break;
        case GrowthFamily::Linear:
          terms.push_back({c / r.k, pe - 1.0, false});
          break;
        case GrowthFamily::Power:
          terms.push_back({c / r.k, pe - r.p, false});
          break;
        case GrowthFamily::Affine:
          if (std::isnan(affine_primitive(1.0, pe))) ok = false;
          terms.push_back({c / r.k, pe, true});
          break;
        default:
          ok = false;
      }
      if (!ok) break;
    }
    if (ok) {
      prim_ = [terms](double x) {
        double s = 0.0;
        for (const auto& t : terms)
          s += t.coef * (t.affine ? affine_primitive(x, t.expo)
                                  : power_primitive(x, t.expo));
        return s;
      };
      closed_ = true;
      return;
    }
  }

  double tlo = std::max(lo / 1e6, 1e-15);
  double thi = hi * 10.0;
  if (r.domain_lo > 0.0) tlo = std::max(tlo, r.domain_lo);
  if (std::isfinite(r.domain_hi)) thi = std::min(thi, r.domain_hi);
  if (!(tlo < thi))
    throw std::invalid_argument("absorption primitive: empty table range");
  table_lo_ = tlo;
  table_hi_ = thi;
  const double ref = std::min(std::max(1.0, tlo), thi);
  table_ = std::make_shared<CumulativeTable>(integrand_, tlo, thi, ref, 64);
}

double AbsorptionPrimitive::value_at(double x) const {
  if (closed_) return prim_(x);
  if (x < table_lo_)
    return (*table_)(table_lo_) - integrate_log(integrand_, x, table_lo_, 8);
  if (x > table_hi_)
    return (*table_)(table_hi_) + integrate_log(integrand_, table_hi_, x, 8);
  return (*table_)(x);
}

double AbsorptionPrimitive::between(double x, double y) const {
  if (x == y) return 0.0;
  return value_at(y) - value_at(x);
}

TransportOperator::TransportOperator(const GrowthRate& r,
                                     const RegimeReport& regime,
                                     std::optional<AbsorptionRate> a,
                                     WeightedSpace space, GridPtr grid,
                                     FlowOptions fopts)
    : flow_(r, regime, fopts),
      a_(std::move(a)),
      space_(space),
      grid_(std::move(grid)) {
  space_.validate();
  if (!grid_) throw std::invalid_argument("transport: null grid");
  const bool power = space_.kind == Weight::Power;
  if (regime.regime == Regime::PartlySingular && power)
    throw std::invalid_argument(
        "transport: partly singular rates admit no generation theory in the "
        "x^alpha moment spaces; use the shifted weight");
  try {
    bound_ = regime.growth_bound(power, space_.alpha);
  } catch (const std::exception& e) {
    throw std::invalid_argument(
        std::string("transport: space incompatible with the rate: ") +
        e.what());
  }

  const int n = grid_->size();
  wq_ = grid_->quad_weights(QuadRule::LogTrapezoid);
  phi_nodes_.resize(n);
  r_nodes_.resize(n);
  wspace_.resize(n);
  const GrowthRate& rr = flow_.rate();
  const GrowthPrimitive& gp = flow_.primitive();
  for (int j = 0; j < n; ++j) {
    const double x = grid_->node(j);
    phi_nodes_[j] = gp.phi(x);
    r_nodes_[j] = rr.eval(x);
    wspace_[j] = space_.weight(x);
    if (!(r_nodes_[j] > 0.0) || !std::isfinite(wspace_[j]))
      throw std::invalid_argument("transport: rate or weight bad at a node");
  }
  // Guard monotonicity against table roundoff: the resolvent exponents rely
  // on phi being non-decreasing across nodes.
  for (int j = 1; j < n; ++j)
    phi_nodes_[j] = std::max(phi_nodes_[j], phi_nodes_[j - 1]);

  phi_edges_.resize(n + 1);
  for (int j = 0; j <= n; ++j) phi_edges_[j] = gp.phi(grid_->edge(j));
  // Edge values must interleave the node values so every per-cell exponent
  // increment stays nonnegative.
  phi_edges_[0] = std::min(phi_edges_[0], phi_nodes_[0]);
  for (int j = 1; j <= n; ++j) {
    phi_edges_[j] = std::max(phi_edges_[j], phi_nodes_[j - 1]);
    if (j < n) phi_edges_[j] = std::min(phi_edges_[j], phi_nodes_[j]);
  }

  q_nodes_.assign(n, 0.0);
  q_edges_.assign(n + 1, 0.0);
  if (a_) {
    q_prim_.emplace(*a_, rr, grid_->x_min(), grid_->x_max());
    for (int j = 0; j < n; ++j) {
      // Stepwise accumulation keeps the node/edge values exactly monotone.
      q_nodes_[j] =
          q_edges_[j] +
          std::max(0.0, q_prim_->between(grid_->edge(j), grid_->node(j)));
      q_edges_[j + 1] =
          q_nodes_[j] +
          std::max(0.0, q_prim_->between(grid_->node(j), grid_->edge(j + 1)));
    }
  }
}

const AbsorptionRate& TransportOperator::absorption() const {
  if (!a_) throw std::logic_error("transport: no absorption present");
  return *a_;
}

double TransportOperator::q_between(double x, double y) const {
  if (!a_) return 0.0;
  return q_prim_->between(x, y);
}

void TransportOperator::require_lambda(double lambda) const {
  if (!(lambda >= bound_ - 1e-12 * std::max(1.0, std::abs(bound_))))
    throw std::invalid_argument(
        "transport: resolvent parameter below the growth bound alpha*C = " +
        std::to_string(bound_));
}

double TransportOperator::row_weight(int j, int k) const {
  const double w = grid_->node(k) * grid_->log_step();
  return (k == j || k == 0) ? 0.5 * w : w;
}

double TransportOperator::resolvent_cell(int j, int k, double lambda) const {
  // Sampling the exponential at nodes floors each entry at the cell width
  // once the kernel decays inside a single cell; integrating it exactly
  // against a piecewise-linear exponent keeps the large-lambda falloff
  // 1/(lambda + a) instead.
  const auto m = [](double d) {  // (1 - e^{-d})/d, stable near zero
    return d > 1e-12 ? -std::expm1(-d) / d : 1.0 - 0.5 * d;
  };
  const double psi_j = lambda * phi_nodes_[j] + q_nodes_[j];
  const double psi_k = lambda * phi_nodes_[k] + q_nodes_[k];
  const double psi_lo = lambda * phi_edges_[k] + q_edges_[k];
  const double left = (grid_->node(k) - grid_->edge(k)) *
                      std::exp(-(psi_j - psi_k)) * m(psi_k - psi_lo);
  if (k == j) return left;  // the kernel is supported below the node
  const double psi_hi = lambda * phi_edges_[k + 1] + q_edges_[k + 1];
  const double right = (grid_->edge(k + 1) - grid_->node(k)) *
                       std::exp(-(psi_j - psi_hi)) * m(psi_hi - psi_k);
  return left + right;
}

double TransportOperator::resolvent_cell_log(int j, int k,
                                             double lambda) const {
  // log of resolvent_cell: the psi gaps grow like lambda*phi + Q and push
  // the values below the subnormal range long before the math degenerates.
  const auto lm = [](double d) {  // log((1 - e^{-d})/d), stable near zero
    return d > 1e-12 ? std::log(-std::expm1(-d)) - std::log(d)
                     : std::log1p(-0.5 * d);
  };
  const double psi_j = lambda * phi_nodes_[j] + q_nodes_[j];
  const double psi_k = lambda * phi_nodes_[k] + q_nodes_[k];
  const double psi_lo = lambda * phi_edges_[k] + q_edges_[k];
  const double log_left = std::log(grid_->node(k) - grid_->edge(k)) -
                          (psi_j - psi_k) + lm(psi_k - psi_lo);
  if (k == j) return log_left;
  const double psi_hi = lambda * phi_edges_[k + 1] + q_edges_[k + 1];
  const double log_right = std::log(grid_->edge(k + 1) - grid_->node(k)) -
                           (psi_j - psi_hi) + lm(psi_hi - psi_k);
  const double hi = std::max(log_left, log_right);
  if (!std::isfinite(hi)) return hi;
  return hi + std::log1p(std::exp(std::min(log_left, log_right) - hi));
}

GridFunction TransportOperator::apply_U0(double t, const GridFunction& f,
                                         ApplyReport* report) const {
  if (!(t >= 0.0)) throw std::invalid_argument("transport: t >= 0 required");
  if (!f.grid().same_as(*grid_))
    throw std::invalid_argument("transport: grid mismatch");
  const auto itp = f.make_interpolant();
  const int n = grid_->size();
  std::vector<double> out(n, 0.0);
  int first = 0;
  for (int j = 0; j < n; ++j) {
    const auto X = flow_.backward(grid_->node(j), t);
    if (!X) {
      first = j + 1;
      continue;
    }
    const double fx = eval_interpolant(itp, *grid_, *X);
    if (fx != 0.0) out[j] = flow_.rate().eval(*X) / r_nodes_[j] * fx;
  }
  if (report) {
    *report = ApplyReport{};
    report->first_above_front = first;
    report->front_crossed = first > 0;
    if (flow_.regime().regime == Regime::PartlySingular && t > 0.0) {
      report->front = flow_.front(t);
      if (report->front >= grid_->edge(0) &&
          report->front < grid_->edge(n)) {
        int c = static_cast<int>(
            std::floor(std::log(report->front / grid_->edge(0)) /
                       grid_->log_step()));
        report->straddle_cell = std::min(std::max(c, 0), n - 1);
      }
    }
  }
  return GridFunction(grid_, std::move(out));
}

GridFunction TransportOperator::apply_U(double t, const GridFunction& f,
                                        ApplyReport* report) const {
  GridFunction u = apply_U0(t, f, report);
  if (!a_ || t == 0.0) return u;
  const int n = grid_->size();
  for (int j = 0; j < n; ++j) {
    if (u[j] == 0.0) continue;
    const auto X = flow_.backward(grid_->node(j), t);
    u[j] *= std::exp(-q_prim_->between(*X, grid_->node(j)));
  }
  return u;
}

NormEstimate TransportOperator::operator_norm_U0(double t) const {
  if (!(t >= 0.0)) throw std::invalid_argument("transport: t >= 0 required");
  if (t == 0.0) return NormEstimate{1.0, grid_->x_min(), false, false};
  const GrowthRate& r = flow_.rate();
  double lo = 1e-8, hi = 1e7;
  if (r.domain_lo > 0.0) lo = std::max(lo, r.domain_lo * 1.01);
  if (std::isfinite(r.domain_hi)) hi = std::min(hi, r.domain_hi / 1e4);
  auto ratio = [&](double x) {
    try {
      return space_.weight(flow_.forward(x, t)) / space_.weight(x);
    } catch (const std::exception&) {
      return 0.0;  // outside the evaluable range of the rate
    }
  };
  const auto scan = scan_max_log(ratio, lo, hi);
  return NormEstimate{scan.value, scan.arg, scan.at_lower_edge,
                      scan.at_upper_edge};
}

double TransportOperator::empirical_norm_U0(double t, int samples,
                                            unsigned seed) const {
  if (samples < 1) throw std::invalid_argument("transport: samples >= 1");
  const int n = grid_->size();
  std::vector<double> gain(n);
  for (int j = 0; j < n; ++j)
    gain[j] = space_.weight(flow_.forward(grid_->node(j), t)) / wspace_[j];

  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double h = grid_->log_step();
  const double s_min = std::log(grid_->x_min());
  const double s_max = std::log(grid_->x_max());
  std::vector<double> s(n);
  for (int j = 0; j < n; ++j) s[j] = std::log(grid_->node(j));

  auto draw_bump = [&](std::vector<double>& v) {
    // Alternate centers hugging the lower edge (where the shifted-weight
    // supremum lives) with centers spread across the interior.
    double sc;
    if (uni(rng) < 0.5)
      sc = s_min + (5.0 + 10.0 * uni(rng)) * h;
    else
      sc = s_min + 5.0 * h + (s_max - s_min - 35.0 * h) * uni(rng);
    const double sig = (8.0 + 22.0 * uni(rng)) * h;
    for (int j = 0; j < n; ++j) {
      const double d = (s[j] - sc) / sig;
      v[j] += std::exp(-0.5 * d * d);
    }
  };

  double best = 0.0;
  std::vector<double> v(n);
  for (int m = 0; m < samples; ++m) {
    std::fill(v.begin(), v.end(), 0.0);
    draw_bump(v);
    if (m % 3 == 2) draw_bump(v);  // occasional positive mixture
    double num = 0.0, den = 0.0;
    for (int j = 0; j < n; ++j) {
      const double mass = wq_[j] * wspace_[j] * v[j];
      num += mass * gain[j];
      den += mass;
    }
    if (den > 0.0) best = std::max(best, num / den);
  }
  return best;
}

GridFunction TransportOperator::resolvent_T(double lambda,
                                            const GridFunction& f) const {
  require_lambda(lambda);
  if (!f.grid().same_as(*grid_))
    throw std::invalid_argument("transport: grid mismatch");
  const int n = grid_->size();
  std::vector<double> out(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int k = 0; k <= j; ++k) acc += resolvent_cell(j, k, lambda) * f[k];
    out[j] = acc / r_nodes_[j];
  }
  return GridFunction(grid_, std::move(out));
}

std::vector<std::vector<double>> TransportOperator::resolvent_matrix(
    double lambda) const {
  require_lambda(lambda);
  const int n = grid_->size();
  std::vector<std::vector<double>> M(n, std::vector<double>(n, 0.0));
  for (int j = 0; j < n; ++j)
    for (int k = 0; k <= j; ++k)
      M[j][k] = resolvent_cell(j, k, lambda) / r_nodes_[j];
  return M;
}

std::vector<std::vector<double>> TransportOperator::resolvent_matrix_log(
    double lambda) const {
  require_lambda(lambda);
  const int n = grid_->size();
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> M(n, std::vector<double>(n, ninf));
  for (int j = 0; j < n; ++j) {
    const double lr = std::log(r_nodes_[j]);
    for (int k = 0; k <= j; ++k)
      M[j][k] = resolvent_cell_log(j, k, lambda) - lr;
  }
  return M;
}

SlackReport TransportOperator::oracle_pointwise(double lambda,
                                                const GridFunction& f) const {
  require_lambda(lambda);
  SlackReport rep;
  rep.lambda = lambda;
  rep.norm_f = norm(f, space_);
  if (rep.norm_f == 0.0) return rep;  // vacuous: slack stays -1
  const GridFunction res = resolvent_T(lambda, f);
  const int n = grid_->size();
  for (int j = 0; j < n; ++j) {
    const double v = std::abs(res[j]) * wspace_[j] * r_nodes_[j];
    if (v > rep.lhs) {
      rep.lhs = v;
      rep.argmax_node = j;
    }
  }
  rep.slack = rep.lhs / rep.norm_f - 1.0;
  return rep;
}

SlackReport TransportOperator::oracle_smoothing(double lambda,
                                                const GridFunction& f) const {
  require_lambda(lambda);
  if (!f.grid().same_as(*grid_))
    throw std::invalid_argument("transport: grid mismatch");
  SlackReport rep;
  rep.lambda = lambda;
  rep.norm_f = norm(f, space_);
  if (rep.norm_f == 0.0 || !a_) return rep;
  const int n = grid_->size();
  double lhs = 0.0;
  for (int k = 0; k < n; ++k) {
    const double fk = std::abs(f[k]);
    if (fk == 0.0) continue;
    double col = 0.0;
    for (int j = k; j < n; ++j) {
      // Exact cell integral of (a/r) e^{-(Q(y)-Q_k)}; the j = k cell starts
      // at the node itself, matching the support of the resolvent kernel.
      double cell;
      if (j == k)
        cell = -std::expm1(-(q_edges_[k + 1] - q_nodes_[k]));
      else
        cell = std::exp(-(q_edges_[j] - q_nodes_[k])) -
               std::exp(-(q_edges_[j + 1] - q_nodes_[k]));
      if (cell <= 0.0) continue;
      const double outer =
          wspace_[j] *
          std::exp(-lambda * (phi_nodes_[j] - phi_nodes_[k]));
      col += row_weight(j, k) * outer * cell;
    }
    lhs += fk * col;
  }
  rep.lhs = lhs;
  rep.slack = lhs / rep.norm_f - 1.0;
  return rep;
}

double TransportOperator::laplace_check(double lambda, const GridFunction& f,
                                        double t_max, int steps) const {
  require_lambda(lambda);
  if (steps < 2 || steps % 2 != 0)
    throw std::invalid_argument("transport: steps must be even and >= 2");
  const int n = grid_->size();
  std::vector<double> acc(n, 0.0);
  const double ht = t_max / steps;
  for (int i = 0; i <= steps; ++i) {
    const double t = i * ht;
    const double coef = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const GridFunction u = apply_U(t, f);
    const double damp = coef * std::exp(-lambda * t);
    for (int j = 0; j < n; ++j) acc[j] += damp * u[j];
  }
  for (double& v : acc) v *= ht / 3.0;

  const GridFunction res = resolvent_T(lambda, f);
  std::vector<double> diff(n);
  for (int j = 0; j < n; ++j) diff[j] = res[j] - acc[j];
  const double denom = norm(res, space_);
  if (denom == 0.0) return 0.0;
  return norm(GridFunction(grid_, std::move(diff)), space_) / denom;
}

}  // namespace gfrag
