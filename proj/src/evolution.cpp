#include "gfrag/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace gfrag {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double smooth01(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * (3.0 - 2.0 * t);
}

struct PowerResult {
  double mu = 0.0;
  Eigen::VectorXd vec;
  Eigen::VectorXd dual;
  int iters = 0;
  bool converged = false;
  bool dual_converged = false;
};

// Inverse power iteration on (lambda0 - A)^{-1}, started from the strictly
// positive vector u (the space-weight functional), with the dominant
// resolvent eigenvalue mu read off through the same functional.  The dual
// vector runs on the transposed solves, conjugated by the plain quadrature
// weights w so it approximates the adjoint eigenvector for the pairing
// sum w_j e_j f_j.
PowerResult inverse_power(const Eigen::MatrixXd& A, double lambda0,
                          const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                          double tol, int max_iter, bool want_dual) {
  PowerResult out;
  Eigen::MatrixXd M = -A;
  M.diagonal().array() += lambda0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);

  Eigen::VectorXd x = u / u.cwiseAbs().dot(u);
  double mu1 = 0.0, mu2 = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd y = lu.solve(x);
    const double num = u.dot(y);
    const double den = u.dot(x);
    out.mu = num / den;
    out.iters = it;
    const double nn = u.dot(y.cwiseAbs());
    if (!(nn > 0.0) || !std::isfinite(nn)) break;
    x = y / nn;
    if (it >= 3 &&
        std::abs(out.mu - mu1) <= tol * std::max(std::abs(out.mu), 1e-300) &&
        std::abs(mu1 - mu2) <= tol * std::max(std::abs(mu1), 1e-300)) {
      out.converged = true;
      break;
    }
    mu2 = mu1;
    mu1 = out.mu;
  }
  out.vec = x;

  if (want_dual) {
    Eigen::VectorXd z = u / u.cwiseAbs().dot(u);
    double md = 0.0, md1 = 0.0, md2 = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
      Eigen::VectorXd rhs = w.cwiseProduct(z);
      Eigen::VectorXd y = lu.transpose().solve(rhs);
      y = y.cwiseQuotient(w);
      md = u.dot(y) / u.dot(z);
      const double nn = u.dot(y.cwiseAbs());
      if (!(nn > 0.0) || !std::isfinite(nn)) break;
      z = y / nn;
      if (it >= 3 && std::abs(md - md1) <= tol * std::max(std::abs(md), 1e-300) &&
          std::abs(md1 - md2) <= tol * std::max(std::abs(md1), 1e-300)) {
        out.dual_converged = true;
        break;
      }
      md2 = md1;
      md1 = md;
    }
    out.dual = z;
  }
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  LineFit f;
  const int n = static_cast<int>(xs.size());
  if (n < 2) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double det = n * sxx - sx * sx;
  if (det == 0.0) return f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

}  // namespace

EvolutionEngine::EvolutionEngine(TransportOperator op, Kernel kernel,
                                 DeschReport desch, EngineOptions options)
    : op_(std::move(op)),
      kernel_(std::move(kernel)),
      desch_(std::move(desch)),
      opts_(options) {
  if (!desch_.satisfied && !opts_.override_generation) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "evolution: moment-ratio condition fails in %s (limsup "
                  "estimate %.6g); the perturbation series has no contraction "
                  "guarantee.  Set override_generation to proceed anyway.",
                  desch_.space.kind_name(), desch_.L);
    throw std::invalid_argument(buf);
  }
  const Grid& g = *op_.grid();
  n_ = g.size();

  const AbsorptionRate a =
      op_.has_absorption() ? op_.absorption() : AbsorptionRate::zero();
  a_nodes_.resize(n_);
  a_max_ = 0.0;
  for (int j = 0; j < n_; ++j) {
    a_nodes_[j] = a.eval(g.node(j));
    a_max_ = std::max(a_max_, a_nodes_[j]);
  }

  const auto rows = assemble_B(kernel_, a, g);
  B_mat_.resize(n_, n_);
  for (int j = 0; j < n_; ++j)
    for (int k = 0; k < n_; ++k) B_mat_(j, k) = rows[j][k];

  const auto w = g.quad_weights(QuadRule::LogTrapezoid);
  u_weights_.resize(n_);
  for (int j = 0; j < n_; ++j)
    u_weights_[j] = w[j] * op_.space().weight(g.node(j));
  bt_u_ = B_mat_.transpose() * u_weights_;

  // Smallest lambda (to ~1e-3) whose weighted estimate of ||B R_T(lambda)||
  // drops to 0.9: geometric bracketing, then bisection.  The estimate is
  // monotone decreasing in lambda because every resolvent entry is.
  const double bound = op_.growth_bound();
  double lo = bound, hi = bound;
  if (contraction_estimate(bound) > 0.9) {
    bool bracketed = false;
    for (int k = 0; k <= 41; ++k) {
      hi = bound + std::ldexp(1.0, k);
      if (contraction_estimate(hi) <= 0.9) {
        bracketed = true;
        break;
      }
      lo = hi;
    }
    if (!bracketed)
      throw std::runtime_error(
          "evolution: no lambda with a contractive fragmentation-resolvent "
          "estimate was found up to growth_bound + 2^41; the kernel/rate "
          "pair is outside what this solver can evolve");
    while (hi - lo > 1e-3 * std::max(1.0, std::abs(hi))) {
      const double mid = 0.5 * (lo + hi);
      (contraction_estimate(mid) <= 0.9 ? hi : lo) = mid;
    }
  }
  lambda_desch_ = hi;
  lambda_ref_ = lambda_desch_ + 1.0;

  RT_ref_ = assemble_quadrature_resolvent(lambda_ref_);
  // T := lambda_ref - RT^{-1}; the triangular inverse is exact up to
  // rounding, so resolvent identities for T hold at every admissible lambda.
  Eigen::MatrixXd rt_inv = RT_ref_.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(n_, n_));
  T_mat_ = -rt_inv;
  T_mat_.diagonal().array() += lambda_ref_;
  A_mat_ = T_mat_ + B_mat_;
}

Eigen::MatrixXd EvolutionEngine::assemble_quadrature_resolvent(
    double lambda) const {
  const auto rows = op_.resolvent_matrix(lambda);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n_, n_);
  for (int j = 0; j < n_; ++j)
    for (int k = 0; k <= j; ++k) M(j, k) = rows[j][k];
  return M;
}

double EvolutionEngine::contraction_estimate(double lambda) const {
  // All entries of B and R_T are nonnegative, so the weighted column-sum
  // maximum is the exact operator norm of the discretized B R_T(lambda).
  const Eigen::MatrixXd RT = assemble_quadrature_resolvent(lambda);
  const Eigen::VectorXd v = RT.transpose() * bt_u_;
  double best = 0.0;
  for (int j = 0; j < n_; ++j) best = std::max(best, v[j] / u_weights_[j]);
  return best;
}

GridFunction EvolutionEngine::apply_B_op(const GridFunction& f) const {
  if (!f.grid().same_as(*op_.grid()))
    throw std::invalid_argument("apply_B_op: grid mismatch");
  Eigen::Map<const Eigen::VectorXd> x(f.values().data(), n_);
  Eigen::VectorXd y = B_mat_ * x;
  return GridFunction(op_.grid(), std::vector<double>(y.data(), y.data() + n_));
}

GridFunction EvolutionEngine::apply_T_op(const GridFunction& f) const {
  if (!f.grid().same_as(*op_.grid()))
    throw std::invalid_argument("apply_T_op: grid mismatch");
  Eigen::Map<const Eigen::VectorXd> x(f.values().data(), n_);
  Eigen::VectorXd y = T_mat_ * x;
  return GridFunction(op_.grid(), std::vector<double>(y.data(), y.data() + n_));
}

GridFunction EvolutionEngine::apply_A_op(const GridFunction& f) const {
  if (!f.grid().same_as(*op_.grid()))
    throw std::invalid_argument("apply_A_op: grid mismatch");
  Eigen::Map<const Eigen::VectorXd> x(f.values().data(), n_);
  Eigen::VectorXd y = A_mat_ * x;
  return GridFunction(op_.grid(), std::vector<double>(y.data(), y.data() + n_));
}

GridFunction EvolutionEngine::solve_res_T(double lambda,
                                          const std::vector<double>& rhs) const {
  // (lambda - T)^{-1} = RT [ (lambda - lambda_ref) RT + I ]^{-1}
  Eigen::MatrixXd S = (lambda - lambda_ref_) * RT_ref_;
  S.diagonal().array() += 1.0;
  for (int j = 0; j < n_; ++j)
    if (!(S(j, j) > 0.0))
      throw std::invalid_argument(
          "resolvent_T: lambda is below the range where the discrete "
          "transport resolvent stays positive");
  Eigen::Map<const Eigen::VectorXd> b(rhs.data(), n_);
  Eigen::VectorXd z = S.triangularView<Eigen::Lower>().solve(b);
  Eigen::VectorXd res = RT_ref_.triangularView<Eigen::Lower>() * z;
  return GridFunction(op_.grid(),
                      std::vector<double>(res.data(), res.data() + n_));
}

GridFunction EvolutionEngine::resolvent_T_consistent(
    double lambda, const GridFunction& f) const {
  if (!f.grid().same_as(*op_.grid()))
    throw std::invalid_argument("resolvent_T_consistent: grid mismatch");
  const double bound = op_.growth_bound();
  if (lambda < bound - 1e-12 * std::max(1.0, std::abs(bound)))
    throw std::invalid_argument(
        "resolvent_T_consistent: lambda below the growth bound");
  return solve_res_T(lambda, f.values());
}

GridFunction EvolutionEngine::resolvent_A(double lambda, const GridFunction& f,
                                          VApplyInfo* info) const {
  if (!f.grid().same_as(*op_.grid()))
    throw std::invalid_argument("resolvent_A: grid mismatch");
  const double est = contraction_estimate(lambda);
  if (!(est < 1.0 - opts_.contraction_margin)) {
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "resolvent_A: series is not a contraction at lambda=%.6g "
                  "(estimate %.4f >= %.4f)",
                  lambda, est, 1.0 - opts_.contraction_margin);
    throw std::invalid_argument(buf);
  }
  if (info) {
    *info = VApplyInfo{};
    info->contraction = est;
  }

  Eigen::MatrixXd S = (lambda - lambda_ref_) * RT_ref_;
  S.diagonal().array() += 1.0;
  auto wnorm = [&](const Eigen::VectorXd& v) {
    return u_weights_.dot(v.cwiseAbs());
  };

  Eigen::Map<const Eigen::VectorXd> f0(f.values().data(), n_);
  Eigen::VectorXd w = f0;
  Eigen::VectorXd sum = w;
  bool truncated = true;
  int used = 0;
  double last = 0.0;
  for (int m = 1; m <= opts_.series.max_terms; ++m) {
    Eigen::VectorXd z = S.triangularView<Eigen::Lower>().solve(w);
    w = B_mat_ * (RT_ref_.triangularView<Eigen::Lower>() * z);
    sum += w;
    used = m;
    last = wnorm(w);
    if (last <= opts_.series.cutoff * std::max(wnorm(sum), 1e-300)) {
      truncated = false;
      break;
    }
  }
  Eigen::VectorXd z = S.triangularView<Eigen::Lower>().solve(sum);
  Eigen::VectorXd res = RT_ref_.triangularView<Eigen::Lower>() * z;
  if (info) {
    info->terms_used = used;
    info->truncated = truncated;
    info->last_term_norm = last;
    info->contraction = est;
  }
  return GridFunction(op_.grid(),
                      std::vector<double>(res.data(), res.data() + n_));
}

GridFunction EvolutionEngine::apply_V(double t, const GridFunction& f,
                                      VApplyInfo* info) const {
  if (!f.grid().same_as(*op_.grid()))
    throw std::invalid_argument("apply_V: grid mismatch");
  if (t < 0.0) throw std::invalid_argument("apply_V: negative time");
  if (info) *info = VApplyInfo{};
  if (t == 0.0) return f;

  const Grid& g = *op_.grid();
  const auto& flow = op_.flow();
  const int m = opts_.series.duhamel_time_nodes;
  const double ds = t / m;

  // Transport tables per lag d*ds: backward foot, and the combined
  // jacobian * absorption factor.  Dead entries sit below the front.
  std::vector<std::vector<double>> feet(m + 1, std::vector<double>(n_, 0.0));
  std::vector<std::vector<double>> fac(m + 1, std::vector<double>(n_, 0.0));
  std::vector<std::vector<char>> live(m + 1, std::vector<char>(n_, 0));
  for (int j = 0; j < n_; ++j) {
    feet[0][j] = g.node(j);
    fac[0][j] = 1.0;
    live[0][j] = 1;
  }
  for (int d = 1; d <= m; ++d) {
    const double delta = d * ds;
    for (int j = 0; j < n_; ++j) {
      const double y = g.node(j);
      const auto X = flow.backward(y, delta);
      if (!X) continue;
      const auto J = flow.jacobian(y, delta);
      if (!J) continue;
      double damp = 1.0;
      if (op_.has_absorption()) damp = std::exp(-op_.q_between(*X, y));
      feet[d][j] = *X;
      fac[d][j] = *J * damp;
      live[d][j] = 1;
    }
  }

  auto wnorm = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (int j = 0; j < n_; ++j) s += u_weights_[j] * std::abs(v[j]);
    return s;
  };

  // Level 0: pure transport at each time node.
  std::vector<std::vector<double>> cur(m + 1, std::vector<double>(n_, 0.0));
  std::vector<std::vector<double>> nxt(m + 1, std::vector<double>(n_, 0.0));
  const MonotoneCubic itp_f = f.make_interpolant();
  for (int i = 0; i <= m; ++i)
    for (int j = 0; j < n_; ++j)
      if (live[i][j])
        cur[i][j] = fac[i][j] * eval_interpolant(itp_f, g, feet[i][j]);

  std::vector<double> total = cur[m];
  bool truncated = true;
  int used = 0;
  double last = 0.0;
  std::vector<MonotoneCubic> itp;
  itp.reserve(m + 1);
  Eigen::VectorXd h(n_);
  std::vector<std::vector<double>> H(m + 1, std::vector<double>(n_, 0.0));

  for (int level = 1; level <= opts_.series.max_terms; ++level) {
    itp.clear();
    for (int l = 0; l <= m; ++l) {
      Eigen::Map<const Eigen::VectorXd> gl(cur[l].data(), n_);
      h = B_mat_ * gl;
      std::copy(h.data(), h.data() + n_, H[l].begin());
      itp.push_back(
          GridFunction(op_.grid(), H[l]).make_interpolant());
    }
    for (int i = 0; i <= m; ++i) {
      std::fill(nxt[i].begin(), nxt[i].end(), 0.0);
      if (i == 0) continue;
      for (int l = 0; l <= i; ++l) {
        const double coef = ds * ((l == 0 || l == i) ? 0.5 : 1.0);
        const int d = i - l;
        const auto& ft = feet[d];
        const auto& fc = fac[d];
        const auto& lv = live[d];
        auto& out = nxt[i];
        const MonotoneCubic& ip = itp[l];
        for (int j = 0; j < n_; ++j)
          if (lv[j]) out[j] += coef * fc[j] * eval_interpolant(ip, g, ft[j]);
      }
    }
    for (int j = 0; j < n_; ++j) total[j] += nxt[m][j];
    used = level;
    last = wnorm(nxt[m]);
    if (last <= opts_.series.cutoff * std::max(wnorm(total), 1e-300)) {
      truncated = false;
      break;
    }
    cur.swap(nxt);
  }
  if (info) {
    info->terms_used = used;
    info->truncated = truncated;
    info->last_term_norm = last;
  }
  return GridFunction(op_.grid(), std::move(total));
}

void EvolutionEngine::fv_remap(std::vector<double>& u, double tau) const {
  if (tau <= 0.0) return;
  const Grid& g = *op_.grid();
  const auto& E = g.edges();
  const auto& flow = op_.flow();

  // Linear reconstruction per cell, centred at the cell centroid so the
  // cell integral equals the stored average for every slope choice; the
  // remap is then exactly conservative.  Slopes come from the parabola
  // through the three neighbouring averages and are shrunk only as far
  // as keeping both edge values nonnegative, which keeps the whole
  // reconstruction nonnegative wherever the averages are.
  std::vector<double> xb(n_);
  for (int j = 0; j < n_; ++j) xb[j] = 0.5 * (E[j] + E[j + 1]);
  std::vector<double> sig(n_, 0.0);
  for (int j = 1; j + 1 < n_; ++j) {
    const double hl = xb[j] - xb[j - 1];
    const double hr = xb[j + 1] - xb[j];
    const double dl = (u[j] - u[j - 1]) / hl;
    const double dr = (u[j + 1] - u[j]) / hr;
    double s = (dl * hr + dr * hl) / (hl + hr);
    if (u[j] >= 0.0 && s != 0.0) {
      const double vlo = u[j] + s * (E[j] - xb[j]);
      const double vhi = u[j] + s * (E[j + 1] - xb[j]);
      double scale = 1.0;
      if (vlo < 0.0) scale = std::min(scale, u[j] / (u[j] - vlo));
      if (vhi < 0.0) scale = std::min(scale, u[j] / (u[j] - vhi));
      s *= scale;
    }
    sig[j] = s;
  }

  // Backward feet of the cell edges; clamped to the lowest edge because the
  // reconstruction vanishes below it and below-front feet carry no mass
  // (zero inflow at the origin).
  std::vector<double> foot(n_ + 1);
  for (int j = 0; j <= n_; ++j) {
    const auto b = flow.backward(E[j], tau);
    foot[j] = b ? std::max(*b, E[0]) : E[0];
  }

  auto cellint = [&](int c, double p, double q) {
    const double qc = q - xb[c];
    const double pc = p - xb[c];
    return u[c] * (q - p) + 0.5 * sig[c] * (qc * qc - pc * pc);
  };

  std::vector<double> nu(n_, 0.0);
  int k = 0;
  for (int j = 0; j < n_; ++j) {
    const double p = foot[j];
    const double q = foot[j + 1];
    double acc = 0.0;
    if (q > p) {
      while (k + 1 < n_ && E[k + 1] <= p) ++k;
      int c = k;
      double lo = p;
      while (lo < q && c < n_) {
        const double hi = std::min(q, E[c + 1]);
        if (hi > lo) acc += cellint(c, lo, hi);
        lo = hi;
        ++c;
      }
    }
    nu[j] = acc / (E[j + 1] - E[j]);
  }
  u = nu;
}

void EvolutionEngine::fv_step(std::vector<double>& u, double dt) const {
  fv_remap(u, 0.5 * dt);
  // Reaction step for du/dt = -a u + B u: exact diagonal decay with the
  // gain taken at an exponentially damped midpoint state.  Every term is
  // nonnegative, so positivity needs no step-size restriction, and the
  // scalar expansion matches exp((b-a)dt) through second order.
  Eigen::Map<Eigen::VectorXd> x(u.data(), n_);
  Eigen::VectorXd dec_half(n_), dec_full(n_);
  for (int j = 0; j < n_; ++j) {
    dec_half[j] = std::exp(-0.5 * dt * a_nodes_[j]);
    dec_full[j] = dec_half[j] * dec_half[j];
  }
  Eigen::VectorXd s1 = B_mat_ * x;
  Eigen::VectorXd half =
      (dec_half.array() * (x.array() + 0.5 * dt * s1.array())).matrix();
  Eigen::VectorXd s2 = B_mat_ * half;
  x = (dec_full.array() * x.array() +
       dt * dec_half.array() * s2.array()).matrix();
  fv_remap(u, 0.5 * dt);
}

GridFunction EvolutionEngine::apply_V_fv(double t, const GridFunction& f) const {
  auto snaps = fv_sweep(f, {t});
  return std::move(snaps.front());
}

std::vector<GridFunction> EvolutionEngine::fv_sweep(
    const GridFunction& f, const std::vector<double>& ts) const {
  if (!f.grid().same_as(*op_.grid()))
    throw std::invalid_argument("fv_sweep: grid mismatch");
  if (ts.empty()) throw std::invalid_argument("fv_sweep: empty time list");
  for (size_t i = 0; i < ts.size(); ++i) {
    if (ts[i] < 0.0) throw std::invalid_argument("fv_sweep: negative time");
    if (i > 0 && ts[i] < ts[i - 1])
      throw std::invalid_argument("fv_sweep: times must be nondecreasing");
  }
  std::vector<GridFunction> out;
  out.reserve(ts.size());
  std::vector<double> u = f.values();
  double t_cur = 0.0;
  for (const double target : ts) {
    const double span = target - t_cur;
    if (span > 1e-14 * std::max(1.0, target)) {
      const double dt_max = a_max_ > 0.0 ? opts_.fv_safety / a_max_ : span;
      const int steps =
          std::max(1, static_cast<int>(std::ceil(span / dt_max - 1e-12)));
      const double dt = span / steps;
      for (int s = 0; s < steps; ++s) fv_step(u, dt);
      t_cur = target;
    }
    out.emplace_back(op_.grid(), u);
  }
  return out;
}

double EvolutionEngine::cross_check(double t, const GridFunction& f) const {
  const GridFunction d = apply_V(t, f);
  const GridFunction v = apply_V_fv(t, f);
  double num = 0.0, den = 0.0;
  for (int j = 0; j < n_; ++j) {
    num += u_weights_[j] * std::abs(d[j] - v[j]);
    den += u_weights_[j] * std::abs(d[j]);
  }
  return den > 0.0 ? num / den : num;
}

double EvolutionEngine::pairing_h(const GridFunction& e,
                                  const GridFunction& f) const {
  return pairing(e, f);
}

EigenReport EvolutionEngine::perron_eigenpair(std::optional<double> lambda0,
                                              double tol, int max_iter) const {
  const double lam0 = lambda0.value_or(lambda_ref_);
  const double est = contraction_estimate(lam0);
  if (!(est < 1.0 - opts_.contraction_margin)) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "perron_eigenpair: lambda0=%.6g is outside the contraction "
                  "region (estimate %.4f)",
                  lam0, est);
    throw std::invalid_argument(buf);
  }

  const Grid& g = *op_.grid();
  const auto wv = g.quad_weights(QuadRule::LogTrapezoid);
  Eigen::VectorXd w(n_);
  for (int j = 0; j < n_; ++j) w[j] = wv[j];

  const PowerResult pr =
      inverse_power(A_mat_, lam0, u_weights_, w, tol, max_iter, true);

  EigenReport rep;
  rep.lambda_shift = lam0;
  rep.mu = pr.mu;
  rep.iterations = pr.iters;

  if (!pr.converged || !pr.dual_converged) {
    rep.message =
        "stagnation: inverse power iteration did not settle within the "
        "iteration budget";
  } else if (!(pr.mu > 0.0)) {
    rep.message = "dominant resolvent eigenvalue is not positive";
  }
  rep.converged = pr.converged && pr.dual_converged && pr.mu > 0.0;
  rep.lambda_star = pr.mu != 0.0
                        ? lam0 - 1.0 / pr.mu
                        : std::numeric_limits<double>::quiet_NaN();

  // Normalize: ||f|| = 1 in the ambient space, <e, f>_h = 1.
  Eigen::VectorXd fv = pr.vec;
  if (u_weights_.dot(fv) < 0.0) fv = -fv;
  const double nf = u_weights_.dot(fv.cwiseAbs());
  if (nf > 0.0) fv /= nf;

  Eigen::VectorXd ev = pr.dual;
  double c = 0.0;
  for (int j = 0; j < n_; ++j) c += w[j] * ev[j] * fv[j];
  if (c < 0.0) {
    ev = -ev;
    c = -c;
  }
  if (c > 0.0) {
    ev /= c;
  } else {
    rep.converged = false;
    rep.message = "degenerate pairing between primal and dual iterates";
  }

  rep.f_vec = GridFunction(op_.grid(),
                           std::vector<double>(fv.data(), fv.data() + n_));
  rep.e_vec = GridFunction(op_.grid(),
                           std::vector<double>(ev.data(), ev.data() + n_));

  if (std::isfinite(rep.lambda_star)) {
    Eigen::VectorXd r1 = A_mat_ * fv - rep.lambda_star * fv;
    rep.residual_primal = u_weights_.dot(r1.cwiseAbs());
    Eigen::VectorXd r2 =
        (A_mat_.transpose() * w.cwiseProduct(ev)).cwiseQuotient(w) -
        rep.lambda_star * ev;
    double num = 0.0, den = 0.0;
    for (int j = 0; j < n_; ++j) {
      num += w[j] * std::abs(r2[j]);
      den += w[j] * std::abs(ev[j]);
    }
    rep.residual_dual = den > 0.0 ? num / den : kInf;
  } else {
    rep.residual_primal = rep.residual_dual = kInf;
  }
  return rep;
}

PositivityCheck EvolutionEngine::positivity_improving_check(
    const GridFunction& gfun) const {
  if (!gfun.grid().same_as(*op_.grid()))
    throw std::invalid_argument("positivity_improving_check: grid mismatch");
  PositivityCheck out;
  bool nonneg = true;
  double mx = 0.0;
  for (int j = 0; j < n_; ++j) {
    mx = std::max(mx, std::abs(gfun[j]));
    if (gfun[j] < 0.0) nonneg = false;
  }
  if (mx == 0.0) return out;  // vacuous input

  if (!nonneg) {
    // Signed input: report the plain resolvent minimum.
    const GridFunction res = resolvent_A(lambda_ref_, gfun);
    out.valid = true;
    out.min_value = kInf;
    for (int j = 0; j < n_; ++j)
      if (res[j] < out.min_value) {
        out.min_value = res[j];
        out.argmin_node = j;
      }
    out.min_log_value =
        out.min_value > 0.0 ? std::log(out.min_value) : -kInf;
    return out;
  }

  // Nonnegative input: evaluate the Neumann series on logarithms.  The
  // transport resolvent damps by exp(-(psi gaps)) across the size range,
  // which undershoots the smallest subnormal double long before the true
  // value is zero; every series term is nonnegative, so log-sum-exp
  // reproduces the sum without cancellation and keeps the genuinely
  // unreachable nodes at -infinity.
  const auto LR = op_.resolvent_matrix_log(lambda_ref_);
  std::vector<std::vector<double>> LB(n_, std::vector<double>(n_, -kInf));
  for (int j = 0; j < n_; ++j)
    for (int k = 0; k < n_; ++k)
      if (B_mat_(j, k) > 0.0) LB[j][k] = std::log(B_mat_(j, k));

  auto lmatvec = [&](const std::vector<std::vector<double>>& M,
                     const std::vector<double>& v, std::vector<double>& dst) {
    for (int j = 0; j < n_; ++j) {
      const auto& row = M[j];
      double hi = -kInf;
      for (int k = 0; k < n_; ++k) {
        const double s = row[k] + v[k];
        if (s > hi) hi = s;
      }
      if (!std::isfinite(hi)) {
        dst[j] = -kInf;
        continue;
      }
      double acc = 0.0;
      for (int k = 0; k < n_; ++k) acc += std::exp(row[k] + v[k] - hi);
      dst[j] = hi + std::log(acc);
    }
  };
  std::vector<double> lw_weights(n_);
  for (int j = 0; j < n_; ++j) lw_weights[j] = std::log(u_weights_[j]);
  auto lwnorm = [&](const std::vector<double>& v) {
    double hi = -kInf;
    for (int j = 0; j < n_; ++j) hi = std::max(hi, lw_weights[j] + v[j]);
    if (!std::isfinite(hi)) return -kInf;
    double acc = 0.0;
    for (int j = 0; j < n_; ++j) acc += std::exp(lw_weights[j] + v[j] - hi);
    return hi + std::log(acc);
  };

  std::vector<double> lw(n_), lsum(n_), lz(n_);
  for (int j = 0; j < n_; ++j)
    lw[j] = gfun[j] > 0.0 ? std::log(gfun[j]) : -kInf;
  lsum = lw;
  const double lcut = std::log(opts_.series.cutoff);
  for (int m = 1; m <= opts_.series.max_terms; ++m) {
    lmatvec(LR, lw, lz);
    lmatvec(LB, lz, lw);
    for (int j = 0; j < n_; ++j) {
      const double hi = std::max(lsum[j], lw[j]);
      lsum[j] = std::isfinite(hi)
                    ? hi + std::log1p(std::exp(std::min(lsum[j], lw[j]) - hi))
                    : hi;
    }
    if (lwnorm(lw) <= lcut + lwnorm(lsum)) break;
  }
  lmatvec(LR, lsum, lz);

  out.valid = true;
  out.min_log_value = kInf;
  for (int j = 0; j < n_; ++j)
    if (lz[j] < out.min_log_value) {
      out.min_log_value = lz[j];
      out.argmin_node = j;
    }
  out.min_value = std::exp(out.min_log_value);
  return out;
}

GapProxyReport EvolutionEngine::gap_proxy(double window_lo, double window_hi,
                                          double cap) const {
  GapProxyReport rep;
  if (!(window_lo > 0.0) || !(window_hi > window_lo) || !(cap > 0.0))
    throw std::invalid_argument("gap_proxy: need 0 < window_lo < window_hi "
                                "and a positive cap");
  const Grid& g = *op_.grid();
  const double L = std::log(window_lo), H = std::log(window_hi);
  const double q = 0.25 * (H - L);
  auto p = [&](double x) {
    const double s = std::log(x);
    return smooth01((s - L) / q) * smooth01((H - s) / q);
  };

  const AbsorptionRate a =
      op_.has_absorption() ? op_.absorption() : AbsorptionRate::zero();
  const auto wv = g.quad_weights(QuadRule::LogTrapezoid);

  // The windowed, capped part of the kernel; entrywise below B by
  // construction, so the remainder stays nonnegative.
  Eigen::MatrixXd Bbar = Eigen::MatrixXd::Zero(n_, n_);
  double bbar_total = 0.0;
  for (int j = 0; j < n_; ++j) {
    const double xj = g.node(j);
    const double pj = p(xj);
    if (pj == 0.0) continue;
    for (int k = j + 1; k < n_; ++k) {
      const double yk = g.node(k);
      const double pk = p(yk);
      if (pk == 0.0) continue;
      const double base = a_nodes_[k] * kernel_.b(xj, yk);
      Bbar(j, k) = wv[k] * std::min(base, cap) * pj * pk;
      bbar_total += Bbar(j, k);
    }
    const double er = g.edge(j + 1);
    const double mid = std::sqrt(xj * er);
    const double based = a.eval(mid) * kernel_.b(xj, mid);
    Bbar(j, j) = (er - xj) * std::min(based, cap) * pj * p(mid);
    bbar_total += Bbar(j, j);
  }
  if (!(bbar_total > 0.0)) {
    rep.note = "window removes nothing from the kernel (cutoff vanishes on "
               "the grid); proxy is undefined";
    return rep;
  }

  Eigen::MatrixXd Bhat = (B_mat_ - Bbar).cwiseMax(0.0);
  Eigen::MatrixXd Ahat = T_mat_ + Bhat;

  const auto w_plain = g.quad_weights(QuadRule::LogTrapezoid);
  Eigen::VectorXd w(n_);
  for (int j = 0; j < n_; ++j) w[j] = w_plain[j];

  const PowerResult full =
      inverse_power(A_mat_, lambda_ref_, u_weights_, w, 1e-10, 5000, false);
  const PowerResult hat =
      inverse_power(Ahat, lambda_ref_, u_weights_, w, 1e-10, 5000, false);

  if (full.converged && full.mu > 0.0) rep.s_full = lambda_ref_ - 1.0 / full.mu;
  if (hat.converged && hat.mu > 0.0) rep.s_hat = lambda_ref_ - 1.0 / hat.mu;
  rep.valid = full.converged && hat.converged && full.mu > 0.0 && hat.mu > 0.0;
  if (rep.valid) {
    rep.proxy = rep.s_full - rep.s_hat;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "spectral bound drops from %.8g to %.8g when the window "
                  "[%g, %g] is removed",
                  rep.s_full, rep.s_hat, window_lo, window_hi);
    rep.note = buf;
  } else {
    rep.note = "power iteration failed on the truncated operator";
  }
  return rep;
}

AEGReport EvolutionEngine::aeg_diagnose(const EigenReport& eigen,
                                        const GridFunction& f,
                                        const std::vector<double>& t_grid) const {
  if (!eigen.f_vec.grid_ptr() || !eigen.f_vec.grid().same_as(*op_.grid()))
    throw std::invalid_argument("aeg_diagnose: eigen report grid mismatch");
  if (t_grid.size() < 2)
    throw std::invalid_argument("aeg_diagnose: need at least two times");

  AEGReport rep;
  const auto snaps = fv_sweep(f, t_grid);
  const double ef = pairing(eigen.e_vec, f);

  std::vector<double> dist(t_grid.size(), 0.0);
  for (size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    const double scale = std::exp(-eigen.lambda_star * t);
    double d = 0.0;
    for (int j = 0; j < n_; ++j)
      d += u_weights_[j] * std::abs(scale * snaps[i][j] - ef * eigen.f_vec[j]);
    dist[i] = d;
    rep.decay_curve.emplace_back(t, d);
    const double cons = pairing(eigen.e_vec, snaps[i]) * scale;
    const double drift =
        ef != 0.0 ? std::abs(cons / ef - 1.0) : kInf;
    rep.conserved_drift = std::max(rep.conserved_drift, drift);
  }

  // Transient end: last violation of (1+wiggle)-monotone decrease, but not
  // before the global maximum.
  const int m = static_cast<int>(dist.size());
  int argmax = 0;
  for (int i = 1; i < m; ++i)
    if (dist[i] > dist[argmax]) argmax = i;
  int last_viol = -1;
  for (int i = 0; i + 1 < m; ++i)
    if (dist[i + 1] > (1.0 + rep.monotone_wiggle) * dist[i]) last_viol = i;
  rep.transient_index = std::max(argmax, last_viol + 1);
  rep.post_transient_monotone = (m - rep.transient_index) >= 2;

  double dmax = 0.0;
  for (double d : dist) dmax = std::max(dmax, d);
  std::vector<double> xs, ys;
  for (int i = rep.transient_index; i < m; ++i)
    if (dist[i] > 1e-13 * dmax) {
      xs.push_back(t_grid[i]);
      ys.push_back(std::log(dist[i]));
    }
  if (xs.size() >= 4) {
    rep.epsilon_fit = -fit_line(xs, ys).slope;
    rep.fit_valid = true;
  }
  return rep;
}

namespace {

double dense_eigen_raw(const GrowthRate& r, const AbsorptionRate& a,
                       const Kernel& k, double x_min, double x_max, int n) {
  std::vector<double> E(n + 1), C(n), xb(n);
  const double lh = std::log(x_max / x_min) / n;
  for (int i = 0; i <= n; ++i) E[i] = x_min * std::exp(i * lh);
  for (int j = 0; j < n; ++j) {
    C[j] = std::sqrt(E[j] * E[j + 1]);
    xb[j] = 0.5 * (E[j] + E[j + 1]);
  }

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    const double dj = E[j + 1] - E[j];
    // Central flux at interior edges with the edge value interpolated
    // between the adjacent cell centroids (the averages live there), zero
    // inflow at the bottom, upwind outflow at the top.
    if (j + 1 < n) {
      const double th = (E[j + 1] - xb[j]) / (xb[j + 1] - xb[j]);
      const double c = r.eval(E[j + 1]) / dj;
      M(j, j) -= c * (1.0 - th);
      M(j, j + 1) -= c * th;
    } else {
      M(j, j) -= r.eval(E[n]) / dj;
    }
    if (j > 0) {
      const double th = (E[j] - xb[j - 1]) / (xb[j] - xb[j - 1]);
      const double c = r.eval(E[j]) / dj;
      M(j, j - 1) += c * (1.0 - th);
      M(j, j) += c * th;
    }
    M(j, j) -= a.eval(C[j]);
    for (int kk = j + 1; kk < n; ++kk)
      M(j, kk) += a.eval(C[kk]) * k.b(C[j], C[kk]) * (E[kk + 1] - E[kk]);
    // Daughters born inside the collocation cell itself: the slice
    // (C_j, E_{j+1}) is not covered by the whole-cell sum above.
    const double m = std::sqrt(C[j] * E[j + 1]);
    M(j, j) += a.eval(m) * k.b(C[j], m) * (E[j + 1] - C[j]);
  }

  const Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  double best = -kInf;
  for (int i = 0; i < n; ++i) best = std::max(best, es.eigenvalues()[i].real());
  return best;
}

}  // namespace

double dense_eigen_oracle(const GrowthRate& r, const AbsorptionRate& a,
                          const Kernel& k, double x_min, double x_max, int n) {
  if (!(x_min > 0.0) || !(x_max > x_min) || n < 8)
    throw std::invalid_argument("dense_eigen_oracle: bad grid parameters");
  const double fine = dense_eigen_raw(r, a, k, x_min, x_max, n);
  if (n < 16) return fine;
  // The scheme converges at second order in the mesh width, so one
  // Richardson step against the half-resolution solve removes the leading
  // error term.
  const double coarse = dense_eigen_raw(r, a, k, x_min, x_max, n / 2);
  return (4.0 * fine - coarse) / 3.0;
}

}  // namespace gfrag
