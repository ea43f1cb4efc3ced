#include "gfrag/grid.hpp"

#include <cmath>

namespace gfrag {

double WeightedSpace::weight(double x) const {
  return kind == Weight::Power ? std::pow(x, alpha) : std::pow(1.0 + x, alpha);
}

void WeightedSpace::validate() const {
  if (!std::isfinite(alpha) || alpha < 0.0)
    throw std::invalid_argument("WeightedSpace: alpha must be finite and >= 0");
}

Grid::Grid(double x_min, double x_max, int n)
    : x_min_(x_min), x_max_(x_max), n_(n) {
  if (!(x_min > 0.0) || !(x_max > x_min))
    throw std::invalid_argument("Grid: need 0 < x_min < x_max");
  if (n < 4) throw std::invalid_argument("Grid: need at least 4 cells");
  const double s0 = std::log(x_min), s1 = std::log(x_max);
  h_ = (s1 - s0) / n;
  edges_.resize(n + 1);
  nodes_.resize(n);
  for (int k = 0; k <= n; ++k) edges_[k] = std::exp(s0 + k * h_);
  edges_.front() = x_min;
  edges_.back() = x_max;
  for (int k = 0; k < n; ++k) nodes_[k] = std::sqrt(edges_[k] * edges_[k + 1]);
}

std::shared_ptr<const Grid> Grid::make_log(double x_min, double x_max, int n) {
  return std::shared_ptr<const Grid>(new Grid(x_min, x_max, n));
}

std::vector<double> Grid::quad_weights(QuadRule rule) const {
  std::vector<double> w(n_);
  if (rule == QuadRule::LogMidpoint) {
    for (int k = 0; k < n_; ++k) w[k] = nodes_[k] * h_;
  } else {
    for (int k = 0; k < n_; ++k) w[k] = nodes_[k] * h_;
    w.front() *= 0.5;
    w.back() *= 0.5;
  }
  return w;
}

GridFunction::GridFunction(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_ || static_cast<int>(values_.size()) != grid_->size())
    throw std::invalid_argument("GridFunction: value count != grid size");
}

GridFunction GridFunction::sample(GridPtr grid,
                                  const std::function<double(double)>& f) {
  std::vector<double> v(grid->size());
  for (int k = 0; k < grid->size(); ++k) v[k] = f(grid->node(k));
  return GridFunction(std::move(grid), std::move(v));
}

GridFunction GridFunction::zero(GridPtr grid) {
  std::vector<double> v(grid->size(), 0.0);
  return GridFunction(std::move(grid), std::move(v));
}

MonotoneCubic GridFunction::make_interpolant() const {
  std::vector<double> s(values_.size());
  for (size_t k = 0; k < s.size(); ++k) s[k] = std::log(grid_->node(k));
  return MonotoneCubic(std::move(s), values_);
}

double eval_interpolant(const MonotoneCubic& interp, const Grid& grid,
                        double x) {
  if (!(x >= grid.x_min()) || !(x <= grid.x_max())) return 0.0;
  return interp(std::log(x));
}

double integrate(const GridFunction& f, QuadRule rule) {
  const auto w = f.grid().quad_weights(rule);
  double acc = 0.0;
  for (int k = 0; k < f.size(); ++k) acc += w[k] * f[k];
  return acc;
}

double norm(const GridFunction& f, const WeightedSpace& space, QuadRule rule) {
  space.validate();
  const auto w = f.grid().quad_weights(rule);
  double acc = 0.0;
  for (int k = 0; k < f.size(); ++k) {
    const double wt = space.weight(f.grid().node(k));
    if (!std::isfinite(wt))
      throw std::runtime_error("norm: weight not finite at a grid node");
    acc += w[k] * std::abs(f[k]) * wt;
  }
  return acc;
}

double weighted_moment(const GridFunction& f,
                       const std::function<double(double)>& w_fn,
                       QuadRule rule) {
  const auto w = f.grid().quad_weights(rule);
  double acc = 0.0;
  for (int k = 0; k < f.size(); ++k) {
    const double wt = w_fn(f.grid().node(k));
    if (!std::isfinite(wt))
      throw std::runtime_error(
          "weighted_moment: weight not finite at a grid node");
    acc += w[k] * f[k] * wt;
  }
  return acc;
}

double pairing(const GridFunction& e, const GridFunction& f, QuadRule rule) {
  if (!e.grid().same_as(f.grid()))
    throw std::invalid_argument("pairing: grids differ");
  const auto w = e.grid().quad_weights(rule);
  double acc = 0.0;
  for (int k = 0; k < e.size(); ++k) acc += w[k] * e[k] * f[k];
  return acc;
}

}  // namespace gfrag
