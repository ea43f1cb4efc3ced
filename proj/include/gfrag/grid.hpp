#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "gfrag/interp.hpp"

namespace gfrag {

// Weight families for the ambient L1 spaces: Power is the x^alpha moment
// weight, Shifted is (1+x)^alpha (finite mass near zero for every alpha).
enum class Weight { Power, Shifted };

struct WeightedSpace {
  Weight kind = Weight::Shifted;
  double alpha = 1.0;

  double weight(double x) const;
  // Validates alpha (finite, >= 0) and throws otherwise.
  void validate() const;
  const char* kind_name() const {
    return kind == Weight::Power ? "X_alpha" : "X_0_alpha";
  }
};

enum class QuadRule { LogTrapezoid, LogMidpoint };

// Log-uniform grid on [x_min, x_max]: n cells, n+1 edges, nodes at the
// geometric mean of their cell edges (so nodes are uniform in log x).
class Grid {
 public:
  static std::shared_ptr<const Grid> make_log(double x_min, double x_max,
                                              int n);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  int size() const { return n_; }
  double log_step() const { return h_; }

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& edges() const { return edges_; }
  double node(int k) const { return nodes_[k]; }
  double edge(int k) const { return edges_[k]; }

  // Quadrature weights w_k such that integral f dx ~ sum w_k f(node_k).
  // LogTrapezoid covers [node_0, node_{n-1}], LogMidpoint covers
  // [x_min, x_max]; both are second order on smooth integrands.
  std::vector<double> quad_weights(QuadRule rule) const;

  bool same_as(const Grid& other) const {
    return x_min_ == other.x_min_ && x_max_ == other.x_max_ && n_ == other.n_;
  }

 private:
  Grid(double x_min, double x_max, int n);
  double x_min_, x_max_;
  int n_;
  double h_;
  std::vector<double> edges_, nodes_;
};

using GridPtr = std::shared_ptr<const Grid>;

// Node samples of a function on a Grid.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(GridPtr grid, std::vector<double> values);
  static GridFunction sample(GridPtr grid,
                             const std::function<double(double)>& f);
  static GridFunction zero(GridPtr grid);

  const Grid& grid() const { return *grid_; }
  GridPtr grid_ptr() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double operator[](int k) const { return values_[k]; }
  double& operator[](int k) { return values_[k]; }
  int size() const { return static_cast<int>(values_.size()); }

  // Shape-preserving interpolant in log x; evaluates to zero outside
  // [x_min, x_max].  Build once, evaluate many times.
  MonotoneCubic make_interpolant() const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

// Evaluates an interpolant built by make_interpolant with the
// zero-outside-the-domain convention.
double eval_interpolant(const MonotoneCubic& interp, const Grid& grid,
                        double x);

// integral of f(x) dx over the grid by the chosen rule.
double integrate(const GridFunction& f, QuadRule rule = QuadRule::LogTrapezoid);

// Weighted L1 norm: integral of |f| * weight.  Throws if the weight is not
// finite at some node.
double norm(const GridFunction& f, const WeightedSpace& space,
            QuadRule rule = QuadRule::LogTrapezoid);

// integral of f * w dx for an arbitrary weight function (no absolute value).
double weighted_moment(const GridFunction& f,
                       const std::function<double(double)>& w,
                       QuadRule rule = QuadRule::LogTrapezoid);

// Plain duality pairing integral e*f dx for node data on the same grid.
double pairing(const GridFunction& e, const GridFunction& f,
               QuadRule rule = QuadRule::LogTrapezoid);

}  // namespace gfrag
