#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gfrag/grid.hpp"
#include "gfrag/quadrature.hpp"

using namespace gfrag;

TEST_CASE("weight families") {
  WeightedSpace power{Weight::Power, 2.0};
  WeightedSpace shifted{Weight::Shifted, 2.0};
  CHECK(power.weight(3.0) == doctest::Approx(9.0));
  CHECK(shifted.weight(3.0) == doctest::Approx(16.0));
  CHECK(WeightedSpace{Weight::Power, 0.0}.weight(7.0) == doctest::Approx(1.0));
  CHECK(std::string(power.kind_name()) == "X_alpha");
  CHECK(std::string(shifted.kind_name()) == "X_0_alpha");

  CHECK_THROWS(WeightedSpace{Weight::Power, -1.0}.validate());
  CHECK_THROWS(
      WeightedSpace{Weight::Power, std::nan("")}.validate());
  CHECK_NOTHROW(shifted.validate());
}

TEST_CASE("log grid layout") {
  auto g = Grid::make_log(1e-4, 50.0, 128);
  CHECK(g->size() == 128);
  CHECK(g->edges().size() == 129);
  CHECK(g->edge(0) == doctest::Approx(1e-4).epsilon(1e-14));
  CHECK(g->edge(128) == doctest::Approx(50.0).epsilon(1e-14));

  // nodes are geometric means of their cell edges, uniform in log x
  for (int j = 0; j < g->size(); ++j)
    CHECK(g->node(j) ==
          doctest::Approx(std::sqrt(g->edge(j) * g->edge(j + 1))).epsilon(1e-13));
  const double h = g->log_step();
  for (int j = 1; j < g->size(); ++j)
    CHECK(std::log(g->node(j) / g->node(j - 1)) == doctest::Approx(h).epsilon(1e-10));

  CHECK(g->same_as(*Grid::make_log(1e-4, 50.0, 128)));
  CHECK_FALSE(g->same_as(*Grid::make_log(1e-4, 50.0, 64)));

  CHECK_THROWS(Grid::make_log(-1.0, 50.0, 128));
  CHECK_THROWS(Grid::make_log(1.0, 0.5, 128));
  CHECK_THROWS(Grid::make_log(1e-4, 50.0, 1));
}

TEST_CASE("quadrature rules integrate smooth functions") {
  auto g = Grid::make_log(1e-4, 50.0, 2048);
  auto f = GridFunction::sample(g, [](double x) { return std::exp(-x); });
  const double exact = std::exp(-1e-4) - std::exp(-50.0);
  CHECK(integrate(f, QuadRule::LogMidpoint) == doctest::Approx(exact).epsilon(1e-5));
  CHECK(integrate(f, QuadRule::LogTrapezoid) == doctest::Approx(exact).epsilon(1e-4));

  // first moment of exp(-x) over (0, inf) is 1; the window truncation is tiny
  const double m1 = weighted_moment(f, [](double x) { return x; });
  CHECK(m1 == doctest::Approx(1.0).epsilon(1e-4));

  // norm with alpha = 0 collapses to the plain integral
  WeightedSpace flat{Weight::Shifted, 0.0};
  CHECK(norm(f, flat) == doctest::Approx(integrate(f)).epsilon(1e-13));

  auto ones = GridFunction::sample(g, [](double) { return 1.0; });
  CHECK(pairing(ones, f) == doctest::Approx(integrate(f)).epsilon(1e-13));
}

TEST_CASE("norm rejects weight overflow, respects absolute value") {
  auto g = Grid::make_log(0.5, 2.0, 32);
  auto f = GridFunction::sample(g, [](double x) { return x > 1 ? -1.0 : 1.0; });
  WeightedSpace s{Weight::Power, 1.0};
  const double plain = integrate(f);
  const double absed = norm(f, WeightedSpace{Weight::Power, 0.0});
  CHECK(absed > std::abs(plain));  // cancellation gone under the modulus
  CHECK(norm(f, s) > 0.0);
}

TEST_CASE("grid function interpolation: inside accurate, outside zero") {
  auto g = Grid::make_log(1e-3, 1e3, 512);
  auto f = GridFunction::sample(
      g, [](double x) { return 1.0 / (1.0 + std::pow(std::log(x), 2)); });
  auto spline = f.make_interpolant();
  for (double x : {2e-3, 0.034, 0.8, 17.0, 640.0}) {
    const double want = 1.0 / (1.0 + std::pow(std::log(x), 2));
    CHECK(eval_interpolant(spline, f.grid(), x) ==
          doctest::Approx(want).epsilon(5e-6));
  }
  // At the smooth maximum the shape-preserving limiter clips the local
  // curvature, so only second-order accuracy is available there.
  CHECK(eval_interpolant(spline, f.grid(), 1.0) ==
        doctest::Approx(1.0).epsilon(1e-3));
  CHECK(eval_interpolant(spline, f.grid(), 1e-4) == 0.0);
  CHECK(eval_interpolant(spline, f.grid(), 5e3) == 0.0);
}

TEST_CASE("monotone interpolation does not overshoot") {
  // data with a sharp knee: a shape-preserving interpolant must stay within
  // the data range between neighbouring samples
  std::vector<double> xs = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> ys = {0.0, 0.0, 0.0, 1.0, 1.0, 1.0};
  MonotoneCubic mc(xs, ys);
  for (double x = 0.0; x <= 5.0; x += 0.01) {
    const double v = mc(x);
    CHECK(v >= -1e-12);
    CHECK(v <= 1.0 + 1e-12);
  }
  // clamped constant extension outside the data
  CHECK(mc(-3.0) == doctest::Approx(0.0));
  CHECK(mc(9.0) == doctest::Approx(1.0));
}

TEST_CASE("gauss and log-gauss base rules") {
  CHECK(integrate_gl([](double x) { return std::pow(x, 5); }, 0.0, 1.0) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(integrate_log([](double x) { return 1.0 / std::sqrt(x); }, 1e-6, 1.0,
                      16) ==
        doctest::Approx(2.0 * (1.0 - 1e-3)).epsilon(1e-12));
  CHECK(integrate_adaptive([](double x) { return std::sin(x); }, 0.0, M_PI) ==
        doctest::Approx(2.0).epsilon(1e-10));
  CHECK(integrate_unit_singular([](double z) { return 1.0 / std::sqrt(z); }) ==
        doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("improper integral probes classify standard tails") {
  auto inv_sq = [](double x) { return 1.0 / (x * x); };
  auto probe_up = probe_improper_integral(inv_sq, 1.0, +1);
  CHECK(probe_up.verdict == TailVerdict::Convergent);
  CHECK(probe_up.value + probe_up.tail_estimate == doctest::Approx(1.0).epsilon(1e-6));

  auto inv = [](double x) { return 1.0 / x; };
  CHECK(probe_improper_integral(inv, 1.0, +1).verdict == TailVerdict::Divergent);
  CHECK(probe_improper_integral(inv, 1.0, -1).verdict == TailVerdict::Divergent);

  auto root = [](double x) { return 1.0 / std::sqrt(x); };
  auto probe_down = probe_improper_integral(root, 1.0, -1);
  CHECK(probe_down.verdict == TailVerdict::Convergent);
  CHECK(probe_down.value + probe_down.tail_estimate ==
        doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("log-scan maximiser") {
  auto res = scan_max_log([](double x) { return x * std::exp(-x); }, 1e-3, 1e3);
  CHECK(res.arg == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.value == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  CHECK_FALSE(res.at_lower_edge);
  CHECK_FALSE(res.at_upper_edge);

  auto edge = scan_max_log([](double x) { return 1.0 / x; }, 1e-2, 1e2);
  CHECK(edge.at_lower_edge);
}
