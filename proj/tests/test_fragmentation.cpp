#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "gfrag/fragmentation.hpp"
#include "gfrag/quadrature.hpp"

using namespace gfrag;

TEST_CASE("absorption rate families") {
  CHECK(AbsorptionRate::zero().eval(3.0) == 0.0);
  CHECK(AbsorptionRate::constant(2.5).eval(0.1) == doctest::Approx(2.5));
  CHECK(AbsorptionRate::linear(2.0).eval(3.0) == doctest::Approx(6.0));
  CHECK(AbsorptionRate::affine(2.0).eval(3.0) == doctest::Approx(8.0));
  CHECK(AbsorptionRate::power(3.0, 0.5).eval(4.0) == doctest::Approx(6.0));

  auto ps = AbsorptionRate::power_sum({{1.0, 1.0}, {1.0, -1.0}});
  CHECK(ps.eval(2.0) == doctest::Approx(2.5));
  CHECK(ps.is_power_sum);
  CHECK(ps.unbounded_at_zero);
  CHECK(ps.unbounded_at_infinity);

  CHECK(AbsorptionRate::linear(1.0).unbounded_at_infinity);
  CHECK_FALSE(AbsorptionRate::linear(1.0).unbounded_at_zero);
  CHECK(AbsorptionRate::power(1.0, -0.5).unbounded_at_zero);
  CHECK_FALSE(AbsorptionRate::constant(1.0).unbounded_at_infinity);
}

TEST_CASE("uniform binary kernel moments") {
  auto k = Kernel::uniform_binary();
  CHECK(k.b(0.5, 2.0) == doctest::Approx(1.0));   // 2/y
  CHECK(k.b(3.0, 2.0) == 0.0);                    // no daughters above parent
  CHECK(k.n_zero(7.0) == doctest::Approx(2.0));   // binary: two fragments
  for (double y : {0.01, 1.0, 50.0, 1e4}) {
    CHECK(k.n_alpha(y, 1.0) == doctest::Approx(y).epsilon(1e-12));
    CHECK(k.n_alpha(y, 2.0) == doctest::Approx(2.0 * y * y / 3.0).epsilon(1e-12));
    CHECK(k.conservativity_defect(y) <= 1e-10);
  }
  // (1+x)^2 moment has the closed form 2((1+y)^3 - 1)/(3y)
  const double y = 4.0;
  CHECK(k.n_one_alpha(y, 2.0) ==
        doctest::Approx(2.0 * (std::pow(1.0 + y, 3) - 1.0) / (3.0 * y))
            .epsilon(1e-9));
}

TEST_CASE("power-law kernels") {
  // nu = 0 coincides with the uniform binary kernel
  auto k0 = Kernel::power_law(0.0);
  CHECK(k0.b(0.5, 2.0) == doctest::Approx(1.0));
  CHECK(k0.n_zero(3.0) == doctest::Approx(2.0));

  auto k = Kernel::power_law(-0.5);
  CHECK(k.n_zero(5.0) == doctest::Approx(3.0));  // (nu+2)/(nu+1)
  CHECK(k.n_alpha(5.0, 1.0) == doctest::Approx(5.0).epsilon(1e-12));
  // b(x,y) = (nu+2) x^nu / y^{nu+1}
  CHECK(k.b(1.0, 4.0) == doctest::Approx(1.5 / 2.0).epsilon(1e-12));

  // dust-producing end: mean fragment count diverges
  auto kd = Kernel::power_law(-1.0);
  CHECK(std::isinf(kd.n_zero(2.0)));

  CHECK_THROWS(Kernel::power_law(-2.5));  // mass moment must converge
}

TEST_CASE("homogeneous kernel wraps a daughter profile") {
  // h(z) = 12 z (1-z): integral of z h = 1, mean count 2
  auto k = Kernel::homogeneous(
      [](double z) { return 12.0 * z * (1.0 - z); }, "parabolic");
  CHECK(k.n_zero(3.0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(k.n_alpha(3.0, 1.0) == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(k.b(1.5, 3.0) == doctest::Approx(12.0 * 0.5 * 0.5 / 3.0).epsilon(1e-12));
  CHECK(k.conservativity_defect(10.0) <= 1e-8);

  // profiles violating mass conservation are rejected outright
  CHECK_THROWS(Kernel::homogeneous([](double z) { return 6.0 * z * (1.0 - z); },
                                   "half-mass"));
}

TEST_CASE("separable kernel is conservative by construction") {
  auto k = Kernel::separable([](double x) { return std::exp(-x); }, "exp");
  for (double y : {0.5, 2.0, 30.0})
    CHECK(k.conservativity_defect(y) <= 1e-8);
  CHECK(k.b(5.0, 2.0) == 0.0);
}

TEST_CASE("mixtures combine moments linearly") {
  auto k = Kernel::mixture({Kernel::uniform_binary(), Kernel::power_law(-0.5)},
                           {0.5, 0.5});
  CHECK(k.n_zero(2.0) == doctest::Approx(0.5 * 2.0 + 0.5 * 3.0).epsilon(1e-12));
  CHECK(k.n_alpha(2.0, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS(Kernel::mixture({Kernel::uniform_binary()}, {0.5}));
}

TEST_CASE("tabulated kernel interpolates a sampled binary kernel") {
  std::vector<double> zs, ys;
  for (int i = 1; i <= 40; ++i) zs.push_back(i / 41.0);
  for (int i = 0; i <= 40; ++i) ys.push_back(1e-3 * std::pow(1e7, i / 40.0));
  std::vector<std::vector<double>> vals(ys.size(),
                                        std::vector<double>(zs.size()));
  for (size_t iy = 0; iy < ys.size(); ++iy)
    for (size_t iz = 0; iz < zs.size(); ++iz) vals[iy][iz] = 2.0 / ys[iy];
  auto k = Kernel::tabulated(zs, ys, vals);
  CHECK(k.b(0.5, 2.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(k.n_zero(10.0) == doctest::Approx(2.0).epsilon(5e-2));
  CHECK(k.conservativity_defect(10.0) <= 5e-2);

  CHECK_THROWS(Kernel::tabulated({0.5}, {1.0}, {{1.0}}));  // too few samples
}

TEST_CASE("fragmentation operator: matrix and direct application agree") {
  auto g = Grid::make_log(1e-3, 1e2, 128);
  auto k = Kernel::uniform_binary();
  auto a = AbsorptionRate::linear(1.0);
  auto phi = GridFunction::sample(g, [](double x) {
    const double s = std::log(x);
    return std::exp(-0.5 * s * s);
  });

  auto direct = apply_B(k, a, phi);
  auto mat = assemble_B(k, a, *g);
  for (int j = 0; j < g->size(); ++j) {
    double acc = 0.0;
    for (int c = 0; c < g->size(); ++c) acc += mat[j][c] * phi[c];
    CHECK(direct[j] == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("fragmentation operator: positivity and mass transfer") {
  auto g = Grid::make_log(1e-3, 1e2, 256);
  auto k = Kernel::uniform_binary();
  auto a = AbsorptionRate::linear(1.0);
  auto mat = assemble_B(k, a, *g);
  for (int j = 0; j < g->size(); ++j)
    for (int c = 0; c < g->size(); ++c) CHECK(mat[j][c] >= 0.0);

  // gain preserves the first moment of what the parents lose:
  // integral of x (B phi)(x) dx = integral of a(y) y phi(y) dy
  auto phi = GridFunction::sample(g, [](double x) {
    const double s = std::log(x / 1.0);
    return std::exp(-2.0 * s * s);
  });
  auto gain = apply_B(k, a, phi);
  const double lhs = weighted_moment(gain, [](double x) { return x; });
  const double rhs =
      weighted_moment(phi, [&a](double x) { return a.eval(x) * x; });
  CHECK(lhs == doctest::Approx(rhs).epsilon(2e-3));
}

TEST_CASE("fragmentation matrix is strictly upper triangular plus diagonal") {
  auto g = Grid::make_log(1e-2, 1e2, 64);
  auto mat = assemble_B(Kernel::uniform_binary(), AbsorptionRate::linear(1.0), *g);
  for (int j = 0; j < g->size(); ++j)
    for (int c = 0; c < j; ++c) CHECK(mat[j][c] == 0.0);
}

TEST_CASE("irreducibility certificates") {
  auto binary = Kernel::uniform_binary();
  auto rep = irreducibility_report(binary, AbsorptionRate::linear(1.0));
  CHECK(rep.support_route);
  CHECK(rep.verdict);

  // kernel metadata forcing the second route: bounded support in y but
  // fragments spread over (0, y/2]
  Kernel clipped = binary;
  clipped.support_unbounded_in_y = false;
  clipped.inf_support_fraction = 0.0;
  auto rep2 = irreducibility_report(clipped, AbsorptionRate::linear(1.0));
  CHECK_FALSE(rep2.support_route);
  CHECK(rep2.positivity_route);
  CHECK(rep2.verdict);
  CHECK(rep2.n_zero_margin > 0.5);

  // no absorption: nothing fragments, no certificate
  auto rep3 = irreducibility_report(binary, AbsorptionRate::zero());
  CHECK_FALSE(rep3.verdict);
}
