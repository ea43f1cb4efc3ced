#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gfrag/growth.hpp"
#include "gfrag/quadrature.hpp"

using namespace gfrag;

TEST_CASE("closed-form rate families: values and primitives") {
  auto c = GrowthRate::constant(2.0);
  CHECK(c.eval(17.0) == doctest::Approx(2.0));
  CHECK(c.primitive_exact(1.0, 5.0) == doctest::Approx(2.0));  // (5-1)/2

  auto l = GrowthRate::linear(3.0);
  CHECK(l.eval(2.0) == doctest::Approx(6.0));
  CHECK(l.primitive_exact(1.0, std::exp(3.0)) == doctest::Approx(1.0));

  auto af = GrowthRate::affine(2.0);
  CHECK(af.eval(4.0) == doctest::Approx(10.0));
  CHECK(af.primitive_exact(0.5, 2.0) ==
        doctest::Approx(0.5 * std::log(3.0 / 1.5)));

  auto pw = GrowthRate::power(1.0, 0.5);
  CHECK(pw.eval(9.0) == doctest::Approx(3.0));
  CHECK(pw.primitive_exact(1.0, 4.0) == doctest::Approx(2.0));

  // primitives are antisymmetric
  CHECK(af.primitive_exact(2.0, 0.5) ==
        doctest::Approx(-af.primitive_exact(0.5, 2.0)));
}

TEST_CASE("regime classification across the families") {
  // constant rate: 1/r integrable at zero, divergent at infinity
  auto rc = classify_regime(GrowthRate::constant(1.0));
  CHECK(rc.regime == Regime::PartlySingular);
  CHECK(rc.lower.verdict == TailVerdict::Convergent);
  CHECK(rc.upper.verdict == TailVerdict::Divergent);
  CHECK_FALSE(rc.varpi.finite);  // sup 1/z blows up at zero
  CHECK(rc.c_tilde.value == doctest::Approx(1.0));
  CHECK(rc.sublinear_c.value == doctest::Approx(1.0));

  // linear rate: divergent on both sides
  auto rl = classify_regime(GrowthRate::linear(2.0));
  CHECK(rl.regime == Regime::FullySingular);
  CHECK(rl.varpi.finite);
  CHECK(rl.varpi.value == doctest::Approx(2.0));
  CHECK(rl.varpi.exact);

  auto ra = classify_regime(GrowthRate::affine(1.5));
  CHECK(ra.regime == Regime::PartlySingular);
  CHECK(ra.c_tilde.value == doctest::Approx(1.5));
  CHECK_FALSE(ra.varpi.finite);

  auto rs = classify_regime(GrowthRate::power(1.0, 0.5));
  CHECK(rs.regime == Regime::PartlySingular);

  // superlinear power: finite-time blowup, integrable tail at infinity
  auto rb = classify_regime(GrowthRate::power(1.0, 1.5));
  CHECK(rb.regime == Regime::Neither);
  CHECK(rb.upper.verdict == TailVerdict::Convergent);
}

TEST_CASE("growth bound picks the constant matching the weight") {
  auto rl = classify_regime(GrowthRate::linear(2.0));
  CHECK(rl.growth_bound(/*power_weight=*/true, 1.5) == doctest::Approx(3.0));

  auto rc = classify_regime(GrowthRate::constant(1.0));
  CHECK(rc.growth_bound(false, 2.0) == doctest::Approx(2.0));
  // no finite varpi for a constant rate: the power-weight bound is undefined
  CHECK_THROWS_AS((void)rc.growth_bound(true, 2.0), std::exception);
}

TEST_CASE("tabulated rates classify and integrate like their source") {
  std::vector<double> xs, rs;
  for (int i = 0; i <= 240; ++i) {
    const double x = 1e-6 * std::pow(1e12, i / 240.0);
    xs.push_back(x);
    rs.push_back(1.0 + x);
  }
  auto tab = GrowthRate::tabulated(xs, rs);
  CHECK(tab.eval(3.0) == doctest::Approx(4.0).epsilon(1e-6));

  auto rt = classify_regime(tab);
  CHECK(rt.regime == Regime::PartlySingular);
  CHECK(rt.sublinear_c.value == doctest::Approx(1.0).epsilon(1e-4));

  GrowthPrimitive prim(tab, 1e-6, 1e6);
  CHECK(prim.closed_form() == false);
  CHECK(prim.between(1.0, 10.0) ==
        doctest::Approx(std::log(11.0 / 2.0)).epsilon(1e-7));
  CHECK(prim.between(10.0, 1.0) ==
        doctest::Approx(-std::log(11.0 / 2.0)).epsilon(1e-7));
}

TEST_CASE("tabulated rate input validation") {
  CHECK_THROWS(GrowthRate::tabulated({1.0, 2.0}, {1.0}));
  CHECK_THROWS(GrowthRate::tabulated({2.0, 1.0}, {1.0, 1.0}));   // unsorted
  CHECK_THROWS(GrowthRate::tabulated({1.0, 2.0}, {1.0, -1.0}));  // r <= 0
}

TEST_CASE("cumulative table agrees with closed forms and round-trips") {
  CumulativeTable tab([](double x) { return 1.0 / x; }, 1e-6, 1e6, 1.0);
  CHECK(tab(100.0) == doctest::Approx(std::log(100.0)).epsilon(1e-10));
  CHECK(tab(1e-3) == doctest::Approx(std::log(1e-3)).epsilon(1e-10));

  // serialization round trip: values dumped from one table reload into a
  // twin built with the same integrand and header parameters (the integrand
  // supplies the interpolant's slopes, so it must match)
  CumulativeTable twin([](double x) { return 1.0 / x; }, 1e-6, 1e6, 1.0);
  CHECK(twin.load_values(tab.raw_values()));
  CHECK(twin(42.0) == doctest::Approx(tab(42.0)).epsilon(1e-13));
  CHECK_FALSE(twin.load_values({1.0, 2.0, 3.0}));  // wrong length rejected

  CHECK_THROWS((void)tab(1e-7));  // outside the table range
}

TEST_CASE("growth primitive for closed-form rates uses the exact form") {
  GrowthPrimitive p(GrowthRate::linear(1.0), 1e-9, 1e12);
  CHECK(p.closed_form());
  CHECK(p.between(2.0, 8.0) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(p.phi(std::exp(2.0)) == doctest::Approx(2.0).epsilon(1e-14));

  // numeric path matches the closed form on a tabulated copy of the rate
  std::vector<double> xs, rs;
  for (int i = 0; i <= 240; ++i) {
    const double x = 1e-6 * std::pow(1e12, i / 240.0);
    xs.push_back(x);
    rs.push_back(x);
  }
  GrowthPrimitive q(GrowthRate::tabulated(xs, rs), 1e-6, 1e6);
  for (double lo : {0.01, 1.0, 3.0})
    CHECK(q.between(lo, 10.0 * lo) ==
          doctest::Approx(std::log(10.0)).epsilon(1e-7));
}
