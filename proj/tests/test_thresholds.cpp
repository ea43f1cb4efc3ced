#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gfrag/thresholds.hpp"

using namespace gfrag;

TEST_CASE("filtered limsup recovers the asymptote of a rational ratio") {
  // g = A + B/(1+y) filtered along {a >= c} with a = y: sup over the tail
  // set sits at y = c, so the extrapolations see exactly the model tail
  auto a = AbsorptionRate::linear(1.0);
  auto lim = filtered_limsup(
      [](double y) { return 0.4 + 3.0 / (1.0 + y); }, a);
  CHECK(lim.L == doctest::Approx(0.4).epsilon(2e-3));
  CHECK(lim.tail_fit == doctest::Approx(0.4).epsilon(1e-3));
  CHECK_FALSE(lim.empty_filtration);
  // sup curve is non-increasing in the cutoff by set inclusion
  for (size_t i = 1; i < lim.sup_curve.size(); ++i)
    CHECK(lim.sup_curve[i].second <= lim.sup_curve[i - 1].second + 1e-12);
}

TEST_CASE("bounded absorption rate empties the filtration") {
  auto a = AbsorptionRate::constant(1.0);
  auto lim = filtered_limsup([](double) { return 0.5; }, a);
  CHECK(lim.empty_filtration);  // cutoffs beyond sup a see no points
}

TEST_CASE("moment-ratio condition for the binary kernel, shifted weight") {
  auto k = Kernel::uniform_binary();
  auto a = AbsorptionRate::linear(1.0);

  auto d2 = desch_condition(k, a, {Weight::Shifted, 2.0});
  CHECK(d2.satisfied);
  CHECK(d2.L == doctest::Approx(2.0 / 3.0).epsilon(2e-3));
  CHECK_FALSE(d2.unsatisfiable_at_zero);
  CHECK_FALSE(d2.alpha_low_fact);

  // alpha = 1: mass conservation pins the ratio limit at one, the condition
  // cannot hold and the report must say why
  auto d1 = desch_condition(k, a, {Weight::Shifted, 1.0});
  CHECK_FALSE(d1.satisfied);
  CHECK(d1.L >= 1.0 - 1e-9);
  CHECK(d1.alpha_low_fact);
}

TEST_CASE("moment-ratio condition for the binary kernel, power weight") {
  auto k = Kernel::uniform_binary();
  auto a = AbsorptionRate::power_sum({{1.0, 1.0}, {1.0, -1.0}});

  auto d2 = desch_condition(k, a, {Weight::Power, 2.0});
  CHECK(d2.satisfied);
  CHECK(d2.L == doctest::Approx(2.0 / 3.0).epsilon(2e-3));

  auto d1 = desch_condition(k, a, {Weight::Power, 1.0});
  CHECK_FALSE(d1.satisfied);  // the ratio is identically one
}

TEST_CASE("absorption unbounded at zero blocks the shifted weight") {
  auto k = Kernel::uniform_binary();
  auto a = AbsorptionRate::power_sum({{1.0, 1.0}, {1.0, -1.0}});
  auto d = desch_condition(k, a, {Weight::Shifted, 2.0});
  CHECK(d.unsatisfiable_at_zero);
  CHECK_FALSE(d.satisfied);
}

TEST_CASE("degenerate absorption rates shortcut the condition") {
  auto k = Kernel::uniform_binary();
  auto dz = desch_condition(k, AbsorptionRate::zero(), {Weight::Shifted, 2.0});
  CHECK(dz.trivially_satisfied);
  CHECK(dz.satisfied);

  auto db = desch_condition(k, AbsorptionRate::constant(2.0),
                            {Weight::Shifted, 2.0});
  CHECK(db.bounded_rate);
  CHECK(db.satisfied);
}

TEST_CASE("threshold exponent for the binary kernel is one") {
  auto k = Kernel::uniform_binary();
  CHECK(threshold_alpha_tilde(k, AbsorptionRate::linear(1.0), Weight::Shifted) ==
        doctest::Approx(1.0).epsilon(1e-3));
  CHECK(threshold_alpha_tilde(
            k, AbsorptionRate::power_sum({{1.0, 1.0}, {1.0, -1.0}}),
            Weight::Power) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("threshold exponent shifts with the kernel tail") {
  // dust-dominated daughters nu = -1.5: n_alpha/y^alpha = 0.5/(alpha - 0.5),
  // infinite below alpha = 1/2 and crossing one at alpha = 1
  auto k = Kernel::power_law(-1.5);
  CHECK(threshold_alpha_tilde(k, AbsorptionRate::linear(1.0), Weight::Power) ==
        doctest::Approx(1.0).epsilon(1e-3));

  // dust-heavy daughters nu = -0.5: ratio 1.5/(alpha+0.5) crosses one at 1
  auto kd = Kernel::power_law(-0.5);
  CHECK(threshold_alpha_tilde(kd, AbsorptionRate::linear(1.0), Weight::Power) ==
        doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("mean daughter count growth exponent") {
  auto flat = eta_estimate(Kernel::uniform_binary());
  CHECK(flat.eta == doctest::Approx(1.0));
  CHECK(std::abs(flat.slope) <= 1e-6);
  CHECK_FALSE(flat.superpolynomial);

  auto inf = eta_estimate(Kernel::power_law(-1.0));
  CHECK(inf.infinite_moment);

  // synthetic kernel whose mean count grows like (1+y)^{3/2}
  Kernel k = Kernel::uniform_binary();
  k.n_zero_ = [](double y) { return std::pow(1.0 + y, 1.5); };
  auto est = eta_estimate(k);
  CHECK(est.slope == doctest::Approx(1.5).epsilon(2e-2));
  CHECK(est.eta == doctest::Approx(1.5).epsilon(2e-2));
}

TEST_CASE("sublevel thinness along the growth rate") {
  auto r1 = GrowthRate::constant(1.0);
  auto reg1 = classify_regime(r1);

  // a = y: sublevel sets are bounded intervals, thin at infinity
  auto v = thin_sublevel_check(AbsorptionRate::linear(1.0), r1, reg1,
                               {1.0, 10.0, 100.0});
  REQUIRE(v.size() == 3);
  for (const auto& s : v) {
    CHECK(s.thin);
    CHECK(s.at_infinity == TailVerdict::Convergent);
    CHECK_FALSE(s.requires_zero_side);
  }

  // bounded a below the cutoff: the sublevel set is everything
  auto w = thin_sublevel_check(AbsorptionRate::constant(0.5), r1, reg1, {1.0});
  REQUIRE(w.size() == 1);
  CHECK_FALSE(w[0].thin);
  CHECK(w[0].at_infinity == TailVerdict::Divergent);

  // fully singular regime requires thinness at zero as well
  auto rx = GrowthRate::linear(1.0);
  auto regx = classify_regime(rx);
  auto u = thin_sublevel_check(
      AbsorptionRate::power_sum({{1.0, 1.0}, {1.0, -1.0}}), rx, regx, {10.0});
  REQUIRE(u.size() == 1);
  CHECK(u[0].requires_zero_side);
  CHECK(u[0].thin);
  CHECK(u[0].at_zero == TailVerdict::Convergent);

  // same regime but a = y: not thin at zero (a stays small near zero)
  auto z = thin_sublevel_check(AbsorptionRate::linear(1.0), rx, regx, {10.0});
  CHECK_FALSE(z[0].thin);
}

TEST_CASE("threshold report aggregates the alpha sweep") {
  auto rep = threshold_report(Kernel::uniform_binary(),
                              AbsorptionRate::linear(1.0), Weight::Shifted);
  CHECK(rep.alpha_tilde == doctest::Approx(1.0).epsilon(1e-3));
  REQUIRE(rep.alpha_probes.size() >= 5);
  // L is non-increasing in alpha
  for (size_t i = 1; i < rep.alpha_probes.size(); ++i)
    CHECK(rep.alpha_probes[i].second <=
          rep.alpha_probes[i - 1].second + 1e-9);
  CHECK(rep.eta.eta == doctest::Approx(1.0));
}
