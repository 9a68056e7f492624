#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aklab/strip_analytic.hpp"

#include <cmath>

using namespace aklab;

TEST_CASE("strip sup norm of simple functions") {
  StripSpec sp;
  sp.rho = 0.5;
  CHECK(strip_sup_norm(StripFunction::constant(1.0), sp).value == doctest::Approx(1.0));
  CHECK(strip_sup_norm(StripFunction::constant(0.0), sp).value == 0);
  StripNorm c = strip_sup_norm(StripFunction::cos2pi(1, 0), sp);
  CHECK(c.value == doctest::Approx(std::cosh(M_PI)).epsilon(0.01));
  CHECK(c.value <= std::cosh(M_PI) * (1 + 1e-12));
  CHECK(c.finite);
  CHECK_THROWS(StripFunction::from_json({{"type", "bessel"}}));
  StripFunction j = StripFunction::from_json({{"type", "cos"}, {"a", 0}, {"b", 2}});
  CHECK(strip_sup_norm(j, sp).value == doctest::Approx(std::cosh(2 * M_PI)).epsilon(0.01));
}

TEST_CASE("maximum modulus sanity") {
  StageChain t1 = toy_instance(1);
  StripSpec sp;
  sp.rho = 0.1;
  std::vector<StripFunction> fs{
      StripFunction::cos2pi(1, 0), StripFunction::cos2pi(2, 3, 0.5),
      StripFunction::trig({{Complex(1, 2), 1, -1}, {Complex(0.3, 0), 0, 2}, {Complex(0, -1), 3, 1}}),
      StripFunction::affine(Complex(0.2, 0), Complex(1, 0), Complex(0, 1)),
      StripFunction::displacement(inverse_map(h_map(t1[0])), 1), StripFunction::displacement(h_map(t1[0]), 0)};
  for (const auto& f : fs) {
    double b = strip_sup_norm(f, sp).value;
    double in = strip_interior_sup(f, sp).value;
    CHECK(in <= b * (1 + 1e-3) + 1e-12);
  }
}

TEST_CASE("h_n inverse strip bound") {
  StageChain t1 = toy_instance(1);
  auto reps = check_hn_inverse_strip_bound(t1[0], 0.1);
  REQUIRE(reps.size() == 2);
  CHECK(reps[0].verdict == Verdict::Pass);
  CHECK(reps[1].verdict == Verdict::Pass);
  CHECK(reps[0].bound.hi.to_double() == doctest::Approx(32 * std::exp(1.6 * M_PI)).epsilon(1e-9));
  CHECK(reps[1].measured <= std::sqrt(1 + 0.01));

  auto zero = check_hn_inverse_strip_bound(t1[0], 0.0);
  CHECK(zero[0].verdict == Verdict::Pass);
  CHECK(zero[0].measured <= 32);
  auto small = check_hn_inverse_strip_bound(t1[0], 0.05);
  CHECK(zero[0].measured <= small[0].measured);
  CHECK(small[0].measured <= reps[0].measured);

  for (int id : {2, 3})
    for (const auto& r : check_hn_inverse_strip_bound(toy_instance(id)[0], 0.05)) CHECK(r.verdict == Verdict::Pass);
  auto j = to_json(reps[0]);
  CHECK(j["verdict"] == "PASS");
  CHECK(j["bound"].contains("lo"));
}

TEST_CASE("rho recursion") {
  StageChain t1 = toy_instance(1);
  RhoChain c = rho_recursion(t1, Rational(1, 1));
  REQUIRE(c.rho_tilde.size() == 3);
  CHECK(c.rho_tilde[0].lo.to_double() == doctest::Approx(2.0));
  {
    PrecisionScope ps(256);
    LogMagnitude expect = LogMagnitude::from_int(32) * exp(LogMagnitude::from_int(32) * LogMagnitude::pi());
    CHECK(compare_ge(c.rho_tilde[1], expect) != Verdict::Fail);
    CHECK(compare_ge(expect, c.rho_tilde[1]) != Verdict::Fail);
    Real l = c.rho_tilde[1].log_hi().v;
    CHECK(l.convert_to<double>() == doctest::Approx(std::log(32.0) + 32 * M_PI).epsilon(1e-12));
  }
  REQUIRE(c.rho_measured[1]);
  CHECK(c.plus_one[1] == Verdict::Pass);
  CHECK(c.plus_one[2] == Verdict::Pass);
  CHECK_FALSE(c.rho_measured[2]);

  RhoChain s = rho_recursion(t1, Rational(1, 20));
  REQUIRE(s.rho_measured[1]);
  CHECK(*s.rho_measured[1] > 16);
  CHECK(*s.rho_measured[1] < 120);
  CHECK(s.plus_one[1] == Verdict::Pass);
  CHECK(to_json(s)["stages"].size() == 3);
}

TEST_CASE("Dh strip norms") {
  StageChain t1 = toy_instance(1);
  PrecisionScope ps(256);
  for (double rho : {0.0, 0.05, 1.0, 3.0}) {
    LogMagnitude r = LogMagnitude::from_double(rho);
    bool sampled = false;
    LogMagnitude v = dh_strip_norm(t1[0], r, &sampled);
    CHECK(sampled);
    double expect = 1 + 2 * M_PI * 64 * std::cosh(2 * M_PI * 4 * rho);
    CHECK(v.hi.to_double() == doctest::Approx(expect).epsilon(1e-9));
    CHECK(compare_ge(dh_strip_bound(t1[0], r), v) == Verdict::Pass);
  }
  RhoChain c = rho_recursion(t1, Rational(1, 20));
  for (unsigned n = 1; n <= 2; ++n) {
    LogMagnitude rn = c.rho_measured[n] ? LogMagnitude::from_double(*c.rho_measured[n]) : c.rho_bound[n];
    LogMagnitude r1 = rn + LogMagnitude::from_int(1);
    bool sampled = false;
    LogMagnitude v = dh_strip_norm(t1[n - 1], r1, &sampled);
    Verdict ok = compare_ge(dh_strip_bound(t1[n - 1], r1), v);
    // a carried tower-level strip leaves both sides equal to working precision
    if (sampled)
      CHECK(ok == Verdict::Pass);
    else
      CHECK(ok != Verdict::Fail);
  }
  StripData d = make_strip_data(t1, Rational(1, 20));
  CHECK(d.rho_tilde.size() == 3);
  CHECK(d.dh.size() == 2);
  CHECK_FALSE(d.source.empty());
}

TEST_CASE("T_m estimate") {
  StageChain t1 = toy_instance(1);
  TmReport r = tm_bound_check(t1[0], t1[1], 1, 0.05);
  CHECK(r.in_regime);
  CHECK(r.measured > 0);
  CHECK(r.verdict == Verdict::Pass);

  TmReport z = tm_bound_check(t1[0], t1[1], t1[1].qtilde, 0.05);
  CHECK(z.measured == 0);
  CHECK_FALSE(z.in_regime);

  double prev = 0;
  for (int m = 1; m <= 4; ++m) {
    TmReport t = tm_bound_check(t1[0], t1[1], m, 0.05);
    CHECK(t.verdict == Verdict::Pass);
    double b = t.bound.hi.to_double();
    CHECK(b > prev);
    prev = b;
  }
  CHECK(to_json(r)["verdict"] == "PASS");
}

TEST_CASE("analytic step proximity") {
  StageChain t1 = toy_instance(1);

  ProximityReport zero = analytic_step_proximity(t1, 1, 0, Rational(1, 20));
  CHECK(zero.inner_sampled);
  CHECK(zero.inner.hi.to_double() == 0);
  CHECK(zero.conclusion == Verdict::Pass);

  ProximityReport rig = analytic_step_proximity(t1, 1, t1[1].qtilde, Rational(1, 20));
  CHECK(rig.inner_sampled);
  double da = to_double(abs(t1[1].alpha - t1[0].alpha)) * t1[1].qtilde.convert_to<double>();
  CHECK(rig.inner.hi.to_double() <= da + 1e-12);

  StageChain syn = t1;
  syn.push_back(next_stage(syn[1], BigInt(4)));
  syn[1].alpha = syn[0].alpha + Rational(BigInt(1), BigInt(1) << (1 << 24));
  syn[2].alpha = syn[1].alpha + Rational(BigInt(1), BigInt(1) << (1 << 24));
  ProximityReport p = analytic_step_proximity(syn, 2, 1, Rational(1, 20));
  CHECK_FALSE(p.inner_sampled);
  REQUIRE(p.dh.size() == 1);
  REQUIRE(p.links.size() == 1);
  CHECK(p.premise == Verdict::Pass);
  CHECK(p.links[0].verdict == Verdict::Pass);
  CHECK(p.conclusion == Verdict::Pass);

  ProximityReport bad = analytic_step_proximity(t1, 1, 1, Rational(1, 20));
  CHECK(bad.inner_sampled);
  CHECK(bad.inner.hi.to_double() > 0);
  auto j = to_json(p);
  CHECK(j["links"].size() == 1);
  CHECK_THROWS(analytic_step_proximity(t1, 3, 1, Rational(1, 20)));
}
