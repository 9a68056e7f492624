#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aklab/jet_norms.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace aklab;

namespace {

Real pow2(int e) { return boost::multiprecision::ldexp(Real(1), e); }

Real rabs(const Real& x) { return boost::multiprecision::abs(x); }

}  // namespace

TEST_CASE("rotation jet") {
  TorusPoint p = make_point(Real(0.2), Real(0.7), 160);
  Jet j = jet_eval(rotation_map(Rational(2, 7)), p, 4);
  CHECK(j.theta.derivative(1, 0) == 1);
  CHECK(j.theta.derivative(0, 1) == 0);
  CHECK(j.r.derivative(1, 0) == 0);
  CHECK(j.r.derivative(0, 1) == 1);
  for (int t = 2; t <= 4; ++t)
    for (int b = 0; b <= t; ++b) {
      CHECK(j.theta.derivative(t - b, b) == 0);
      CHECK(j.r.derivative(t - b, b) == 0);
    }
}

TEST_CASE("h_1 of T2 at theta = 0") {
  StageChain t2 = toy_instance(2);
  TorusPoint p = make_point(Real(0), Real(0.4), 200);
  Jet j = jet_eval(h_map(t2[0]), p, 2);
  CHECK(rabs(j.theta.derivative(1, 0) - 1) < pow2(-150));
  CHECK(rabs(j.theta.derivative(0, 1) - 1) < pow2(-150));
  CHECK_THROWS_AS(jet_eval(h_map(t2[0]), make_point(Real(0), Real(0), 64), 2), PrecisionError);
  CHECK_THROWS(jet_eval(h_map(t2[0]), p, 5));
}

TEST_CASE("jet of h o h^{-1} is the identity jet") {
  StageChain t1 = toy_instance(1);
  Map h = h_map(t1[0]);
  Map m = compose_maps({h, inverse_map(h)});
  unsigned P = required_precision(m, 53);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 50; ++i) {
    TorusPoint p = make_point(Real(u(rng)), Real(u(rng)), P);
    Jet j = jet_eval(m, p, 4);
    PrecisionScope ps(P);
    Real tol = pow2(-(static_cast<int>(P) - 25));
    CHECK(rabs(reduce_half(j.theta.value() - p.theta)) < tol);
    CHECK(rabs(reduce_half(j.r.value() - p.r)) < tol);
    CHECK(rabs(j.theta.derivative(1, 0) - 1) < tol);
    CHECK(rabs(j.r.derivative(0, 1) - 1) < tol);
    CHECK(rabs(j.theta.derivative(0, 1)) < tol);
    CHECK(rabs(j.r.derivative(1, 0)) < tol);
    for (int t = 2; t <= 4; ++t)
      for (int b = 0; b <= t; ++b) {
        CHECK(rabs(j.theta.derivative(t - b, b)) < tol);
        CHECK(rabs(j.r.derivative(t - b, b)) < tol);
      }
  }
}

TEST_CASE("jets agree with centered finite differences") {
  StageChain t1 = toy_instance(1), t2 = toy_instance(2);
  std::vector<Map> prims{phi_map(t1[0]), g_map(t1[0]), h_map(t2[0]), inverse_map(h_map(t2[0])),
                         phi_map(t1[1]), inverse_map(h_map(t1[1]))};
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (const auto& m : prims) {
    unsigned P = required_precision(m, 53);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
      double th = u(rng), r = u(rng);
      Jet j = jet_eval(m, make_point(Real(th), Real(r), P), 2);
      PrecisionScope ps(P);
      Real h = pow2(-25);
      auto at = [&](const Real& a, const Real& b) { return eval_lift(m, TorusPoint{a, b, P}); };
      TorusPoint c = at(Real(th), Real(r));
      for (int dir = 0; dir < 2; ++dir) {
        Real dt = dir == 0 ? h : Real(0), dr = dir == 0 ? Real(0) : h;
        TorusPoint plus = at(Real(th) + dt, Real(r) + dr);
        TorusPoint minus = at(Real(th) - dt, Real(r) - dr);
        for (int comp = 0; comp < 2; ++comp) {
          Real fp = comp == 0 ? plus.theta : plus.r;
          Real fm = comp == 0 ? minus.theta : minus.r;
          Real fc = comp == 0 ? c.theta : c.r;
          Real d1 = (fp - fm) / (2 * h);
          Real d2 = (fp - 2 * fc + fm) / (h * h);
          Real j1 = j.component(comp).derivative(dir == 0 ? 1 : 0, dir == 0 ? 0 : 1);
          Real j2 = j.component(comp).derivative(dir == 0 ? 2 : 0, dir == 0 ? 0 : 2);
          Real e1 = rabs(d1 - j1) / (rabs(j1) > 1 ? rabs(j1) : Real(1));
          Real e2 = rabs(d2 - j2) / (rabs(j2) > 1 ? rabs(j2) : Real(1));
          worst = std::max({worst, e1.convert_to<double>(), e2.convert_to<double>()});
        }
      }
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("norm estimates") {
  StageChain t1 = toy_instance(1), t2 = toy_instance(2);

  NormTriple h1 = norm_estimate(h_map(t2[0]), 1, 64);
  CHECK(h1.value == doctest::Approx(1 + 128 * M_PI).epsilon(1e-12));
  REQUIRE(h1.bound);
  CHECK(h1.bound->hi.to_double() == doctest::Approx(std::pow(32 * M_PI, 2)).epsilon(1e-9));
  CHECK(h1.satisfied);

  for (unsigned k = 0; k <= 4; ++k) CHECK(norm_estimate(identity_map(), k, 16).value <= 1);
  for (unsigned k = 1; k <= 4; ++k) CHECK(norm_estimate(identity_map(), k, 16).value == 1);

  CHECK(df_norm(g_map(t1[0]), 32) == 1);
  CHECK(df_norm(identity_map(), 8) == 1);
}

TEST_CASE("closed form bound for h_n") {
  for (int id : {1, 2}) {
    StageChain c = toy_instance(id);
    for (const auto& s : c)
      for (unsigned k = 0; k <= 4; ++k) {
        NormTriple t = check_hn_norm_bound(s, k, 128);
        CHECK_MESSAGE(t.satisfied, t.id << " k=" << k << " value " << t.value);
      }
  }
  NormTriple t = check_hn_norm_bound(toy_instance(2)[0], 1);
  CHECK(t.value == doctest::Approx(1 + 128 * M_PI).epsilon(1e-12));
  CHECK(t.satisfied);

  NormTriple bad;
  bad.value = 2e4;
  bad.bound = hn_norm_bound(toy_instance(2)[0], 1);
  CHECK(compare_ge(*bad.bound, LogMagnitude::from_double(bad.value)) == Verdict::Fail);
}

TEST_CASE("composition bound") {
  StageChain t1 = toy_instance(1);
  for (unsigned k = 1; k <= 3; ++k) {
    NormTriple id = check_composition_bound(identity_map(), identity_map(), k, 16);
    CHECK(id.value == 1);
    CHECK(id.satisfied);
    NormTriple rot = check_composition_bound(rotation_map(Rational(1, 3)), rotation_map(Rational(3, 5)), k, 16);
    CHECK(rot.value == 1);
    CHECK(rot.satisfied);
  }
  Map h = h_map(t1[0]);
  NormTriple c = check_composition_bound(h, inverse_map(h), 2, 64);
  CHECK(c.satisfied);
  NormTriple c2 = check_composition_bound(h_map(t1[0]), h_map(t1[1]), 2, 64);
  CHECK(c2.satisfied);
  CHECK_THROWS(check_composition_bound(h, h, 0, 8));
  CHECK_FALSE(c.diagnostic);
  CHECK(c2.diagnostic);
}

TEST_CASE("coarse grids alias high frequencies") {
  StageChain t1 = toy_instance(1);
  Map phi = phi_map(t1[1]);
  CHECK(resolving_grid(phi) == 4096);
  CHECK(resolving_grid(h_map(t1[0])) == 16);
  CHECK(resolving_grid(rotation_map(Rational(1, 3))) == 0);
  // every point of a 32 grid is a zero of sin(2 pi 1024 theta)
  CHECK(norm_value(phi, 1, 32) < 1e3);
  CHECK(norm_value(phi, 1, 96) > 5e9);
}

TEST_CASE("H_n bound") {
  StageChain t1 = toy_instance(1);
  NormTriple t = check_Hn_bound(t1, 2, 1, 128);
  CHECK_FALSE(t.diagnostic);
  CHECK(t.satisfied);
  CHECK(t.k == 2);

  StageChain weak = build_chain({BigInt(4), BigInt(2)}, Rational(1, 4));
  NormTriple d = check_Hn_bound(weak, 2, 1, 32);
  CHECK(d.diagnostic);

  StageChain three = build_chain({BigInt(4), BigInt(256), BigInt(1) << 40}, Rational(1, 4));
  for (unsigned k = 0; k <= 3; ++k) {
    LogMagnitude b2 = Hn_norm_bound(2, three[1].q, k);
    LogMagnitude b3 = Hn_norm_bound(3, three[2].q, k);
    CHECK(compare_gt(b3, b2) == Verdict::Pass);
  }
}

TEST_CASE("conjugation bound") {
  StageChain t1 = toy_instance(1);
  for (unsigned k = 0; k <= 2; ++k) {
    NormTriple id = check_conjugation_bound(identity_map(), Rational(3, 10), Rational(1, 10), k, 16);
    CHECK(id.value <= 0.2 + 1e-15);
    CHECK(id.satisfied);
    NormTriple same = check_conjugation_bound(h_map(t1[0]), Rational(1, 4), Rational(1, 4), k, 16);
    CHECK(same.value == 0);
    CHECK(same.satisfied);
  }
  NormTriple t = check_conjugation_bound(h_map(t1[0]), Rational(63, 256), Rational(1, 4), 1, 64);
  CHECK(t.value > 0);
  CHECK(t.satisfied);
}

TEST_CASE("chain rule term count") {
  const size_t fact[] = {1, 1, 2, 6, 24, 120};
  for (unsigned k = 1; k <= 3; ++k) {
    ChainRuleCount c = chain_rule_terms(k);
    CHECK(c.distinct <= c.generated);
    CHECK(c.generated <= fact[k + 1]);
  }
  CHECK(chain_rule_terms(1).generated == 2);
  CHECK(chain_rule_terms(2).generated == 6);
}

TEST_CASE("norm csv") {
  std::vector<NormTriple> rows{check_hn_norm_bound(toy_instance(2)[0], 1, 16)};
  std::ostringstream os;
  write_norm_csv(os, rows);
  std::string s = os.str();
  CHECK(s.rfind("map,k,value,bound_log,satisfied\n", 0) == 0);
  CHECK(s.find("h_1,1,") != std::string::npos);
  CHECK(s.find(",true\n") != std::string::npos);
}
