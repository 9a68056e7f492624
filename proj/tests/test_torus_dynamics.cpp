#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aklab/torus_dynamics.hpp"

#include <cstdlib>
#include <random>
#include <sstream>

using namespace aklab;

namespace {

Real dist(const TorusPoint& a, const TorusPoint& b) {
  Real x = boost::multiprecision::abs(reduce_half(a.theta - b.theta));
  Real y = boost::multiprecision::abs(reduce_half(a.r - b.r));
  return x > y ? x : y;
}

Real pow2(int e) { return boost::multiprecision::ldexp(Real(1), e); }

std::vector<TorusPoint> random_points(unsigned n, unsigned bits, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TorusPoint> out;
  PrecisionScope ps(bits);
  for (unsigned i = 0; i < n; ++i) out.push_back(make_point(Real(u(rng)), Real(u(rng)), bits));
  return out;
}

}  // namespace

TEST_CASE("required precision examples") {
  StageChain t1 = toy_instance(1), t2 = toy_instance(2);
  CHECK(required_precision(identity_map(), 53) == 117);
  CHECK(required_precision(h_map(t2[0]), 53) == 127);
  unsigned h2 = required_precision(conjugacy_map(t1, 2), 53);
  CHECK(h2 == 164);
  CHECK(h2 > required_precision(h_map(t1[0]), 53));
  CHECK(h2 > required_precision(h_map(t1[1]), 53));
  CHECK(required_precision(inverse_map(h_map(t2[0])), 53) == 127);
}

TEST_CASE("hand evaluated primitives") {
  StageChain t1 = toy_instance(1);
  PrecisionScope ps(256);
  Real three = Real(3) / 10;
  TorusPoint p = make_point(Real(0), three, 256);
  TorusPoint a = eval_map(phi_map(t1[0]), p);
  CHECK(boost::multiprecision::abs(a.theta) < pow2(-200));
  CHECK(boost::multiprecision::abs(a.r - three) < pow2(-200));

  TorusPoint q = make_point(Real(1) / 4, Real(1) / 2, 256);
  TorusPoint b = eval_map(g_map(t1[0]), q);
  CHECK(boost::multiprecision::abs(b.theta - Real(3) / 4) < pow2(-200));
  CHECK(boost::multiprecision::abs(b.r - Real(1) / 2) < pow2(-200));
}

TEST_CASE("insufficient precision is refused") {
  StageChain t1 = toy_instance(1);
  Map H = conjugacy_map(t1, 2);
  TorusPoint p = make_point(Real(0.1), Real(0.2), 128);
  CHECK_THROWS_AS(eval_map(H, p), PrecisionError);
  TorusPoint ok = make_point(Real(0.1), Real(0.2), 164);
  CHECK_NOTHROW(eval_map(H, ok));
}

TEST_CASE("inverse consistency over random points") {
  StageChain t1 = toy_instance(1), t2 = toy_instance(2);
  std::vector<Map> maps{phi_map(t1[0]), g_map(t1[0]), h_map(t1[1]), h_map(t2[0]),
                        conjugacy_map(t1, 2), fn_map(t1, 1), rotation_map(Rational(3, 7)),
                        stretch_map(t2[0], Rational(1, 3))};
  for (const auto& m : maps) {
    unsigned P = required_precision(m, 53);
    int cost = static_cast<int>(P) - 117;
    Map round_trip = compose_maps({inverse_map(m), m});
    unsigned Q = required_precision(round_trip, 53);
    PrecisionScope ps(Q);
    Real worst = 0, worst_seq = 0;
    for (const auto& p : random_points(1000, Q, 7)) {
      Real d = dist(eval_map(round_trip, p), p);
      if (d > worst) worst = d;
      // the second call sees the first output rounded to Q bits
      d = dist(eval_map(inverse_map(m), eval_map(m, p)), p);
      if (d > worst_seq) worst_seq = d;
    }
    CHECK(worst < pow2(-(static_cast<int>(Q) - 20)));
    CHECK(worst_seq < pow2(-(static_cast<int>(Q) - 20 - cost)));
  }
}

TEST_CASE("h_n commutes with R_{p_n/q_n}") {
  for (int id : {1, 2, 3}) {
    StageChain c = toy_instance(id);
    for (const auto& s : c) {
      Map h = h_map(s);
      Map R = rotation_map(s.alpha);
      Map lhs = compose_maps({h, R}), rhs = compose_maps({R, h});
      unsigned P = required_precision(lhs, 53);
      PrecisionScope ps(P);
      Real worst = 0;
      for (const auto& p : random_points(200, P, 11)) {
        Real d = dist(eval_map(lhs, p), eval_map(rhs, p));
        if (d > worst) worst = d;
      }
      CHECK(worst < pow2(-(static_cast<int>(P) - 30)));
    }
  }
}

TEST_CASE("jacobian determinant is one") {
  StageChain t1 = toy_instance(1);
  std::vector<Map> maps{phi_map(t1[1]), g_map(t1[1]), h_map(t1[0]), conjugacy_map(t1, 2), fn_map(t1, 1)};
  for (const auto& m : maps) {
    unsigned P = required_precision(m, 53);
    auto pts = random_points(50, P, 3);
    PrecisionScope ps(required_precision(m, P));
    Kernel<Tps<Real>> k(compile(m));
    for (const auto& p : pts) {
      auto a = Tps<Real>::variable(p.theta, 0, 1), b = Tps<Real>::variable(p.r, 1, 1);
      k.apply(a, b);
      Real det = a.derivative(1, 0) * b.derivative(0, 1) - a.derivative(0, 1) * b.derivative(1, 0);
      CHECK(boost::multiprecision::abs(det - 1) < pow2(-(static_cast<int>(P) - 30)));
    }
  }
}

TEST_CASE("powers of f_n") {
  StageChain t1 = toy_instance(1);
  Map f = fn_map(t1, 1);

  SUBCASE("m = q~_{n+1} collapses the rotation") {
    Program p = compile(power_map(f, t1[1].qtilde));
    for (const auto& s : p) CHECK(s.op != Step::Op::Rot);
    unsigned P = required_precision(f, 53);
    PrecisionScope ps(P);
    for (const auto& x : random_points(100, P, 5))
      CHECK(dist(eval_power_of_fn(t1, 1, t1[1].qtilde, x), x) < pow2(-(static_cast<int>(P) - 20)));
  }

  SUBCASE("m = 0 is the identity") {
    CHECK(compile(power_map(f, 0)).empty());
    TorusPoint x = make_point(Real(0.3), Real(0.6), 200);
    CHECK(dist(eval_power_of_fn(t1, 1, 0, x), x) == 0);
  }

  SUBCASE("m = 1 agrees with step by step composition") {
    unsigned P = required_precision(f, 53);
    PrecisionScope ps(P);
    Map H = conjugacy_map(t1, 1);
    for (const auto& x : random_points(100, P, 9)) {
      TorusPoint y = eval_map(inverse_map(H), x);
      y = eval_map(rotation_map(t1[1].alpha), y);
      y = eval_map(H, y);
      CHECK(dist(eval_power_of_fn(t1, 1, 1, x), y) < pow2(-(static_cast<int>(P) - 20)));
    }
  }

  SUBCASE("huge exponents use exact rotation arithmetic") {
    StageChain t4 = toy_instance(4);
    BigInt m = BigInt(t4[1].qtilde) * 3 + 1;
    Program p = compile(power_map(fn_map(t4, 1), m));
    REQUIRE(p.size() == 5);
    CHECK(p[2].angle == frac(Rational(m, 1) * t4[1].alpha));
    CHECK_THROWS(compile(power_map(h_map(t1[0]), BigInt(10000000))));
  }

  SUBCASE("small unrolled powers") {
    Map h = h_map(t1[0]);
    CHECK(compile(power_map(h, 3)).size() == 6);
    unsigned P = required_precision(power_map(h, -2), 53);
    PrecisionScope ps(P);
    TorusPoint x = make_point(Real(0.3), Real(0.6), P);
    TorusPoint y = eval_map(power_map(h, -2), eval_map(compose_maps({h, h}), x));
    CHECK(dist(x, y) < pow2(-(static_cast<int>(P) - 20)));
  }
}

TEST_CASE("metric estimates") {
  StageChain t1 = toy_instance(1);
  Map f = fn_map(t1, 1);

  CHECK(metric_d0_estimate(f, f, 32).value == 0);
  CHECK(metric_dk_estimate(f, f, 2, 8).value == 0);

  MetricEstimate half = metric_d0_estimate(rotation_map(Rational(1, 2)), identity_map(), 16, false);
  CHECK(half.value == Real(0.5));
  CHECK_FALSE(half.certified);

  MetricEstimate g1 = metric_dk_estimate(g_map(t1[0]), identity_map(), 1, 16, false);
  CHECK(g1.value == 1);

  Map h = h_map(t1[0]);
  Real prev = -1;
  for (unsigned k = 0; k <= 3; ++k) {
    Real v = metric_dk_estimate(h, identity_map(), k, 8).value;
    CHECK(v >= prev);
    prev = v;
  }

  MetricEstimate rig = metric_d0_estimate(power_map(f, t1[1].qtilde), identity_map(), 256);
  CHECK(rig.value <= pow2(-30));
}

TEST_CASE("grid sweeps do not depend on the thread count") {
  StageChain t1 = toy_instance(1);
  Map f = fn_map(t1, 1);
  setenv("AKLAB_THREADS", "1", 1);
  Real a = metric_dk_estimate(f, identity_map(), 1, 12).value;
  std::ostringstream sa;
  sweep_csv(sa, f, identity_map(), 6);
  setenv("AKLAB_THREADS", "4", 1);
  Real b = metric_dk_estimate(f, identity_map(), 1, 12).value;
  std::ostringstream sb;
  sweep_csv(sb, f, identity_map(), 6);
  unsetenv("AKLAB_THREADS");
  CHECK(a == b);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("theta,r,value\n", 0) == 0);
}

TEST_CASE("descriptor json round trip") {
  StageChain t1 = toy_instance(1);
  Map m = compose_maps({power_map(fn_map(t1, 1), BigInt(5)), inverse_map(phi_map(t1[1]))});
  auto j = to_json(*m);
  Map back = map_from_json(nlohmann::json::parse(j.dump()));
  CHECK(same_map(m, back));
  CHECK(j["children"][0]["exponent"] == "5");
  CHECK_THROWS(map_from_json(nlohmann::json{{"type", "Spin"}}));
}
