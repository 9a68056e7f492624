#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aklab/logmag.hpp"

#include <cmath>

using namespace aklab;

TEST_CASE("plain arithmetic encloses the double value") {
  PrecisionScope ps(128);
  auto a = LogMagnitude::from_int(1000);
  auto b = LogMagnitude::from_rational(Rational(1, 3));
  auto s = a + b;
  CHECK(s.lo.to_double() <= 1000.0 + 1.0 / 3);
  CHECK(s.hi.to_double() >= 1000.0 + 1.0 / 3);
  auto p = a * b;
  CHECK(p.lo.to_double() == doctest::Approx(1000.0 / 3));
  CHECK(lix_ge(p.hi, p.lo));
  CHECK(compare_ge(a, b) == Verdict::Pass);
  CHECK(compare_ge(b, a) == Verdict::Fail);
  CHECK(compare_ge(a, a) == Verdict::Pass);
  CHECK(compare_gt(a, a) == Verdict::Fail);
}

TEST_CASE("towers survive double overflow") {
  PrecisionScope ps(128);
  auto x = LogMagnitude::from_int(340);
  auto big = pow(x, x);  // 340^340
  CHECK(big.lo.d == 0);
  double l10 = lix_log(big.lo, Round::Down).to_double() / std::log(10.0);
  CHECK(l10 == doctest::Approx(861.0).epsilon(0.01));
  auto tower = exp(exp(exp(LogMagnitude::from_int(30))));
  CHECK(tower.lo.d >= 1);
  CHECK(compare_ge(tower, big) == Verdict::Pass);
  CHECK(compare_ge(big, tower) == Verdict::Fail);
  auto sum = tower + big;
  CHECK(compare_ge(sum, LogMagnitude(tower.lo, tower.lo)) == Verdict::Pass);
  CHECK(lix_ge(sum.hi, tower.hi));
  auto prod = tower * tower;
  CHECK(compare_ge(prod, tower) == Verdict::Pass);
}

TEST_CASE("pi enclosure") {
  PrecisionScope ps(200);
  auto p = LogMagnitude::pi();
  CHECK(p.lo.to_double() <= M_PI);
  CHECK(p.hi.to_double() >= M_PI);
  CHECK(lix_gt(p.hi, p.lo));
}

TEST_CASE("108 pi gate") {
  PrecisionScope ps(128);
  auto rhs = LogMagnitude::from_int(108) * LogMagnitude::pi();
  CHECK(compare_ge(LogMagnitude::from_int(340), rhs) == Verdict::Pass);
  CHECK(compare_ge(LogMagnitude::from_int(339), rhs) == Verdict::Fail);
}

TEST_CASE("margins") {
  PrecisionScope ps(128);
  auto a = LogMagnitude::from_int(100);
  auto b = LogMagnitude::from_int(10);
  auto m = log_margin(a, b);
  CHECK(!m.first.neg);
  CHECK(m.first.mag.to_double() == doctest::Approx(std::log(10.0)));
  auto n = log_margin(b, a);
  CHECK(n.first.neg);
  auto t = exp(exp(exp(LogMagnitude::from_int(20))));
  auto mt = log_margin(t, a);
  CHECK(!mt.first.neg);
  CHECK(lix_gt(mt.first.mag, Lix::from_int(boost::multiprecision::pow(BigInt(10), 100), Round::Up)));
}

TEST_CASE("doubling precision does not flip certified verdicts") {
  auto run = [](unsigned bits) {
    PrecisionScope ps(bits);
    auto lhs = pow(LogMagnitude::from_int(7), LogMagnitude::from_int(500));
    auto rhs = exp(LogMagnitude::from_int(973));
    return compare_ge(lhs, rhs);
  };
  auto v1 = run(80);
  auto v2 = run(160);
  if (v1 != Verdict::Unknown) CHECK(v1 == v2);
  CHECK(v2 != Verdict::Unknown);
}
