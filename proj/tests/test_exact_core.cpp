#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aklab/exact_core.hpp"

#include <random>

using namespace aklab;

TEST_CASE("initial stage") {
  auto s = make_initial_stage(4, Rational(1, 4));
  CHECK(s.n == 1);
  CHECK(s.p == 1);
  CHECK(s.q == 4);
  CHECK(s.alpha == Rational(1, 4));
  auto t = make_initial_stage(25, Rational(1, 4));
  CHECK(t.alpha == Rational(1, 25));
  CHECK_THROWS(make_initial_stage(1, Rational(1, 4)));
  CHECK_THROWS(make_initial_stage(4, Rational(1, 2)));
  CHECK_THROWS(make_initial_stage(4, Rational(0, 1)));
}

TEST_CASE("next stage hand values") {
  auto s1 = make_initial_stage(4, Rational(1, 4));
  auto a = next_stage(s1, 5);
  CHECK(*a.a_prev == 1);
  CHECK(a.p == 4);
  CHECK(a.q == 20);
  CHECK((Rational::integer(5) * a.alpha).reduced().den == 1);

  auto b = next_stage(s1, 256);
  CHECK(*b.a_prev == 4);
  CHECK(b.p == 252);
  CHECK(b.q == 1024);
  CHECK((Rational::integer(256) * b.alpha) == Rational::integer(63));

  StageParams c0 = make_initial_stage(3, Rational(1, 4));
  auto c = next_stage(c0, 4);
  CHECK(*c.a_prev == 1);
  CHECK(c.p == 3);
  CHECK(c.q == 12);
}

TEST_CASE("floor power") {
  CHECK(floor_power(2, 16, Rational(1, 4)) == 4);
  CHECK(floor_power(1, 4, Rational(1, 4)) == 1);
  CHECK(floor_power(3, 100, Rational(1, 4)) == 9);
  CHECK(floor_power(1, 1000000, Rational(1, 3)) == 100);
  CHECK(floor_power(1, 999999, Rational(1, 3)) == 99);
}

TEST_CASE("floor power agrees with float evaluation away from integers") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    unsigned long n = 1 + rng() % 50;
    unsigned long q = 2 + rng() % 1000000;
    unsigned long b = 2 + rng() % 6;
    unsigned long a = 1 + rng() % (b - 1);
    Rational s = Rational(a, b).reduced();
    long double v = n * std::pow(static_cast<long double>(q), static_cast<long double>(a) / b);
    long double fl = std::floor(v);
    if (v - fl < 1e-9L || fl + 1 - v < 1e-9L) continue;
    CHECK(floor_power(n, q, s) == BigInt(static_cast<unsigned long long>(fl)));
  }
}

TEST_CASE("mixing index on toy instances") {
  auto t1 = toy_instance(1);
  auto m1 = find_mixing_index(t1[0], t1[1]);
  CHECK(m1.m == 31);
  CHECK(m1.delta == Rational(1, 256));

  auto t2 = toy_instance(2);
  auto m2 = find_mixing_index(t2[0], t2[1]);
  CHECK(m2.m == 2047);
  CHECK(m2.delta == Rational(1, 16384));

  auto s1 = make_initial_stage(4, Rational(1, 4));
  auto s2 = next_stage(s1, 5);
  CHECK(find_mixing_index(s1, s2).m == 1);
}

TEST_CASE("mixing index: brute oracle from the displayed inf condition") {
  // inf_k |m q_n p_{n+1}/q_{n+1} - 1/2 + k| <= q_n^2 / q_{n+1}
  auto t1 = toy_instance(1);
  const auto& c = t1[0];
  const auto& nx = t1[1];
  BigInt first = 0;
  for (BigInt m = 1; m <= nx.q; ++m) {
    Rational x = Rational(m * c.q * nx.p, nx.q) - Rational(1, 2);
    Rational f = frac(x);
    Rational dist = f <= Rational(1, 2) ? f : Rational::integer(1) - f;
    if (dist <= Rational(c.q * c.q, nx.q)) {
      first = m;
      break;
    }
  }
  CHECK(first == 31);
}

TEST_CASE("scan and window agree on random chains") {
  std::mt19937_64 rng(7);
  int compared = 0;
  for (int i = 0; i < 300; ++i) {
    BigInt q1 = 2 + rng() % 60;
    BigInt q2 = 2 + rng() % 4000;
    auto chain = build_chain({q1, q2}, Rational(1, 4));
    if (chain[1].q > 1000000) continue;
    auto a = find_mixing_index_scan(chain[0], chain[1]);
    auto b = find_mixing_index_window(chain[0], chain[1]);
    CHECK(a.m == b.m);
    CHECK(a.delta == b.delta);
    CHECK(abs(a.delta) <= Rational(chain[0].q, chain[1].q));
    ++compared;
  }
  CHECK(compared > 100);
}

TEST_CASE("rigidity residue and step size on random chains") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    std::vector<BigInt> qs;
    int len = 2 + rng() % 4;
    for (int k = 0; k < len; ++k) qs.push_back(2 + rng() % 999999);
    auto chain = build_chain(qs, Rational(1, 4));
    for (size_t k = 1; k < chain.size(); ++k) {
      const auto& prev = chain[k - 1];
      const auto& cur = chain[k];
      CHECK((Rational::integer(cur.qtilde) * cur.alpha).reduced().den == 1);
      Rational step = abs(cur.alpha - prev.alpha);
      CHECK(step == Rational(*cur.a_prev, prev.q * cur.qtilde));
      CHECK(step <= Rational(1, cur.qtilde));
      CHECK(*cur.a_prev >= 1);
      CHECK(*cur.a_prev <= prev.q);
      CHECK(floor_mod(cur.qtilde * prev.p - *cur.a_prev, prev.q) == 0);
    }
  }
}

TEST_CASE("T4 needs the window search") {
  auto t4 = toy_instance(4);
  auto mi = find_mixing_index(t4[0], t4[1]);
  CHECK(mixing_condition(t4[0], t4[1], mi.m));
  CHECK(!mixing_condition(t4[0], t4[1], mi.m - 1));
  CHECK(abs(mi.delta) <= Rational(t4[0].q, t4[1].q));
}

TEST_CASE("json round trip") {
  auto chain = toy_instance(3);
  auto j = chain_to_json(chain);
  CHECK(j[1]["q"] == "152587890625");
  auto back = stage_from_json(j[1]);
  CHECK(back.p == chain[1].p);
  CHECK(back.alpha == chain[1].alpha);
  CHECK(*back.a_prev == *chain[1].a_prev);
}

TEST_CASE("decimal parsing is exact") {
  CHECK(parse_number("0.05") == Rational(1, 20));
  CHECK(parse_number("0.1") == Rational(1, 10));
  CHECK(parse_number("1/20") == Rational(1, 20));
  CHECK(parse_number("3") == Rational(3, 1));
  CHECK(parse_number("-2.5") == Rational(-5, 2));
  CHECK(parse_number("1e-3") == Rational(1, 1000));
  CHECK(parse_number("2.5E2") == Rational(250, 1));
  CHECK_THROWS(parse_number("abc"));
  CHECK_THROWS(parse_number("1e"));
  CHECK_THROWS(parse_number("."));
}
