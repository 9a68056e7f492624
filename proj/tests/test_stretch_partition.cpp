#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aklab/stretch_partition.hpp"

#include <cmath>
#include <random>

using namespace aklab;

namespace {

namespace bm = boost::multiprecision;

Real pow2(int e) { return bm::ldexp(Real(1), e); }

double dbl(const Real& x) { return x.convert_to<double>(); }

struct Pair {
  StageChain chain;
  MixingIndex mi;
};

Pair pair_of(int id) {
  Pair p{toy_instance(id), {}};
  p.mi = find_mixing_index(p.chain[0], p.chain[1]);
  return p;
}

}  // namespace

TEST_CASE("psi vanishes when the phase is an integer") {
  StageChain t2 = toy_instance(2);
  for (const Rational& c : {Rational(0, 1), Rational(3, 1)}) {
    Psi p = make_psi(t2[0], c);
    PrecisionScope ps(p.bits);
    for (int i = 0; i < 20; ++i) {
      Real th = Real(i) / 20 + Real(1) / 77;
      CHECK(eval_psi(p, th, 0) == 0);
      CHECK(eval_psi(p, th, 1) == 0);
      CHECK(eval_psi(p, th, 2) == 0);
    }
  }
}

TEST_CASE("psi against independent formulas") {
  Pair t2 = pair_of(2);
  Psi p = make_psi(t2.chain[0], t2.chain[1], t2.mi.m);
  CHECK(p.phase == frac(Rational(t2.mi.m * t2.chain[0].q, 1) * t2.chain[1].alpha));
  PrecisionScope ps(p.bits);
  Real q = to_real(p.q), q2 = q * q, c = to_real(p.phase), tp = 2 * real_pi();

  // derivative at the quarter-period point against a centered difference
  Real th = Real(1) / 8, h = pow2(-30);
  Real fd = (eval_psi(p, th + h, 0) - eval_psi(p, th - h, 0)) / (2 * h);
  Real d1 = eval_psi(p, th, 1);
  CHECK(bm::abs(fd - d1) <= pow2(-20) * bm::abs(d1));
  Real fd2 = (eval_psi(p, th + h, 1) - eval_psi(p, th - h, 1)) / (2 * h);
  CHECK(bm::abs(fd2 - eval_psi(p, th, 2)) <= pow2(-20) * bm::abs(eval_psi(p, th, 2)) + pow2(-20));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  Real tol = q2 * pow2(-(static_cast<int>(p.bits) - 20));
  for (int i = 0; i < 200; ++i) {
    Real t(u(rng));
    Real direct = q2 * (bm::cos(tp * (q * t + c)) - bm::cos(tp * q * t));
    CHECK(bm::abs(eval_psi(p, t, 0) - direct) <= tol);
    Real split = -2 * q2 * bm::cos(tp * q * t) + eval_sigma(p, t, 0);
    CHECK(bm::abs(eval_psi(p, t, 0) - split) <= tol);
    Real sdirect = q2 * (bm::cos(tp * q * (t + c / q)) + bm::cos(tp * q * t));
    CHECK(bm::abs(eval_sigma(p, t, 0) - sdirect) <= tol);
  }
  CHECK_THROWS(eval_psi(p, th, 3));
}

TEST_CASE("psi refuses low precision") {
  Psi p = make_psi(toy_instance(3)[0], Rational(1, 3));
  PrecisionScope ps(64);
  CHECK_THROWS_AS(eval_psi(p, Real(0.25), 0), PrecisionError);
  CHECK_THROWS_AS(eval_sigma(p, Real(0.25), 1), PrecisionError);
}

TEST_CASE("forbidden set") {
  PrecisionScope ps(128);
  ForbiddenSet b25(BigInt(25));
  CHECK(dbl(b25.measure()) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(dbl(b25.half_width()) == doctest::Approx(1.0 / 250).epsilon(1e-15));
  for (int k = 0; k < 50; ++k) {
    CHECK(b25.contains(Real(k) / 50));
    CHECK(b25.contains(Real(k) / 50 + Real(1) / 251));
    CHECK_FALSE(b25.contains(Real(k) / 50 + Real(1) / 249));
    CHECK_FALSE(b25.contains((Real(k) + Real(0.5)) / 50));
  }
  ForbiddenSet b4(BigInt(4));
  CHECK(b4.covers_circle());
  CHECK(b4.measure() == 1);
  CHECK(b4.contains(Real(1) / 16));
  CHECK_FALSE(ForbiddenSet(BigInt(16)).covers_circle());
}

TEST_CASE("psi bounds") {
  Pair t2 = pair_of(2);
  PsiBoundsReport r = check_psi_bounds(t2.chain[0], t2.chain[1], t2.mi.m, 100000);
  CHECK(r.premise);
  CHECK(r.vacuous);
  CHECK(r.outside_points == 0);
  CHECK(r.dpsi == Verdict::Pass);
  CHECK(r.dsigma == Verdict::Pass);
  CHECK(r.sigma1_closed == doctest::Approx(4 * M_PI * M_PI * 256 / 16384).epsilon(1e-6));
  CHECK(r.sup_dsigma <= r.sigma1_closed * (1 + 1e-12));
  // the proof's |sigma''| < 1 does not hold at q_1 = 4
  CHECK(r.sigma2_closed == doctest::Approx(8 * std::pow(M_PI, 3) * 1024 / 16384).epsilon(1e-6));
  CHECK(r.d2sigma == Verdict::Fail);

  for (int id : {3, 4}) {
    Pair t = pair_of(id);
    PsiBoundsReport s = check_psi_bounds(t.chain[0], t.chain[1], t.mi.m, 20000);
    CHECK(s.premise);
    CHECK_FALSE(s.vacuous);
    CHECK(s.outside_points > 0);
    CHECK(s.inf_dpsi >= s.bound_dpsi);
    CHECK(s.sup_d2psi <= s.bound_d2psi);
    CHECK(s.dpsi == Verdict::Pass);
    CHECK(s.d2psi == Verdict::Pass);
    CHECK(s.dsigma == Verdict::Pass);
    CHECK(s.d2sigma == Verdict::Pass);
  }

  Pair t1 = pair_of(1);
  PsiBoundsReport d = check_psi_bounds(t1.chain[0], t1.chain[1], t1.mi.m, 1000);
  CHECK(d.diagnostic);
  CHECK(to_json(d)["diagnostic"] == true);
}

TEST_CASE("full partition on T3") {
  Pair t3 = pair_of(3);
  PartialDecomposition d = build_partition(t3.chain[0], t3.chain[1], t3.mi.m);
  CHECK(d.branches_total == 50);
  CHECK(d.branches_built.size() == 50);
  CHECK(d.elements.size() > 50000);
  PartitionCheck c = check_partition(d, 100, 3);
  CHECK(c.lengths_ok);
  CHECK(c.disjoint);
  CHECK(c.avoids_forbidden);
  CHECK(c.images_ok);
  CHECK(c.worst_image_error <= std::ldexp(1.0, -35));
  CHECK(c.mass_ok);
  CHECK(c.mass_bound == doctest::Approx(0.4));
  CHECK(dbl(d.total_mass) >= 0.4);
  CHECK(dbl(d.total_mass) <= 0.6);
  CHECK(dbl(d.max_length) <= std::pow(25.0, -2.5));
  auto j = to_json(d, false);
  CHECK(j["intervals"] == d.elements.size());
  CHECK_FALSE(j.contains("elements"));
}

TEST_CASE("branch sampling") {
  Pair t4 = pair_of(4);
  PartitionOptions o;
  o.branch_sample = 2;
  o.seed = 11;
  PartialDecomposition d = build_partition(t4.chain[0], t4.chain[1], t4.mi.m, o);
  CHECK(d.branches_total == 200);
  REQUIRE(d.branches_built.size() == 2);
  for (const auto& e : d.elements)
    CHECK(std::find(d.branches_built.begin(), d.branches_built.end(), e.branch) != d.branches_built.end());
  CHECK(d.mass_stderr >= 0);
  CHECK(dbl(d.total_mass) >= 1 - 3 / std::sqrt(100.0) - 3 * d.mass_stderr);
  PartitionCheck c = check_partition(d, 50, 2);
  CHECK(c.lengths_ok);
  CHECK(c.disjoint);
  CHECK(c.images_ok);
  PartialDecomposition again = build_partition(t4.chain[0], t4.chain[1], t4.mi.m, o);
  CHECK(to_json(again, false) == to_json(d, false));
  CHECK(to_json(again).dump() == to_json(d).dump());
}

TEST_CASE("distribution reports") {
  PrecisionScope ps(160);
  // affine psi taking I onto exactly one unit height
  Real t0 = Real(3) / 10, L = Real(1) / 1000;
  SkewMap aff = affine_skew(1 / L, -t0 / L);
  DistributionReport a = distribution_report(aff, {t0, L, Real(0.25)}, 64, 32, "affine");
  CHECK(a.full_circle);
  CHECK(a.delta == 0);
  CHECK(a.epsilon <= 1e-9);
  CHECK(a.gamma == doctest::Approx(0.001));
  CHECK(a.test_intervals == 127);
  Real whole = preimage_measure(aff, {t0, L, Real(0.25)}, Real(0), Real(1));
  CHECK(whole == L);

  Pair t4 = pair_of(4);
  Rational shift = frac(Rational(t4.mi.m, 1) * t4.chain[1].alpha);
  Map phi = stretch_map(t4.chain[0], shift);
  PartitionOptions o;
  o.branch_sample = 1;
  o.seed = 5;
  PartialDecomposition d = build_partition(t4.chain[0], t4.chain[1], t4.mi.m, o);
  REQUIRE(d.elements.size() > 100);
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<size_t> pick(0, d.elements.size() - 1);
  for (int i = 0; i < 8; ++i) {
    const auto& e = d.elements[pick(rng)];
    DistributionReport r = distribution_report(phi, {e.hat.left, e.hat.length, Real(0.5)}, 64, 64);
    CHECK(r.delta == 0);
    CHECK(r.full_circle);
    CHECK(r.gamma <= 0.01);
    CHECK(r.epsilon <= 9 * M_PI * M_PI / 100);
  }
  CHECK_THROWS_AS(distribution_report(h_map(t4.chain[0]), {Real(0.1), Real(0.01), Real(0)}, 8, 8),
                  std::invalid_argument);
  DistributionReport rot = distribution_report(rotation_map(Rational(1, 3)), {Real(0.1), Real(0.2), Real(0)}, 8, 8);
  CHECK(rot.delta == 1);
  CHECK(rot.epsilon == 0);
}

TEST_CASE("branch inversion agrees with point counting") {
  Pair t3 = pair_of(3);
  Psi p = make_psi(t3.chain[0], t3.chain[1], t3.mi.m);
  SkewMap f = skew_from_psi(p, Rational(0, 1));
  PrecisionScope ps(p.bits);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 20; ++i) {
    HorizontalInterval I{Real(u(rng)), Real(1e-4 + 2e-3 * u(rng)), Real(u(rng))};
    Real lo(u(rng)), len(0.05 + 0.5 * u(rng));
    MonteCarloCheck mc = monte_carlo_measure(f, I, lo, len, 100000, 1000 + i);
    CHECK_MESSAGE(std::abs(mc.z) <= 3, "case " << i << " exact " << mc.exact << " mc " << mc.estimate);
  }
}

TEST_CASE("Monte-Carlo redraw") {
  StageChain t4 = toy_instance(4);
  Psi p = make_psi(t4[0], Rational(1, 3));
  SkewMap f = skew_from_psi(p, Rational(0, 1));
  PrecisionScope ps(p.bits);
  HorizontalInterval I{Real(0.31), Real(0.002), Real(0.2)};
  MonteCarloAgreement ok = monte_carlo_agreement(f, I, Real(0.25), Real(0.5), 20000, 5);
  CHECK(ok.agrees == (std::abs(ok.first.z) <= 3 || std::abs(ok.redraw->z) <= 3));
  MonteCarloAgreement tight = monte_carlo_agreement(f, I, Real(0.25), Real(0.5), 20000, 5, 0.0);
  REQUIRE(tight.redraw);
  CHECK(tight.redraw->z != tight.first.z);
  CHECK(tight.redraw->exact == tight.first.exact);
  CHECK(to_json(tight)["redraw"]["points"] == 20000);
  MonteCarloAgreement none = monte_carlo_agreement(f, I, Real(0.25), Real(0.5), 20000, 5, 1e9);
  CHECK(none.agrees);
  CHECK_FALSE(none.redraw);
  CHECK(to_json(none)["redraw"].is_null());
}

TEST_CASE("uniform stretching") {
  Fn1 lin{[](double x) { return 3 * x; }, [](double) { return 3.0; }, [](double) { return 0.0; }};
  StretchReport l = uniform_stretch_check(lin, 0.2, 0.7, 0.0, 200);
  CHECK(l.premise);
  CHECK(l.worst <= 1e-9);
  CHECK(l.conclusion);
  CHECK_FALSE(l.counterexample);

  Fn1 sq{[](double x) { return x * x; }, [](double x) { return 2 * x; }, [](double) { return 2.0; }};
  Discrepancy d = stretch_discrepancy(sq, 1, 2, 1, 2);
  CHECK(d.ratio == doctest::Approx(std::sqrt(2.0) - 1));
  CHECK(d.p == doctest::Approx(1.0 / 3));
  CHECK(d.abs() == doctest::Approx(0.0809).epsilon(1e-3));
  CHECK(d.abs() <= d.p);
  StretchReport s = uniform_stretch_check(sq, 1, 2, 1.0, 500);
  CHECK(s.premise);
  CHECK(s.conclusion);
  CHECK_FALSE(s.counterexample);
  CHECK_THROWS(uniform_stretch_check(sq, -1, 1, 1.0, 10));

  // soundness sentinel over monotone pieces of sine
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.01, 1.5);
  Fn1 sn{[](double x) { return std::sin(x); }, [](double x) { return std::cos(x); },
         [](double x) { return -std::sin(x); }};
  for (int i = 0; i < 30; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    if (b - a < 1e-3) continue;
    double eps = std::sin(b) * (b - a) / std::cos(b);
    StretchReport r = uniform_stretch_check(sn, a, b, eps, 100, i);
    CHECK(r.premise);
    CHECK_FALSE(r.counterexample);
  }
}

TEST_CASE("Cesaro mixing diagnostic") {
  Rect A{0, 0.3, 0, 1};
  CHECK(cesaro_mixing_estimate(identity_map(), A, A, 5, 16) == doctest::Approx(0.3 - 0.09));
  Rect half{0, 0.5, 0, 1};
  CHECK(cesaro_mixing_estimate(rotation_map(Rational(1, 2)), half, half, 10, 32) == doctest::Approx(0.25));

  // Monte-Carlo error shrinks like grid^-1 (points^-1/2)
  Map rot = rotation_map(Rational(3, 10));
  Rect a{0, 0.4, 0, 1}, b{0.2, 0.7, 0, 1};
  unsigned N = 10;
  double exact = 0;
  for (unsigned n = 1; n <= N; ++n) {
    double s = std::fmod(0.3 * n, 1.0), ov = 0;
    for (int w = -1; w <= 1; ++w) ov += std::max(0.0, std::min(s + w + 0.4, 0.7) - std::max(s + w, 0.2));
    exact += std::abs(ov - 0.4 * 0.5);
  }
  exact /= N;
  CHECK(cesaro_mixing_estimate(rot, a, b, N, 64) == doctest::Approx(exact).epsilon(1e-2));
  double e_small = 0, e_large = 0;
  for (std::uint64_t s = 1; s <= 8; ++s) {
    e_small += std::abs(cesaro_mixing_estimate(rot, a, b, N, 4, s) - exact);
    e_large += std::abs(cesaro_mixing_estimate(rot, a, b, N, 32, s) - exact);
  }
  CHECK(e_large < e_small / 3);
  CHECK_THROWS(cesaro_mixing_estimate(rot, a, b, 0, 4));
}

TEST_CASE("graymap render") {
  Pair t3 = pair_of(3);
  Map phi = stretch_map(t3.chain[0], frac(Rational(t3.mi.m, 1) * t3.chain[1].alpha));
  PrecisionScope ps(160);
  HorizontalInterval I{Real(0.11), Real(0.004), Real(0.5)};
  std::string img = render_pgm(phi, I, 40, 30, 2000);
  std::string head = "P5 40 30 255\n";
  REQUIRE(img.size() == head.size() + 1200);
  CHECK(img.rfind(head, 0) == 0);
  size_t lit = 0;
  for (size_t i = head.size(); i < img.size(); ++i) lit += img[i] != 0;
  // a narrow interval fills one full column
  CHECK(lit >= 30);
  CHECK(render_pgm(phi, I, 40, 30, 2000) == img);
}
