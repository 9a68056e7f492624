#include "aklab/exact_core.hpp"
#include "aklab/growth_gate.hpp"
#include "aklab/jet_norms.hpp"
#include "aklab/stretch_partition.hpp"
#include "aklab/strip_analytic.hpp"
#include "aklab/torus_dynamics.hpp"

#include <CLI11.hpp>
#include <mpfr.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

using namespace aklab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

Real pow2(int e) { return boost::multiprecision::ldexp(Real(1), e); }
Real rabs(const Real& x) { return boost::multiprecision::abs(x); }

Real dist(const TorusPoint& a, const TorusPoint& b) {
  Real x = rabs(reduce_half(a.theta - b.theta));
  Real y = rabs(reduce_half(a.r - b.r));
  return x > y ? x : y;
}

BigInt ceil_of(const Real& x) {
  BigInt r;
  Real c = boost::multiprecision::ceil(x);
  mpfr_get_z(r.backend().data(), c.backend().data(), MPFR_RNDN);
  return r;
}

// 1. stage algebra
void stage_algebra(Outcome& o) {
  std::mt19937_64 rng(101);
  unsigned pairs = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<BigInt> qs;
    int len = 1 + rng() % 5;
    for (int k = 0; k < len; ++k) qs.push_back(2 + rng() % 999999);
    StageChain chain = build_chain(qs, Rational(1, 4));
    for (size_t k = 1; k < chain.size(); ++k) {
      const auto& prev = chain[k - 1];
      const auto& cur = chain[k];
      ++pairs;
      o.require((Rational::integer(cur.qtilde) * cur.alpha).reduced().den == 1, "q~ alpha integral");
      o.require(abs(cur.alpha - prev.alpha) <= Rational(1, cur.qtilde), "|alpha step| <= 1/q~");
    }
  }
  o.detail << "100 chains, " << pairs << " steps exact";
}

// 2. mixing index
void mixing_index(Outcome& o) {
  auto t1 = toy_instance(1), t2 = toy_instance(2);
  MixingIndex m1 = find_mixing_index(t1[0], t1[1]);
  MixingIndex m2 = find_mixing_index(t2[0], t2[1]);
  o.require(m1.m == 31 && m1.delta == Rational(1, 256), "T1 m = 31, delta = 1/256");
  o.require(m2.m == 2047 && m2.delta == Rational(1, 16384), "T2 m = 2047, delta = 1/16384");
  unsigned compared = 0, bounded = 0;
  auto visit = [&](const StageChain& chain) {
    for (size_t k = 1; k < chain.size(); ++k) {
      MixingIndex mi = find_mixing_index(chain[k - 1], chain[k]);
      o.require(abs(mi.delta) <= Rational(chain[k - 1].q, chain[k].q), "|delta| <= q_n/q_{n+1}");
      ++bounded;
      if (chain[k].q <= 1000000) {
        MixingIndex a = find_mixing_index_scan(chain[k - 1], chain[k]);
        MixingIndex b = find_mixing_index_window(chain[k - 1], chain[k]);
        o.require(a.m == b.m && a.delta == b.delta, "scan equals window");
        ++compared;
      }
    }
  };
  for (int id = 1; id <= 4; ++id) visit(toy_instance(id));
  std::mt19937_64 rng(202);
  for (int i = 0; i < 200; ++i) {
    std::vector<BigInt> qs{BigInt(2 + rng() % 60), BigInt(2 + rng() % 16000)};
    if (i % 4 == 0) qs.push_back(2 + rng() % 50);
    visit(build_chain(qs, Rational(1, 4)));
  }
  o.detail << "T1 m=31 delta=1/256, T2 m=2047 delta=1/16384, scan=window on " << compared << ", bound on "
           << bounded;
}

// 3. rigidity
void rigidity(Outcome& o) {
  const unsigned grid = 256;
  for (int id : {1, 2}) {
    StageChain chain = toy_instance(id);
    Map f = fn_map(chain, 1);
    MetricEstimate sweep = metric_d0_estimate(power_map(f, chain[1].qtilde), identity_map(), grid);

    // the same power evaluated one factor at a time, H o R o H^-1
    Map H = conjugacy_map(chain, 1), Hi = inverse_map(H);
    Map R = rotation_map(frac(Rational(chain[1].qtilde, 1) * chain[1].alpha));
    unsigned P = required_precision(f, 53);
    std::vector<Real> worst(grid);
    parallel_tiles(grid, [&](size_t i) {
      PrecisionScope ps(P);
      Real w = 0;
      for (unsigned j = 0; j < grid; ++j) {
        TorusPoint x = make_point(Real(i) / grid, Real(j) / grid, P);
        TorusPoint y = eval_map(H, eval_map(R, eval_map(Hi, x)));
        Real d = dist(x, y);
        if (d > w) w = d;
      }
      worst[i] = w;
    });
    PrecisionScope ps(P);
    Real stepwise = *std::max_element(worst.begin(), worst.end());
    o.require(sweep.value <= pow2(-30), "T" + std::to_string(id) + " sweep <= 2^-30");
    o.require(stepwise <= pow2(-30), "T" + std::to_string(id) + " stepwise <= 2^-30");
    o.detail << "T" << id << " sweep " << format_real(sweep.value, 3) << " stepwise " << format_real(stepwise, 3)
             << " at " << P << " bits; ";
  }
}

// 4. psi bounds
void psi_bounds(Outcome& o) {
  StageChain t2 = toy_instance(2);
  MixingIndex mi = find_mixing_index(t2[0], t2[1]);
  PsiBoundsReport r = check_psi_bounds(t2[0], t2[1], mi.m, 1000000);
  o.require(r.dpsi == Verdict::Pass, "inf|psi'| >= 32");
  o.require(r.d2psi == Verdict::Pass, "sup|psi''| <= 9 pi^2 256");
  o.require(r.dsigma == Verdict::Pass, "|sigma'| < 1");
  o.require(r.d2sigma == Verdict::Pass, "|sigma''| < 1");
  o.detail << "points outside B " << r.outside_points << (r.vacuous ? " (vacuous)" : "") << ", |sigma'| "
           << r.sup_dsigma << ", |sigma''| " << r.sup_d2sigma;
}

// 5. partition mass
void partition_mass(Outcome& o) {
  StageChain t3 = toy_instance(3);
  MixingIndex mi = find_mixing_index(t3[0], t3[1]);
  PartialDecomposition d = build_partition(t3[0], t3[1], mi.m);
  PartitionCheck c = check_partition(d, 100, 1);
  o.require(d.branches_built.size() == d.branches_total, "full enumeration");
  o.require(c.lengths_ok, "lengths <= 25^-2.5");
  o.require(c.disjoint && c.avoids_forbidden && c.images_ok, "disjoint elements with unit images outside B");
  o.require(c.mass_ok, "mass >= 0.4");
  o.detail << d.elements.size() << " intervals, mass " << format_real(d.total_mass, 6) << " >= " << c.mass_bound
           << ", max length " << format_real(d.max_length, 4);
}

// 6. distribution
void distribution(Outcome& o) {
  DistributionSample s = sample_distribution(toy_instance(4), 1);
  o.require(s.rows.size() >= 50, ">= 50 elements");
  o.require(s.delta_max == 0, "delta = 0");
  o.require(s.gamma_max <= 0.01, "gamma <= 0.01");
  o.require(s.epsilon_max <= 0.89 && s.epsilon_max <= s.epsilon_bound, "epsilon <= 9 pi^2/100");
  o.require(s.mc_disagreements == 0, "Monte-Carlo within 3 sigma");
  o.detail << s.rows.size() << " elements, eps " << s.epsilon_max << ", gamma " << s.gamma_max << ", max|z| "
           << s.mc_abs_z_max << " with " << s.mc_redraws << " redraw(s)";
}

// 7. norm lemmas
void norm_lemmas(Outcome& o) {
  unsigned hn = 0, coarse = 0;
  for (int id : {1, 2})
    for (const auto& s : toy_instance(id))
      for (unsigned k = 0; k <= 3; ++k) {
        NormTriple t = check_hn_norm_bound(s, k, 128);
        o.require(t.satisfied, "h_n bound");
        ++hn;
        if (!t.note.empty()) ++coarse;
      }

  StageChain t1 = toy_instance(1), t2 = toy_instance(2);
  // primitives a 64 grid resolves; stage-2 cosines (q = 1024) alias on any affordable grid
  std::vector<Map> family{phi_map(t1[0]),  g_map(t1[0]),           h_map(t1[0]),
                          inverse_map(h_map(t1[0])), phi_map(t2[0]), g_map(t2[0]),
                          h_map(t2[0]),    inverse_map(h_map(t2[0])), g_map(t1[1]),
                          rotation_map(t1[1].alpha), rotation_map(t2[1].alpha), identity_map()};
  const unsigned grid = 64;
  std::mt19937_64 rng(707);
  unsigned comp = 0;
  for (int i = 0; i < 20; ++i) {
    size_t gi = rng() % family.size(), hi = rng() % family.size();
    for (unsigned k = 1; k <= 3; ++k) {
      NormTriple t = check_composition_bound(family[gi], family[hi], k, grid);
      if (!t.satisfied || t.diagnostic)
        o.detail << "pair (" << gi << ", " << hi << ") k=" << k << " value " << t.value << "; ";
      o.require(!t.diagnostic, "grid resolves both maps");
      o.require(t.satisfied, "composition bound");
      ++comp;
    }
  }

  for (unsigned k = 0; k <= 2; ++k)
    o.require(check_conjugation_bound(h_map(t1[0]), t1[1].alpha, t1[0].alpha, k, 64).satisfied,
              "conjugation bound");

  std::vector<Map> prims{phi_map(t1[0]), g_map(t1[0]), h_map(t2[0]), inverse_map(h_map(t2[0])), phi_map(t1[1]),
                         inverse_map(h_map(t1[1]))};
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  for (const auto& m : prims) {
    unsigned P = required_precision(m, 53);
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
        for (int comp_i = 0; comp_i < 2; ++comp_i) {
          Real fp = comp_i == 0 ? plus.theta : plus.r;
          Real fm = comp_i == 0 ? minus.theta : minus.r;
          Real fc = comp_i == 0 ? c.theta : c.r;
          Real d1 = (fp - fm) / (2 * h);
          Real d2 = (fp - 2 * fc + fm) / (h * h);
          Real j1 = j.component(comp_i).derivative(dir == 0 ? 1 : 0, dir == 0 ? 0 : 1);
          Real j2 = j.component(comp_i).derivative(dir == 0 ? 2 : 0, dir == 0 ? 0 : 2);
          Real e1 = rabs(d1 - j1) / (rabs(j1) > 1 ? rabs(j1) : Real(1));
          Real e2 = rabs(d2 - j2) / (rabs(j2) > 1 ? rabs(j2) : Real(1));
          worst = std::max({worst, e1.convert_to<double>(), e2.convert_to<double>()});
        }
      }
    }
  }
  o.require(worst <= 1e-6, "jet vs finite difference");
  o.detail << hn << " h_n checks (" << coarse << " on under-resolved grids), " << comp << " composition checks, conjugation k<=2, jet/FD " << worst;
}

Sequence exact_seq(std::initializer_list<BigInt> xs) {
  Sequence s;
  for (const auto& x : xs) s.push_back(SeqEntry::exact(x));
  return s;
}

// 8. growth validators
void growth(Outcome& o) {
  Sequence s340 = {SeqEntry::exact(340), SeqEntry::parse("340^340")};
  auto cor = check_smooth_corollary(s340);
  o.require(cor.size() == 2 && cor[1].verdict == Verdict::Pass && cor[1].exact, "340^340 corollary step exact");
  GateOptions lg;
  lg.force_log = true;
  auto thm = check_smooth_theorem(s340, lg);
  o.require(thm.size() == 1 && thm[0].verdict == Verdict::Pass && !thm[0].exact, "340^340 theorem in log domain");
  o.require(smooth_corollary_helper(SeqEntry::exact(339), 1).verdict == Verdict::Fail, "339 fails the gate");
  o.require(check_smooth_corollary(exact_seq({339, 400}))[0].verdict == Verdict::Fail, "339 sequence fails");

  std::mt19937_64 rng(808);
  unsigned chains = 0;
  for (int trial = 0; trial < 12; ++trial) {
    Sequence s;
    s.push_back(SeqEntry::exact(340 + rng() % 5000));
    {
      PrecisionScope ps(256);
      LogMagnitude cur = s[0].mag();
      for (int n = 1; n <= 3; ++n) {
        Rational c(101 + rng() % 100, 100);
        cur = pow(cur, pow(cur, LogMagnitude::from_rational(c)));
        s.push_back(SeqEntry::magnitude(cur));
      }
    }
    o.require(overall(check_smooth_corollary(s)) == Verdict::Pass, "smooth corollary on generated sequence");
    o.require(overall(check_smooth_theorem(s)) == Verdict::Pass, "smooth corollary implies theorem");
    ++chains;
  }
  for (int trial = 0; trial < 10; ++trial) {
    Rational rho(1 + rng() % 200, 100);
    Sequence s;
    {
      PrecisionScope ps(256);
      Real start = (to_real(rho) + 1) * 128 * real_pi() * real_pi();
      s.push_back(SeqEntry::exact(ceil_of(start) + rng() % 1000));
      LogMagnitude cur = s[0].mag();
      for (int n = 1; n <= 2; ++n) {
        Rational c(101 + rng() % 100, 100);
        LogMagnitude e6 = pow(cur, LogMagnitude::from_rational(Rational(6, 1) * c));
        cur = pow(cur, 15) * exp(pow(cur, 7) * exp(e6));
        s.push_back(SeqEntry::magnitude(cur));
      }
    }
    o.require(overall(check_analytic_corollary(s, rho)) == Verdict::Pass, "analytic corollary on generated sequence");
    o.require(overall(check_analytic_theorem(s, rho)) == Verdict::Pass, "analytic corollary implies theorem");
    ++chains;
  }

  unsigned flips = 0, compared = 0;
  for (int i = 0; i < 60; ++i) {
    BigInt a = 2 + rng() % 3000;
    BigInt b = a + 1 + rng() % 100000000;
    Sequence s = exact_seq({a, b});
    GateOptions lo;
    lo.bits = 64;
    lo.refine = false;
    lo.force_log = true;
    GateOptions hi = lo;
    hi.bits = 128;
    auto cmp = [&](const std::vector<ConditionReport>& x, const std::vector<ConditionReport>& y) {
      for (size_t k = 0; k < x.size() && k < y.size(); ++k)
        if (x[k].verdict != Verdict::Unknown) {
          ++compared;
          if (x[k].verdict != y[k].verdict) ++flips;
        }
    };
    cmp(check_smooth_theorem(s, lo), check_smooth_theorem(s, hi));
    cmp(check_smooth_corollary(s, lo), check_smooth_corollary(s, hi));
    cmp(check_analytic_theorem(s, Rational(1, 2), lo), check_analytic_theorem(s, Rational(1, 2), hi));
    cmp(check_analytic_corollary(s, Rational(1, 2), lo), check_analytic_corollary(s, Rational(1, 2), hi));
  }
  o.require(flips == 0, "doubling precision flips no verdict");
  o.detail << "340 passes, 339 fails, " << chains << " implication chains, " << compared
           << " verdicts stable under doubled precision";
}

// 9. analytic suite
void analytic(Outcome& o) {
  StripSpec sp;
  sp.rho = 0.5;
  double c = strip_sup_norm(StripFunction::cos2pi(1, 0), sp).value;
  double rel = std::abs(c / std::cosh(M_PI) - 1);
  o.require(rel <= 0.01, "cosh(pi) within 1%");

  StageChain t1 = toy_instance(1);
  for (const auto& r : check_hn_inverse_strip_bound(t1[0], 0.1)) o.require(r.verdict == Verdict::Pass, "rho_n bound");

  RhoChain rc = rho_recursion(t1, Rational(1, 10));
  o.require(rc.rho_measured.size() > 1 && rc.rho_measured[1].has_value(), "rho_1 measured");
  o.require(rc.plus_one.size() > 1 && rc.plus_one[1] == Verdict::Pass, "rho_1 + 1 <= rho~_1");

  unsigned tm = 0;
  for (BigInt m = 1; m <= t1[0].q; ++m) {
    TmReport r = tm_bound_check(t1[0], t1[1], m, 0.05);
    o.require(r.verdict == Verdict::Pass, "T_m bound");
    ++tm;
  }
  o.detail << "cos strip norm rel err " << rel << ", rho_1 " << (rc.rho_measured[1] ? *rc.rho_measured[1] : -1.0)
           << ", " << tm << " T_m checks";
}

// 10. reproducibility
fs::path g_cli;

void reproducibility(Outcome& o) {
  if (g_cli.empty() || !fs::exists(g_cli)) {
    o.require(false, "command-line binary not found");
    return;
  }
  const std::vector<std::string> runs{
      "validate --topology smooth --seq 340,340^340",
      "validate --topology analytic --seq 340,340^340 --rho 0.1",
      "build --toy 3",
      "mix-index --toy 2",
      "psi-check --toy 2 --grid 100000",
      "partition --toy 3",
      "distribute --toy 4 --branches 2 --sample 10",
      "norms --toy 2",
      "strip --toy 1 --rho 0.1",
      "rigidity --toy 2",
      "render --toy 4"};
  fs::path root = fs::temp_directory_path() / ("aklab_accept_" + std::to_string(::getpid()));
  unsigned files = 0;
  for (size_t i = 0; i < runs.size(); ++i) {
    std::string name = runs[i].substr(0, runs[i].find(' '));
    std::map<std::string, std::string> seen[2];
    int status[2];
    for (int pass = 0; pass < 2; ++pass) {
      fs::path out = root / (std::to_string(i) + (pass ? "b" : "a"));
      std::string cmd = g_cli.string() + " " + runs[i] + " --seed 7 --out " + out.string() + " > /dev/null 2>&1";
      status[pass] = std::system(cmd.c_str());
      for (const auto& e : fs::directory_iterator(out)) {
        std::string fn = e.path().filename().string();
        if (fn.size() > 10 && fn.substr(fn.size() - 10) == ".meta.json") continue;
        std::ifstream in(e.path(), std::ios::binary);
        seen[pass][fn] = std::string(std::istreambuf_iterator<char>(in), {});
      }
    }
    o.require(status[0] == status[1], name + " status");
    o.require(!seen[0].empty() && seen[0] == seen[1], name + " artifacts");
    files += seen[0].size();
  }
  fs::remove_all(root);
  o.detail << runs.size() << " runs, " << files << " artifacts byte-identical";
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0 when untimed
  void (*run)(Outcome&);
};

}  // namespace

int main(int argc, char** argv) {
  init_mpfr_range();
  CLI::App app{"acceptance criteria"};
  std::vector<int> only, expect_fail;
  std::string cli;
  app.add_option("--only", only, "criteria to run");
  app.add_option("--expect-fail", expect_fail, "criteria known to fail; exit 0 iff exactly these fail");
  app.add_option("--cli", cli, "command-line binary");
  CLI11_PARSE(app, argc, argv);
  g_cli = cli.empty() ? fs::canonical("/proc/self/exe").parent_path() / "aklab" : fs::path(cli);

  const std::vector<Criterion> all{
      {1, "stage algebra", 1, stage_algebra},
      {2, "mixing index", 10, mixing_index},
      {3, "rigidity sweep", 60, rigidity},
      {4, "psi bounds", 60, psi_bounds},
      {5, "partition mass", 300, partition_mass},
      {6, "distribution", 600, distribution},
      {7, "norm lemmas", 300, norm_lemmas},
      {8, "growth validators", 30, growth},
      {9, "analytic suite", 300, analytic},
      {10, "reproducibility", 0, reproducibility}};

  std::set<int> failed;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs > c.limit_s) o.require(false, "runtime limit");
    if (!o.pass) failed.insert(c.id);
    std::cout << "criterion " << c.id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << c.name << "  "
              << o.detail.str() << " (" << std::fixed << std::setprecision(1) << secs << " s)" << std::defaultfloat
              << std::endl;
  }
  if (expect_fail.empty()) return failed.empty() ? 0 : 1;
  std::set<int> want;
  for (int id : expect_fail)
    if (only.empty() || std::find(only.begin(), only.end(), id) != only.end()) want.insert(id);
  if (failed == want) return 0;
  std::cerr << "failing criteria differ from the expected set\n";
  return 1;
}
