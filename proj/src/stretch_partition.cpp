#include "aklab/stretch_partition.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <ostream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace aklab {

namespace bm = boost::multiprecision;

namespace {

Real pow2(int e) { return bm::ldexp(Real(1), e); }

double dbl(const Real& x) { return x.convert_to<double>(); }

Verdict verdict_ge(double a, double b) {
  if (a >= b * (1 + 1e-12)) return Verdict::Pass;
  if (a < b * (1 - 1e-12)) return Verdict::Fail;
  return Verdict::Unknown;
}

Verdict verdict_lt(double a, double b) {
  if (a < b * (1 - 1e-12)) return Verdict::Pass;
  if (a >= b * (1 + 1e-12)) return Verdict::Fail;
  return Verdict::Unknown;
}

std::string str(const Real& x) { return format_real(x, 20); }

Psi psi_for(const BigInt& q, const Rational& phase) {
  Psi p;
  p.q = q;
  p.phase = frac(phase);
  StageParams s;
  s.q = q;
  p.bits = required_precision(phi_map(s), 53);
  PrecisionScope ps(p.bits);
  Real q2 = to_real(BigInt(q * q));
  Real pc = real_pi() * to_real(p.phase);
  p.amp_psi = -2 * q2 * bm::sin(pc);
  p.amp_sigma = 2 * q2 * bm::cos(pc);
  p.qr = to_real(q);
  p.half_phase = to_real(p.phase) / 2;
  return p;
}

void require_bits(const Psi& p) {
  if (current_bits() < p.bits)
    throw PrecisionError("working precision " + std::to_string(current_bits()) + " below required " +
                         std::to_string(p.bits));
}

// u = 2 pi (q theta + c/2) reduced
Real angle(const Psi& p, const Real& theta) {
  return 2 * real_pi() * reduce_unit(p.qr * theta + p.half_phase);
}

struct Derivs {
  Real dpsi, d2psi, dsigma, d2sigma;
};

Derivs derivs(const Psi& p, const Real& theta, const Real& omega) {
  Real u = angle(p, theta);
  Real s = bm::sin(u), c = bm::cos(u);
  return {p.amp_psi * omega * c, -p.amp_psi * omega * omega * s, -p.amp_sigma * omega * s,
          -p.amp_sigma * omega * omega * c};
}

// x in [lo, hi] with f(x) = y, f monotone; inc says f(lo) <= f(hi)
template <class F>
Real bisect(const F& f, Real lo, Real hi, const Real& y, bool inc, const Real& tol, unsigned branch) {
  for (unsigned it = 0; hi - lo > tol; ++it) {
    Real mid = (lo + hi) / 2;
    if (mid <= lo || mid >= hi || it > 4096)
      throw BisectionError("bisection stalled on branch " + std::to_string(branch));
    bool below = f(mid) < y;
    if (below == inc)
      lo = mid;
    else
      hi = mid;
  }
  return (lo + hi) / 2;
}

}  // namespace

CircleInterval CircleInterval::make(const Real& left, const Real& length) {
  if (!(length > 0) || length > 1) throw std::invalid_argument("interval length must be in (0,1]");
  CircleInterval c;
  c.left = reduce_unit(left);
  c.length = length;
  c.wraps = c.left + length > 1;
  return c;
}

bool CircleInterval::contains(const Real& theta) const {
  Real d = reduce_unit(theta - left);
  return d < length;
}

ForbiddenSet::ForbiddenSet(BigInt q) : q_(std::move(q)) {
  if (q_ < 1) throw std::invalid_argument("q must be positive");
}

Real ForbiddenSet::half_width() const {
  Real q = to_real(q_);
  return 1 / (2 * q * bm::sqrt(q));
}

bool ForbiddenSet::contains(const Real& theta) const {
  Real x = 2 * to_real(q_) * theta;
  Real d = bm::abs(x - bm::round(x));
  return d <= 1 / bm::sqrt(to_real(q_));
}

bool ForbiddenSet::covers_circle() const {
  // half width >= 1/(4q)  <=>  q <= 4
  return q_ <= 4;
}

Real ForbiddenSet::measure() const {
  if (covers_circle()) return Real(1);
  return 2 / bm::sqrt(to_real(q_));
}

Psi make_psi(const StageParams& s, const Rational& phase) { return psi_for(s.q, phase); }

Psi make_psi(const StageParams& cur, const StageParams& next, const BigInt& m) {
  return psi_for(cur.q, Rational(m * cur.q, 1) * next.alpha);
}

Real eval_psi(const Psi& p, const Real& theta, unsigned order) {
  require_bits(p);
  Real u = angle(p, theta);
  Real w = 2 * real_pi() * p.qr;
  switch (order) {
    case 0: return p.amp_psi * bm::sin(u);
    case 1: return p.amp_psi * w * bm::cos(u);
    case 2: return -p.amp_psi * w * w * bm::sin(u);
    default: throw std::invalid_argument("derivative order must be 0, 1 or 2");
  }
}

Real eval_sigma(const Psi& p, const Real& theta, unsigned order) {
  require_bits(p);
  Real u = angle(p, theta);
  Real w = 2 * real_pi() * p.qr;
  switch (order) {
    case 0: return p.amp_sigma * bm::cos(u);
    case 1: return -p.amp_sigma * w * bm::sin(u);
    case 2: return -p.amp_sigma * w * w * bm::cos(u);
    default: throw std::invalid_argument("derivative order must be 0, 1 or 2");
  }
}

std::vector<Real> psi_critical_points(const Psi& p, const Real& a, const Real& b) {
  std::vector<Real> out;
  if (p.amp_psi == 0) return out;
  // theta_k = (k + 1/2 - c) / (2q)
  Real c = to_real(p.phase);
  Real two_q = 2 * p.qr;
  Real k0 = bm::ceil(two_q * a - Real(0.5) + c);
  Real k1 = bm::floor(two_q * b - Real(0.5) + c);
  for (Real k = k0; k <= k1; k += 1) out.push_back((k + Real(0.5) - c) / two_q);
  return out;
}

nlohmann::json to_json(const PsiBoundsReport& r) {
  nlohmann::json j;
  j["q"] = to_string(r.q);
  j["grid"] = r.grid;
  j["outside_points"] = r.outside_points;
  if (std::isinf(r.inf_dpsi))
    j["inf_dpsi"] = "inf";
  else
    j["inf_dpsi"] = r.inf_dpsi;
  j["sup_d2psi"] = r.sup_d2psi;
  j["sup_dsigma"] = r.sup_dsigma;
  j["sup_d2sigma"] = r.sup_d2sigma;
  j["sigma1_closed"] = r.sigma1_closed;
  j["sigma2_closed"] = r.sigma2_closed;
  j["bound_dpsi"] = r.bound_dpsi;
  j["bound_d2psi"] = r.bound_d2psi;
  j["dpsi"] = to_string(r.dpsi);
  j["d2psi"] = to_string(r.d2psi);
  j["dsigma"] = to_string(r.dsigma);
  j["d2sigma"] = to_string(r.d2sigma);
  j["premise"] = r.premise;
  j["diagnostic"] = r.diagnostic;
  j["vacuous"] = r.vacuous;
  j["note"] = r.note;
  return j;
}

PsiBoundsReport check_psi_bounds(const StageParams& cur, const StageParams& next, const BigInt& m, unsigned grid) {
  if (grid == 0) throw std::invalid_argument("grid must be positive");
  PsiBoundsReport rep;
  rep.q = cur.q;
  rep.grid = grid;
  Rational delta = mixing_delta(cur, next, m);
  BigInt q8 = bm::pow(cur.q, 8);
  rep.premise = abs(delta) <= Rational(cur.q, next.q) && next.q >= q8;
  rep.diagnostic = !rep.premise;

  Psi p = make_psi(cur, next, m);
  PrecisionScope ps(p.bits);
  ForbiddenSet B(cur.q);
  Real omega = 2 * real_pi() * p.qr;
  double qd = dbl(p.qr);
  rep.bound_dpsi = std::pow(qd, 2.5);
  rep.bound_d2psi = 9 * M_PI * M_PI * qd * qd * qd * qd;
  rep.sigma1_closed = dbl(bm::abs(p.amp_sigma) * omega);
  rep.sigma2_closed = dbl(bm::abs(p.amp_sigma) * omega * omega);

  size_t tiles = std::min<size_t>(grid, 1024);
  struct Acc {
    unsigned outside = 0;
    double inf1 = std::numeric_limits<double>::infinity(), sup2 = 0, s1 = 0, s2 = 0;
  };
  std::vector<Acc> acc(tiles);
  parallel_tiles(tiles, [&](size_t t) {
    Acc a;
    size_t j0 = grid * t / tiles, j1 = grid * (t + 1) / tiles;
    for (size_t j = j0; j < j1; ++j) {
      Real th = (Real(j) + Real(0.5)) / grid;
      Derivs d = derivs(p, th, omega);
      a.s1 = std::max(a.s1, dbl(bm::abs(d.dsigma)));
      a.s2 = std::max(a.s2, dbl(bm::abs(d.d2sigma)));
      if (B.contains(th)) continue;
      ++a.outside;
      a.inf1 = std::min(a.inf1, dbl(bm::abs(d.dpsi)));
      a.sup2 = std::max(a.sup2, dbl(bm::abs(d.d2psi)));
    }
    acc[t] = a;
  });
  rep.inf_dpsi = std::numeric_limits<double>::infinity();
  for (const auto& a : acc) {
    rep.outside_points += a.outside;
    rep.inf_dpsi = std::min(rep.inf_dpsi, a.inf1);
    rep.sup_d2psi = std::max(rep.sup_d2psi, a.sup2);
    rep.sup_dsigma = std::max(rep.sup_dsigma, a.s1);
    rep.sup_d2sigma = std::max(rep.sup_d2sigma, a.s2);
  }
  rep.vacuous = rep.outside_points == 0;
  rep.dpsi = rep.vacuous ? Verdict::Pass : verdict_ge(rep.inf_dpsi, rep.bound_dpsi);
  rep.d2psi = rep.vacuous ? Verdict::Pass : verdict_lt(rep.sup_d2psi, rep.bound_d2psi * (1 + 1e-11));
  rep.dsigma = verdict_lt(std::max(rep.sup_dsigma, rep.sigma1_closed), 1.0);
  rep.d2sigma = verdict_lt(std::max(rep.sup_d2sigma, rep.sigma2_closed), 1.0);
  if (rep.vacuous) rep.note = "no grid point outside B: the forbidden intervals cover the circle";
  if (rep.diagnostic) rep.note += std::string(rep.note.empty() ? "" : "; ") + "premise fails, verdicts non-binding";
  return rep;
}

nlohmann::json to_json(const PartialDecomposition& d, bool with_elements) {
  nlohmann::json j;
  j["q"] = to_string(d.q);
  j["phase"] = to_json(d.phase);
  j["branches_total"] = d.branches_total;
  j["branches_built"] = d.branches_built.size();
  j["intervals"] = d.elements.size();
  j["built_mass"] = str(d.built_mass);
  j["total_mass"] = str(d.total_mass);
  j["mass_stderr"] = d.mass_stderr;
  j["max_length"] = str(d.max_length);
  j["seed"] = d.seed;
  if (with_elements) {
    nlohmann::json es = nlohmann::json::array();
    for (const auto& e : d.elements)
      es.push_back({{"left", str(e.hat.left)}, {"length", str(e.hat.length)}, {"level", e.level}, {"branch", e.branch}});
    j["elements"] = es;
  }
  return j;
}

PartialDecomposition build_partition(const StageParams& cur, const StageParams& next, const BigInt& m,
                                     const PartitionOptions& opt) {
  if (cur.q > 10000000) throw std::invalid_argument("q too large for branch enumeration");
  PartialDecomposition d;
  d.q = cur.q;
  d.seed = opt.seed;
  Psi p = make_psi(cur, next, m);
  d.phase = p.phase;
  PrecisionScope ps(p.bits);
  unsigned nb = 2 * cur.q.convert_to<unsigned>();
  d.branches_total = nb;

  std::vector<unsigned> chosen(nb);
  std::iota(chosen.begin(), chosen.end(), 0u);
  if (opt.branch_sample && *opt.branch_sample < nb) {
    std::mt19937_64 rng(opt.seed);
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(*opt.branch_sample);
    std::sort(chosen.begin(), chosen.end());
  }
  d.branches_built = chosen;

  ForbiddenSet B(cur.q);
  Real w = B.half_width();
  Real two_q = 2 * p.qr;
  Real sup1 = bm::abs(p.amp_psi) * 2 * real_pi() * p.qr;
  int extra = sup1 > 1 ? static_cast<int>(bm::ceil(bm::log2(sup1)).convert_to<long>()) : 0;
  Real tol = pow2(-opt.tol_log2 - extra);
  auto f = [&](const Real& x) { return eval_psi(p, x, 0); };
  double qd = dbl(p.qr), hc = dbl(p.half_phase), ad = dbl(p.amp_psi);
  auto fd = [&](double x) {
    double t = qd * x + hc;
    return ad * std::sin(2 * M_PI * (t - std::floor(t)));
  };
  // coarse bisection in double, confirmed and finished at full precision
  auto solve = [&](const Real& lo, const Real& hi, long long y, bool inc, unsigned branch) {
    double dl = dbl(lo), dh = dbl(hi), yd = double(y);
    while (dh - dl > 0x1p-46) {
      double mid = 0.5 * (dl + dh);
      if ((fd(mid) < yd) == inc)
        dl = mid;
      else
        dh = mid;
    }
    Real a0 = Real(dl) - pow2(-45), b0 = Real(dh) + pow2(-45);
    if (a0 < lo) a0 = lo;
    if (b0 > hi) b0 = hi;
    Real fa = f(a0), fb = f(b0), yr(y);
    bool ok = inc ? (fa <= yr && fb >= yr) : (fa >= yr && fb <= yr);
    return ok ? bisect(f, a0, b0, yr, inc, tol, branch) : bisect(f, lo, hi, yr, inc, tol, branch);
  };

  std::vector<std::vector<PartitionElement>> per(chosen.size());
  std::vector<Real> mass(chosen.size(), Real(0));
  parallel_tiles(chosen.size(), [&](size_t t) {
    unsigned i = chosen[t];
    Real a = Real(i) / two_q + w, b = Real(i + 1) / two_q - w;
    if (!(a < b)) return;
    if (!psi_critical_points(p, a, b).empty())
      throw std::domain_error("psi' vanishes on branch " + std::to_string(i));
    Real ya = f(a), yb = f(b);
    bool inc = yb > ya;
    Real lo = inc ? ya : yb, hi = inc ? yb : ya;
    long long k0 = bm::ceil(lo).convert_to<long long>();
    long long k1 = bm::floor(hi).convert_to<long long>();
    if (k1 - k0 < 1) return;
    std::vector<Real> t_of(k1 - k0 + 1);
    Real left = a, right = b;
    for (long long k = k0; k <= k1; ++k) {
      // preimages move monotonically with k, so the last one brackets the next
      Real x = inc ? solve(left, b, k, true, i) : solve(a, right, k, false, i);
      (inc ? left : right) = x;
      t_of[k - k0] = x;
    }
    std::vector<PartitionElement> es;
    for (long long k = k0; k < k1; ++k) {
      Real x0 = t_of[k - k0], x1 = t_of[k - k0 + 1];
      PartitionElement e;
      e.hat = inc ? CircleInterval::make(x0, x1 - x0) : CircleInterval::make(x1, x0 - x1);
      e.level = k;
      e.branch = i;
      mass[t] += e.hat.length;
      es.push_back(std::move(e));
    }
    if (!inc) std::reverse(es.begin(), es.end());
    per[t] = std::move(es);
  });

  d.built_mass = 0;
  d.max_length = 0;
  for (size_t t = 0; t < per.size(); ++t) {
    d.built_mass += mass[t];
    for (auto& e : per[t]) {
      if (e.hat.length > d.max_length) d.max_length = e.hat.length;
      d.elements.push_back(std::move(e));
    }
  }
  size_t k = chosen.size();
  if (k == nb || k == 0) {
    d.total_mass = d.built_mass;
  } else {
    d.total_mass = d.built_mass * nb / k;
    double mean = dbl(d.built_mass) / k, var = 0;
    for (const auto& mm : mass) var += (dbl(mm) - mean) * (dbl(mm) - mean);
    var /= k > 1 ? k - 1 : 1;
    d.mass_stderr = nb * std::sqrt(var / k) * std::sqrt(1.0 - double(k) / nb);
  }
  return d;
}

nlohmann::json to_json(const PartitionCheck& c) {
  return {{"lengths_ok", c.lengths_ok},     {"disjoint", c.disjoint},
          {"avoids_forbidden", c.avoids_forbidden}, {"images_ok", c.images_ok},
          {"mass_ok", c.mass_ok},           {"mass_bound", c.mass_bound},
          {"worst_image_error", c.worst_image_error}, {"image_samples", c.image_samples}};
}

PartitionCheck check_partition(const PartialDecomposition& d, unsigned image_samples, std::uint64_t seed) {
  PartitionCheck c;
  Psi p = psi_for(d.q, d.phase);
  PrecisionScope ps(p.bits);
  Real q = to_real(d.q);
  Real max_len = 1 / (q * q * bm::sqrt(q));
  ForbiddenSet B(d.q);
  c.lengths_ok = true;
  c.avoids_forbidden = true;
  for (const auto& e : d.elements) {
    if (e.hat.length > max_len) c.lengths_ok = false;
    if (B.contains(e.hat.left) || B.contains(e.hat.right())) c.avoids_forbidden = false;
  }
  std::vector<size_t> order(d.elements.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return d.elements[a].hat.left < d.elements[b].hat.left; });
  c.disjoint = true;
  for (size_t i = 1; i < order.size(); ++i)
    if (d.elements[order[i]].hat.left < d.elements[order[i - 1]].hat.right()) c.disjoint = false;
  if (!order.empty()) {
    const auto& last = d.elements[order.back()].hat;
    if (last.wraps && last.right() - 1 > d.elements[order.front()].hat.left) c.disjoint = false;
  }

  c.images_ok = true;
  if (!d.elements.empty()) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, d.elements.size() - 1);
    unsigned n = std::min<size_t>(image_samples, d.elements.size());
    Real tol = pow2(-kClosureTolLog2);
    for (unsigned i = 0; i < n; ++i) {
      const auto& e = d.elements[n == d.elements.size() ? i : pick(rng)];
      Real diff = bm::abs(eval_psi(p, e.hat.right(), 0) - eval_psi(p, e.hat.left, 0));
      Real err = bm::abs(diff - 1);
      c.worst_image_error = std::max(c.worst_image_error, dbl(err));
      if (err > tol) c.images_ok = false;
    }
    c.image_samples = n;
  }
  Real bound = 1 - 3 / bm::sqrt(q);
  c.mass_bound = dbl(bound);
  c.mass_ok = d.total_mass >= bound;
  return c;
}

SkewMap skew_from_psi(const Psi& p, const Rational& shift) {
  SkewMap f;
  f.bits = p.bits;
  {
    PrecisionScope ps(p.bits);
    f.shift = to_real(frac(shift));
  }
  f.psi = [p](const Real& x) { return eval_psi(p, x, 0); };
  f.critical = [p](const Real& a, const Real& b) { return psi_critical_points(p, a, b); };
  return f;
}

SkewMap skew_from_map(const Map& phi) {
  Program prog = compile(phi);
  Rational shift(0, 1);
  if (prog.size() == 1 && prog[0].op == Step::Op::Rot) shift = prog[0].angle;
  if (prog.empty() || (prog.size() == 1 && prog[0].op == Step::Op::Rot)) {
    SkewMap f;
    f.bits = 128;
    f.shift = to_real(shift);
    f.psi = [](const Real&) { return Real(0); };
    f.critical = [](const Real&, const Real&) { return std::vector<Real>{}; };
    return f;
  }
  if (prog.size() == 3 && prog[0].op == Step::Op::PhiInv && prog[1].op == Step::Op::Rot &&
      prog[2].op == Step::Op::Phi && prog[0].q == prog[2].q) {
    const BigInt& q = prog[0].q;
    return skew_from_psi(psi_for(q, Rational(q, 1) * prog[1].angle), prog[1].angle);
  }
  throw std::invalid_argument("map is not of skew form");
}

SkewMap affine_skew(const Real& slope, const Real& offset, unsigned bits) {
  SkewMap f;
  f.bits = bits;
  f.shift = 0;
  f.psi = [slope, offset](const Real& x) { return slope * x + offset; };
  f.critical = [](const Real&, const Real&) { return std::vector<Real>{}; };
  return f;
}

nlohmann::json to_json(const DistributionReport& r) {
  return {{"gamma", r.gamma},
          {"delta", r.delta},
          {"epsilon", r.epsilon},
          {"interval", r.interval_id},
          {"samples", r.samples},
          {"test_intervals", r.test_intervals},
          {"full_circle", r.full_circle},
          {"note", r.note}};
}

Real preimage_measure(const SkewMap& f, const HorizontalInterval& I, const Real& lo, const Real& len) {
  if (len >= 1) return I.length;
  if (!(len > 0)) return Real(0);
  Real a = I.theta, b = I.theta + I.length;
  std::vector<Real> cuts{a};
  for (auto& c : f.critical(a, b))
    if (c > a && c < b) cuts.push_back(c);
  cuts.push_back(b);
  Real tol = I.length * pow2(-44);
  Real total = 0;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    Real x0 = cuts[i], x1 = cuts[i + 1];
    Real y0 = f.psi(x0), y1 = f.psi(x1);
    if (y0 == y1) {
      if (reduce_unit(I.r + y0 - lo) < len) total += x1 - x0;
      continue;
    }
    bool inc = y1 > y0;
    Real ymin = inc ? y0 : y1, ymax = inc ? y1 : y0;
    if (ymax - ymin > 1e7) throw std::invalid_argument("psi range too large on interval");
    // y in [lo - r + k, lo - r + len + k)
    Real base = lo - I.r;
    Real k = bm::floor(ymin - base - len);
    Real kend = bm::ceil(ymax - base);
    auto inv = [&](const Real& y) -> Real {
      if (y <= ymin) return inc ? x0 : x1;
      if (y >= ymax) return inc ? x1 : x0;
      Real lo_x = x0, hi_x = x1;
      for (int it = 0; hi_x - lo_x > tol && it < 4096; ++it) {
        Real mid = (lo_x + hi_x) / 2;
        if (mid <= lo_x || mid >= hi_x) break;
        if ((f.psi(mid) < y) == inc)
          lo_x = mid;
        else
          hi_x = mid;
      }
      return (lo_x + hi_x) / 2;
    };
    for (; k <= kend; k += 1) {
      Real s = base + k, e = base + k + len;
      Real s1 = s > ymin ? s : ymin, e1 = e < ymax ? e : ymax;
      if (!(e1 > s1)) continue;
      total += bm::abs(inv(e1) - inv(s1));
    }
  }
  return total;
}

DistributionReport distribution_report(const SkewMap& f, const HorizontalInterval& I, unsigned r_bins,
                                       unsigned theta_samples, const std::string& id) {
  if (r_bins == 0 || theta_samples < 2) throw std::invalid_argument("need r_bins >= 1 and theta_samples >= 2");
  if (!(I.length > 0) || I.length > 1) throw std::invalid_argument("interval length must be in (0,1]");
  PrecisionScope ps(std::max(f.bits, current_bits()));
  DistributionReport rep;
  rep.interval_id = id;
  rep.samples = theta_samples;
  rep.gamma = dbl(I.length);
  Real a = I.theta, b = I.theta + I.length;
  Real ymin = f.psi(a), ymax = ymin;
  auto see = [&](const Real& x) {
    Real y = f.psi(x);
    if (y < ymin) ymin = y;
    if (y > ymax) ymax = y;
  };
  for (unsigned j = 1; j < theta_samples; ++j) see(a + I.length * j / (theta_samples - 1));
  for (auto& c : f.critical(a, b))
    if (c > a && c < b) see(c);
  Real range = ymax - ymin;
  Real jbase, jlen;
  if (range >= 1 - pow2(-kClosureTolLog2)) {
    rep.full_circle = true;
    jbase = 0;
    jlen = 1;
    rep.delta = 0;
  } else {
    jbase = reduce_unit(I.r + ymin);
    jlen = range;
    rep.delta = dbl(1 - range);
  }
  rep.note = "epsilon over dyadic subintervals of J; general intervals within factor 2";
  if (jlen == 0) {
    rep.note = "image is a single circle; epsilon undefined, reported 0";
    return rep;
  }
  double eps = 0;
  unsigned count = 0;
  for (unsigned parts = 1; parts <= r_bins; parts *= 2) {
    for (unsigned j = 0; j < parts; ++j) {
      Real lo = jbase + jlen * j / parts, len = jlen / parts;
      Real ratio = preimage_measure(f, I, reduce_unit(lo), len) / I.length;
      double pr = 1.0 / parts;
      eps = std::max(eps, std::abs(dbl(ratio) - pr) / pr);
      ++count;
    }
    if (parts > r_bins / 2) break;
  }
  rep.epsilon = eps;
  rep.test_intervals = count;
  return rep;
}

DistributionReport distribution_report(const Map& phi, const HorizontalInterval& I, unsigned r_bins,
                                       unsigned theta_samples, const std::string& id) {
  return distribution_report(skew_from_map(phi), I, r_bins, theta_samples, id);
}

MonteCarloCheck monte_carlo_measure(const SkewMap& f, const HorizontalInterval& I, const Real& lo, const Real& len,
                                    unsigned points, std::uint64_t seed) {
  if (points == 0) throw std::invalid_argument("points must be positive");
  PrecisionScope ps(std::max(f.bits, current_bits()));
  MonteCarloCheck mc;
  mc.points = points;
  mc.exact = dbl(preimage_measure(f, I, lo, len) / I.length);
  size_t tiles = std::min<size_t>(64, points);
  std::vector<unsigned> hits(tiles, 0);
  parallel_tiles(tiles, [&](size_t t) {
    std::seed_seq ss{seed, static_cast<std::uint64_t>(t)};
    std::mt19937_64 rng(ss);
    std::uniform_real_distribution<double> u(0, 1);
    size_t n0 = points * t / tiles, n1 = points * (t + 1) / tiles;
    unsigned h = 0;
    for (size_t i = n0; i < n1; ++i) {
      Real th = I.theta + I.length * Real(u(rng));
      if (reduce_unit(I.r + f.psi(th) - lo) < len) ++h;
    }
    hits[t] = h;
  });
  unsigned h = std::accumulate(hits.begin(), hits.end(), 0u);
  mc.estimate = double(h) / points;
  mc.stderr_ = std::max(std::sqrt(mc.exact * (1 - mc.exact) / points), 1.0 / points);
  mc.z = (mc.estimate - mc.exact) / mc.stderr_;
  return mc;
}

MonteCarloAgreement monte_carlo_agreement(const SkewMap& f, const HorizontalInterval& I, const Real& lo,
                                          const Real& len, unsigned points, std::uint64_t seed, double limit) {
  MonteCarloAgreement a;
  a.first = monte_carlo_measure(f, I, lo, len, points, seed);
  a.agrees = std::abs(a.first.z) <= limit;
  if (!a.agrees) {
    a.redraw = monte_carlo_measure(f, I, lo, len, points, ~seed);
    a.agrees = std::abs(a.redraw->z) <= limit;
  }
  return a;
}

namespace {
nlohmann::json mc_json(const MonteCarloCheck& m) {
  return {{"exact", m.exact}, {"estimate", m.estimate}, {"stderr", m.stderr_}, {"z", m.z}, {"points", m.points}};
}
}  // namespace

nlohmann::json to_json(const MonteCarloAgreement& a) {
  nlohmann::json j{{"first", mc_json(a.first)}, {"agrees", a.agrees}};
  j["redraw"] = a.redraw ? mc_json(*a.redraw) : nlohmann::json(nullptr);
  return j;
}

DistributionSample sample_distribution(const StageChain& chain, unsigned n, const DistributionSampleOptions& opt) {
  if (n < 1 || n >= chain.size()) throw std::invalid_argument("stage has no successor");
  if (opt.elements == 0 || opt.mc_points == 0) throw std::invalid_argument("empty sample");
  const auto& cur = chain[n - 1];
  const auto& next = chain[n];
  DistributionSample s;
  s.stage = n;
  s.m = find_mixing_index(cur, next).m;
  PartitionOptions po;
  po.seed = opt.seed;
  if (opt.branches > 0 && opt.branches < 2 * cur.q) po.branch_sample = opt.branches;
  s.partition = build_partition(cur, next, s.m, po);
  if (s.partition.elements.empty()) throw std::domain_error("partition is empty");
  SkewMap skew = skew_from_map(stretch_map(cur, frac(Rational(s.m, 1) * next.alpha)));
  PrecisionScope ps(skew.bits);

  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<size_t> pick(0, s.partition.elements.size() - 1);
  std::uniform_real_distribution<double> ur(0, 1);
  std::uniform_int_distribution<int> level(1, 6);
  for (unsigned i = 0; i < opt.elements; ++i) {
    SampledElement row;
    row.element = s.partition.elements[pick(rng)];
    row.r = Real(ur(rng));
    HorizontalInterval I{row.element.hat.left, row.element.hat.length, row.r};
    std::string id = "b" + std::to_string(row.element.branch) + "k" + std::to_string(row.element.level);
    row.report = distribution_report(skew, I, opt.r_bins, opt.theta_samples, id);
    unsigned parts = 1u << level(rng);
    unsigned j = std::uniform_int_distribution<unsigned>(0, parts - 1)(rng);
    row.lo = Real(j) / parts;
    row.len = Real(1) / parts;
    row.mc = monte_carlo_agreement(skew, I, row.lo, row.len, opt.mc_points, opt.seed * 1000003 + i);
    s.epsilon_max = std::max(s.epsilon_max, row.report.epsilon);
    s.gamma_max = std::max(s.gamma_max, row.report.gamma);
    s.delta_max = std::max(s.delta_max, row.report.delta);
    s.mc_abs_z_max = std::max(s.mc_abs_z_max, std::abs(row.mc.first.z));
    if (row.mc.redraw) ++s.mc_redraws;
    if (!row.mc.agrees) ++s.mc_disagreements;
    s.rows.push_back(std::move(row));
  }
  double q = dbl(Real(cur.q));
  s.epsilon_bound = 9 * M_PI * M_PI / q;
  s.gamma_bound = 1 / (n * q);
  s.mc_points = opt.mc_points;
  bool ok = s.epsilon_max <= s.epsilon_bound && s.gamma_max <= s.gamma_bound && s.delta_max == 0 &&
            s.mc_disagreements == 0;
  s.verdict = ok ? Verdict::Pass : Verdict::Fail;
  return s;
}

nlohmann::json to_json(const DistributionSample& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : s.rows) {
    nlohmann::json j = to_json(r.report);
    j["r"] = format_real(r.r, 20);
    j["mc"] = to_json(r.mc);
    j["mc"]["lo"] = format_real(r.lo, 20);
    j["mc"]["len"] = format_real(r.len, 20);
    rows.push_back(j);
  }
  nlohmann::json m = s.m <= std::numeric_limits<long long>::max() ? nlohmann::json(s.m.convert_to<long long>())
                                                                   : nlohmann::json(s.m.str());
  return {{"stage", s.stage},
          {"m", m},
          {"elements", rows},
          {"element_count", s.rows.size()},
          {"partition", to_json(s.partition, false)},
          {"epsilon_max", s.epsilon_max},
          {"epsilon_bound", s.epsilon_bound},
          {"gamma_max", s.gamma_max},
          {"gamma_bound", s.gamma_bound},
          {"delta_max", s.delta_max},
          {"mc_points", s.mc_points},
          {"mc_abs_z_max", s.mc_abs_z_max},
          {"mc_redraws", s.mc_redraws},
          {"mc_disagreements", s.mc_disagreements}};
}

void write_distribution_csv(std::ostream& os, const DistributionSample& s) {
  os << "element,left,length,r,gamma,delta,epsilon,mc_lo,mc_len,mc_exact,mc_estimate,mc_z,mc_redraw_z,mc_agrees\n";
  os << std::setprecision(17);
  for (const auto& r : s.rows) {
    const auto& mc = r.mc;
    os << r.report.interval_id << ',' << format_real(r.element.hat.left, 20) << ','
       << format_real(r.element.hat.length, 20) << ',' << format_real(r.r, 20) << ',' << r.report.gamma << ','
       << r.report.delta << ',' << r.report.epsilon << ',' << format_real(r.lo, 20) << ',' << format_real(r.len, 20)
       << ',' << mc.first.exact << ',' << mc.first.estimate << ',' << mc.first.z << ',';
    if (mc.redraw) os << mc.redraw->z;
    os << ',' << (mc.agrees ? 1 : 0) << '\n';
  }
}

nlohmann::json to_json(const StretchReport& r) {
  return {{"sup_d2", r.sup_d2},         {"inf_d1", r.inf_d1},         {"length", r.length},
          {"epsilon", r.epsilon},       {"premise", r.premise},       {"worst", r.worst},
          {"conclusion", r.conclusion}, {"counterexample", r.counterexample}, {"trials", r.trials}};
}

namespace {

double invert1(const Fn1& psi, double a, double b, double y) {
  double fa = psi.f(a), fb = psi.f(b);
  bool inc = fb > fa;
  if (inc ? y <= fa : y >= fa) return a;
  if (inc ? y >= fb : y <= fb) return b;
  double lo = a, hi = b;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if ((psi.f(mid) < y) == inc)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Discrepancy stretch_discrepancy(const Fn1& psi, double a, double b, double jlo, double jhi) {
  Discrepancy d;
  double fa = psi.f(a), fb = psi.f(b);
  double lj = std::abs(fb - fa);
  d.ratio = std::abs(invert1(psi, a, b, jhi) - invert1(psi, a, b, jlo)) / (b - a);
  d.p = (jhi - jlo) / lj;
  return d;
}

StretchReport uniform_stretch_check(const Fn1& psi, double a, double b, double epsilon, unsigned trials,
                                    std::uint64_t seed, unsigned samples) {
  if (!(b > a) || samples < 2) throw std::invalid_argument("need a < b and samples >= 2");
  StretchReport r;
  r.length = b - a;
  r.epsilon = epsilon;
  r.inf_d1 = std::numeric_limits<double>::infinity();
  int sign = 0;
  for (unsigned i = 0; i < samples; ++i) {
    double x = a + (b - a) * i / (samples - 1);
    double d1 = psi.d1(x);
    int s = d1 > 0 ? 1 : (d1 < 0 ? -1 : 0);
    if (s == 0 || (sign != 0 && s != sign)) throw std::invalid_argument("psi is not strictly monotone on I");
    sign = s;
    r.inf_d1 = std::min(r.inf_d1, std::abs(d1));
    r.sup_d2 = std::max(r.sup_d2, std::abs(psi.d2(x)));
  }
  r.premise = r.sup_d2 * r.length <= epsilon * r.inf_d1 * (1 + 1e-12);
  double fa = psi.f(a), fb = psi.f(b);
  double jlo = std::min(fa, fb), jhi = std::max(fa, fb);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(jlo, jhi);
  for (unsigned t = 0; t < trials; ++t) {
    double x = u(rng), y = u(rng);
    if (x > y) std::swap(x, y);
    if (!(y > x)) continue;
    Discrepancy d = stretch_discrepancy(psi, a, b, x, y);
    r.worst = std::max(r.worst, d.abs() / d.p);
    ++r.trials;
  }
  r.conclusion = r.worst <= epsilon * (1 + 1e-9) + 1e-9;
  r.counterexample = r.premise && !r.conclusion;
  return r;
}

double cesaro_mixing_estimate(const Map& T, const Rect& A, const Rect& B, unsigned N, unsigned grid,
                              std::optional<std::uint64_t> seed) {
  if (N < 1) throw std::invalid_argument("N must be at least 1");
  if (grid == 0) throw std::invalid_argument("grid must be positive");
  PrecisionScope ps(required_precision(T, 53));
  Kernel<Real> k(compile(T));
  size_t M = size_t(grid) * grid;
  std::vector<double> ts(M), rs(M);
  if (seed) {
    std::mt19937_64 rng(*seed);
    std::uniform_real_distribution<double> u(0, 1);
    for (size_t i = 0; i < M; ++i) {
      ts[i] = A.t0 + (A.t1 - A.t0) * u(rng);
      rs[i] = A.r0 + (A.r1 - A.r0) * u(rng);
    }
  } else {
    for (size_t i = 0; i < M; ++i) {
      ts[i] = A.t0 + (A.t1 - A.t0) * ((i / grid) + 0.5) / grid;
      rs[i] = A.r0 + (A.r1 - A.r0) * ((i % grid) + 0.5) / grid;
    }
  }
  size_t tiles = std::min<size_t>(M, 256);
  std::vector<std::vector<unsigned>> counts(tiles, std::vector<unsigned>(N, 0));
  parallel_tiles(tiles, [&](size_t t) {
    size_t i0 = M * t / tiles, i1 = M * (t + 1) / tiles;
    for (size_t i = i0; i < i1; ++i) {
      Real th(ts[i]), r(rs[i]);
      for (unsigned n = 0; n < N; ++n) {
        k.apply(th, r);
        if (B.contains(dbl(th), dbl(r))) ++counts[t][n];
      }
    }
  });
  double mu_a = A.measure(), target = mu_a * B.measure(), sum = 0;
  for (unsigned n = 0; n < N; ++n) {
    unsigned c = 0;
    for (size_t t = 0; t < tiles; ++t) c += counts[t][n];
    sum += std::abs(mu_a * c / M - target);
  }
  return sum / N;
}

std::string render_pgm(const Map& phi, const HorizontalInterval& I, unsigned width, unsigned height,
                       unsigned samples) {
  if (width == 0 || height == 0) throw std::invalid_argument("image size must be positive");
  PrecisionScope ps(required_precision(phi, 53));
  Kernel<Real> k(compile(phi));
  std::string img(size_t(width) * height, '\0');
  for (unsigned j = 0; j < samples; ++j) {
    Real th = I.theta + I.length * (Real(j) + Real(0.5)) / samples, r = I.r;
    k.apply(th, r);
    long x = std::min<long>(width - 1, static_cast<long>(dbl(th) * width));
    long y = std::min<long>(height - 1, static_cast<long>((1 - dbl(r)) * height));
    img[size_t(y) * width + x] = char(255);
  }
  return "P5 " + std::to_string(width) + " " + std::to_string(height) + " 255\n" + img;
}

}  // namespace aklab
