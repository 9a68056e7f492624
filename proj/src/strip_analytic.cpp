#include "aklab/strip_analytic.hpp"

#include <algorithm>
#include <cmath>

namespace aklab {

namespace {

using LM = LogMagnitude;

LM lm(const BigInt& v) { return LM::from_int(v); }
LM lm(long v) { return LM::from_int(BigInt(v)); }

nlohmann::json lm_json(const LM& x) { return {{"lo", x.lo.str()}, {"hi", x.hi.str()}}; }

LM lm_real(const Real& x) { return {Lix::plain(x), Lix::plain(x)}; }

bool is_zero(const LM& x) { return x.hi.is_plain() && x.hi.v == 0; }

// product that allows a zero factor
LM mul0(const LM& a, const LM& b) { return is_zero(a) || is_zero(b) ? lm(0) : a * b; }

Complex reduce_re(Complex z) {
  double re = z.real() - std::floor(z.real());
  if (re > 0.5) re -= 1;
  return {re, z.imag()};
}

unsigned axis_samples(double freq, const StripSpec& spec) {
  double n = std::ceil(spec.samples_per_period * std::max(freq, 1.0));
  n = std::clamp(n, double(spec.min_samples), double(spec.max_samples));
  return static_cast<unsigned>(n);
}

// sup of fn over real grid N x N at each pair of imaginary levels
template <class Fn>
StripNorm grid_sup(unsigned N, const std::vector<std::pair<double, double>>& levels, Fn fn) {
  std::vector<double> best(N, 0.0);
  std::vector<char> bad(N, 0);
  parallel_tiles(N, [&](size_t i) {
    double m = 0;
    for (unsigned j = 0; j < N; ++j)
      for (const auto& [yt, yr] : levels) {
        double v = fn(Complex(double(i) / N, yt), Complex(double(j) / N, yr));
        if (!std::isfinite(v)) bad[i] = 1;
        m = std::max(m, v);
      }
    best[i] = m;
  });
  StripNorm out;
  out.samples = N * N * static_cast<unsigned>(levels.size());
  out.finite = std::none_of(bad.begin(), bad.end(), [](char c) { return c != 0; });
  out.value = out.finite ? *std::max_element(best.begin(), best.end()) : HUGE_VAL;
  return out;
}

std::vector<std::pair<double, double>> faces(double rho) {
  return {{rho, rho}, {rho, -rho}, {-rho, rho}, {-rho, -rho}};
}

double program_frequency(const Program& p) {
  double qmax = 0, smax = 0;
  for (const auto& s : p) {
    if (s.op == Step::Op::Phi || s.op == Step::Op::PhiInv) qmax = std::max(qmax, s.q.convert_to<double>());
    if (s.op == Step::Op::G || s.op == Step::Op::GInv) smax = std::max(smax, s.s.convert_to<double>());
  }
  return qmax * (1 + smax);
}

}  // namespace

StripFunction StripFunction::constant(Complex c) { return trig({TrigTerm{c, 0, 0}}); }

StripFunction StripFunction::trig(std::vector<TrigTerm> terms) {
  StripFunction f;
  f.kind_ = Kind::Trig;
  f.terms_ = std::move(terms);
  return f;
}

StripFunction StripFunction::cos2pi(int a, int b, double amp) {
  return trig({TrigTerm{amp / 2, a, b}, TrigTerm{amp / 2, -a, -b}});
}

StripFunction StripFunction::affine(Complex c0, Complex c_theta, Complex c_r) {
  StripFunction f;
  f.kind_ = Kind::Affine;
  f.c0_ = c0;
  f.ct_ = c_theta;
  f.cr_ = c_r;
  return f;
}

StripFunction StripFunction::displacement(const Map& m, int component) {
  if (component != 0 && component != 1) throw std::invalid_argument("component must be 0 or 1");
  StripFunction f;
  f.kind_ = Kind::Displacement;
  f.map_ = m;
  f.component_ = component;
  f.kernel_ = std::make_shared<const Kernel<Complex>>(compile(m));
  return f;
}

StripFunction StripFunction::from_json(const nlohmann::json& j) {
  const std::string t = j.at("type").get<std::string>();
  auto cx = [](const nlohmann::json& v) {
    if (v.is_array()) return Complex(v.at(0).get<double>(), v.at(1).get<double>());
    return Complex(v.get<double>(), 0.0);
  };
  if (t == "constant") return constant(cx(j.at("value")));
  if (t == "cos") return cos2pi(j.at("a").get<int>(), j.at("b").get<int>(), j.value("amp", 1.0));
  if (t == "trig") {
    std::vector<TrigTerm> ts;
    for (const auto& e : j.at("terms")) ts.push_back({cx(e.at("coef")), e.at("a").get<int>(), e.at("b").get<int>()});
    return trig(std::move(ts));
  }
  if (t == "affine") return affine(cx(j.at("c0")), cx(j.at("c_theta")), cx(j.at("c_r")));
  if (t == "displacement") return displacement(map_from_json(j.at("map")), j.at("component").get<int>());
  throw std::invalid_argument("not a strip function: " + t);
}

Complex StripFunction::eval(Complex theta, Complex r) const {
  switch (kind_) {
    case Kind::Trig: {
      Complex s = 0;
      const Complex i2pi(0, 2 * M_PI);
      for (const auto& t : terms_) s += t.coef * std::exp(i2pi * (double(t.a) * theta + double(t.b) * r));
      return s;
    }
    case Kind::Affine: return c0_ + ct_ * theta + cr_ * r;
    case Kind::Displacement: {
      Complex a = theta, b = r;
      kernel_->apply(a, b);
      return reduce_re(component_ == 0 ? a - theta : b - r);
    }
  }
  return 0;
}

double StripFunction::frequency() const {
  switch (kind_) {
    case Kind::Trig: {
      double f = 0;
      for (const auto& t : terms_) f = std::max({f, std::abs(double(t.a)), std::abs(double(t.b))});
      return f;
    }
    case Kind::Affine: return 0;
    case Kind::Displacement: return program_frequency(compile(map_));
  }
  return 0;
}

StripNorm strip_sup_norm(const StripFunction& f, const StripSpec& spec) {
  if (!(spec.rho >= 0)) throw std::invalid_argument("strip width must be non-negative");
  unsigned N = axis_samples(f.frequency(), spec);
  return grid_sup(N, faces(spec.rho), [&](Complex t, Complex r) { return std::abs(f.eval(t, r)); });
}

StripNorm strip_interior_sup(const StripFunction& f, const StripSpec& spec, unsigned levels) {
  std::vector<std::pair<double, double>> ls;
  for (unsigned a = 0; a < levels; ++a)
    for (unsigned b = 0; b < levels; ++b) {
      double ya = levels == 1 ? 0 : -spec.rho + 2 * spec.rho * a / (levels - 1);
      double yb = levels == 1 ? 0 : -spec.rho + 2 * spec.rho * b / (levels - 1);
      ls.emplace_back(ya, yb);
    }
  unsigned N = axis_samples(f.frequency(), spec);
  return grid_sup(N, ls, [&](Complex t, Complex r) { return std::abs(f.eval(t, r)); });
}

StripNorm strip_displacement_norm(const Map& m, const StripSpec& spec) {
  StripNorm a = strip_sup_norm(StripFunction::displacement(m, 0), spec);
  StripNorm b = strip_sup_norm(StripFunction::displacement(m, 1), spec);
  StripNorm out;
  out.samples = a.samples + b.samples;
  out.finite = a.finite && b.finite;
  out.value = std::max(a.value, b.value);
  return out;
}

nlohmann::json to_json(const StripBoundReport& r) {
  nlohmann::json j{{"name", r.name},
                   {"stage", r.stage},
                   {"measured", r.measured},
                   {"bound", lm_json(r.bound)},
                   {"verdict", to_string(r.verdict)}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

std::vector<StripBoundReport> check_hn_inverse_strip_bound(const StageParams& s, double rho, const StripSpec& spec) {
  StripSpec sp = spec;
  sp.rho = rho;
  Map inv = inverse_map(h_map(s));
  StripNorm c1 = strip_sup_norm(StripFunction::displacement(inv, 0), sp);
  StripNorm c2 = strip_sup_norm(StripFunction::displacement(inv, 1), sp);
  PrecisionScope ps(256);
  BigInt sh = shear(s);
  LM r = LM::from_double(rho);
  std::vector<StripBoundReport> out;

  StripBoundReport a;
  a.name = "h_inverse_strip";
  a.stage = s.n;
  a.measured = std::max(c1.value, c2.value);
  a.bound = lm(2) * lm(BigInt(s.q * s.q)) * exp(mul0(lm(2) * LM::pi() * lm(s.q) * lm(BigInt(1 + sh)), r));
  a.verdict = c1.finite && c2.finite ? compare_ge(a.bound, LM::from_double(a.measured)) : Verdict::Unknown;
  if (!(c1.finite && c2.finite)) a.note = "sampling overflowed";
  out.push_back(a);

  StripBoundReport b;
  b.name = "h_inverse_first_coordinate";
  b.stage = s.n;
  b.measured = c1.value;
  Real root = boost::multiprecision::sqrt(1 + Real(rho) * Real(rho));
  b.bound = lm(sh) * lm_real(root);
  b.verdict = c1.finite ? compare_ge(b.bound, LM::from_double(b.measured)) : Verdict::Unknown;
  out.push_back(b);
  return out;
}

RhoChain rho_recursion(const StageChain& chain, const Rational& rho, const StripSpec& spec) {
  if (rho <= Rational(0, 1)) throw std::invalid_argument("rho must be positive");
  RhoChain c;
  c.rho = rho;
  {
    PrecisionScope ps(256);
    c.rho_tilde.push_back(LM::from_rational(rho) + lm(1));
    c.rho_bound.push_back(LM::from_rational(rho));
  }
  c.rho_measured.push_back(to_double(rho));
  c.plus_one.push_back(Verdict::Pass);
  for (const auto& s : chain) {
    unsigned n = s.n;
    std::optional<double> measured;
    // imaginary parts entering cos(2 pi q_n .) stay below rho + rho_{n-1}
    double prev = c.rho_measured.back() ? *c.rho_measured.back() : HUGE_VAL;
    double growth = 2 * M_PI * s.q.convert_to<double>() * (1 + shear(s).convert_to<double>()) *
                    (to_double(rho) + (n == 1 ? 0.0 : prev));
    if (n <= 2 && growth < 600) {
      StripSpec sp = spec;
      sp.rho = to_double(rho);
      StripNorm v = strip_displacement_norm(inverse_map(conjugacy_map(chain, n)), sp);
      if (v.finite) measured = v.value;
    }
    PrecisionScope ps(256);
    LM factor = lm(2) * LM::pi() * lm(s.q) * lm(BigInt(1 + shear(s)));
    LM amp = lm(2) * lm(BigInt(s.q * s.q));
    c.rho_tilde.push_back(amp * exp(mul0(factor, c.rho_tilde.back())));
    c.rho_bound.push_back(amp * exp(mul0(factor, c.rho_bound.back())));
    c.rho_measured.push_back(measured);
    LM rn = measured ? LM::from_double(*measured) : c.rho_bound.back();
    c.plus_one.push_back(compare_ge(c.rho_tilde.back(), rn + lm(1)));
  }
  return c;
}

nlohmann::json to_json(const RhoChain& c) {
  nlohmann::json j{{"rho", to_json(c.rho)}, {"stages", nlohmann::json::array()}};
  for (size_t n = 0; n < c.rho_tilde.size(); ++n) {
    nlohmann::json e{{"n", n}, {"rho_tilde", lm_json(c.rho_tilde[n])}, {"rho_bound", lm_json(c.rho_bound[n])}};
    e["rho_measured"] = c.rho_measured[n] ? nlohmann::json(*c.rho_measured[n]) : nlohmann::json(nullptr);
    if (n > 0) e["plus_one"] = to_string(c.plus_one[n]);
    j["stages"].push_back(e);
  }
  return j;
}

LogMagnitude dh_strip_norm(const StageParams& s, const LogMagnitude& rho, bool* sampled) {
  PrecisionScope ps(256);
  BigInt sh = shear(s);
  LM two_pi_q = lm(2) * LM::pi() * lm(s.q);
  LM b = mul0(two_pi_q, rho);
  double bd = b.hi.to_double();
  if (std::isfinite(bd) && bd <= 1e12) {
    // partials 1 - s c sin, s, -c sin, 1 with c = 2 pi q^3, at im = rho
    Real y = 2 * real_pi() * to_real(s.q);
    Real bb = y * Real(rho.hi.v);
    if (!rho.hi.is_plain()) bb = Real(bd);
    Real c = y * to_real(BigInt(s.q * s.q));
    Real c1 = c * to_real(sh);
    Real ch = boost::multiprecision::cosh(bb), shh = boost::multiprecision::sinh(bb);
    Real best = to_real(sh);
    if (best < 1) best = 1;
    const int K = 128;
    for (int k = 0; k < K; ++k) {
      Real a = 2 * real_pi() * k / K;
      Real sa = boost::multiprecision::sin(a), ca = boost::multiprecision::cos(a);
      Real e11 = boost::multiprecision::hypot(1 - c1 * sa * ch, c1 * ca * shh);
      Real e21 = c * boost::multiprecision::hypot(sa * ch, ca * shh);
      if (e11 > best) best = e11;
      if (e21 > best) best = e21;
    }
    if (sampled) *sampled = true;
    return lm_real(best);
  }
  if (sampled) *sampled = false;
  return lm(1) + lm(sh) * lm(2) * LM::pi() * pow(lm(s.q), 3) * exp(b);
}

LogMagnitude dh_strip_bound(const StageParams& s, const LogMagnitude& rho) {
  PrecisionScope ps(256);
  LM q = lm(s.q);
  return lm(4L * s.n) * LM::pi() * pow(q, LM::from_rational(Rational(3, 1) + s.sigma)) *
         exp(mul0(lm(2) * LM::pi() * q, rho));
}

StripData make_strip_data(const StageChain& chain, const Rational& rho, const StripSpec& spec) {
  RhoChain rc = rho_recursion(chain, rho, spec);
  StripData d;
  bool any_bound = false;
  for (size_t n = 0; n < rc.rho_tilde.size(); ++n) d.rho_tilde[n] = rc.rho_tilde[n];
  for (const auto& s : chain) {
    PrecisionScope ps(256);
    LM rk = rc.rho_measured[s.n] ? LM::from_double(*rc.rho_measured[s.n]) : rc.rho_bound[s.n];
    bool sampled = false;
    d.dh[s.n] = dh_strip_norm(s, rk + lm(1), &sampled);
    any_bound = any_bound || !rc.rho_measured[s.n] || !sampled;
  }
  d.source = any_bound ? "strip sampling with carried upper bounds" : "strip sampling";
  return d;
}

nlohmann::json to_json(const TmReport& r) {
  return {{"measured", r.measured},
          {"bound", lm_json(r.bound)},
          {"verdict", to_string(r.verdict)},
          {"in_regime", r.in_regime}};
}

TmReport tm_bound_check(const StageParams& cur, const StageParams& next, const BigInt& m, double s,
                        unsigned samples_per_period) {
  TmReport rep;
  rep.in_regime = m <= cur.q;
  double q = cur.q.convert_to<double>();
  double phase = to_double(frac(Rational(m, 1) * next.alpha));
  unsigned N = static_cast<unsigned>(std::max(256.0, samples_per_period * q));
  double best = 0;
  for (double y : {s, -s})
    for (unsigned j = 0; j < N; ++j) {
      Complex z(double(j) / N, y);
      Complex w = std::cos(2 * M_PI * q * (z + phase)) - std::cos(2 * M_PI * q * z);
      best = std::max(best, std::abs(w));
    }
  rep.measured = best;
  PrecisionScope ps(256);
  Rational diff = abs(next.alpha - cur.alpha);
  rep.bound = mul0(lm(2) * exp(mul0(lm(2) * LM::pi() * lm(cur.q), LM::from_double(s))) * LM::pi() * lm(cur.q),
                   mul0(lm(m), LM::from_rational(diff)));
  rep.verdict = compare_ge(rep.bound, LM::from_double(best));
  return rep;
}

nlohmann::json to_json(const ProximityReport& r) {
  nlohmann::json j{{"n", r.n},
                   {"m", to_string(r.m)},
                   {"inner", lm_json(r.inner)},
                   {"inner_sampled", r.inner_sampled},
                   {"premise_scaled", lm_json(r.premise_scaled)},
                   {"premise", to_string(r.premise)},
                   {"propagated", lm_json(r.propagated)},
                   {"conclusion", to_string(r.conclusion)},
                   {"dh", nlohmann::json::array()},
                   {"links", nlohmann::json::array()}};
  for (const auto& d : r.dh) j["dh"].push_back(lm_json(d));
  for (const auto& l : r.links)
    j["links"].push_back(
        {{"k", l.k}, {"lhs", lm_json(l.lhs)}, {"scaled", lm_json(l.scaled)}, {"verdict", to_string(l.verdict)}});
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

ProximityReport analytic_step_proximity(const StageChain& chain, unsigned n, const BigInt& m, const Rational& rho,
                                        const StripSpec& spec) {
  if (n < 1 || n > 2) throw std::invalid_argument("step proximity is evaluated for n <= 2");
  if (chain.size() < n + 1) throw std::invalid_argument("chain must reach stage n+1");
  if (m < 0) throw std::invalid_argument("m must be non-negative");
  StageChain head(chain.begin(), chain.begin() + n);
  RhoChain rc = rho_recursion(head, rho, spec);
  const StageParams& cur = chain[n - 1];
  const StageParams& nxt = chain[n];

  ProximityReport rep;
  rep.n = n;
  rep.m = m;

  std::optional<double> strip = rc.rho_measured[n - 1];
  Rational da = abs(nxt.alpha - cur.alpha);
  double growth = strip ? 2 * M_PI * cur.q.convert_to<double>() * (1 + shear(cur).convert_to<double>()) * *strip
                        : HUGE_VAL;
  if (growth < 600) {
    Map h = h_map(cur);
    Kernel<Complex> ka(compile(compose_maps({h, rotation_map(Rational(m, 1) * nxt.alpha), inverse_map(h)})));
    Kernel<Complex> kb(compile(rotation_map(Rational(m, 1) * cur.alpha)));
    Program pa = compile(h);
    StripSpec sp = spec;
    sp.rho = *strip;
    unsigned N = axis_samples(program_frequency(pa), sp);
    StripNorm v = grid_sup(N, faces(*strip), [&](Complex t, Complex r) {
      Complex a = t, b = r, c = t, d = r;
      ka.apply(a, b);
      kb.apply(c, d);
      return std::max(std::abs(reduce_re(a - c)), std::abs(reduce_re(b - d)));
    });
    if (v.finite) {
      PrecisionScope ps(256);
      rep.inner = LM::from_double(v.value);
      rep.inner_sampled = true;
    }
  }
  PrecisionScope ps(256);
  LM rho_prev = strip ? LM::from_double(*strip) : rc.rho_bound[n - 1];
  if (!rep.inner_sampled) {
    BigInt sh = shear(cur);
    LM q = lm(cur.q);
    LM mda = mul0(lm(m), LM::from_rational(da));
    LM tm = mul0(lm(2) * exp(lm(2) * LM::pi() * q * lm(BigInt(1 + sh)) * rho_prev) * LM::pi() * q, mda);
    rep.inner = mda + mul0(lm(sh) * q * q, tm);
    rep.note = "inner difference from the closed-form bound";
  }

  LM prod = lm(1);
  for (unsigned k = 1; k < n; ++k) {
    LM rk = rc.rho_measured[k] ? LM::from_double(*rc.rho_measured[k]) : rc.rho_bound[k];
    rep.dh.push_back(dh_strip_norm(chain[k - 1], rk + lm(1)));
    prod = prod * rep.dh.back();
  }
  LM two_n = lm(BigInt(1) << n);
  rep.premise_scaled = mul0(rep.inner, two_n * prod);
  rep.premise = compare_gt(lm(1), rep.premise_scaled);

  LM x = rep.inner;
  for (unsigned k = n - 1; k >= 1; --k) {
    ProximityLink l;
    l.k = k;
    l.lhs = mul0(rep.dh[k - 1], x);
    LM before = lm(1);
    for (unsigned j = 1; j < k; ++j) before = before * rep.dh[j - 1];
    l.scaled = mul0(l.lhs, two_n * before);
    l.verdict = compare_gt(lm(1), l.scaled);
    rep.links.push_back(l);
    x = l.lhs;
  }
  rep.propagated = mul0(rep.inner, prod);
  rep.conclusion = compare_gt(lm(1), mul0(rep.propagated, two_n));
  return rep;
}

}  // namespace aklab
