#include "aklab/logmag.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace aklab {

namespace {

constexpr long kLowerBelow = 1L << 39;   // d >= 1 with v below this is lowered
constexpr long kLiftExp = 1L << 40;      // plain v with binary exponent above this is lifted
constexpr long kExpFits = 1L << 61;      // exp(v) representable for v below this

mpfr_rnd_t rm(Round r) { return r == Round::Down ? MPFR_RNDD : MPFR_RNDU; }

mpfr_ptr raw(Real& x) { return x.backend().data(); }
mpfr_srcptr raw(const Real& x) { return x.backend().data(); }

Real fresh() {
  init_mpfr_range();
  Real x;
  mpfr_set_prec(raw(x), current_bits());
  return x;
}

bool huge_plain(const Real& v) {
  return mpfr_sgn(raw(v)) > 0 && mpfr_regular_p(raw(v)) && mpfr_get_exp(raw(v)) > kLiftExp;
}

Lix normalize(Lix x, Round r) {
  for (;;) {
    if (x.d >= 1 && mpfr_cmp_si(raw(x.v), kLowerBelow) < 0) {
      Real t = fresh();
      mpfr_exp(raw(t), raw(x.v), rm(r));
      x.v = t;
      --x.d;
    } else if (huge_plain(x.v)) {
      Real t = fresh();
      mpfr_log(raw(t), raw(x.v), rm(r));
      x.v = t;
      ++x.d;
    } else {
      return x;
    }
  }
}

// try to write a d == 1 value as a plain real
bool lower_to_plain(const Lix& x, Round r, Real& out) {
  if (x.d == 0) {
    out = x.v;
    return true;
  }
  if (x.d == 1 && mpfr_cmp_si(raw(x.v), kExpFits) < 0) {
    out = fresh();
    mpfr_exp(raw(out), raw(x.v), rm(r));
    return true;
  }
  return false;
}

// lift a positive value one level, rounding the new index in direction r.
// false when the value is not > 1 at a tower level (cannot be lifted).
bool lift(Lix& x, Round r) {
  if (x.d == 0) {
    if (mpfr_sgn(raw(x.v)) <= 0) return false;
  } else if (mpfr_sgn(raw(x.v)) <= 0) {
    return false;
  }
  Real t = fresh();
  mpfr_log(raw(t), raw(x.v), rm(r));
  x.v = t;
  ++x.d;
  return true;
}

// certified comparison; strict selects > instead of >=
bool certified(const Lix& a0, const Lix& b0, bool strict) {
  Lix a = a0, b = b0;
  for (;;) {
    if (a.d == b.d) {
      int c = mpfr_cmp(raw(a.v), raw(b.v));
      return strict ? c > 0 : c >= 0;
    }
    if (a.d < b.d) {
      if (!lift(a, Round::Up)) return false;  // a <= 1 or non-positive, b tower > 1
    } else {
      if (!lift(b, Round::Down)) return true;
    }
  }
}

// approximate ordering used only to pick the dominant summand
bool approx_ge(const Lix& a0, const Lix& b0) {
  Lix a = a0, b = b0;
  for (;;) {
    if (a.d == b.d) return mpfr_cmp(raw(a.v), raw(b.v)) >= 0;
    if (a.d < b.d) {
      if (!lift(a, Round::Down)) return false;
    } else {
      if (!lift(b, Round::Down)) return true;
    }
  }
}

const Real& tiny_bound() {
  static thread_local Real t;
  static thread_local unsigned bits = 0;
  if (bits != current_bits()) {
    t = fresh();
    mpfr_set_ui_2exp(raw(t), 1, -kLiftExp, MPFR_RNDU);
    bits = current_bits();
  }
  return t;
}

// r ~ small / big for a tower big that cannot be lowered to plain, rounded in dir
Real ratio(const Lix& small, const Lix& big, Round dir, bool ordered) {
  Real out = fresh();
  Lix lb = lix_log(big, dir);
  if (small.d == 0) {
    int s = mpfr_sgn(raw(small.v));
    if (s == 0) {
      mpfr_set_zero(raw(out), 1);
      return out;
    }
    Real lbp;
    if (lower_to_plain(lb, flip(dir), lbp) && lb.d == 0) {
      // small * exp(-ln big)
      Real e = fresh();
      Real neg = -lbp;
      Round er = (s > 0) ? dir : flip(dir);
      mpfr_exp(raw(e), raw(neg), rm(er));
      mpfr_mul(raw(out), raw(small.v), raw(e), rm(dir));
      return out;
    }
    if (dir == Round::Down) {
      if (s > 0) mpfr_set_zero(raw(out), 1);
      else mpfr_neg(raw(out), raw(tiny_bound()), MPFR_RNDD);
    } else {
      if (s < 0) mpfr_set_zero(raw(out), 1);
      else mpfr_set(raw(out), raw(tiny_bound()), MPFR_RNDU);
    }
    return out;
  }
  Lix ls = lix_log(small, dir);
  Lix lbb = lix_log(big, flip(dir));
  Real lsp, lbq;
  if (ls.d == 0 && lbb.d == 0) {
    Real diff = fresh();
    mpfr_sub(raw(diff), raw(ls.v), raw(lbb.v), rm(dir));
    mpfr_exp(raw(out), raw(diff), rm(dir));
    return out;
  }
  if (dir == Round::Down) mpfr_set_zero(raw(out), 1);
  else mpfr_set_ui(raw(out), ordered ? 1 : 2, MPFR_RNDU);
  return out;
}

}  // namespace

Lix Lix::plain(const Real& x) {
  Lix l;
  l.d = 0;
  l.v = x;
  return normalize(l, Round::Down);
}

Lix Lix::from_int(const BigInt& x, Round r) {
  Lix l;
  l.v = fresh();
  mpfr_set_z(raw(l.v), x.backend().data(), rm(r));
  return normalize(l, r);
}

Lix Lix::from_rational(const Rational& x, Round r) {
  Lix l;
  l.v = fresh();
  mpq_t q;
  mpq_init(q);
  mpz_set(mpq_numref(q), x.num.backend().data());
  mpz_set(mpq_denref(q), x.den.backend().data());
  mpfr_set_q(raw(l.v), q, rm(r));
  mpq_clear(q);
  return normalize(l, r);
}

Lix Lix::pi(Round r) {
  Lix l;
  l.v = fresh();
  mpfr_const_pi(raw(l.v), rm(r));
  return l;
}

bool Lix::positive() const { return d >= 1 || mpfr_sgn(raw(v)) > 0; }

double Lix::to_double() const {
  if (d == 0) return mpfr_get_d(raw(v), MPFR_RNDN);
  Real p;
  if (lower_to_plain(*this, Round::Down, p)) return mpfr_get_d(raw(p), MPFR_RNDN);
  return std::numeric_limits<double>::infinity();
}

std::string Lix::str(int digits) const {
  std::string s = format_real(v, digits);
  if (d == 0) return s;
  return "exp^" + std::to_string(d) + "(" + s + ")";
}

std::string SignedLix::str(int digits) const { return (neg ? "-" : "") + mag.str(digits); }

Lix lix_exp(const Lix& a, Round r) {
  if (a.d >= 1) {
    Lix out = a;
    ++out.d;
    return normalize(out, r);
  }
  if (mpfr_cmp_si(raw(a.v), kLowerBelow) < 0) {
    Lix out;
    out.v = fresh();
    mpfr_exp(raw(out.v), raw(a.v), rm(r));
    return normalize(out, r);
  }
  Lix out = a;
  out.d = 1;
  return normalize(out, r);
}

Lix lix_log(const Lix& a, Round r) {
  if (a.d >= 1) {
    Lix out = a;
    --out.d;
    return out;
  }
  if (mpfr_sgn(raw(a.v)) <= 0) throw std::domain_error("log of non-positive value");
  Lix out;
  out.v = fresh();
  mpfr_log(raw(out.v), raw(a.v), rm(r));
  return out;
}

Lix lix_add(const Lix& a, const Lix& b, Round r) {
  Real pa, pb;
  bool la = lower_to_plain(a, r, pa);
  bool lb = lower_to_plain(b, r, pb);
  if (la && lb) {
    Lix out;
    out.v = fresh();
    mpfr_add(raw(out.v), raw(pa), raw(pb), rm(r));
    return normalize(out, r);
  }
  bool a_big = approx_ge(a, b);
  const Lix& big = a_big ? a : b;
  const Lix& small = a_big ? b : a;
  bool ordered = lix_ge(big, small);
  Real rt = ratio(small, big, r, ordered);
  if (mpfr_zero_p(raw(rt))) return big;
  Lix l1;
  l1.v = fresh();
  mpfr_log1p(raw(l1.v), raw(rt), rm(r));
  Lix t = lix_add(lix_log(big, r), l1, r);
  return lix_exp(t, r);
}

Lix lix_mul(const Lix& a, const Lix& b, Round r) {
  if (a.d == 0 && b.d == 0) {
    Lix out;
    out.v = fresh();
    mpfr_mul(raw(out.v), raw(a.v), raw(b.v), rm(r));
    return normalize(out, r);
  }
  if (!a.positive() || !b.positive()) throw std::domain_error("tower product with non-positive factor");
  return lix_exp(lix_add(lix_log(a, r), lix_log(b, r), r), r);
}

Lix lix_pow(const Lix& a, const Lix& e, Round r) {
  if (!a.positive()) throw std::domain_error("power of non-positive base");
  Lix la = lix_log(a, r);
  if (!la.positive() && e.d >= 1) throw std::domain_error("tower power of base below one");
  if (la.d == 0 && e.d == 0 && mpfr_sgn(raw(la.v)) < 0) {
    // la < 0: product rounds opposite to |la| magnitude, mpfr handles via rm(r)
    Lix prod;
    prod.v = fresh();
    mpfr_mul(raw(prod.v), raw(la.v), raw(e.v), rm(r));
    return lix_exp(prod, r);
  }
  return lix_exp(lix_mul(la, e, r), r);
}

bool lix_ge(const Lix& a, const Lix& b) { return certified(a, b, false); }
bool lix_gt(const Lix& a, const Lix& b) { return certified(a, b, true); }

SignedLix lix_sub(const Lix& a, const Lix& b, Round r) {
  Real pa, pb;
  if (lower_to_plain(a, r, pa) && lower_to_plain(b, flip(r), pb)) {
    SignedLix out;
    Real t = fresh();
    mpfr_sub(raw(t), raw(pa), raw(pb), rm(r));
    out.neg = mpfr_sgn(raw(t)) < 0;
    if (out.neg) mpfr_neg(raw(t), raw(t), MPFR_RNDN);
    out.mag = normalize(Lix{0, t}, r);
    return out;
  }
  bool a_big = approx_ge(a, b);
  if (a_big) {
    // a - b = a (1 - b/a)
    Real rt = ratio(b, a, flip(r), lix_ge(a, b));
    Real one_minus = fresh();
    Real negr = -rt;
    if (mpfr_cmp_si(raw(negr), -1) <= 0) {
      if (r == Round::Down) {
        SignedLix out;
        out.neg = true;
        out.mag = b;
        return out;
      }
      SignedLix out;
      out.mag = a;
      return out;
    }
    mpfr_log1p(raw(one_minus), raw(negr), rm(r));
    Lix l1;
    l1.v = one_minus;
    SignedLix out;
    out.mag = lix_exp(lix_add(lix_log(a, r), l1, r), r);
    return out;
  }
  SignedLix m = lix_sub(b, a, flip(r));
  m.neg = !m.neg;
  return m;
}

LogMagnitude LogMagnitude::from_int(const BigInt& x) {
  return {Lix::from_int(x, Round::Down), Lix::from_int(x, Round::Up)};
}

LogMagnitude LogMagnitude::from_rational(const Rational& x) {
  return {Lix::from_rational(x, Round::Down), Lix::from_rational(x, Round::Up)};
}

LogMagnitude LogMagnitude::from_double(double x) {
  Real v = fresh();
  mpfr_set_d(raw(v), x, MPFR_RNDN);
  return {Lix::plain(v), Lix::plain(v)};
}

LogMagnitude LogMagnitude::from_log(const Real& log_lo, const Real& log_hi) {
  Lix a, b;
  a.v = fresh();
  b.v = fresh();
  mpfr_set(raw(a.v), raw(log_lo), MPFR_RNDD);
  mpfr_set(raw(b.v), raw(log_hi), MPFR_RNDU);
  return {lix_exp(a, Round::Down), lix_exp(b, Round::Up)};
}

LogMagnitude LogMagnitude::pi() { return {Lix::pi(Round::Down), Lix::pi(Round::Up)}; }

LogMagnitude operator+(const LogMagnitude& a, const LogMagnitude& b) {
  return {lix_add(a.lo, b.lo, Round::Down), lix_add(a.hi, b.hi, Round::Up)};
}

LogMagnitude operator*(const LogMagnitude& a, const LogMagnitude& b) {
  if (!a.lo.positive() || !b.lo.positive())
    throw std::domain_error("LogMagnitude product needs positive factors");
  return {lix_mul(a.lo, b.lo, Round::Down), lix_mul(a.hi, b.hi, Round::Up)};
}

LogMagnitude pow(const LogMagnitude& a, const LogMagnitude& e) {
  // monotone increasing in both arguments when base >= 1 and e >= 0
  bool base_ge_one = lix_ge(a.lo, Lix::from_int(1, Round::Up));
  if (base_ge_one) return {lix_pow(a.lo, e.lo, Round::Down), lix_pow(a.hi, e.hi, Round::Up)};
  bool base_le_one = lix_ge(Lix::from_int(1, Round::Down), a.hi);
  if (base_le_one) return {lix_pow(a.lo, e.hi, Round::Down), lix_pow(a.hi, e.lo, Round::Up)};
  Lix l1 = lix_pow(a.lo, e.hi, Round::Down), l2 = lix_pow(a.lo, e.lo, Round::Down);
  Lix h1 = lix_pow(a.hi, e.hi, Round::Up), h2 = lix_pow(a.hi, e.lo, Round::Up);
  return {lix_ge(l1, l2) ? l2 : l1, lix_ge(h1, h2) ? h1 : h2};
}

LogMagnitude pow(const LogMagnitude& a, long e) {
  return pow(a, LogMagnitude::from_int(BigInt(e)));
}

LogMagnitude exp(const LogMagnitude& a) {
  return {lix_exp(a.lo, Round::Down), lix_exp(a.hi, Round::Up)};
}

LogMagnitude hull(const LogMagnitude& a, const LogMagnitude& b) {
  return {lix_ge(a.lo, b.lo) ? b.lo : a.lo, lix_ge(a.hi, b.hi) ? a.hi : b.hi};
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    default: return "UNKNOWN";
  }
}

Verdict compare_ge(const LogMagnitude& lhs, const LogMagnitude& rhs) {
  if (lix_ge(lhs.lo, rhs.hi)) return Verdict::Pass;
  if (lix_gt(rhs.lo, lhs.hi)) return Verdict::Fail;
  return Verdict::Unknown;
}

Verdict compare_gt(const LogMagnitude& lhs, const LogMagnitude& rhs) {
  if (lix_gt(lhs.lo, rhs.hi)) return Verdict::Pass;
  if (lix_ge(rhs.lo, lhs.hi)) return Verdict::Fail;
  return Verdict::Unknown;
}

std::pair<SignedLix, SignedLix> log_margin(const LogMagnitude& lhs, const LogMagnitude& rhs) {
  return {lix_sub(lhs.log_lo(), rhs.log_hi(), Round::Down),
          lix_sub(lhs.log_hi(), rhs.log_lo(), Round::Up)};
}

}  // namespace aklab
