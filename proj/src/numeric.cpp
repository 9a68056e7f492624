#include "aklab/numeric.hpp"

#include <gmp.h>
#include <mpfr.h>

#include <cmath>
#include <stdexcept>

namespace aklab {

Rational::Rational(BigInt n, BigInt d) : num(std::move(n)), den(std::move(d)) {
  if (den == 0) throw std::invalid_argument("zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
}

Rational Rational::reduced() const {
  BigInt g = boost::multiprecision::gcd(num, den);
  if (g == 0) return *this;
  return Rational(num / g, den / g);
}

bool Rational::is_integer() const { return num % den == 0; }

std::string Rational::str() const { return to_string(num) + "/" + to_string(den); }

Rational operator+(const Rational& a, const Rational& b) {
  if (a.den == b.den) return Rational(a.num + b.num, a.den);
  return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
}

Rational operator-(const Rational& a, const Rational& b) {
  if (a.den == b.den) return Rational(a.num - b.num, a.den);
  return Rational(a.num * b.den - b.num * a.den, a.den * b.den);
}

Rational operator*(const Rational& a, const Rational& b) {
  return Rational(a.num * b.num, a.den * b.den);
}

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num == 0) throw std::domain_error("division by zero rational");
  return Rational(a.num * b.den, a.den * b.num);
}

int compare(const Rational& a, const Rational& b) {
  BigInt l = a.num * b.den;
  BigInt r = b.num * a.den;
  return l < r ? -1 : (l > r ? 1 : 0);
}

Rational abs(const Rational& a) { return Rational(a.num < 0 ? BigInt(-a.num) : a.num, a.den); }

BigInt floor_div(const BigInt& a, const BigInt& b) {
  BigInt q;
  mpz_fdiv_q(q.backend().data(), a.backend().data(), b.backend().data());
  return q;
}

BigInt floor_mod(const BigInt& a, const BigInt& b) {
  BigInt r;
  mpz_fdiv_r(r.backend().data(), a.backend().data(), b.backend().data());
  return r;
}

Rational frac(const Rational& a) {
  Rational r = a.reduced();
  return Rational(floor_mod(r.num, r.den), r.den);
}

BigInt parse_bigint(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty integer");
  size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) throw std::invalid_argument("bad integer: " + s);
  for (size_t k = i; k < s.size(); ++k)
    if (s[k] < '0' || s[k] > '9') throw std::invalid_argument("bad integer: " + s);
  return BigInt(s);
}

Rational parse_rational(const std::string& s) {
  auto slash = s.find('/');
  if (slash == std::string::npos) return Rational::integer(parse_bigint(s));
  return Rational(parse_bigint(s.substr(0, slash)), parse_bigint(s.substr(slash + 1)));
}

Rational parse_number(const std::string& s) {
  if (s.find('/') != std::string::npos) return parse_rational(s);
  std::string t = s;
  long exp10 = 0;
  auto e = t.find_first_of("eE");
  if (e != std::string::npos) {
    std::string ex = t.substr(e + 1);
    if (ex.empty() || ex.find_first_not_of("+-0123456789") != std::string::npos)
      throw std::invalid_argument("bad number: " + s);
    exp10 = std::stol(ex);
    t = t.substr(0, e);
  }
  auto dot = t.find('.');
  if (dot != std::string::npos) {
    exp10 -= static_cast<long>(t.size() - dot - 1);
    t.erase(dot, 1);
  }
  if (t.empty() || t == "-" || t == "+") throw std::invalid_argument("bad number: " + s);
  BigInt n = parse_bigint(t);
  BigInt ten = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(exp10 < 0 ? -exp10 : exp10));
  return exp10 < 0 ? Rational(n, ten).reduced() : Rational(n * ten, 1);
}

std::string to_string(const BigInt& v) { return v.str(); }

double to_double(const Rational& a) {
  mpq_t q;
  mpq_init(q);
  mpz_set(mpq_numref(q), a.num.backend().data());
  mpz_set(mpq_denref(q), a.den.backend().data());
  double d = mpq_get_d(q);
  mpq_clear(q);
  return d;
}

unsigned digits10_for_bits(unsigned bits) {
  return static_cast<unsigned>(std::ceil(bits * 0.30102999566398120)) + 1;
}

void init_mpfr_range() {
  static thread_local const bool once = [] {
    mpfr_set_emax(mpfr_get_emax_max());
    mpfr_set_emin(mpfr_get_emin_min());
    return true;
  }();
  (void)once;
}

namespace {
unsigned& bits_slot() {
  static unsigned bits = 128;
  return bits;
}
}  // namespace

unsigned current_bits() { return bits_slot(); }

PrecisionScope::PrecisionScope(unsigned bits) : saved_(bits_slot()) {
  init_mpfr_range();
  bits_slot() = bits;
  Real::default_precision(digits10_for_bits(bits));
}

PrecisionScope::~PrecisionScope() {
  bits_slot() = saved_;
  Real::default_precision(digits10_for_bits(saved_));
}

Real real_pi() {
  Real p;
  mpfr_const_pi(p.backend().data(), MPFR_RNDN);
  return p;
}

Real to_real(const BigInt& v) {
  Real r;
  mpfr_set_z(r.backend().data(), v.backend().data(), MPFR_RNDN);
  return r;
}

Real to_real(const Rational& q) {
  Real n = to_real(q.num);
  Real d = to_real(q.den);
  return n / d;
}

Real reduce_half(const Real& x) {
  Real r = x - boost::multiprecision::floor(x);
  if (r > 0.5) r -= 1;
  return r;
}

Real reduce_unit(const Real& x) {
  Real r = x - boost::multiprecision::floor(x);
  if (r >= 1) r -= 1;
  return r;
}

std::string format_real(const Real& x, int digits) {
  return x.str(digits, std::ios_base::scientific);
}

}  // namespace aklab
