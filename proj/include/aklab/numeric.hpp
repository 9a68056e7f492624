#pragma once

#include <boost/multiprecision/gmp.hpp>
#include <boost/multiprecision/mpfr.hpp>

#include <string>

namespace aklab {

using BigInt = boost::multiprecision::mpz_int;
using Real = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<0>,
                                           boost::multiprecision::et_off>;

// Exact fraction. Never reduced implicitly.
struct Rational {
  BigInt num{0};
  BigInt den{1};

  Rational() = default;
  Rational(BigInt n, BigInt d);
  static Rational integer(const BigInt& n) { return Rational(n, 1); }

  Rational reduced() const;
  bool is_integer() const;
  std::string str() const;  // "num/den" as stored

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a) { return Rational(-a.num, a.den); }
};

int compare(const Rational& a, const Rational& b);
inline bool operator==(const Rational& a, const Rational& b) { return compare(a, b) == 0; }
inline bool operator<(const Rational& a, const Rational& b) { return compare(a, b) < 0; }
inline bool operator<=(const Rational& a, const Rational& b) { return compare(a, b) <= 0; }
inline bool operator>(const Rational& a, const Rational& b) { return compare(a, b) > 0; }
inline bool operator>=(const Rational& a, const Rational& b) { return compare(a, b) >= 0; }

Rational abs(const Rational& a);
BigInt floor_div(const BigInt& a, const BigInt& b);
BigInt floor_mod(const BigInt& a, const BigInt& b);
// a mod 1 in [0,1), reduced.
Rational frac(const Rational& a);
Rational parse_rational(const std::string& s);
// "a/b", integers, and decimals such as 0.05 or 1e-3, exactly
Rational parse_number(const std::string& s);
BigInt parse_bigint(const std::string& s);
std::string to_string(const BigInt& v);
double to_double(const Rational& a);

// Working precision for Real. Boost's variable-precision mpfr numbers take the
// global default at construction, so this guard sets it for the scope.
class PrecisionScope {
 public:
  explicit PrecisionScope(unsigned bits);
  ~PrecisionScope();
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  unsigned saved_;
};

unsigned digits10_for_bits(unsigned bits);
unsigned current_bits();
void init_mpfr_range();

Real real_pi();
Real to_real(const BigInt& v);
Real to_real(const Rational& r);
// nearest-integer reduction of x into (-1/2, 1/2]
Real reduce_half(const Real& x);
Real reduce_unit(const Real& x);
std::string format_real(const Real& x, int digits = 20);

}  // namespace aklab
