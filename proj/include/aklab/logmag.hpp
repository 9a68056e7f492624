#pragma once

#include "aklab/numeric.hpp"

#include <mpfr.h>

#include <string>

namespace aklab {

enum class Round { Down, Up };

inline Round flip(Round r) { return r == Round::Down ? Round::Up : Round::Down; }

// Level-index scalar: value = exp^d(v). d = 0 is a plain (signed) real; d >= 1
// is always positive. Lets double and triple exponentials be carried without
// overflow.
struct Lix {
  int d = 0;
  Real v;

  static Lix plain(const Real& x);
  static Lix from_int(const BigInt& x, Round r);
  static Lix from_rational(const Rational& x, Round r);
  static Lix pi(Round r);

  bool positive() const;
  bool is_plain() const { return d == 0; }
  double to_double() const;  // +inf when not representable
  std::string str(int digits = 17) const;
};

Lix lix_exp(const Lix& a, Round r);
Lix lix_log(const Lix& a, Round r);
Lix lix_add(const Lix& a, const Lix& b, Round r);
Lix lix_mul(const Lix& a, const Lix& b, Round r);
Lix lix_pow(const Lix& a, const Lix& e, Round r);
// certified a >= b / a > b
bool lix_ge(const Lix& a, const Lix& b);
bool lix_gt(const Lix& a, const Lix& b);

struct SignedLix {
  bool neg = false;
  Lix mag;
  std::string str(int digits = 17) const;
};
SignedLix lix_sub(const Lix& a, const Lix& b, Round r);

// Outward-rounded enclosure of a quantity X; lo rounded down, hi rounded up.
// The natural-log bounds come from log_lo()/log_hi().
class LogMagnitude {
 public:
  Lix lo, hi;

  LogMagnitude() = default;
  LogMagnitude(Lix l, Lix h) : lo(std::move(l)), hi(std::move(h)) {}

  static LogMagnitude from_int(const BigInt& x);
  static LogMagnitude from_rational(const Rational& x);
  static LogMagnitude from_double(double x);
  static LogMagnitude from_log(const Real& log_lo, const Real& log_hi);
  static LogMagnitude pi();

  Lix log_lo() const { return lix_log(lo, Round::Down); }
  Lix log_hi() const { return lix_log(hi, Round::Up); }
  LogMagnitude log() const { return {log_lo(), log_hi()}; }
  bool valid() const { return lix_ge(hi, lo); }
};

LogMagnitude operator+(const LogMagnitude& a, const LogMagnitude& b);
LogMagnitude operator*(const LogMagnitude& a, const LogMagnitude& b);
LogMagnitude pow(const LogMagnitude& a, const LogMagnitude& e);
LogMagnitude pow(const LogMagnitude& a, long e);
LogMagnitude exp(const LogMagnitude& a);
LogMagnitude hull(const LogMagnitude& a, const LogMagnitude& b);

enum class Verdict { Pass, Fail, Unknown };
std::string to_string(Verdict v);
// lhs >= rhs
Verdict compare_ge(const LogMagnitude& lhs, const LogMagnitude& rhs);
// lhs > rhs
Verdict compare_gt(const LogMagnitude& lhs, const LogMagnitude& rhs);
// [log lhs - log rhs] outward
std::pair<SignedLix, SignedLix> log_margin(const LogMagnitude& lhs, const LogMagnitude& rhs);

}  // namespace aklab
