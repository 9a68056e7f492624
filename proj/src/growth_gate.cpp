#include "aklab/growth_gate.hpp"

#include <gmp.h>
#include <mpfr.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace aklab {

namespace {

using LM = LogMagnitude;

LM lm(long v) { return LM::from_int(BigInt(v)); }
LM lm(const BigInt& v) { return LM::from_int(v); }
LM lmq(const Rational& v) { return LM::from_rational(v); }

BigInt factorial(unsigned long n) {
  BigInt r;
  mpz_fac_ui(r.backend().data(), n);
  return r;
}

BigInt ipow(const BigInt& b, unsigned long e) { return boost::multiprecision::pow(b, e); }

double log10_big(const BigInt& v) {
  if (v <= 0) return -std::numeric_limits<double>::infinity();
  long e;
  double m = mpz_get_d_2exp(&e, v.backend().data());
  return std::log10(m) + e * std::log10(2.0);
}

ConditionReport missing(const std::string& id, unsigned stage, const std::string& what) {
  ConditionReport r;
  r.condition = id;
  r.stage = stage;
  r.verdict = Verdict::Unknown;
  r.note = "missing " + what;
  return r;
}

void set_margin(ConditionReport& r, const LM& lhs, const LM& rhs) {
  auto m = log_margin(lhs, rhs);
  r.margin_lo = m.first;
  r.margin_hi = m.second;
}

// lhs >= rhs evaluated lazily so that UNKNOWN can be retried at higher precision
template <class F>
ConditionReport log_check(const std::string& id, unsigned stage, const GateOptions& opt, F make,
                          const std::string& note = "") {
  unsigned bits = opt.bits;
  for (;;) {
    PrecisionScope ps(bits);
    auto [lhs, rhs] = make();
    Verdict v = compare_ge(lhs, rhs);
    if (v != Verdict::Unknown || !opt.refine || bits * 2 > opt.max_bits) {
      ConditionReport r;
      r.condition = id;
      r.stage = stage;
      r.verdict = v;
      r.note = note;
      set_margin(r, lhs, rhs);
      return r;
    }
    bits *= 2;
  }
}

void pi_dyadic(unsigned bits, BigInt& mlo, long& elo, BigInt& mhi, long& ehi) {
  mpfr_t p;
  mpfr_init2(p, bits);
  mpfr_const_pi(p, MPFR_RNDD);
  elo = mpfr_get_z_2exp(mlo.backend().data(), p);
  mpfr_const_pi(p, MPFR_RNDU);
  ehi = mpfr_get_z_2exp(mhi.backend().data(), p);
  mpfr_clear(p);
}

void check_increasing(const Sequence& seq) {
  if (seq.size() < 2) throw std::invalid_argument("sequence needs at least two entries");
  PrecisionScope ps(256);
  for (size_t i = 1; i < seq.size(); ++i) {
    auto a = seq[i - 1].materialize(1e5);
    auto b = seq[i].materialize(1e5);
    if (a && b) {
      if (*b <= *a) throw std::invalid_argument("sequence is not strictly increasing");
      continue;
    }
    if (compare_gt(seq[i].mag(), seq[i - 1].mag()) == Verdict::Fail)
      throw std::invalid_argument("sequence is not strictly increasing");
  }
}

std::string factor_note(unsigned n) {
  return n == 1 ? "phi1(1) carries the fractional exponent 2/3 on 3!" : "";
}

}  // namespace

SeqEntry SeqEntry::exact(const BigInt& v) {
  SeqEntry e;
  e.kind = Kind::Exact;
  e.value = v;
  return e;
}

SeqEntry SeqEntry::power(std::vector<BigInt> parts) {
  if (parts.empty()) throw std::invalid_argument("empty tower");
  if (parts.size() == 1) return exact(parts[0]);
  SeqEntry e;
  e.kind = Kind::Tower;
  e.tower = std::move(parts);
  return e;
}

SeqEntry SeqEntry::magnitude(const LogMagnitude& m) {
  SeqEntry e;
  e.kind = Kind::Log;
  e.log = m;
  return e;
}

SeqEntry SeqEntry::parse(const std::string& s) {
  std::vector<BigInt> parts;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, '^')) {
    BigInt v = parse_bigint(tok);
    if (v < 1) throw std::invalid_argument("sequence entries must be positive: " + s);
    parts.push_back(v);
  }
  return power(parts);
}

LogMagnitude SeqEntry::mag() const {
  switch (kind) {
    case Kind::Exact: return lm(value);
    case Kind::Tower: {
      LM m = lm(tower.back());
      for (size_t i = tower.size() - 1; i-- > 0;) m = pow(lm(tower[i]), m);
      return m;
    }
    default: return log;
  }
}

std::optional<BigInt> SeqEntry::materialize(double max_digits) const {
  if (kind == Kind::Exact) {
    if (log10_big(value) > max_digits) return std::nullopt;
    return value;
  }
  if (kind == Kind::Log) return std::nullopt;
  BigInt m = tower.back();
  for (size_t i = tower.size() - 1; i-- > 0;) {
    double digits = log10_big(tower[i]) * m.convert_to<double>();
    if (!(digits <= max_digits)) return std::nullopt;
    m = ipow(tower[i], m.convert_to<unsigned long>());
  }
  return m;
}

double SeqEntry::log10_estimate() const {
  if (kind == Kind::Exact) return log10_big(value);
  if (kind == Kind::Tower) {
    double m = tower.back().convert_to<double>();
    for (size_t i = tower.size() - 1; i-- > 0;) m = log10_big(tower[i]) * m;
    return m;
  }
  PrecisionScope ps(128);
  return lix_log(log.hi, Round::Up).to_double() / std::log(10.0);
}

std::string SeqEntry::str() const {
  if (kind == Kind::Exact) return to_string(value);
  if (kind == Kind::Tower) {
    std::string s;
    for (size_t i = 0; i < tower.size(); ++i) s += (i ? "^" : "") + to_string(tower[i]);
    return s;
  }
  return "[" + log.lo.str() + ", " + log.hi.str() + "]";
}

Sequence parse_sequence(const std::string& csv) {
  Sequence out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) throw std::invalid_argument("empty sequence entry");
    out.push_back(SeqEntry::parse(tok));
  }
  return out;
}

nlohmann::json to_json(const ConditionReport& r) {
  nlohmann::json j;
  j["condition"] = r.condition;
  j["stage"] = r.stage;
  j["verdict"] = to_string(r.verdict);
  bool has = !r.note.starts_with("missing");
  j["log_margin_lo"] = has ? nlohmann::json(r.margin_lo.str()) : nlohmann::json(nullptr);
  j["log_margin_hi"] = has ? nlohmann::json(r.margin_hi.str()) : nlohmann::json(nullptr);
  j["exact"] = r.exact;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

Verdict overall(const std::vector<ConditionReport>& rs) {
  Verdict v = Verdict::Pass;
  for (const auto& r : rs) {
    if (r.verdict == Verdict::Fail) return Verdict::Fail;
    if (r.verdict == Verdict::Unknown) v = Verdict::Unknown;
  }
  return v;
}

LogMagnitude eval_phi1(unsigned n) {
  if (n < 1) throw std::invalid_argument("phi1 needs n >= 1");
  LM a = lm(ipow(BigInt(2), n) * factorial(n + 1));
  LM e1 = n >= 2 ? lm(ipow(BigInt(n + 2), n - 2) * (n + 1)) : lmq(Rational(2, 3));
  LM f = pow(lm(factorial(n + 2)), e1);
  BigInt e2 = BigInt(n + 2) * ipow(BigInt(n + 1), n + 1);
  LM base = lm(2 * static_cast<long>(n)) * LM::pi();
  return a * f * pow(base, lm(e2));
}

namespace {

// Exact decision of B >= phi1(n) A^E. The rational exponent e1 is cleared by
// raising both sides to its denominator d; pi^(e2 d) is bracketed by dyadics.
std::optional<ConditionReport> smooth_theorem_exact(unsigned n, const BigInt& A, const BigInt& B) {
  unsigned long d = n == 1 ? 3 : 1;
  BigInt e1d = n == 1 ? BigInt(2) : ipow(BigInt(n + 2), n - 2) * (n + 1);
  BigInt e2 = BigInt(n + 2) * ipow(BigInt(n + 1), n + 1);
  BigInt E = 2 * (e2 + 1);
  BigInt k = e2 * d;
  double zdigits = d * log10_big(ipow(BigInt(2), n) * factorial(n + 1)) +
                   e1d.convert_to<double>() * log10_big(factorial(n + 2)) +
                   k.convert_to<double>() * (std::log10(2.0 * n) + 0.5) +
                   (E * d).convert_to<double>() * log10_big(A);
  if (zdigits > 4e6 || d * log10_big(B) > 4e6) return std::nullopt;
  unsigned long ku = k.convert_to<unsigned long>();
  BigInt Z = ipow(ipow(BigInt(2), n) * factorial(n + 1), d) *
             ipow(factorial(n + 2), e1d.convert_to<unsigned long>()) * ipow(BigInt(2 * n), ku) *
             ipow(A, (E * d).convert_to<unsigned long>());
  BigInt Bd = ipow(B, d);
  for (unsigned bits = 256; bits <= 8192; bits *= 2) {
    BigInt mlo, mhi;
    long elo, ehi;
    pi_dyadic(bits, mlo, elo, mhi, ehi);
    // pi^k in [mlo^k 2^(elo k), mhi^k 2^(ehi k)], elo, ehi < 0
    BigInt up = Z * ipow(mhi, ku);
    BigInt lo = Z * ipow(mlo, ku);
    BigInt lhs_hi = Bd << static_cast<unsigned long>(-ehi * static_cast<long>(ku));
    BigInt lhs_lo = Bd << static_cast<unsigned long>(-elo * static_cast<long>(ku));
    ConditionReport r;
    r.condition = "THM1";
    r.stage = n;
    r.exact = true;
    if (lhs_hi >= up) {
      r.verdict = Verdict::Pass;
      return r;
    }
    if (lhs_lo < lo) {
      r.verdict = Verdict::Fail;
      return r;
    }
  }
  ConditionReport r;
  r.condition = "THM1";
  r.stage = n;
  r.exact = true;
  r.verdict = Verdict::Unknown;
  return r;
}

}  // namespace

std::vector<ConditionReport> check_smooth_theorem(const Sequence& seq, const GateOptions& opt) {
  check_increasing(seq);
  std::vector<ConditionReport> out;
  for (size_t i = 0; i + 1 < seq.size(); ++i) {
    unsigned n = static_cast<unsigned>(i + 1);
    const SeqEntry& A = seq[i];
    const SeqEntry& B = seq[i + 1];
    BigInt E = 2 * (BigInt(n + 2) * ipow(BigInt(n + 1), n + 1) + 1);
    auto make = [&] { return std::pair{B.mag(), eval_phi1(n) * pow(A.mag(), lm(E))}; };
    ConditionReport logr = log_check("THM1", n, opt, make, factor_note(n));
    if (!opt.force_log) {
      auto a = A.materialize();
      auto b = B.materialize();
      if (a && b) {
        if (auto ex = smooth_theorem_exact(n, *a, *b)) {
          ex->margin_lo = logr.margin_lo;
          ex->margin_hi = logr.margin_hi;
          ex->note = logr.note;
          out.push_back(*ex);
          continue;
        }
      }
    }
    out.push_back(logr);
  }
  return out;
}

std::vector<ConditionReport> check_smooth_corollary(const Sequence& seq, const GateOptions& opt) {
  check_increasing(seq);
  std::vector<ConditionReport> out;
  out.push_back(log_check("COR1", 0, opt, [&] {
    return std::pair{seq[0].mag(), lm(108) * LM::pi()};
  }));
  for (size_t i = 0; i + 1 < seq.size(); ++i) {
    unsigned n = static_cast<unsigned>(i + 1);
    const SeqEntry& A = seq[i];
    const SeqEntry& B = seq[i + 1];
    auto make = [&] { return std::pair{B.mag(), pow(A.mag(), A.mag())}; };
    if (!opt.force_log) {
      auto a = A.materialize();
      auto b = B.materialize();
      if (a && b && log10_big(*a) * a->convert_to<double>() <= 1e6) {
        BigInt rhs = ipow(*a, a->convert_to<unsigned long>());
        ConditionReport r;
        r.condition = "COR1";
        r.stage = n;
        r.exact = true;
        r.verdict = *b >= rhs ? Verdict::Pass : Verdict::Fail;
        if (*b == rhs) {
          PrecisionScope ps(opt.bits);
          r.margin_lo.mag = Lix::from_int(0, Round::Down);
          r.margin_hi.mag = Lix::from_int(0, Round::Up);
        } else {
          GateOptions o = opt;
          o.refine = false;
          auto lr = log_check("COR1", n, o, make);
          r.margin_lo = lr.margin_lo;
          r.margin_hi = lr.margin_hi;
        }
        out.push_back(r);
        continue;
      }
    }
    out.push_back(log_check("COR1", n, opt, make));
  }
  return out;
}

ConditionReport smooth_corollary_helper(const SeqEntry& qt, unsigned n, const GateOptions& opt) {
  auto r = log_check("COR1", n, opt, [&] {
    return std::pair{qt.mag(), lm(4L * n) * LM::pi() * lm(ipow(BigInt(n + 2), n + 2))};
  });
  r.note = "helper q~_n >= 4 pi n (n+2)^(n+2)";
  return r;
}

std::vector<ConditionReport> check_analytic_theorem(const Sequence& seq, const Rational& rho,
                                                    const GateOptions& opt) {
  if (rho.num <= 0) throw std::invalid_argument("rho must be positive");
  check_increasing(seq);
  std::vector<ConditionReport> out;
  Rational rho1 = rho + Rational::integer(1);
  auto make0 = [&] { return std::pair{seq[0].mag(), lmq(rho1)}; };
  auto first = log_check("THM2", 0, opt, make0);
  if (auto a = seq[0].materialize(); a && !opt.force_log) {
    first.exact = true;
    first.verdict = Rational::integer(*a) >= rho1 ? Verdict::Pass : Verdict::Fail;
    if (Rational::integer(*a) == rho1) {
      PrecisionScope ps(opt.bits);
      first.margin_lo = {false, Lix::from_int(0, Round::Down)};
      first.margin_hi = {false, Lix::from_int(0, Round::Up)};
    }
  }
  out.push_back(first);
  for (size_t i = 0; i + 1 < seq.size(); ++i) {
    unsigned n = static_cast<unsigned>(i + 1);
    const SeqEntry& A = seq[i];
    const SeqEntry& B = seq[i + 1];
    out.push_back(log_check("THM2", n, opt, [&] {
      LM a = A.mag();
      LM inner = lm(2) * LM::pi() * pow(a, 4) * (lm(1) + lm(static_cast<long>(n)) * a);
      LM mid = lm(4L * n) * LM::pi() * pow(a, 6) * exp(inner);
      LM rhs = lm(ipow(BigInt(2), n) * 64 * n * n) * LM::pi() * LM::pi() * pow(a, 14) * exp(mid);
      return std::pair{B.mag(), rhs};
    }));
  }
  return out;
}

std::vector<ConditionReport> check_analytic_corollary(const Sequence& seq, const Rational& rho,
                                                      const GateOptions& opt) {
  if (rho.num <= 0) throw std::invalid_argument("rho must be positive");
  check_increasing(seq);
  std::vector<ConditionReport> out;
  Rational rho1 = rho + Rational::integer(1);
  out.push_back(log_check("COR2", 0, opt, [&] {
    return std::pair{seq[0].mag(), lmq(rho1) * lm(128) * LM::pi() * LM::pi()};
  }));
  for (size_t i = 0; i + 1 < seq.size(); ++i) {
    unsigned n = static_cast<unsigned>(i + 1);
    const SeqEntry& A = seq[i];
    const SeqEntry& B = seq[i + 1];
    out.push_back(log_check("COR2", n, opt, [&] {
      LM a = A.mag();
      LM rhs = pow(a, 15) * exp(pow(a, 7) * exp(pow(a, 6)));
      return std::pair{B.mag(), rhs};
    }));
  }
  return out;
}

ConditionReport analytic_corollary_helper(const SeqEntry& qt, unsigned n, const GateOptions& opt) {
  auto r = log_check("COR2", n, opt, [&] {
    return std::pair{qt.mag(), lm(ipow(BigInt(2), n + 6) * n * n) * LM::pi() * LM::pi()};
  });
  r.note = "helper q~_n >= 2^(n+6) n^2 pi^2";
  return r;
}

SmoothNormData closed_form_smooth_norms(const StageChain& chain) {
  SmoothNormData d;
  d.source = "closed-form";
  PrecisionScope ps(256);
  LM dh_prev = lm(1);
  for (const auto& s : chain) {
    unsigned n = s.n;
    LM two_pi_n_q = lm(2L * n) * LM::pi() * lm(s.q);
    if (n == 1) {
      d.Hn[n] = pow(lm(2) * LM::pi() * lm(s.q * s.q), 3);
    } else {
      BigInt e_fact = ipow(BigInt(n + 2), n - 2);
      BigInt e = BigInt(n + 2) * ipow(BigInt(n + 1), n - 1) * (n + 1);
      d.Hn[n] = pow(lm(factorial(n + 2)), lm(e_fact)) * pow(two_pi_n_q, lm(e));
    }
    d.DHprev[n] = dh_prev;
    LM dh_n = pow(lm(2L * n) * LM::pi() * lm(s.q * s.q), 2);
    dh_prev = n == 1 ? dh_n : lm(2) * dh_prev * dh_n;
  }
  return d;
}

std::vector<ConditionReport> check_stage_conditions_smooth(const StageChain& chain,
                                                           const SmoothNormData& norms,
                                                           const GateOptions& opt) {
  std::vector<ConditionReport> out;
  for (size_t i = 0; i < chain.size(); ++i) {
    const StageParams& cur = chain[i];
    unsigned n = cur.n;
    if (auto it = norms.DHprev.find(n); it != norms.DHprev.end()) {
      LM bound = it->second;
      out.push_back(log_check("C1", n, opt, [&] { return std::pair{lm(cur.q), pow(bound, 2)}; },
                              norms.source));
    } else {
      out.push_back(missing("C1", n, "norm ||DH_{n-1}||_0"));
    }
    if (i + 1 == chain.size()) break;
    const StageParams& nx = chain[i + 1];
    if (auto it = norms.Hn.find(n); it != norms.Hn.end()) {
      LM N = it->second;
      out.push_back(log_check("A1", n, opt, [&] {
        LM rhs = lm(*nx.a_prev * ipow(BigInt(2), n) * factorial(n + 1)) * pow(N, n + 1);
        return std::pair{lm(nx.qtilde), rhs};
      }, norms.source));
    } else {
      out.push_back(missing("A1", n, "norm |||H_n|||_{n+1}"));
    }
    out.push_back(log_check("A2", n, opt, [&] {
      return std::pair{lm(nx.q), lm(2L * n) * LM::pi() * lm(cur.q * cur.q)};
    }));
    out.push_back(log_check("A3", n, opt, [&] {
      return std::pair{lm(nx.q), lm(64L * n * n * n * n) * pow(LM::pi(), 4) * lm(ipow(cur.q, 9))};
    }));
    ConditionReport c2 = log_check("C2", n, opt, [&] {
      return std::pair{lm(nx.q), lm(ipow(cur.q, 8))};
    });
    c2.exact = true;
    c2.verdict = nx.q >= ipow(cur.q, 8) ? Verdict::Pass : Verdict::Fail;
    out.push_back(c2);
  }
  return out;
}

std::vector<ConditionReport> check_stage_conditions_analytic(const StageChain& chain,
                                                             const StripData& strip,
                                                             const GateOptions& opt) {
  std::vector<ConditionReport> out;
  for (size_t i = 0; i + 1 < chain.size(); ++i) {
    const StageParams& cur = chain[i];
    const StageParams& nx = chain[i + 1];
    unsigned n = cur.n;
    long nl = static_cast<long>(n);
    auto q = [&] { return lm(cur.q); };
    auto qs = [&] { return pow(q(), lmq(cur.sigma)); };
    auto b2_exp = [&] {  // exp(2 pi q^2 (1 + n q^sigma))
      return exp(lm(2) * LM::pi() * pow(q(), 2) * (lm(1) + lm(nl) * qs()));
    };
    out.push_back(log_check("B1", n, opt, [&] {
      LM rhs = lm(ipow(BigInt(2), n) * 4 * n) * LM::pi() * pow(q(), 5) * qs() *
               exp(lm(4 * nl) * LM::pi() * pow(q(), 2) * qs());
      return std::pair{lm(nx.qtilde), rhs};
    }));
    out.push_back(log_check("B2", n, opt, [&] {
      return std::pair{lm(nx.q), lm(2) * pow(q(), 2) * b2_exp()};
    }));
    if (auto it = strip.rho_tilde.find(n); it != strip.rho_tilde.end()) {
      LM rt = it->second;
      out.push_back(log_check("B2'", n, opt, [&] { return std::pair{lm(nx.q), rt}; }, strip.source));
    } else {
      out.push_back(missing("B2'", n, "rho~_n"));
    }
    out.push_back(log_check("B3", n, opt, [&] {
      return std::pair{lm(nx.q), lm(64 * nl * nl) * LM::pi() * LM::pi() * pow(q(), 8)};
    }));
    out.push_back(log_check("B4", n, opt, [&] {
      LM rhs = lm(4 * nl) * LM::pi() * pow(q(), 4) * qs() *
               exp(lm(4) * LM::pi() * pow(q(), 3) * b2_exp());
      return std::pair{lm(nx.q), rhs};
    }));
    bool have = true;
    for (unsigned k = 1; k <= n; ++k) have = have && strip.dh.count(k);
    if (have) {
      out.push_back(log_check("B4'", n, opt, [&] {
        LM prod = lm(1);
        for (unsigned k = 1; k <= n; ++k) prod = prod * strip.dh.at(k);
        return std::pair{lm(nx.q), prod};
      }, strip.source));
    } else {
      out.push_back(missing("B4'", n, "||Dh_k||_{rho_k+1}"));
    }
  }
  return out;
}

}  // namespace aklab
