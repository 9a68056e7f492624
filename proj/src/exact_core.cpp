#include "aklab/exact_core.hpp"

#include <gmp.h>

namespace aklab {

namespace {

bool sigma_ok(const Rational& s) {
  return s.num > 0 && compare(s, Rational(1, 2)) < 0;
}

BigInt mod_inverse(const BigInt& a, const BigInt& m) {
  BigInt r;
  if (mpz_invert(r.backend().data(), a.backend().data(), m.backend().data()) == 0)
    throw std::domain_error("no modular inverse");
  return r;
}

}  // namespace

StageParams make_initial_stage(const BigInt& qtilde_1, const Rational& sigma) {
  if (!sigma_ok(sigma)) throw std::invalid_argument("sigma must lie in (0, 1/2)");
  if (qtilde_1 < 2) throw std::invalid_argument("qtilde_1 must be >= 2");
  StageParams s;
  s.n = 1;
  s.sigma = sigma;
  s.p = 1;
  s.q = qtilde_1;
  s.qtilde = qtilde_1;
  s.alpha = Rational(s.p, s.q);
  return s;
}

StageParams next_stage(const StageParams& prev, const BigInt& qtilde_next) {
  if (qtilde_next < 2) throw std::invalid_argument("qtilde must be >= 2");
  BigInt a = floor_mod(qtilde_next * prev.p, prev.q);
  if (a == 0) a = prev.q;
  StageParams s;
  s.n = prev.n + 1;
  s.sigma = prev.sigma;
  s.p = prev.p * qtilde_next - a;
  s.q = prev.q * qtilde_next;
  s.qtilde = qtilde_next;
  s.a_prev = a;
  s.alpha = Rational(s.p, s.q);
  return s;
}

StageChain build_chain(const std::vector<BigInt>& qtildes, const Rational& sigma) {
  if (qtildes.empty()) throw std::invalid_argument("empty qtilde list");
  StageChain c;
  c.push_back(make_initial_stage(qtildes[0], sigma));
  for (size_t i = 1; i < qtildes.size(); ++i) c.push_back(next_stage(c.back(), qtildes[i]));
  return c;
}

BigInt floor_power(const BigInt& n, const BigInt& q, const Rational& sigma) {
  Rational s = sigma.reduced();
  if (s.num <= 0 || s.num >= s.den) throw std::invalid_argument("sigma must lie in (0, 1)");
  unsigned long a = s.num.convert_to<unsigned long>();
  unsigned long b = s.den.convert_to<unsigned long>();
  BigInt x = boost::multiprecision::pow(n, b) * boost::multiprecision::pow(q, a);
  BigInt m;
  mpz_root(m.backend().data(), x.backend().data(), b);
  return m;
}

BigInt shear(const StageParams& s) { return floor_power(BigInt(s.n), s.q, s.sigma); }

bool mixing_condition(const StageParams& cur, const StageParams& next, const BigInt& m) {
  const BigInt& qt = next.qtilde;
  BigInt t = floor_mod(m * next.p, qt);
  BigInt d = 2 * t - qt;
  if (d < 0) d = -d;
  return d <= 2 * cur.q;
}

Rational mixing_delta(const StageParams& cur, const StageParams& next, const BigInt& m) {
  const BigInt& qt = next.qtilde;
  BigInt num = 2 * m * next.p - qt;
  BigInt mod = 2 * qt;
  BigInt r = floor_mod(num, mod);
  if (r > qt) r -= mod;
  (void)cur;
  return Rational(r, 2 * next.q).reduced();
}

MixingIndex find_mixing_index_scan(const StageParams& cur, const StageParams& next) {
  const BigInt& qt = next.qtilde;
  BigInt step = floor_mod(next.p, qt);
  BigInt t = 0;
  BigInt lo = qt - 2 * cur.q;  // 2t must lie in [lo, hi]
  BigInt hi = qt + 2 * cur.q;
  for (BigInt m = 1; m <= next.q; ++m) {
    t += step;
    if (t >= qt) t -= qt;
    BigInt t2 = 2 * t;
    if (t2 >= lo && t2 <= hi) return {m, mixing_delta(cur, next, m)};
  }
  throw NoMixingIndex("no admissible m <= q_{n+1}; stage data corrupted");
}

MixingIndex find_mixing_index_window(const StageParams& cur, const StageParams& next) {
  const BigInt& qt = next.qtilde;
  if (2 * cur.q >= qt) return {BigInt(1), mixing_delta(cur, next, 1)};
  BigInt p = floor_mod(next.p, qt);
  BigInt g = boost::multiprecision::gcd(p, qt);
  BigInt tlo = floor_div(qt - 2 * cur.q + 1, 2);  // ceil((qt - 2q)/2)
  BigInt thi = floor_div(qt + 2 * cur.q, 2);
  std::optional<BigInt> best;
  if (p == 0) {
    if (tlo <= 0 && 0 <= thi) best = BigInt(1);
  } else {
    BigInt mod = qt / g;
    BigInt inv = mod_inverse(BigInt((p / g) % mod), mod);
    BigInt first = floor_div(tlo + g - 1, g) * g;
    for (BigInt t = first; t <= thi; t += g) {
      BigInt m = floor_mod((t / g) * inv, mod);
      if (m == 0) m = mod;
      if (!best || m < *best) best = m;
    }
  }
  if (!best || *best > next.q)
    throw NoMixingIndex("no admissible m <= q_{n+1}; stage data corrupted");
  return {*best, mixing_delta(cur, next, *best)};
}

MixingIndex find_mixing_index(const StageParams& cur, const StageParams& next) {
  if (next.n != cur.n + 1 || next.q != cur.q * next.qtilde)
    throw std::invalid_argument("stages are not consecutive");
  return find_mixing_index_window(cur, next);
}

nlohmann::json to_json(const Rational& r) {
  return {{"num", to_string(r.num)}, {"den", to_string(r.den)}};
}

Rational rational_from_json(const nlohmann::json& j) {
  return Rational(parse_bigint(j.at("num").get<std::string>()),
                  parse_bigint(j.at("den").get<std::string>()));
}

nlohmann::json to_json(const StageParams& s) {
  nlohmann::json j;
  j["n"] = s.n;
  j["sigma"] = to_json(s.sigma);
  j["p"] = to_string(s.p);
  j["q"] = to_string(s.q);
  j["qtilde"] = to_string(s.qtilde);
  j["a_prev"] = s.a_prev ? nlohmann::json(to_string(*s.a_prev)) : nlohmann::json(nullptr);
  j["alpha"] = to_json(s.alpha);
  j["shear"] = to_string(shear(s));
  return j;
}

StageParams stage_from_json(const nlohmann::json& j) {
  StageParams s;
  s.n = j.at("n").get<unsigned>();
  s.sigma = rational_from_json(j.at("sigma"));
  s.p = parse_bigint(j.at("p").get<std::string>());
  s.q = parse_bigint(j.at("q").get<std::string>());
  s.qtilde = parse_bigint(j.at("qtilde").get<std::string>());
  if (!j.at("a_prev").is_null()) s.a_prev = parse_bigint(j.at("a_prev").get<std::string>());
  s.alpha = rational_from_json(j.at("alpha"));
  return s;
}

nlohmann::json chain_to_json(const StageChain& c) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : c) arr.push_back(to_json(s));
  return arr;
}

StageChain toy_instance(int id) {
  Rational sigma(1, 4);
  switch (id) {
    case 1: return build_chain({4, 256}, sigma);
    case 2: return build_chain({4, 16384}, sigma);
    case 3: return build_chain({25, boost::multiprecision::pow(BigInt(25), 7)}, sigma);
    case 4: return build_chain({100, boost::multiprecision::pow(BigInt(100), 7)}, sigma);
    default: throw std::invalid_argument("toy instance id must be 1..4");
  }
}

}  // namespace aklab
