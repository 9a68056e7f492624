#include "aklab/jet_norms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <iomanip>
#include <map>
#include <tuple>

namespace aklab {

namespace {

using LM = LogMagnitude;

LM lm(const BigInt& v) { return LM::from_int(v); }

BigInt factorial(unsigned n) {
  BigInt f = 1;
  for (unsigned i = 2; i <= n; ++i) f *= i;
  return f;
}

BigInt ipow(BigInt b, unsigned e) {
  BigInt r = 1;
  while (e--) r *= b;
  return r;
}

unsigned map_cost(const Map& m) { return required_precision(m, 53) - 117; }

template <class T>
double as_double(const T& x) {
  if constexpr (std::is_same_v<T, double>)
    return x;
  else
    return x.template convert_to<double>();
}

// sup over the grid of the jet entries selected by lo <= |a| <= hi; order 0
// contributes the image coordinate in [0,1)
template <class T>
double sweep(const std::vector<Program>& progs, int lo, int hi, unsigned grid) {
  using J = Tps<T>;
  std::vector<Kernel<J>> ks;
  for (const auto& p : progs) ks.emplace_back(p);
  std::vector<double> best(grid, 0.0);
  parallel_tiles(grid, [&](size_t i) {
    double m = 0;
    for (unsigned j = 0; j < grid; ++j) {
      T th = T(i) / T(grid), r = T(j) / T(grid);
      for (const auto& k : ks) {
        J a = J::variable(th, 0, hi), b = J::variable(r, 1, hi);
        k.apply(a, b);
        for (int t = lo; t <= hi; ++t)
          for (int bb = 0; bb <= t; ++bb) {
            using std::abs;
            using boost::multiprecision::abs;
            m = std::max(m, as_double(abs(a.derivative(t - bb, bb))));
            m = std::max(m, as_double(abs(b.derivative(t - bb, bb))));
          }
      }
    }
    best[i] = m;
  });
  return *std::max_element(best.begin(), best.end());
}

double sweep_auto(const Map& f, bool with_inverse, int lo, int hi, unsigned grid) {
  if (grid == 0) throw std::invalid_argument("grid must be positive");
  if (hi > kMaxJetOrder) throw std::invalid_argument("jet order must be at most 4");
  std::vector<Program> progs{compile(f)};
  Map both = with_inverse ? compose_maps({f, inverse_map(f)}) : f;
  if (with_inverse) progs.push_back(compile(inverse_map(f)));
  if (map_cost(both) <= 40) return sweep<double>(progs, lo, hi, grid);
  PrecisionScope ps(required_precision(both, 53));
  return sweep<Real>(progs, lo, hi, grid);
}

NormTriple finish(NormTriple t) {
  if (t.bound) t.satisfied = compare_ge(*t.bound, LM::from_double(t.value)) == Verdict::Pass;
  return t;
}

}  // namespace

Jet jet_eval(const Map& m, const TorusPoint& base, int order) {
  if (order < 0 || order > kMaxJetOrder) throw std::invalid_argument("jet order must be 0..4");
  unsigned need = required_precision(m, 53);
  if (base.precision_bits < need)
    throw PrecisionError("point precision " + std::to_string(base.precision_bits) + " below required " +
                         std::to_string(need));
  PrecisionScope ps(required_precision(m, base.precision_bits));
  Kernel<Tps<Real>> k(compile(m));
  Jet j;
  j.order = order;
  j.base = base;
  j.theta = Tps<Real>::variable(Real(base.theta), 0, order);
  j.r = Tps<Real>::variable(Real(base.r), 1, order);
  k.apply(j.theta, j.r);
  return j;
}

double norm_value(const Map& f, unsigned k, unsigned grid, bool with_inverse) {
  double v = 0;
  if (k >= 1) v = sweep_auto(f, with_inverse, 1, static_cast<int>(k), grid);
  double v0 = sweep_auto(f, with_inverse, 0, 0, grid);
  return std::max(v, v0);
}

double df_norm(const Map& f, unsigned grid) { return sweep_auto(f, false, 1, 1, grid); }

LogMagnitude hn_norm_bound(const StageParams& s, unsigned k) {
  PrecisionScope ps(256);
  return pow(lm(BigInt(2 * s.n)) * LM::pi() * lm(BigInt(s.q * s.q)), static_cast<long>(k + 1));
}

NormTriple norm_estimate(const Map& f, unsigned k, unsigned grid) {
  NormTriple t;
  t.id = to_json(*f)["type"].get<std::string>();
  t.k = k;
  t.value = norm_value(f, k, grid);
  if (f->kind == TorusMap::Kind::H) t.bound = hn_norm_bound(*f->stage, k);
  return finish(t);
}

unsigned resolving_grid(const Map& m) {
  BigInt top = 0;
  for (const auto& st : compile(m))
    if ((st.op == Step::Op::Phi || st.op == Step::Op::PhiInv) && st.q > top) top = st.q;
  BigInt g = 4 * top;
  return g > std::numeric_limits<unsigned>::max() ? std::numeric_limits<unsigned>::max() : g.convert_to<unsigned>();
}

NormTriple check_hn_norm_bound(const StageParams& s, unsigned k, unsigned grid) {
  NormTriple t = norm_estimate(h_map(s), k, grid);
  t.id = "h_" + std::to_string(s.n);
  if (grid < resolving_grid(h_map(s))) t.note = "grid under-resolves a cosine frequency; value is a lower estimate";
  return t;
}

NormTriple check_composition_bound(const Map& g, const Map& h, unsigned k, unsigned grid) {
  if (k < 1 || k > 3) throw std::invalid_argument("composition bound is checked for 1 <= k <= 3");
  NormTriple t;
  t.id = "composition";
  t.k = k;
  if (grid < std::max(resolving_grid(g), resolving_grid(h))) {
    t.diagnostic = true;
    t.note = "grid under-resolves a cosine frequency";
  }
  t.value = norm_value(compose_maps({g, h}), k, grid);
  double ng = kGridInflation * norm_value(g, k, grid);
  double nh = kGridInflation * norm_value(h, k, grid);
  PrecisionScope ps(256);
  t.bound = lm(factorial(k + 1)) * pow(LM::from_double(ng), static_cast<long>(k)) *
            pow(LM::from_double(nh), static_cast<long>(k));
  return finish(t);
}

LogMagnitude Hn_norm_bound(unsigned n, const BigInt& q_n, unsigned k) {
  if (n < 2) throw std::invalid_argument("H_n bound needs n >= 2");
  PrecisionScope ps(256);
  BigInt e_fact = ipow(BigInt(k + 2), n - 2);
  BigInt e = BigInt(k + 2) * ipow(BigInt(k + 1), n - 1) * (n + 1);
  return pow(lm(factorial(k + 2)), lm(e_fact)) * pow(lm(BigInt(2 * n)) * LM::pi() * lm(q_n), lm(e));
}

NormTriple check_Hn_bound(const StageChain& chain, unsigned n, unsigned k, unsigned grid) {
  if (n < 2 || n > chain.size()) throw std::invalid_argument("stage out of range");
  if (k + 1 > kMaxJetOrder) throw std::invalid_argument("k must be at most 3");
  NormTriple t;
  t.id = "H_" + std::to_string(n);
  t.k = k + 1;
  {
    PrecisionScope ps(256);
    for (unsigned j = 1; j < n; ++j) {
      const StageParams& a = chain[j - 1];
      const StageParams& b = chain[j];
      LM rhs = lm(BigInt(2 * j)) * LM::pi() * lm(BigInt(a.q * a.q));
      if (compare_ge(lm(b.q), rhs) != Verdict::Pass) {
        t.diagnostic = true;
        t.note = "q_" + std::to_string(j + 1) + " >= 2 pi n q_n^2 not certified";
      }
    }
  }
  t.value = norm_value(conjugacy_map(chain, n), k + 1, grid);
  t.bound = Hn_norm_bound(n, chain[n - 1].q, k);
  return finish(t);
}

NormTriple check_conjugation_bound(const Map& h, const Rational& alpha, const Rational& beta, unsigned k,
                                   unsigned grid) {
  if (k > 2) throw std::invalid_argument("conjugation bound is checked for k <= 2");
  NormTriple t;
  t.id = "conjugation";
  t.k = k;
  Map a = compose_maps({h, rotation_map(alpha), inverse_map(h)});
  Map b = compose_maps({h, rotation_map(beta), inverse_map(h)});
  t.value = metric_dk_estimate(a, b, k, grid).value.convert_to<double>();
  double nh = kGridInflation * norm_value(h, k + 1, grid);
  PrecisionScope ps(256);
  Rational diff = abs(alpha - beta);
  if (diff == Rational(0, 1)) {
    t.bound = LM::from_int(0);
  } else {
    t.bound = lm(factorial(k + 1)) * pow(LM::from_double(nh), static_cast<long>(k + 1)) * LM::from_rational(diff);
  }
  return finish(t);
}

ChainRuleCount chain_rule_terms(unsigned k) {
  // a term is D_b g (h) times a product of factors D_c [h]_j
  using Factor = std::tuple<int, int, int>;  // j, c1, c2
  struct Term {
    int b1 = 0, b2 = 0;
    std::vector<Factor> fs;
    bool operator<(const Term& o) const { return std::tie(b1, b2, fs) < std::tie(o.b1, o.b2, o.fs); }
  };
  ChainRuleCount out;
  out.k = k;
  for (unsigned first = 0; first <= k; ++first) {
    // differentiate first times in x_1, then in x_2
    std::vector<Term> terms{Term{}};
    for (unsigned step = 0; step < k; ++step) {
      int l = step < first ? 0 : 1;
      std::vector<Term> next;
      for (const auto& t : terms) {
        for (int j = 0; j < 2; ++j) {
          Term u = t;
          (j == 0 ? u.b1 : u.b2)++;
          u.fs.emplace_back(j, l == 0 ? 1 : 0, l == 1 ? 1 : 0);
          std::sort(u.fs.begin(), u.fs.end());
          next.push_back(u);
        }
        for (size_t f = 0; f < t.fs.size(); ++f) {
          Term u = t;
          auto& [j, c1, c2] = u.fs[f];
          (l == 0 ? c1 : c2)++;
          std::sort(u.fs.begin(), u.fs.end());
          next.push_back(u);
        }
      }
      terms = std::move(next);
    }
    std::map<Term, int> merged;
    for (const auto& t : terms) ++merged[t];
    out.generated = std::max(out.generated, terms.size());
    out.distinct = std::max(out.distinct, merged.size());
  }
  return out;
}

void write_norm_csv(std::ostream& os, const std::vector<NormTriple>& rows) {
  os << "map,k,value,bound_log,satisfied\n";
  for (const auto& t : rows) {
    os << t.id << ',' << t.k << ',' << std::setprecision(17) << t.value << ',';
    if (t.bound) {
      PrecisionScope ps(128);
      os << t.bound->log_hi().str(17);
    }
    os << ',' << (t.satisfied ? "true" : "false") << '\n';
  }
}

}  // namespace aklab
