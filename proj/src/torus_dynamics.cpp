#include "aklab/torus_dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mpfr.h>
#include <thread>

namespace aklab {

namespace {

const BigInt kMaxUnroll = 1000000;

Map make(TorusMap m) { return std::make_shared<const TorusMap>(std::move(m)); }

Map stage_node(TorusMap::Kind k, const StageParams& s) {
  TorusMap m;
  m.kind = k;
  m.stage = std::make_shared<const StageParams>(s);
  return make(std::move(m));
}

const char* kind_name(TorusMap::Kind k) {
  switch (k) {
    case TorusMap::Kind::Identity: return "Identity";
    case TorusMap::Kind::Phi: return "Phi";
    case TorusMap::Kind::G: return "G";
    case TorusMap::Kind::H: return "H";
    case TorusMap::Kind::Rotation: return "Rotation";
    case TorusMap::Kind::Inverse: return "Inverse";
    case TorusMap::Kind::Compose: return "Compose";
    case TorusMap::Kind::Power: return "Power";
  }
  return "?";
}

Step invert(Step s) {
  switch (s.op) {
    case Step::Op::Phi: s.op = Step::Op::PhiInv; break;
    case Step::Op::PhiInv: s.op = Step::Op::Phi; break;
    case Step::Op::G: s.op = Step::Op::GInv; break;
    case Step::Op::GInv: s.op = Step::Op::G; break;
    case Step::Op::Rot: s.angle = frac(Rational(0, 1) - s.angle); break;
  }
  return s;
}

Program invert(const Program& p) {
  Program out;
  for (auto it = p.rbegin(); it != p.rend(); ++it) out.push_back(invert(*it));
  return out;
}

Step rot_step(const Rational& a) {
  Step s;
  s.op = Step::Op::Rot;
  s.angle = frac(a);
  return s;
}

// A o R o A^{-1} -> (A, angle)
bool conjugated_rotation(const Map& m, Map& outer, Rational& angle) {
  if (m->kind == TorusMap::Kind::Rotation) {
    outer = identity_map();
    angle = m->angle;
    return true;
  }
  if (m->kind != TorusMap::Kind::Compose || m->children.size() != 3) return false;
  const auto& a = m->children[0];
  const auto& r = m->children[1];
  const auto& b = m->children[2];
  if (r->kind != TorusMap::Kind::Rotation || b->kind != TorusMap::Kind::Inverse) return false;
  if (!same_map(a, b->children[0])) return false;
  outer = a;
  angle = r->angle;
  return true;
}

void append(Program& p, const Program& q) { p.insert(p.end(), q.begin(), q.end()); }

unsigned ceil_log2(const Real& x) {
  if (x <= 1) return 0;
  Real l = boost::multiprecision::log2(x);
  return static_cast<unsigned>(boost::multiprecision::ceil(l).convert_to<long>());
}

unsigned layer_cost(const Map& m) {
  PrecisionScope ps(128);
  Real two_pi = 2 * real_pi();
  switch (m->kind) {
    case TorusMap::Kind::Identity:
    case TorusMap::Kind::Rotation: return 0;
    case TorusMap::Kind::Phi: {
      Real q = to_real(m->stage->q);
      return ceil_log2(two_pi * q * q * q);
    }
    case TorusMap::Kind::G: return ceil_log2(to_real(BigInt(1 + shear(*m->stage))));
    case TorusMap::Kind::H: {
      Real q = to_real(m->stage->q);
      return ceil_log2(two_pi * q * q * q * to_real(BigInt(1 + shear(*m->stage))));
    }
    case TorusMap::Kind::Inverse: return layer_cost(m->children[0]);
    case TorusMap::Kind::Compose: {
      unsigned c = 0;
      for (const auto& ch : m->children) c += layer_cost(ch);
      return c;
    }
    case TorusMap::Kind::Power: {
      Map outer;
      Rational angle;
      if (m->exponent == 0) return 0;
      if (conjugated_rotation(m->children[0], outer, angle)) return 2 * layer_cost(outer);
      BigInt e = boost::multiprecision::abs(m->exponent);
      if (e > kMaxUnroll) throw std::invalid_argument("power too large to unroll");
      return static_cast<unsigned>(e.convert_to<unsigned long>()) * layer_cost(m->children[0]);
    }
  }
  return 0;
}

}  // namespace

TorusPoint make_point(const Real& theta, const Real& r, unsigned bits) {
  PrecisionScope ps(bits);
  TorusPoint p;
  p.theta = reduce_unit(Real(theta));
  p.r = reduce_unit(Real(r));
  p.precision_bits = bits;
  return p;
}

Map identity_map() { return make(TorusMap{}); }
Map phi_map(const StageParams& s) { return stage_node(TorusMap::Kind::Phi, s); }
Map g_map(const StageParams& s) { return stage_node(TorusMap::Kind::G, s); }
Map h_map(const StageParams& s) { return stage_node(TorusMap::Kind::H, s); }

Map rotation_map(const Rational& angle) {
  TorusMap m;
  m.kind = TorusMap::Kind::Rotation;
  m.angle = angle;
  return make(std::move(m));
}

Map inverse_map(const Map& c) {
  TorusMap m;
  m.kind = TorusMap::Kind::Inverse;
  m.children = {c};
  return make(std::move(m));
}

Map compose_maps(std::vector<Map> outer_to_inner) {
  TorusMap m;
  m.kind = TorusMap::Kind::Compose;
  m.children = std::move(outer_to_inner);
  return make(std::move(m));
}

Map power_map(const Map& c, const BigInt& e) {
  TorusMap m;
  m.kind = TorusMap::Kind::Power;
  m.children = {c};
  m.exponent = e;
  return make(std::move(m));
}

Map conjugacy_map(const StageChain& chain, unsigned n) {
  if (n == 0 || n > chain.size()) throw std::invalid_argument("stage out of range");
  std::vector<Map> hs;
  for (unsigned k = 0; k < n; ++k) hs.push_back(h_map(chain[k]));
  return compose_maps(std::move(hs));
}

Map fn_map(const StageChain& chain, unsigned n) {
  if (n + 1 > chain.size()) throw std::invalid_argument("chain must reach stage n+1");
  Map H = conjugacy_map(chain, n);
  return compose_maps({H, rotation_map(chain[n].alpha), inverse_map(H)});
}

Map stretch_map(const StageParams& s, const Rational& phase) {
  Map p = phi_map(s);
  return compose_maps({p, rotation_map(phase), inverse_map(p)});
}

bool same_map(const Map& a, const Map& b) { return to_json(*a) == to_json(*b); }

nlohmann::json to_json(const TorusMap& m) {
  nlohmann::json j;
  j["type"] = kind_name(m.kind);
  switch (m.kind) {
    case TorusMap::Kind::Identity: break;
    case TorusMap::Kind::Phi:
    case TorusMap::Kind::G:
    case TorusMap::Kind::H: j["stage"] = to_json(*m.stage); break;
    case TorusMap::Kind::Rotation: j["angle"] = to_json(m.angle); break;
    case TorusMap::Kind::Inverse: j["child"] = to_json(*m.children[0]); break;
    case TorusMap::Kind::Compose:
      j["children"] = nlohmann::json::array();
      for (const auto& c : m.children) j["children"].push_back(to_json(*c));
      break;
    case TorusMap::Kind::Power:
      j["exponent"] = to_string(m.exponent);
      j["child"] = to_json(*m.children[0]);
      break;
  }
  return j;
}

Map map_from_json(const nlohmann::json& j) {
  const std::string t = j.at("type").get<std::string>();
  if (t == "Identity") return identity_map();
  if (t == "Phi") return phi_map(stage_from_json(j.at("stage")));
  if (t == "G") return g_map(stage_from_json(j.at("stage")));
  if (t == "H") return h_map(stage_from_json(j.at("stage")));
  if (t == "Rotation") return rotation_map(rational_from_json(j.at("angle")));
  if (t == "Inverse") return inverse_map(map_from_json(j.at("child")));
  if (t == "Compose") {
    std::vector<Map> cs;
    for (const auto& c : j.at("children")) cs.push_back(map_from_json(c));
    return compose_maps(std::move(cs));
  }
  if (t == "Power") {
    const auto& e = j.at("exponent");
    BigInt ex = e.is_string() ? parse_bigint(e.get<std::string>()) : BigInt(e.get<long long>());
    return power_map(map_from_json(j.at("child")), ex);
  }
  throw std::invalid_argument("unknown map type: " + t);
}

namespace {

bool cancels(const Step& a, const Step& b) {
  switch (a.op) {
    case Step::Op::Phi: return b.op == Step::Op::PhiInv && a.q == b.q;
    case Step::Op::PhiInv: return b.op == Step::Op::Phi && a.q == b.q;
    case Step::Op::G: return b.op == Step::Op::GInv && a.s == b.s;
    case Step::Op::GInv: return b.op == Step::Op::G && a.s == b.s;
    case Step::Op::Rot: return false;
  }
  return false;
}

// drops adjacent inverse pairs and merges rotations; exact
Program simplify(const Program& p) {
  Program out;
  for (const auto& s : p) {
    if (s.op == Step::Op::Rot) {
      if (s.angle == Rational(0, 1)) continue;
      if (!out.empty() && out.back().op == Step::Op::Rot) {
        out.back().angle = frac(out.back().angle + s.angle);
        if (out.back().angle == Rational(0, 1)) out.pop_back();
        continue;
      }
    } else if (!out.empty() && cancels(out.back(), s)) {
      out.pop_back();
      continue;
    }
    out.push_back(s);
  }
  return out;
}

Program compile_tree(const Map& m);

}  // namespace

Program compile(const Map& m) { return simplify(compile_tree(m)); }

namespace {

Program compile_tree(const Map& m) {
  Program p;
  switch (m->kind) {
    case TorusMap::Kind::Identity: break;
    case TorusMap::Kind::Phi: {
      Step s;
      s.op = Step::Op::Phi;
      s.q = m->stage->q;
      p.push_back(s);
      break;
    }
    case TorusMap::Kind::G: {
      Step s;
      s.op = Step::Op::G;
      s.s = shear(*m->stage);
      p.push_back(s);
      break;
    }
    case TorusMap::Kind::H: {
      Step a;
      a.op = Step::Op::Phi;
      a.q = m->stage->q;
      Step b;
      b.op = Step::Op::G;
      b.s = shear(*m->stage);
      p = {a, b};
      break;
    }
    case TorusMap::Kind::Rotation: p.push_back(rot_step(m->angle)); break;
    case TorusMap::Kind::Inverse: p = invert(compile(m->children[0])); break;
    case TorusMap::Kind::Compose:
      for (auto it = m->children.rbegin(); it != m->children.rend(); ++it) append(p, compile(*it));
      break;
    case TorusMap::Kind::Power: {
      const BigInt& e = m->exponent;
      if (e == 0) break;
      Map outer;
      Rational angle;
      if (conjugated_rotation(m->children[0], outer, angle)) {
        Program a = compile(outer);
        append(p, invert(a));
        Rational t = frac(Rational(e, 1) * angle);
        if (t != Rational(0, 1)) p.push_back(rot_step(t));
        append(p, a);
        break;
      }
      BigInt n = boost::multiprecision::abs(e);
      if (n > kMaxUnroll) throw std::invalid_argument("power too large to unroll");
      Program c = compile(m->children[0]);
      if (e < 0) c = invert(c);
      for (BigInt i = 0; i < n; ++i) append(p, c);
      break;
    }
  }
  return p;
}

}  // namespace

unsigned required_precision(const Map& m, unsigned target_bits) { return target_bits + layer_cost(m) + 64; }

Real ScalarOps<Real>::cos2pi(const Real& x) {
  Real f = x - boost::multiprecision::floor(x);
  return boost::multiprecision::cos(2 * real_pi() * f);
}

template <>
Real pi_as<Real>() {
  return real_pi();
}

namespace {

TorusPoint evaluate(const Map& m, const TorusPoint& p, bool reduce) {
  unsigned need = required_precision(m, 53);
  if (p.precision_bits < need)
    throw PrecisionError("point precision " + std::to_string(p.precision_bits) + " below required " +
                         std::to_string(need));
  Real th, r;
  {
    PrecisionScope work(required_precision(m, p.precision_bits));
    Kernel<Real> k(compile(m));
    th = Real(p.theta);
    r = Real(p.r);
    mpfr_prec_round(th.backend().data(), current_bits(), MPFR_RNDN);
    mpfr_prec_round(r.backend().data(), current_bits(), MPFR_RNDN);
    if (reduce)
      k.apply(th, r);
    else
      k.apply_lift(th, r);
  }
  TorusPoint out;
  out.precision_bits = p.precision_bits;
  mpfr_prec_round(th.backend().data(), p.precision_bits, MPFR_RNDN);
  mpfr_prec_round(r.backend().data(), p.precision_bits, MPFR_RNDN);
  out.theta = reduce ? reduce_unit(th) : th;
  out.r = reduce ? reduce_unit(r) : r;
  return out;
}

}  // namespace

TorusPoint eval_map(const Map& m, const TorusPoint& p) { return evaluate(m, p, true); }

TorusPoint eval_lift(const Map& m, const TorusPoint& p) { return evaluate(m, p, false); }

TorusPoint eval_power_of_fn(const StageChain& chain, unsigned n, const BigInt& m, const TorusPoint& p) {
  return eval_map(power_map(fn_map(chain, n), m), p);
}

nlohmann::json to_json(const MetricEstimate& e) {
  return {{"k", e.k}, {"value", format_real(e.value, 20)}, {"grid", e.grid}, {"certified", e.certified}};
}

unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("AKLAB_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return hw;
}

void parallel_tiles(size_t n_tiles, const std::function<void(size_t)>& body) {
  unsigned w = std::min<size_t>(worker_count(), n_tiles);
  if (w <= 1) {
    for (size_t t = 0; t < n_tiles; ++t) body(t);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errs(w);
  std::vector<std::thread> ts;
  for (unsigned i = 0; i < w; ++i)
    ts.emplace_back([&, i] {
      init_mpfr_range();
      try {
        for (size_t t; (t = next.fetch_add(1)) < n_tiles;) body(t);
      } catch (...) {
        errs[i] = std::current_exception();
        next = n_tiles;
      }
      mpfr_free_cache2(MPFR_FREE_LOCAL_CACHE);
    });
  for (auto& t : ts) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

namespace {

struct Pair {
  Program f, g;
};

std::vector<Pair> pairs_for(const Map& f, const Map& g, bool with_inverses) {
  std::vector<Pair> ps{{compile(f), compile(g)}};
  if (with_inverses) ps.push_back({invert(ps[0].f), invert(ps[0].g)});
  return ps;
}

unsigned pair_precision(const Map& f, const Map& g) {
  return std::max(required_precision(f, 53), required_precision(g, 53));
}

// max over the grid of body(theta, r); rows are tiles
template <class Fn>
Real grid_max(unsigned grid, Fn body) {
  std::vector<Real> best(grid, Real(0));
  parallel_tiles(grid, [&](size_t i) {
    Real m = 0;
    for (unsigned j = 0; j < grid; ++j) {
      Real th = Real(i) / grid, r = Real(j) / grid;
      Real v = body(th, r);
      if (v > m) m = v;
    }
    best[i] = m;
  });
  Real out = 0;
  for (const auto& b : best)
    if (b > out) out = b;
  return out;
}

Real d0_at(const std::vector<Kernel<Real>>& ks, const Real& th, const Real& r) {
  Real m = 0;
  for (size_t i = 0; i + 1 < ks.size(); i += 2) {
    Real a = th, b = r, c = th, d = r;
    ks[i].apply(a, b);
    ks[i + 1].apply(c, d);
    Real x = boost::multiprecision::abs(reduce_half(a - c));
    Real y = boost::multiprecision::abs(reduce_half(b - d));
    if (x > m) m = x;
    if (y > m) m = y;
  }
  return m;
}

}  // namespace

MetricEstimate metric_d0_estimate(const Map& f, const Map& g, unsigned grid, bool with_inverses) {
  if (grid == 0) throw std::invalid_argument("grid must be positive");
  PrecisionScope ps(pair_precision(f, g));
  std::vector<Kernel<Real>> ks;
  for (const auto& p : pairs_for(f, g, with_inverses)) {
    ks.emplace_back(p.f);
    ks.emplace_back(p.g);
  }
  MetricEstimate e;
  e.k = 0;
  e.grid = grid;
  e.value = grid_max(grid, [&](const Real& th, const Real& r) { return d0_at(ks, th, r); });
  return e;
}

MetricEstimate metric_dk_estimate(const Map& f, const Map& g, unsigned k, unsigned grid, bool with_inverses) {
  if (k > 4) throw std::invalid_argument("derivative order must be at most 4");
  MetricEstimate e = metric_d0_estimate(f, g, grid, with_inverses);
  e.k = k;
  if (k == 0) return e;
  PrecisionScope ps(pair_precision(f, g));
  using J = Tps<Real>;
  std::vector<Kernel<J>> ks;
  for (const auto& p : pairs_for(f, g, with_inverses)) {
    ks.emplace_back(p.f);
    ks.emplace_back(p.g);
  }
  int order = static_cast<int>(k);
  Real dm = grid_max(grid, [&](const Real& th, const Real& r) {
    Real m = 0;
    for (size_t i = 0; i < ks.size(); i += 2) {
      J a = J::variable(th, 0, order), b = J::variable(r, 1, order);
      J c = a, d = b;
      ks[i].apply(a, b);
      ks[i + 1].apply(c, d);
      J dx = a - c, dy = b - d;
      for (int t = 1; t <= order; ++t)
        for (int bb = 0; bb <= t; ++bb) {
          Real x = boost::multiprecision::abs(dx.derivative(t - bb, bb));
          Real y = boost::multiprecision::abs(dy.derivative(t - bb, bb));
          if (x > m) m = x;
          if (y > m) m = y;
        }
    }
    return m;
  });
  if (dm > e.value) e.value = dm;
  return e;
}

void sweep_csv(std::ostream& os, const Map& f, const Map& g, unsigned grid) {
  PrecisionScope ps(pair_precision(f, g));
  std::vector<Kernel<Real>> ks{Kernel<Real>(compile(f)), Kernel<Real>(compile(g))};
  std::vector<std::string> rows(grid);
  parallel_tiles(grid, [&](size_t i) {
    std::string s;
    for (unsigned j = 0; j < grid; ++j) {
      Real th = Real(i) / grid, r = Real(j) / grid;
      s += format_real(th, 17) + "," + format_real(r, 17) + "," + format_real(d0_at(ks, th, r), 17) + "\n";
    }
    rows[i] = std::move(s);
  });
  os << "theta,r,value\n";
  for (const auto& r : rows) os << r;
}

}  // namespace aklab
