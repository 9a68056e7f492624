#pragma once

#include "aklab/exact_core.hpp"
#include "aklab/tps.hpp"

#include <json.hpp>

#include <complex>
#include <functional>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace aklab {

struct TorusPoint {
  Real theta;
  Real r;
  unsigned precision_bits = 0;
};

TorusPoint make_point(const Real& theta, const Real& r, unsigned bits);

class TorusMap;
using Map = std::shared_ptr<const TorusMap>;

class TorusMap {
 public:
  enum class Kind { Identity, Phi, G, H, Rotation, Inverse, Compose, Power };

  Kind kind = Kind::Identity;
  std::shared_ptr<const StageParams> stage;  // Phi, G, H
  Rational angle;                            // Rotation
  std::vector<Map> children;                 // Compose applies right to left
  BigInt exponent;                           // Power
};

Map identity_map();
Map phi_map(const StageParams& s);
Map g_map(const StageParams& s);
Map h_map(const StageParams& s);
Map rotation_map(const Rational& angle);
Map inverse_map(const Map& m);
Map compose_maps(std::vector<Map> outer_to_inner);
Map power_map(const Map& m, const BigInt& e);

// H_n = h_1 o ... o h_n
Map conjugacy_map(const StageChain& chain, unsigned n);
// f_n = H_n o R_{alpha_{n+1}} o H_n^{-1}
Map fn_map(const StageChain& chain, unsigned n);
// phi_n o R_phase o phi_n^{-1}
Map stretch_map(const StageParams& s, const Rational& phase);

bool same_map(const Map& a, const Map& b);
nlohmann::json to_json(const TorusMap& m);
Map map_from_json(const nlohmann::json& j);

class PrecisionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Step {
  enum class Op { Phi, PhiInv, G, GInv, Rot };
  Op op;
  BigInt q;        // Phi: frequency, amplitude q^2
  BigInt s;        // G: shear
  Rational angle;  // Rot, reduced mod 1
};
using Program = std::vector<Step>;  // applied front to back

// Flattens the tree. Powers of rotations and of conjugated rotations become a
// single exact rotation; other powers are unrolled up to 10^6 factors.
Program compile(const Map& m);
unsigned required_precision(const Map& m, unsigned target_bits);

template <class S>
struct ScalarOps;

template <>
struct ScalarOps<Real> {
  using Coef = Real;
  static Coef coef(const BigInt& v) { return to_real(v); }
  static Coef coef(const Rational& v) { return to_real(v); }
  static Real mul(const Coef& k, const Real& x) { return k * x; }
  static Real cos2pi(const Real& x);
  static void reduce(Real& x) { x -= boost::multiprecision::floor(x); }
};

template <>
struct ScalarOps<double> {
  using Coef = double;
  static Coef coef(const BigInt& v) { return v.convert_to<double>(); }
  static Coef coef(const Rational& v) { return to_double(v); }
  static double mul(double k, double x) { return k * x; }
  static double cos2pi(double x) { return std::cos(2 * M_PI * (x - std::floor(x))); }
  static void reduce(double& x) { x -= std::floor(x); }
};

template <>
struct ScalarOps<std::complex<double>> {
  using C = std::complex<double>;
  using Coef = double;
  static Coef coef(const BigInt& v) { return v.convert_to<double>(); }
  static Coef coef(const Rational& v) { return to_double(v); }
  static C mul(Coef k, const C& x) { return k * x; }
  static C cos2pi(const C& x) {
    C y(x.real() - std::floor(x.real()), x.imag());
    return std::cos(2 * M_PI * y);
  }
  static void reduce(C& x) { x = C(x.real() - std::floor(x.real()), x.imag()); }
};

template <class T>
T pi_as();
template <>
inline double pi_as<double>() { return M_PI; }
template <>
Real pi_as<Real>();

template <class T>
struct ScalarOps<Tps<T>> {
  using Coef = T;
  static Coef coef(const BigInt& v) { return ScalarOps<T>::coef(v); }
  static Coef coef(const Rational& v) { return ScalarOps<T>::coef(v); }
  static Tps<T> mul(const Coef& k, Tps<T> x) { return x.scale(k); }
  static Tps<T> cos2pi(const Tps<T>& x) {
    using std::cos;
    using std::floor;
    using std::sin;
    using boost::multiprecision::cos;
    using boost::multiprecision::floor;
    using boost::multiprecision::sin;
    T x0 = x.value();
    T f = x0 - floor(x0);
    T two_pi = 2 * pi_as<T>();
    T c = cos(two_pi * f), s = sin(two_pi * f);
    Tps<T> u = x;
    u.value() = T(0);
    u.scale(two_pi);
    // cos(a + u) = c cos u - s sin u, u nilpotent of order K
    Tps<T> out = Tps<T>::constant(c, x.order());
    Tps<T> p = Tps<T>::constant(T(1), x.order());
    double fact = 1;
    for (int j = 1; j <= x.order(); ++j) {
      p = p * u;
      fact *= j;
      T coef;
      switch (j % 4) {
        case 1: coef = -s; break;
        case 2: coef = -c; break;
        case 3: coef = s; break;
        default: coef = c; break;
      }
      Tps<T> term = p;
      term.scale(coef / T(fact));
      out += term;
    }
    return out;
  }
  static void reduce(Tps<T>& x) {
    using std::floor;
    using boost::multiprecision::floor;
    x.value() -= floor(x.value());
  }
};

template <class S>
class Kernel {
 public:
  using Ops = ScalarOps<S>;
  using Coef = typename Ops::Coef;

  explicit Kernel(const Program& p) {
    for (const auto& st : p) {
      K k{st.op, Coef(0), Coef(0), Coef(0), Coef(0)};
      switch (st.op) {
        case Step::Op::Phi:
        case Step::Op::PhiInv:
          k.q = Ops::coef(st.q);
          k.q2 = Ops::coef(BigInt(st.q * st.q));
          break;
        case Step::Op::G:
        case Step::Op::GInv: k.s = Ops::coef(st.s); break;
        case Step::Op::Rot: k.angle = Ops::coef(st.angle); break;
      }
      ks_.push_back(k);
    }
  }

  // lift of the map with both coordinates reduced mod 1 after every step;
  // the result differs from the true lift by integers only
  void apply(S& th, S& r) const { run(th, r, true); }
  // the lift itself
  void apply_lift(S& th, S& r) const { run(th, r, false); }

 private:
  void run(S& th, S& r, bool reduce) const {
    for (const auto& k : ks_) {
      switch (k.op) {
        case Step::Op::Phi: r = r + Ops::mul(k.q2, Ops::cos2pi(Ops::mul(k.q, th))); break;
        case Step::Op::PhiInv: r = r - Ops::mul(k.q2, Ops::cos2pi(Ops::mul(k.q, th))); break;
        case Step::Op::G: th = th + Ops::mul(k.s, r); break;
        case Step::Op::GInv: th = th - Ops::mul(k.s, r); break;
        case Step::Op::Rot: th = th + Tconst(k.angle, th); break;
      }
      if (reduce) {
        Ops::reduce(th);
        Ops::reduce(r);
      }
    }
  }

  struct K {
    Step::Op op;
    Coef q, q2, s, angle;
  };
  static S Tconst(const Coef& c, const S& like) {
    if constexpr (std::is_same_v<S, Coef>) {
      (void)like;
      return c;
    } else if constexpr (std::is_same_v<S, std::complex<double>>) {
      (void)like;
      return S(c, 0.0);
    } else {
      return S::constant(c, like.order());
    }
  }
  std::vector<K> ks_;
};

TorusPoint eval_map(const Map& m, const TorusPoint& p);
// unreduced lift of m at p, same precision rules as eval_map
TorusPoint eval_lift(const Map& m, const TorusPoint& p);
TorusPoint eval_power_of_fn(const StageChain& chain, unsigned n, const BigInt& m, const TorusPoint& p);

struct MetricEstimate {
  unsigned k = 0;
  Real value;
  unsigned grid = 0;
  bool certified = false;
};
nlohmann::json to_json(const MetricEstimate& e);

// sup over the grid of per-coordinate distances of the lifts, with the
// displacement reduced to (-1/2, 1/2]; with_inverses adds the inverse pair (d_0)
MetricEstimate metric_d0_estimate(const Map& f, const Map& g, unsigned grid, bool with_inverses = true);
MetricEstimate metric_dk_estimate(const Map& f, const Map& g, unsigned k, unsigned grid,
                                  bool with_inverses = true);

// rows (theta, r, value) of the per-point d_0 integrand
void sweep_csv(std::ostream& os, const Map& f, const Map& g, unsigned grid);

// worker threads for grid sweeps, capped by AKLAB_THREADS
unsigned worker_count();
// runs body(tile) for tiles 0..n_tiles-1 on worker threads; the set of tiles
// and their contents do not depend on the number of threads
void parallel_tiles(size_t n_tiles, const std::function<void(size_t)>& body);

}  // namespace aklab
