#pragma once

#include "aklab/growth_gate.hpp"
#include "aklab/logmag.hpp"
#include "aklab/torus_dynamics.hpp"

#include <json.hpp>

#include <complex>
#include <optional>
#include <vector>

namespace aklab {

using Complex = std::complex<double>;

struct StripSpec {
  double rho = 0.1;
  unsigned samples_per_period = 32;
  unsigned min_samples = 256;
  unsigned max_samples = 2048;  // per real axis
};

// coef * exp(2 pi i (a theta + b r))
struct TrigTerm {
  Complex coef;
  int a = 0;
  int b = 0;
};

// Z^2-periodic entire functions the strip norms accept: trig polynomials,
// affine functions and the displacement [F]_i(z) - z_i of a map descriptor.
class StripFunction {
 public:
  enum class Kind { Trig, Affine, Displacement };

  static StripFunction constant(Complex c);
  static StripFunction trig(std::vector<TrigTerm> terms);
  // amp * cos(2 pi (a theta + b r))
  static StripFunction cos2pi(int a, int b, double amp = 1.0);
  static StripFunction affine(Complex c0, Complex c_theta, Complex c_r);
  static StripFunction displacement(const Map& m, int component);
  static StripFunction from_json(const nlohmann::json& j);

  Complex eval(Complex theta, Complex r) const;
  // fastest oscillation along the real directions, in periods per unit
  double frequency() const;
  Kind kind() const { return kind_; }

 private:
  Kind kind_ = Kind::Trig;
  std::vector<TrigTerm> terms_;
  Complex c0_, ct_, cr_;
  Map map_;
  int component_ = 0;
  std::shared_ptr<const Kernel<Complex>> kernel_;
};

struct StripNorm {
  double value = 0;  // sampled sup, a lower bound
  unsigned samples = 0;
  bool finite = true;
};

// sup over the faces |im theta| = |im r| = rho
StripNorm strip_sup_norm(const StripFunction& f, const StripSpec& spec);
// sup over interior imaginary levels in [-rho, rho]
StripNorm strip_interior_sup(const StripFunction& f, const StripSpec& spec, unsigned levels = 5);
// max over components of the displacement norm; the real part of the
// displacement is reduced to (-1/2, 1/2] pointwise
StripNorm strip_displacement_norm(const Map& m, const StripSpec& spec);

struct StripBoundReport {
  std::string name;
  unsigned stage = 0;
  double measured = 0;
  LogMagnitude bound;
  Verdict verdict = Verdict::Unknown;
  std::string note;
};
nlohmann::json to_json(const StripBoundReport& r);

// ||h_n^{-1}||_rho against 2 q^2 exp(2 pi q rho (1 + s)), and the first
// coordinate against s sqrt(1 + rho^2)
std::vector<StripBoundReport> check_hn_inverse_strip_bound(const StageParams& s, double rho,
                                                           const StripSpec& spec = {});

struct RhoChain {
  Rational rho;
  std::vector<LogMagnitude> rho_tilde;            // n = 0..N
  std::vector<LogMagnitude> rho_bound;            // carried upper bound on rho_n
  std::vector<std::optional<double>> rho_measured;  // sampled rho_n
  std::vector<Verdict> plus_one;                  // rho_n + 1 <= rho~_n, n >= 1 (index 0 unused)
};
RhoChain rho_recursion(const StageChain& chain, const Rational& rho, const StripSpec& spec = {});
nlohmann::json to_json(const RhoChain& c);

// ||Dh_n||_rho: sampled from the closed-form partials when the strip is
// representable, else the closed-form upper bound 1 + s 2 pi q^3 exp(2 pi q rho)
LogMagnitude dh_strip_norm(const StageParams& s, const LogMagnitude& rho, bool* sampled = nullptr);
// 4 pi n q^(3+sigma) exp(2 pi q rho)
LogMagnitude dh_strip_bound(const StageParams& s, const LogMagnitude& rho);

StripData make_strip_data(const StageChain& chain, const Rational& rho, const StripSpec& spec = {});

struct TmReport {
  double measured = 0;
  LogMagnitude bound;
  Verdict verdict = Verdict::Unknown;
  bool in_regime = true;  // m <= q_n
};
nlohmann::json to_json(const TmReport& r);
TmReport tm_bound_check(const StageParams& cur, const StageParams& next, const BigInt& m, double s,
                        unsigned samples_per_period = 32);

struct ProximityLink {
  unsigned k = 0;
  LogMagnitude lhs;     // ||Dh_k||_{rho_k+1} times the difference propagated to level k
  LogMagnitude scaled;  // lhs * 2^n prod_{j<k} ||Dh_j||; the link holds when < 1
  Verdict verdict = Verdict::Unknown;
};

struct ProximityReport {
  unsigned n = 0;
  BigInt m;
  LogMagnitude inner;  // ||h_n R^m h_n^{-1} - R^m_{alpha_n}||_{rho_{n-1}}
  bool inner_sampled = false;
  std::vector<LogMagnitude> dh;  // ||Dh_k||_{rho_k+1}, k = 1..n-1
  LogMagnitude premise_scaled;   // inner * 2^n prod ||Dh_k||; premise holds when < 1
  Verdict premise = Verdict::Unknown;
  std::vector<ProximityLink> links;
  LogMagnitude propagated;  // inner * prod ||Dh_k||
  Verdict conclusion = Verdict::Unknown;  // propagated < 2^-n
  std::string note;
};
nlohmann::json to_json(const ProximityReport& r);
ProximityReport analytic_step_proximity(const StageChain& chain, unsigned n, const BigInt& m, const Rational& rho,
                                        const StripSpec& spec = {});

}  // namespace aklab
