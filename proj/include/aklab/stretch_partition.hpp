#pragma once

#include "aklab/exact_core.hpp"
#include "aklab/logmag.hpp"
#include "aklab/torus_dynamics.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace aklab {

struct CircleInterval {
  Real left;    // in [0,1)
  Real length;  // in (0,1]
  bool wraps = false;

  static CircleInterval make(const Real& left, const Real& length);
  Real right() const { return left + length; }
  bool contains(const Real& theta) const;
};

// the 2q closed intervals [k/(2q) - 1/(2q^1.5), k/(2q) + 1/(2q^1.5)]
class ForbiddenSet {
 public:
  explicit ForbiddenSet(BigInt q);
  const BigInt& q() const { return q_; }
  Real half_width() const;
  bool contains(const Real& theta) const;
  // clipped where neighbours meet
  Real measure() const;
  bool covers_circle() const;

 private:
  BigInt q_;
};

// psi(theta) = q^2 (cos 2 pi (q theta + c) - cos 2 pi q theta),
// sigma(theta) = psi(theta) + 2 q^2 cos 2 pi q theta, c = m q alpha_{n+1} mod 1
struct Psi {
  BigInt q;
  Rational phase;
  unsigned bits = 0;
  Real amp_psi;    // -2 q^2 sin(pi c)
  Real amp_sigma;  // 2 q^2 cos(pi c)
  Real qr;
  Real half_phase;
};

Psi make_psi(const StageParams& s, const Rational& phase);
Psi make_psi(const StageParams& cur, const StageParams& next, const BigInt& m);
// Both refuse (PrecisionError) when the working precision is below psi.bits.
Real eval_psi(const Psi& p, const Real& theta, unsigned order);
Real eval_sigma(const Psi& p, const Real& theta, unsigned order);
// critical points of psi in [a, b], ascending
std::vector<Real> psi_critical_points(const Psi& p, const Real& a, const Real& b);

struct PsiBoundsReport {
  BigInt q;
  unsigned grid = 0;
  unsigned outside_points = 0;  // grid points in T \ B
  double inf_dpsi = 0;          // +inf when no point lies outside B
  double sup_d2psi = 0;
  double sup_dsigma = 0;  // over the whole grid
  double sup_d2sigma = 0;
  double sigma1_closed = 0;  // exact sup |sigma'|
  double sigma2_closed = 0;
  double bound_dpsi = 0;   // q^2.5
  double bound_d2psi = 0;  // 9 pi^2 q^4
  Verdict dpsi = Verdict::Unknown;
  Verdict d2psi = Verdict::Unknown;
  Verdict dsigma = Verdict::Unknown;
  Verdict d2sigma = Verdict::Unknown;
  bool premise = false;  // |Delta| <= q_n/q_{n+1} and q_{n+1} >= q_n^8
  bool diagnostic = false;
  bool vacuous = false;
  std::string note;
};
nlohmann::json to_json(const PsiBoundsReport& r);
PsiBoundsReport check_psi_bounds(const StageParams& cur, const StageParams& next, const BigInt& m, unsigned grid);

struct PartitionElement {
  CircleInterval hat;
  long long level = 0;  // psi(hat) = level + [0,1)
  unsigned branch = 0;
};

struct PartitionOptions {
  std::optional<unsigned> branch_sample;
  std::uint64_t seed = 1;
  int tol_log2 = 40;  // bisection tolerance 2^-tol in theta and in psi
};

struct PartialDecomposition {
  BigInt q;
  Rational phase;
  unsigned branches_total = 0;
  std::vector<unsigned> branches_built;
  std::vector<PartitionElement> elements;
  Real built_mass;
  Real total_mass;  // extrapolated when sampled
  double mass_stderr = 0;
  Real max_length;
  std::uint64_t seed = 0;
};
nlohmann::json to_json(const PartialDecomposition& d, bool with_elements = true);

class BisectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

PartialDecomposition build_partition(const StageParams& cur, const StageParams& next, const BigInt& m,
                                     const PartitionOptions& opt = {});

struct PartitionCheck {
  bool lengths_ok = false;  // every length <= q^-2.5
  bool disjoint = false;
  bool avoids_forbidden = false;
  bool images_ok = false;  // psi(right) - psi(left) = 1 within 2^-35 on sampled elements
  bool mass_ok = false;    // total_mass >= 1 - 3 q^-0.5
  double mass_bound = 0;
  double worst_image_error = 0;
  unsigned image_samples = 0;
};
nlohmann::json to_json(const PartitionCheck& c);
PartitionCheck check_partition(const PartialDecomposition& d, unsigned image_samples = 100, std::uint64_t seed = 1);

// (theta, r) -> (theta + shift, r + psi(theta))
struct SkewMap {
  Real shift;
  unsigned bits = 0;
  std::function<Real(const Real&)> psi;
  std::function<std::vector<Real>(const Real&, const Real&)> critical;
};
// accepts maps compiling to phi^-1, rot, phi or a bare rotation
SkewMap skew_from_map(const Map& phi);
SkewMap skew_from_psi(const Psi& p, const Rational& shift);
SkewMap affine_skew(const Real& slope, const Real& offset, unsigned bits = 128);

struct HorizontalInterval {
  Real theta;
  Real length;
  Real r;
};

struct DistributionReport {
  double gamma = 0;
  double delta = 0;
  double epsilon = 0;
  std::string interval_id;
  unsigned samples = 0;
  unsigned test_intervals = 0;
  bool full_circle = false;
  std::string note;
};
nlohmann::json to_json(const DistributionReport& r);

constexpr int kClosureTolLog2 = 35;

// measure of {theta in I : r + psi(theta) mod 1 in [lo, lo + len)} by
// monotone-branch inversion
Real preimage_measure(const SkewMap& f, const HorizontalInterval& I, const Real& lo, const Real& len);

DistributionReport distribution_report(const SkewMap& f, const HorizontalInterval& I, unsigned r_bins,
                                       unsigned theta_samples, const std::string& id = "");
DistributionReport distribution_report(const Map& phi, const HorizontalInterval& I, unsigned r_bins,
                                       unsigned theta_samples, const std::string& id = "");

struct MonteCarloCheck {
  double exact = 0;  // fraction of I
  double estimate = 0;
  double stderr_ = 0;
  double z = 0;
  unsigned points = 0;
};
MonteCarloCheck monte_carlo_measure(const SkewMap& f, const HorizontalInterval& I, const Real& lo, const Real& len,
                                    unsigned points, std::uint64_t seed);

// |z| <= limit, with one independent redraw when the first draw exceeds it
struct MonteCarloAgreement {
  MonteCarloCheck first;
  std::optional<MonteCarloCheck> redraw;
  bool agrees = false;
};
nlohmann::json to_json(const MonteCarloAgreement& a);
MonteCarloAgreement monte_carlo_agreement(const SkewMap& f, const HorizontalInterval& I, const Real& lo,
                                          const Real& len, unsigned points, std::uint64_t seed, double limit = 3);

// sampled elements of the stage-n partial decomposition, each with a
// distribution report and a Monte-Carlo cross-check
struct DistributionSampleOptions {
  unsigned elements = 50;
  unsigned branches = 4;  // 0 builds every branch
  unsigned r_bins = 64;
  unsigned theta_samples = 64;
  unsigned mc_points = 100000;
  std::uint64_t seed = 1;
};

struct SampledElement {
  PartitionElement element;
  Real r;
  DistributionReport report;
  Real lo, len;
  MonteCarloAgreement mc;
};

struct DistributionSample {
  unsigned stage = 0;
  BigInt m;
  PartialDecomposition partition;
  std::vector<SampledElement> rows;
  double epsilon_max = 0, gamma_max = 0, delta_max = 0, mc_abs_z_max = 0;
  double epsilon_bound = 0;  // 9 pi^2 / q_n
  double gamma_bound = 0;    // 1 / (n q_n)
  unsigned mc_points = 0, mc_redraws = 0, mc_disagreements = 0;
  Verdict verdict = Verdict::Unknown;
};
DistributionSample sample_distribution(const StageChain& chain, unsigned n, const DistributionSampleOptions& opt = {});
// fields of the CLI artifact
nlohmann::json to_json(const DistributionSample& s);
void write_distribution_csv(std::ostream& os, const DistributionSample& s);

struct Fn1 {
  std::function<double(double)> f, d1, d2;
};

struct StretchReport {
  double sup_d2 = 0;
  double inf_d1 = 0;
  double length = 0;
  double epsilon = 0;
  bool premise = false;
  double worst = 0;  // max over trials of |ratio - p| / p
  bool conclusion = false;
  bool counterexample = false;
  unsigned trials = 0;
};
nlohmann::json to_json(const StretchReport& r);

struct Discrepancy {
  double ratio = 0;  // lambda(I cap psi^-1(Jt)) / lambda(I)
  double p = 0;      // lambda(Jt) / lambda(J)
  double abs() const { return ratio > p ? ratio - p : p - ratio; }
};
Discrepancy stretch_discrepancy(const Fn1& psi, double a, double b, double jlo, double jhi);
StretchReport uniform_stretch_check(const Fn1& psi, double a, double b, double epsilon, unsigned trials,
                                    std::uint64_t seed = 1, unsigned samples = 4096);

struct Rect {
  double t0 = 0, t1 = 1, r0 = 0, r1 = 1;
  double measure() const { return (t1 - t0) * (r1 - r0); }
  bool contains(double t, double r) const { return t >= t0 && t < t1 && r >= r0 && r < r1; }
};
// grid^2 midpoints of A, or grid^2 uniform points of A when seeded
double cesaro_mixing_estimate(const Map& T, const Rect& A, const Rect& B, unsigned N, unsigned grid,
                              std::optional<std::uint64_t> seed = {});

// "P5 W H 255" graymap of the image of I, row 0 at r = 1
std::string render_pgm(const Map& phi, const HorizontalInterval& I, unsigned width, unsigned height,
                       unsigned samples);

}  // namespace aklab
