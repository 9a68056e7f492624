#pragma once

#include "aklab/logmag.hpp"
#include "aklab/torus_dynamics.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace aklab {

constexpr int kMaxJetOrder = 4;

struct Jet {
  int order = 0;
  Tps<Real> theta;  // [F]_1
  Tps<Real> r;      // [F]_2
  TorusPoint base;

  const Tps<Real>& component(int i) const { return i == 0 ? theta : r; }
};

Jet jet_eval(const Map& m, const TorusPoint& base, int order);

struct NormTriple {
  std::string id;
  unsigned k = 0;
  double value = 0;
  std::optional<LogMagnitude> bound;
  bool satisfied = true;
  bool diagnostic = false;  // a premise of the bound failed
  std::string note;
};

// |||f|||_k over a grid: sup of |D_a [F]_i| for 1 <= |a| <= k over f and its
// inverse, together with the order-0 term (image coordinates in [0,1)).
double norm_value(const Map& f, unsigned k, unsigned grid, bool with_inverse = true);
// max_{i,j} sup |D_j [F]_i|
double df_norm(const Map& f, unsigned grid);

NormTriple norm_estimate(const Map& f, unsigned k, unsigned grid);
// (2 pi n q_n^2)^(k+1)
LogMagnitude hn_norm_bound(const StageParams& s, unsigned k);
NormTriple check_hn_norm_bound(const StageParams& s, unsigned k, unsigned grid = 1024);

constexpr double kGridInflation = 1.05;
// 4 x the highest cosine frequency in the map; coarser grids can land on zeros
unsigned resolving_grid(const Map& m);
// diagnostic when the grid is coarser than resolving_grid of g or h
NormTriple check_composition_bound(const Map& g, const Map& h, unsigned k, unsigned grid = 256);

// ((k+2)!)^((k+2)^(n-2)) (2 pi n q_n)^((k+2)(k+1)^(n-1)(n+1)), n >= 2
LogMagnitude Hn_norm_bound(unsigned n, const BigInt& q_n, unsigned k);
// |||H_n|||_{k+1} against the bound; diagnostic when some q_{j+1} < 2 pi j q_j^2
NormTriple check_Hn_bound(const StageChain& chain, unsigned n, unsigned k, unsigned grid = 256);

NormTriple check_conjugation_bound(const Map& h, const Rational& alpha, const Rational& beta, unsigned k,
                                   unsigned grid = 64);

// Terms of D_a[g o h]_i in two variables generated by the product and chain
// rules, before and after merging equal terms, for |a| = k.
struct ChainRuleCount {
  unsigned k = 0;
  size_t generated = 0;
  size_t distinct = 0;
};
ChainRuleCount chain_rule_terms(unsigned k);

void write_norm_csv(std::ostream& os, const std::vector<NormTriple>& rows);

}  // namespace aklab
