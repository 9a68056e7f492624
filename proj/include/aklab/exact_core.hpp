#pragma once

#include "aklab/numeric.hpp"

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <vector>

namespace aklab {

struct StageParams {
  unsigned n = 1;
  Rational sigma;
  BigInt p;
  BigInt q;
  BigInt qtilde;
  std::optional<BigInt> a_prev;  // a_{n-1}; absent for n = 1
  Rational alpha;
};

using StageChain = std::vector<StageParams>;

struct MixingIndex {
  BigInt m;
  Rational delta;
};

class NoMixingIndex : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

StageParams make_initial_stage(const BigInt& qtilde_1, const Rational& sigma);
StageParams next_stage(const StageParams& prev, const BigInt& qtilde_next);
StageChain build_chain(const std::vector<BigInt>& qtildes, const Rational& sigma);

// m with m^b <= n^b q^a < (m+1)^b, sigma = a/b
BigInt floor_power(const BigInt& n, const BigInt& q, const Rational& sigma);
// [n q_n^sigma] of a stage
BigInt shear(const StageParams& s);

MixingIndex find_mixing_index(const StageParams& cur, const StageParams& next);
MixingIndex find_mixing_index_scan(const StageParams& cur, const StageParams& next);
MixingIndex find_mixing_index_window(const StageParams& cur, const StageParams& next);
// Delta_n for a given m, in (-1/(2q_n), 1/(2q_n)]
Rational mixing_delta(const StageParams& cur, const StageParams& next, const BigInt& m);
bool mixing_condition(const StageParams& cur, const StageParams& next, const BigInt& m);

nlohmann::json to_json(const Rational& r);
nlohmann::json to_json(const StageParams& s);
nlohmann::json chain_to_json(const StageChain& c);
Rational rational_from_json(const nlohmann::json& j);
StageParams stage_from_json(const nlohmann::json& j);

// T1..T4 canonical toy chains
StageChain toy_instance(int id);

}  // namespace aklab
