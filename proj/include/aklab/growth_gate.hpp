#pragma once

#include "aklab/exact_core.hpp"
#include "aklab/logmag.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aklab {

// One entry of a q~ sequence: an explicit integer, a right-associative
// power tower a^b^c, or an enclosure that only exists in log form.
struct SeqEntry {
  enum class Kind { Exact, Tower, Log };
  Kind kind = Kind::Exact;
  BigInt value;
  std::vector<BigInt> tower;
  LogMagnitude log;

  static SeqEntry exact(const BigInt& v);
  static SeqEntry power(std::vector<BigInt> parts);
  static SeqEntry magnitude(const LogMagnitude& m);
  static SeqEntry parse(const std::string& s);

  LogMagnitude mag() const;
  // explicit value when it has at most max_digits decimal digits
  std::optional<BigInt> materialize(double max_digits = 1e6) const;
  double log10_estimate() const;
  std::string str() const;
};

using Sequence = std::vector<SeqEntry>;
Sequence parse_sequence(const std::string& csv);

struct ConditionReport {
  std::string condition;
  unsigned stage = 0;
  Verdict verdict = Verdict::Unknown;
  SignedLix margin_lo;  // bounds on log(LHS/RHS)
  SignedLix margin_hi;
  bool exact = false;
  std::string note;
};

nlohmann::json to_json(const ConditionReport& r);
Verdict overall(const std::vector<ConditionReport>& rs);

struct GateOptions {
  unsigned bits = 256;
  bool refine = true;        // retry UNKNOWN at doubled precision
  unsigned max_bits = 4096;
  bool force_log = false;    // skip the exact big-integer path
};

LogMagnitude eval_phi1(unsigned n);

std::vector<ConditionReport> check_smooth_theorem(const Sequence& seq, const GateOptions& opt = {});
std::vector<ConditionReport> check_smooth_corollary(const Sequence& seq, const GateOptions& opt = {});
// q~_n >= 4 pi n (n+2)^(n+2)
ConditionReport smooth_corollary_helper(const SeqEntry& qt, unsigned n, const GateOptions& opt = {});

std::vector<ConditionReport> check_analytic_theorem(const Sequence& seq, const Rational& rho,
                                                    const GateOptions& opt = {});
std::vector<ConditionReport> check_analytic_corollary(const Sequence& seq, const Rational& rho,
                                                      const GateOptions& opt = {});
// q~_n >= 2^(n+6) n^2 pi^2
ConditionReport analytic_corollary_helper(const SeqEntry& qt, unsigned n, const GateOptions& opt = {});

// Upper bounds indexed by stage n.
struct SmoothNormData {
  std::map<unsigned, LogMagnitude> Hn;      // |||H_n|||_{n+1}
  std::map<unsigned, LogMagnitude> DHprev;  // ||DH_{n-1}||_0
  std::string source;
};
SmoothNormData closed_form_smooth_norms(const StageChain& chain);

struct StripData {
  std::map<unsigned, LogMagnitude> rho_tilde;  // rho~_n, n >= 0
  std::map<unsigned, LogMagnitude> dh;         // ||Dh_k||_{rho_k + 1}, k >= 1
  std::string source;
};

std::vector<ConditionReport> check_stage_conditions_smooth(const StageChain& chain,
                                                           const SmoothNormData& norms,
                                                           const GateOptions& opt = {});
std::vector<ConditionReport> check_stage_conditions_analytic(const StageChain& chain,
                                                             const StripData& strip,
                                                             const GateOptions& opt = {});

}  // namespace aklab
