#include "aklab/exact_core.hpp"
#include "aklab/growth_gate.hpp"
#include "aklab/jet_norms.hpp"
#include "aklab/stretch_partition.hpp"
#include "aklab/strip_analytic.hpp"
#include "aklab/torus_dynamics.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

using namespace aklab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kUsage = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string seq;
  int toy = 0;
  std::string sigma = "1/4";
  std::string rho;
  std::string topology = "smooth";
  std::string check = "all";
  unsigned grid = 0;
  unsigned precision_bits = 0;
  std::uint64_t seed = 1;
  unsigned sample = 0;
  unsigned branches = 4;
  unsigned stage = 1;
  unsigned k = 3;
  unsigned width = 256;
  unsigned height = 256;
  std::string theta = "0.11";
  std::string length = "0.004";
  std::string r = "0.5";
  unsigned mc_points = 100000;
  int threshold_log2 = 30;
  std::string out = ".";
  std::string config;
};

json config_json(const RunConfig& c) {
  return {{"command", c.command},
          {"seq", c.seq},
          {"toy", c.toy},
          {"sigma", c.sigma},
          {"rho", c.rho},
          {"topology", c.topology},
          {"check", c.check},
          {"grid", c.grid},
          {"precision_bits", c.precision_bits},
          {"seed", c.seed},
          {"sample", c.sample},
          {"branches", c.branches},
          {"stage", c.stage},
          {"k", c.k},
          {"width", c.width},
          {"height", c.height},
          {"theta", c.theta},
          {"length", c.length},
          {"r", c.r},
          {"mc_points", c.mc_points},
          {"threshold_log2", c.threshold_log2}};
}

// keys a config file may set, with their JSON types
const std::map<std::string, json::value_t>& config_keys() {
  static const std::map<std::string, json::value_t> keys{
      {"seq", json::value_t::string},           {"toy", json::value_t::number_unsigned},
      {"sigma", json::value_t::string},         {"rho", json::value_t::string},
      {"topology", json::value_t::string},      {"check", json::value_t::string},
      {"grid", json::value_t::number_unsigned}, {"precision_bits", json::value_t::number_unsigned},
      {"seed", json::value_t::number_unsigned}, {"sample", json::value_t::number_unsigned},
      {"branches", json::value_t::number_unsigned}, {"stage", json::value_t::number_unsigned},
      {"k", json::value_t::number_unsigned},    {"width", json::value_t::number_unsigned},
      {"height", json::value_t::number_unsigned}, {"theta", json::value_t::string},
      {"length", json::value_t::string},        {"r", json::value_t::string},
      {"mc_points", json::value_t::number_unsigned}, {"threshold_log2", json::value_t::number_unsigned},
      {"out", json::value_t::string}};
  return keys;
}

void apply_config(RunConfig& c, const CLI::App& sub) {
  std::ifstream in(c.config);
  if (!in) throw UsageError("cannot read config " + c.config);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (auto& [key, val] : j.items()) {
    if (key == "command") {
      if (val != c.command) throw UsageError("config command does not match subcommand");
      continue;
    }
    auto it = config_keys().find(key);
    if (it == config_keys().end()) throw UsageError("unknown config key: " + key);
    bool num = it->second == json::value_t::number_unsigned;
    if (num ? !val.is_number_unsigned() : !val.is_string())
      throw UsageError("config key " + key + " must be " + (num ? "a non-negative integer" : "a string"));
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (sub.count(flag) > 0) continue;  // flags win
    if (key == "seq") c.seq = val;
    else if (key == "toy") c.toy = val;
    else if (key == "sigma") c.sigma = val;
    else if (key == "rho") c.rho = val;
    else if (key == "topology") c.topology = val;
    else if (key == "check") c.check = val;
    else if (key == "grid") c.grid = val;
    else if (key == "precision_bits") c.precision_bits = val;
    else if (key == "seed") c.seed = val;
    else if (key == "sample") c.sample = val;
    else if (key == "branches") c.branches = val;
    else if (key == "stage") c.stage = val;
    else if (key == "k") c.k = val;
    else if (key == "width") c.width = val;
    else if (key == "height") c.height = val;
    else if (key == "theta") c.theta = val;
    else if (key == "length") c.length = val;
    else if (key == "r") c.r = val;
    else if (key == "mc_points") c.mc_points = val;
    else if (key == "threshold_log2") c.threshold_log2 = val;
    else if (key == "out") c.out = val;
  }
}

struct Tally {
  bool fail = false, unknown = false;
  void add(Verdict v) {
    if (v == Verdict::Fail) fail = true;
    if (v == Verdict::Unknown) unknown = true;
  }
  void add(bool ok) { add(ok ? Verdict::Pass : Verdict::Fail); }
  Verdict overall() const { return fail ? Verdict::Fail : unknown ? Verdict::Unknown : Verdict::Pass; }
};

int status_of(Verdict v) { return v == Verdict::Pass ? 0 : v == Verdict::Fail ? 1 : 2; }

Rational number(const std::string& s, const char* what) {
  try {
    return parse_number(s);
  } catch (const std::exception&) {
    throw UsageError(std::string("bad ") + what + ": " + s);
  }
}

StageChain chain_of(const RunConfig& c) {
  if (c.toy != 0) {
    if (!c.seq.empty()) throw UsageError("give either --toy or --seq");
    return toy_instance(c.toy);
  }
  if (c.seq.empty()) throw UsageError("--seq or --toy is required");
  Sequence s;
  try {
    s = parse_sequence(c.seq);
  } catch (const std::exception& e) {
    throw UsageError(std::string("bad --seq: ") + e.what());
  }
  std::vector<BigInt> qs;
  for (const auto& e : s) {
    auto v = e.materialize(1e5);
    if (!v) throw UsageError("sequence entry too large to build a chain: " + e.str());
    qs.push_back(*v);
  }
  return build_chain(qs, number(c.sigma, "--sigma"));
}

void need_pair(const StageChain& chain, unsigned n) {
  if (n < 1 || n >= chain.size())
    throw UsageError("--stage must lie in 1.." + std::to_string(chain.size() - 1));
}

json bigint_json(const BigInt& v) {
  if (v >= std::numeric_limits<long long>::min() && v <= std::numeric_limits<long long>::max())
    return v.convert_to<long long>();
  return to_string(v);
}

std::string rational_str(const Rational& r) { return r.reduced().str(); }

std::string real_str(const Real& x) { return format_real(x, 20); }

json lm_json(const LogMagnitude& m) {
  PrecisionScope ps(128);
  return {{"log_lo", m.log_lo().str(17)}, {"log_hi", m.log_hi().str(17)}};
}

struct Output {
  json artifact;
  std::optional<std::string> csv;
  std::optional<std::string> binary;  // render image
  std::vector<std::string> summary_keys;  // JSON pointers
};

std::string render_summary(const json& j, const std::vector<std::string>& keys) {
  std::ostringstream os;
  os << j.at("command").get<std::string>() << ": " << j.at("verdict").get<std::string>() << '\n';
  for (const auto& k : keys) {
    json::json_pointer p(k);
    if (!j.contains(p)) continue;
    const json& v = j.at(p);
    os << "  " << k.substr(1) << " = " << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

Output cmd_validate(const RunConfig& c) {
  if (c.seq.empty()) throw UsageError("validate needs --seq");
  Sequence seq;
  try {
    seq = parse_sequence(c.seq);
  } catch (const std::exception& e) {
    throw UsageError(std::string("bad --seq: ") + e.what());
  }
  if (c.topology != "smooth" && c.topology != "analytic") throw UsageError("--topology is smooth or analytic");
  if (c.check != "all" && c.check != "theorem" && c.check != "corollary")
    throw UsageError("--check is all, theorem or corollary");
  GateOptions g;
  if (c.precision_bits) g.bits = c.precision_bits;
  Output o;
  json& j = o.artifact;
  json seq_j = json::array();
  for (const auto& e : seq) seq_j.push_back(e.str());
  j["sequence"] = seq_j;
  j["topology"] = c.topology;
  Tally t;
  auto run = [&](const char* name, const std::vector<ConditionReport>& rs) {
    json arr = json::array();
    for (const auto& r : rs) {
      arr.push_back(to_json(r));
      t.add(r.verdict);
    }
    j[name] = arr;
    j[std::string(name) + "_verdict"] = to_string(overall(rs));
    o.summary_keys.push_back(std::string("/") + name + "_verdict");
  };
  if (c.topology == "smooth") {
    if (c.check != "corollary") run("theorem", check_smooth_theorem(seq, g));
    if (c.check != "theorem") run("corollary", check_smooth_corollary(seq, g));
  } else {
    if (c.rho.empty()) throw UsageError("analytic validation needs --rho");
    Rational rho = number(c.rho, "--rho");
    j["rho"] = rational_str(rho);
    if (c.check != "corollary") run("theorem", check_analytic_theorem(seq, rho, g));
    if (c.check != "theorem") run("corollary", check_analytic_corollary(seq, rho, g));
  }
  j["verdict"] = to_string(t.overall());
  return o;
}

Output cmd_build(const RunConfig& c) {
  StageChain chain = chain_of(c);
  Output o;
  o.artifact["chain"] = chain_to_json(chain);
  o.artifact["stages"] = chain.size();
  o.artifact["verdict"] = "PASS";
  o.summary_keys = {"/stages"};
  return o;
}

Output cmd_mix_index(const RunConfig& c) {
  StageChain chain = chain_of(c);
  need_pair(chain, c.stage);
  const auto& cur = chain[c.stage - 1];
  const auto& next = chain[c.stage];
  MixingIndex mi = find_mixing_index(cur, next);
  Rational bound(cur.q, next.q);
  Output o;
  json& j = o.artifact;
  j["stage"] = c.stage;
  j["m"] = bigint_json(mi.m);
  j["delta"] = rational_str(mi.delta);
  j["delta_bound"] = rational_str(bound);
  bool ok = abs(mi.delta) <= bound;
  j["delta_within_bound"] = ok;
  j["verdict"] = to_string(ok ? Verdict::Pass : Verdict::Fail);
  o.summary_keys = {"/stage", "/m", "/delta", "/delta_bound"};
  return o;
}

Output cmd_psi_check(const RunConfig& c) {
  StageChain chain = chain_of(c);
  need_pair(chain, c.stage);
  MixingIndex mi = find_mixing_index(chain[c.stage - 1], chain[c.stage]);
  unsigned grid = c.grid ? c.grid : 1000000;
  PsiBoundsReport r = check_psi_bounds(chain[c.stage - 1], chain[c.stage], mi.m, grid);
  Output o;
  json& j = o.artifact;
  j["stage"] = c.stage;
  j["m"] = bigint_json(mi.m);
  j["report"] = to_json(r);
  Tally t;
  for (Verdict v : {r.dpsi, r.d2psi, r.dsigma, r.d2sigma}) t.add(v);
  Verdict v = t.overall();
  if (r.diagnostic && v == Verdict::Pass) v = Verdict::Unknown;
  j["verdict"] = to_string(v);
  o.summary_keys = {"/report/outside_points", "/report/inf_dpsi",   "/report/bound_dpsi", "/report/sup_d2psi",
                    "/report/bound_d2psi",    "/report/sup_dsigma", "/report/sup_d2sigma", "/report/dpsi",
                    "/report/d2psi",          "/report/dsigma",     "/report/d2sigma",    "/report/diagnostic",
                    "/report/vacuous"};
  return o;
}

PartitionOptions partition_options(const RunConfig& c, const BigInt& q, unsigned sample) {
  PartitionOptions p;
  p.seed = c.seed;
  if (sample)
    p.branch_sample = sample;
  else if (q >= 50)
    p.branch_sample = 1000;
  return p;
}

Output cmd_partition(const RunConfig& c) {
  StageChain chain = chain_of(c);
  need_pair(chain, c.stage);
  const auto& cur = chain[c.stage - 1];
  MixingIndex mi = find_mixing_index(cur, chain[c.stage]);
  PartialDecomposition d = build_partition(cur, chain[c.stage], mi.m, partition_options(c, cur.q, c.sample));
  PartitionCheck chk = check_partition(d, 100, c.seed);
  Output o;
  json& j = o.artifact;
  j["stage"] = c.stage;
  j["m"] = bigint_json(mi.m);
  j["partition"] = to_json(d, false);
  j["check"] = to_json(chk);
  Tally t;
  for (bool b : {chk.lengths_ok, chk.disjoint, chk.avoids_forbidden, chk.images_ok, chk.mass_ok}) t.add(b);
  j["verdict"] = to_string(t.overall());
  std::ostringstream csv;
  csv << "left,length,level,branch\n";
  for (const auto& e : d.elements)
    csv << real_str(e.hat.left) << ',' << real_str(e.hat.length) << ',' << e.level << ',' << e.branch << '\n';
  o.csv = csv.str();
  o.summary_keys = {"/partition/branches_total", "/partition/branches_built", "/partition/intervals",
                    "/partition/total_mass",     "/partition/mass_stderr",    "/partition/max_length",
                    "/check/mass_bound",         "/check/lengths_ok",         "/check/disjoint",
                    "/check/avoids_forbidden",   "/check/images_ok",          "/check/mass_ok"};
  return o;
}

Output cmd_distribute(const RunConfig& c) {
  StageChain chain = chain_of(c);
  need_pair(chain, c.stage);
  DistributionSampleOptions opt;
  if (c.sample) opt.elements = c.sample;
  if (c.grid) opt.r_bins = c.grid;
  opt.branches = c.branches;
  opt.mc_points = c.mc_points;
  opt.seed = c.seed;
  DistributionSample s = sample_distribution(chain, c.stage, opt);
  Output o;
  o.artifact = to_json(s);
  o.artifact["m"] = bigint_json(s.m);
  o.artifact["verdict"] = to_string(s.verdict);
  std::ostringstream csv;
  write_distribution_csv(csv, s);
  o.csv = csv.str();
  o.summary_keys = {"/element_count", "/epsilon_max",  "/epsilon_bound", "/gamma_max",       "/gamma_bound",
                    "/delta_max",     "/mc_abs_z_max", "/mc_redraws",    "/mc_disagreements"};
  return o;
}

Output cmd_norms(const RunConfig& c) {
  StageChain chain = chain_of(c);
  if (c.stage < 1 || c.stage > chain.size()) throw UsageError("--stage out of range");
  if (c.k > 4) throw UsageError("--k must be at most 4");
  unsigned grid = c.grid ? c.grid : 128;
  std::vector<NormTriple> rows;
  for (unsigned k = 0; k <= c.k; ++k) rows.push_back(check_hn_norm_bound(chain[c.stage - 1], k, grid));
  Output o;
  json& j = o.artifact;
  j["stage"] = c.stage;
  json arr = json::array();
  Tally t;
  for (const auto& r : rows) {
    json x{{"map", r.id}, {"k", r.k}, {"value", r.value}, {"satisfied", r.satisfied}};
    if (r.bound) x["bound"] = lm_json(*r.bound);
    if (!r.note.empty()) x["note"] = r.note;
    arr.push_back(x);
    t.add(r.satisfied);
  }
  j["norms"] = arr;
  j["verdict"] = to_string(t.overall());
  std::ostringstream csv;
  write_norm_csv(csv, rows);
  o.csv = csv.str();
  for (unsigned k = 0; k <= c.k; ++k) {
    o.summary_keys.push_back("/norms/" + std::to_string(k) + "/value");
    o.summary_keys.push_back("/norms/" + std::to_string(k) + "/satisfied");
  }
  return o;
}

Output cmd_strip(const RunConfig& c) {
  StageChain chain = chain_of(c);
  if (c.stage < 1 || c.stage > chain.size()) throw UsageError("--stage out of range");
  Rational rho = number(c.rho.empty() ? "0.1" : c.rho, "--rho");
  double rho_d = to_double(rho);
  Output o;
  json& j = o.artifact;
  j["rho"] = rational_str(rho);
  j["stage"] = c.stage;
  Tally t;
  RhoChain rc = rho_recursion(chain, rho);
  j["rho_chain"] = to_json(rc);
  for (size_t n = 1; n < rc.plus_one.size(); ++n) t.add(rc.plus_one[n]);
  const auto& s = chain[c.stage - 1];
  json hb = json::array();
  for (const auto& r : check_hn_inverse_strip_bound(s, rho_d)) {
    hb.push_back(to_json(r));
    t.add(r.verdict);
  }
  j["h_inverse"] = hb;
  if (c.stage < chain.size()) {
    json tm = json::array();
    BigInt top = s.q < 16 ? s.q : BigInt(16);
    for (BigInt m = 1; m <= top; ++m) {
      TmReport r = tm_bound_check(s, chain[c.stage], m, rho_d);
      json x = to_json(r);
      x["m"] = bigint_json(m);
      tm.push_back(x);
      if (r.in_regime) t.add(r.verdict);
    }
    j["tm"] = tm;
  }
  j["verdict"] = to_string(t.overall());
  o.summary_keys = {"/rho", "/h_inverse/0/verdict", "/h_inverse/1/verdict"};
  return o;
}

Output cmd_rigidity(const RunConfig& c) {
  StageChain chain = chain_of(c);
  need_pair(chain, c.stage);
  unsigned grid = c.grid ? c.grid : 256;
  Map f = fn_map(chain, c.stage);
  Map p = power_map(f, chain[c.stage].qtilde);
  MetricEstimate e = metric_d0_estimate(p, identity_map(), grid);
  PrecisionScope ps(128);
  Real thr = boost::multiprecision::ldexp(Real(1), -c.threshold_log2);
  Output o;
  json& j = o.artifact;
  j["stage"] = c.stage;
  j["power"] = bigint_json(chain[c.stage].qtilde);
  j["estimate"] = to_json(e);
  j["max_displacement"] = real_str(e.value);
  j["threshold"] = real_str(thr);
  j["verdict"] = to_string(e.value <= thr ? Verdict::Pass : Verdict::Fail);
  std::ostringstream csv;
  sweep_csv(csv, p, identity_map(), std::min(grid, 64u));
  o.csv = csv.str();
  o.summary_keys = {"/power", "/max_displacement", "/threshold"};
  return o;
}

Output cmd_render(const RunConfig& c) {
  StageChain chain = chain_of(c);
  need_pair(chain, c.stage);
  const auto& cur = chain[c.stage - 1];
  MixingIndex mi = find_mixing_index(cur, chain[c.stage]);
  Map phi = stretch_map(cur, frac(Rational(mi.m, 1) * chain[c.stage].alpha));
  PrecisionScope ps(required_precision(phi, 53));
  Rational th = number(c.theta, "--theta"), len = number(c.length, "--length"), r = number(c.r, "--r");
  HorizontalInterval I{to_real(th), to_real(len), to_real(r)};
  unsigned samples = c.sample ? c.sample : 20000;
  std::string img = render_pgm(phi, I, c.width, c.height, samples);
  size_t head = img.find('\n') + 1, lit = 0;
  for (size_t i = head; i < img.size(); ++i) lit += img[i] != 0;
  Output o;
  json& j = o.artifact;
  j["stage"] = c.stage;
  j["image"] = "render.pgm";
  j["width"] = c.width;
  j["height"] = c.height;
  j["samples"] = samples;
  j["lit_cells"] = lit;
  j["interval"] = {{"theta", rational_str(th)}, {"length", rational_str(len)}, {"r", rational_str(r)}};
  j["verdict"] = "PASS";
  o.binary = img;
  o.summary_keys = {"/image", "/width", "/height", "/lit_cells"};
  return o;
}

void write_file(const fs::path& p, const std::string& data) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << data;
}

std::string timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

int emit(const RunConfig& c, Output o, int argc, char** argv) {
  json& j = o.artifact;
  j["command"] = c.command;
  j["config"] = config_json(c);
  fs::path dir(c.out);
  fs::create_directories(dir);
  write_file(dir / (c.command + ".json"), j.dump(2) + "\n");
  if (o.csv) write_file(dir / (c.command + ".csv"), *o.csv);
  if (o.binary) write_file(dir / "render.pgm", *o.binary);
  std::string summary = render_summary(j, o.summary_keys);
  write_file(dir / (c.command + ".summary.txt"), summary);
  json args = json::array();
  for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
  json meta{{"command", c.command}, {"timestamp", timestamp()}, {"threads", worker_count()}, {"argv", args}};
  write_file(dir / (c.command + ".meta.json"), meta.dump(2) + "\n");
  std::cout << summary;
  Verdict v = j["verdict"] == "PASS" ? Verdict::Pass : j["verdict"] == "FAIL" ? Verdict::Fail : Verdict::Unknown;
  return status_of(v);
}

}  // namespace

int main(int argc, char** argv) {
  init_mpfr_range();
  CLI::App app{"stage construction and checking tools"};
  app.require_subcommand(1);
  RunConfig cfg;

  using Fn = Output (*)(const RunConfig&);
  const std::vector<std::tuple<std::string, std::string, Fn>> cmds{
      {"validate", "growth conditions of a q~ sequence", cmd_validate},
      {"build", "stage chain as JSON", cmd_build},
      {"mix-index", "mixing index m_n and Delta_n", cmd_mix_index},
      {"psi-check", "derivative bounds of psi_n outside B_n", cmd_psi_check},
      {"partition", "unit-height partial decomposition", cmd_partition},
      {"distribute", "(gamma, delta, epsilon) distribution of sampled elements", cmd_distribute},
      {"norms", "|||h_n|||_k against the closed-form bound", cmd_norms},
      {"strip", "strip norms, rho recursion and T_m", cmd_strip},
      {"rigidity", "d_0(f_n^{q~_{n+1}}, id) sweep", cmd_rigidity},
      {"render", "graymap of Phi_n(I)", cmd_render}};

  std::map<CLI::App*, Fn> handlers;
  for (const auto& [name, help, fn] : cmds) {
    CLI::App* sub = app.add_subcommand(name, help);
    handlers[sub] = fn;
    sub->add_option("--seq", cfg.seq, "comma separated q~ entries, towers as a^b");
    sub->add_option("--toy", cfg.toy, "canonical instance 1..4")->check(CLI::Range(1, 4));
    sub->add_option("--sigma", cfg.sigma, "shear exponent");
    sub->add_option("--rho", cfg.rho, "strip width, decimal or a/b");
    sub->add_option("--topology", cfg.topology, "smooth or analytic");
    sub->add_option("--check", cfg.check, "all, theorem or corollary");
    sub->add_option("--grid", cfg.grid, "grid resolution (command default when 0)");
    sub->add_option("--precision-bits", cfg.precision_bits, "working precision override for validation");
    sub->add_option("--seed", cfg.seed, "sampling seed");
    sub->add_option("--sample", cfg.sample, "sample size");
    sub->add_option("--branches", cfg.branches, "branches built for distribute");
    sub->add_option("--stage", cfg.stage, "stage n");
    sub->add_option("--k", cfg.k, "highest derivative order");
    sub->add_option("--width", cfg.width, "image width");
    sub->add_option("--height", cfg.height, "image height");
    sub->add_option("--theta", cfg.theta, "interval left end");
    sub->add_option("--length", cfg.length, "interval length");
    sub->add_option("--r", cfg.r, "interval height");
    sub->add_option("--mc-points", cfg.mc_points, "Monte-Carlo points per element");
    sub->add_option("--threshold-log2", cfg.threshold_log2, "rigidity threshold 2^-t");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--config", cfg.config, "JSON run configuration");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  for (auto& [sub, fn] : handlers) {
    if (!sub->parsed()) continue;
    cfg.command = sub->get_name();
    try {
      if (!cfg.config.empty()) apply_config(cfg, *sub);
      return emit(cfg, fn(cfg), argc, argv);
    } catch (const UsageError& e) {
      std::cerr << "usage error: " << e.what() << '\n';
      return kUsage;
    } catch (const std::invalid_argument& e) {
      std::cerr << "invalid input: " << e.what() << '\n';
      return kUsage;
    } catch (const PrecisionError& e) {
      std::cerr << "precision: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kUsage;
    }
  }
  return kUsage;
}
