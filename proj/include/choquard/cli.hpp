#pragma once

#include "choquard/run.hpp"
#include "choquard/suite.hpp"

#include "json.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace choquard::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

enum ExitCode { ok = 0, invalid_config = 1, ground_failed = 2, run_failed = 3, check_failed = 4 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- flat key = value format ---------------------------------------------------

using KeyValues = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline KeyValues parse_kv(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    const auto k = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
    if (k.empty()) throw ConfigError("line " + std::to_string(n) + ": empty key");
    if (!kv.emplace(k, v).second) throw ConfigError("line " + std::to_string(n) + ": duplicate key " + k);
  }
  return kv;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + p.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: " + v);
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x)) throw ConfigError(key + ": not an integer: " + v);
  return static_cast<long long>(x);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": not a boolean: " + v);
}

inline double round12(double x) { return std::round(x * 1e12) / 1e12; }

// "a,b,c" or "lo:hi:step"; empty string gives an empty list
inline std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (v.empty()) return out;
  if (v.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(trim(p));
    if (parts.size() != 3) throw ConfigError(key + ": range must be lo:hi:step");
    const double lo = to_double(key, parts[0]), hi = to_double(key, parts[1]), st = to_double(key, parts[2]);
    if (!(st > 0) || hi < lo) throw ConfigError(key + ": bad range");
    const long long n = std::llround(std::floor((hi - lo) / st + 1e-9)) + 1;
    for (long long i = 0; i < n; ++i) out.push_back(round12(lo + i * st));
    return out;
  }
  std::stringstream ss(v);
  std::string p;
  while (std::getline(ss, p, ',')) out.push_back(to_double(key, trim(p)));
  return out;
}

// ---- run configuration ------------------------------------------------------------

struct InitConfig {
  std::string kind = "groundstate_scaled";  // gaussian | ring | groundstate_scaled
  double amplitude = 1, width = 1, radius = 3, c = 0.5;
};

struct RunConfig {
  ModelParams model;
  int M = 64;
  double L = 16;
  InitConfig init;
  EvolveConfig evolve;
  RunOptions diag;
  std::vector<double> sweep_c;
  unsigned long long seed = 0;
  std::string out_dir = "run";
  std::vector<std::string> formats{"csv", "json"};
};

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_num(v[i]);
  return s;
}

// every key with its effective value; the manifest echo and the parser share this table
inline KeyValues config_echo(const RunConfig& c) {
  const auto& e = c.evolve;
  const auto& d = c.diag;
  std::string formats;
  for (std::size_t i = 0; i < c.formats.size(); ++i) formats += (i ? "," : "") + c.formats[i];
  return {
      {"model.N", std::to_string(c.model.N)},
      {"model.alpha", fmt_num(c.model.alpha)},
      {"model.b", fmt_num(c.model.b)},
      {"model.p", fmt_num(c.model.p)},
      {"grid.M", std::to_string(c.M)},
      {"grid.L", fmt_num(c.L)},
      {"init.kind", c.init.kind},
      {"init.amplitude", fmt_num(c.init.amplitude)},
      {"init.width", fmt_num(c.init.width)},
      {"init.radius", fmt_num(c.init.radius)},
      {"init.c", fmt_num(c.init.c)},
      {"evolve.dt", fmt_num(e.dt)},
      {"evolve.t_end", fmt_num(e.t_end)},
      {"evolve.output_stride", std::to_string(e.output_stride)},
      {"evolve.snapshot_stride", std::to_string(e.snapshot_stride)},
      {"evolve.linear_only", e.linear_only ? "true" : "false"},
      {"evolve.overflow_guard", fmt_num(e.overflow_guard)},
      {"evolve.adapt.enabled", e.adapt.enabled ? "true" : "false"},
      {"evolve.adapt.trigger", fmt_num(e.adapt.grad_growth_trigger)},
      {"evolve.adapt.dt_min", fmt_num(e.adapt.dt_min)},
      {"evolve.absorb.enabled", e.absorb.enabled ? "true" : "false"},
      {"evolve.absorb.width", fmt_num(e.absorb.width)},
      {"evolve.absorb.strength", fmt_num(e.absorb.strength)},
      {"diagnostics.R_weight", fmt_num(d.R_weight)},
      {"diagnostics.R_crit", fmt_num(d.R_crit)},
      {"diagnostics.R_list", fmt_list(d.R_list)},
      {"diagnostics.evacuation_t0", fmt_num(d.evacuation_t0)},
      {"diagnostics.thresholds.eps_crit_frac", fmt_num(d.thresholds.eps_crit_frac)},
      {"diagnostics.thresholds.grad_sup_max", fmt_num(d.thresholds.grad_sup_max)},
      {"diagnostics.thresholds.tail_fraction", fmt_num(d.thresholds.tail_fraction)},
      {"diagnostics.thresholds.decay_tolerance", fmt_num(d.thresholds.decay_tolerance)},
      {"sweep.c", fmt_list(c.sweep_c)},
      {"seed", std::to_string(c.seed)},
      {"output.dir", c.out_dir},
      {"output.formats", formats},
  };
}

inline RunConfig load_config(const KeyValues& kv) {
  RunConfig c;
  const auto known = config_echo(c);
  for (const auto& [k, v] : kv)
    if (!known.count(k)) throw ConfigError("unknown key: " + k);
  auto get = [&](const std::string& k) -> const std::string* {
    auto it = kv.find(k);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto num = [&](const std::string& k, double& dst) {
    if (auto v = get(k)) dst = to_double(k, *v);
  };
  auto boolean = [&](const std::string& k, bool& dst) {
    if (auto v = get(k)) dst = to_bool(k, *v);
  };
  if (auto v = get("model.N")) c.model.N = static_cast<int>(to_int("model.N", *v));
  num("model.alpha", c.model.alpha);
  num("model.b", c.model.b);
  num("model.p", c.model.p);
  if (auto v = get("grid.M")) c.M = static_cast<int>(to_int("grid.M", *v));
  num("grid.L", c.L);
  if (auto v = get("init.kind")) c.init.kind = *v;
  if (c.init.kind != "gaussian" && c.init.kind != "ring" && c.init.kind != "groundstate_scaled")
    throw ConfigError("init.kind: expected gaussian, ring or groundstate_scaled");
  num("init.amplitude", c.init.amplitude);
  num("init.width", c.init.width);
  num("init.radius", c.init.radius);
  num("init.c", c.init.c);
  auto& e = c.evolve;
  num("evolve.dt", e.dt);
  num("evolve.t_end", e.t_end);
  if (auto v = get("evolve.output_stride")) e.output_stride = static_cast<int>(to_int("evolve.output_stride", *v));
  if (auto v = get("evolve.snapshot_stride")) e.snapshot_stride = static_cast<int>(to_int("evolve.snapshot_stride", *v));
  boolean("evolve.linear_only", e.linear_only);
  num("evolve.overflow_guard", e.overflow_guard);
  boolean("evolve.adapt.enabled", e.adapt.enabled);
  num("evolve.adapt.trigger", e.adapt.grad_growth_trigger);
  num("evolve.adapt.dt_min", e.adapt.dt_min);
  boolean("evolve.absorb.enabled", e.absorb.enabled);
  num("evolve.absorb.width", e.absorb.width);
  num("evolve.absorb.strength", e.absorb.strength);
  auto& d = c.diag;
  num("diagnostics.R_weight", d.R_weight);
  if (auto v = get("diagnostics.R_crit")) d.R_crit = *v == "nan" ? NAN : to_double("diagnostics.R_crit", *v);
  if (auto v = get("diagnostics.R_list")) d.R_list = to_list("diagnostics.R_list", *v);
  num("diagnostics.evacuation_t0", d.evacuation_t0);
  num("diagnostics.thresholds.eps_crit_frac", d.thresholds.eps_crit_frac);
  num("diagnostics.thresholds.grad_sup_max", d.thresholds.grad_sup_max);
  num("diagnostics.thresholds.tail_fraction", d.thresholds.tail_fraction);
  num("diagnostics.thresholds.decay_tolerance", d.thresholds.decay_tolerance);
  if (auto v = get("sweep.c")) c.sweep_c = to_list("sweep.c", *v);
  if (auto v = get("seed")) c.seed = static_cast<unsigned long long>(to_int("seed", *v));
  if (auto v = get("output.dir")) c.out_dir = *v;
  if (auto v = get("output.formats")) {
    c.formats.clear();
    std::stringstream ss(*v);
    std::string f;
    while (std::getline(ss, f, ',')) c.formats.push_back(trim(f));
  }
  if (!(e.dt > 0) || !(e.t_end >= 0) || e.output_stride < 1) throw ConfigError("evolve: need dt > 0, t_end >= 0, output_stride >= 1");
  if (d.thresholds.tail_fraction < 0.25 || d.thresholds.tail_fraction > 1) throw ConfigError("diagnostics.thresholds.tail_fraction must be in [0.25, 1]");
  return c;
}

inline RunConfig read_config(const fs::path& p) { return load_config(parse_kv(read_file(p))); }

// ---- files ------------------------------------------------------------------------

// write to a sibling temporary and rename over the target
inline void write_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string sha1_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 || EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha1 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream s;
  for (unsigned int i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return s.str();
}

// hash of "blob <size>\0<content>", as git computes it
inline std::string git_blob_hash(const std::string& bytes) { return sha1_hex("blob " + std::to_string(bytes.size()) + '\0' + bytes); }

inline json jnum(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

// ---- outputs ------------------------------------------------------------------------

inline std::string trajectory_csv(const std::vector<DiagnosticsRecord>& rows) {
  std::string s = csv_header();
  s += '\n';
  for (const auto& r : rows) s += csv_row(r) + '\n';
  return s;
}

inline std::string local_norms_csv(const RunResult& r, const std::vector<double>& R_list) {
  std::string s = "t,ball_sqrt_t";
  for (double R : R_list) s += ",lr_R" + fmt_num(R);
  s += '\n';
  for (const auto& row : r.local) {
    s += fmt_num(row.t) + ',' + fmt_num(row.ball);
    for (double x : row.lr) s += ',' + fmt_num(x);
    s += '\n';
  }
  return s;
}

inline json classification_json(const ClassificationResult& c) {
  json j;
  j["verdict"] = to_string(c.verdict);
  j["evidence"] = {{"local_mass_inf", jnum(c.local_mass_inf)},   {"grad_sup_ratio", jnum(c.grad_sup_ratio)},
                   {"decay_exponent_fit", jnum(c.decay_exponent_fit)}, {"cauchy_defect", jnum(c.cauchy_defect)},
                   {"cauchy_defect_ratio", jnum(c.cauchy_defect_ratio)}, {"decay_exponent_linear", jnum(c.decay_exponent_linear)},
                   {"local_mass_ok", c.local_mass_ok},                {"grad_ok", c.grad_ok},
                   {"cauchy_ok", c.cauchy_ok},                        {"decay_ok", c.decay_ok},
                   {"floor_hit", c.floor_hit},                        {"monotone_growth", c.monotone_growth}};
  j["thresholds"] = {{"R_crit", jnum(c.thresholds.R_crit)},
                     {"eps_crit_frac", c.thresholds.eps_crit_frac},
                     {"eps_crit", jnum(c.eps_crit)},
                     {"grad_sup_max", c.thresholds.grad_sup_max},
                     {"tail_fraction", c.thresholds.tail_fraction},
                     {"decay_tolerance", c.thresholds.decay_tolerance}};
  return j;
}

inline json exponents_json(const ModelParams& m) {
  const auto e = derived_exponents(m);
  json j = {{"s_c", e.s_c}, {"A", e.A}, {"B", e.B}, {"p_star", e.p_star}, {"p_sup", e.p_sup}};
  if (auto q = derived_exponents_exact(m)) {
    j["exact"] = {{"s_c", q->s_c.str()}, {"A", q->A.str()}, {"B", q->B.str()}, {"p_star", q->p_star.str()}, {"p_sup", q->p_sup.str()}};
  }
  return j;
}

inline json ground_json(const GroundState& gs, const std::string& phi_hash) {
  return {{"C_gn", gs.C_gn},
          {"J_min", gs.J_min},
          {"el_residual", gs.el_residual},
          {"phi_residual", gs.phi_residual},
          {"iterations", gs.iterations},
          {"polish_iterations", gs.polish_iterations},
          {"gamma", gs.gamma},
          {"beta", gs.beta},
          {"mass", gs.fphi.mass},
          {"grad_sq", gs.fphi.grad_sq},
          {"P", gs.fphi.P},
          {"energy", gs.fphi.energy},
          {"ratio_EG", gs.ratio_EG},
          {"ratio_EM", gs.ratio_EM},
          {"pohozaev_res", {gs.pohozaev_res[0], gs.pohozaev_res[1]}},
          {"C_relation", gs.C_relation},
          {"me_threshold", gs.me_threshold},
          {"gm_threshold", gs.gm_threshold},
          {"action", gs.m_action},
          {"radially_decreasing", gs.radially_decreasing},
          {"phi_sha1", phi_hash}};
}

// files are written first, the manifest last; each output is listed with its git-style hash
struct OutputSet {
  fs::path dir;
  std::vector<std::pair<std::string, std::string>> files;  // name, hash

  void put(const std::string& name, const std::string& bytes) {
    write_atomic(dir / name, bytes);
    files.emplace_back(name, git_blob_hash(bytes));
  }
  json hashes() const {
    json j = json::object();
    for (const auto& [n, h] : files) j[n] = h;
    return j;
  }
};

inline json config_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& [k, v] : config_echo(c)) j[k] = v;
  return j;
}

// ---- initial data -------------------------------------------------------------------

inline SpectralField initial_data(const RunConfig& c, const GridPtr& g, const GroundState* gs) {
  if (c.init.kind == "groundstate_scaled") {
    if (!gs) throw ConfigError("init.kind = groundstate_scaled needs a ground state");
    SpectralField u = gs->phi;
    u *= c.init.c;
    return u;
  }
  const double A = c.init.amplitude, w = c.init.width, R0 = c.init.radius;
  if (c.init.kind == "gaussian") return gaussian(g, A, w);
  return sample_radial(g, [&](double r) { return cplx(A * std::exp(-(r - R0) * (r - R0) / (w * w))); });
}

// ---- subcommands ---------------------------------------------------------------------

struct Context {
  RunConfig cfg;
  fs::path out;
  int workers = 1;
  std::ostream* log = &std::cerr;
};

inline void require_valid(const ModelParams& m) {
  const auto rep = validate_params(m);
  if (!rep.valid) throw ConfigError("invalid model parameters, violated: " + join_violations(rep));
}

inline int run_params(const Context& ctx) {
  const auto rep = validate_params(ctx.cfg.model);
  json j;
  j["model"] = {{"N", ctx.cfg.model.N}, {"alpha", ctx.cfg.model.alpha}, {"b", ctx.cfg.model.b}, {"p", ctx.cfg.model.p}};
  j["valid"] = rep.valid;
  j["violations"] = rep.violations;
  if (rep.valid) j["exponents"] = exponents_json(ctx.cfg.model);
  std::cout << j.dump(2) << "\n";
  return rep.valid ? ok : invalid_config;
}

inline GroundState ground_state_for(const Hartree& H, unsigned long long seed) {
  GroundStateOptions o;
  o.seed = seed;
  return compute_ground_state(H, o);
}

inline int run_ground(const Context& ctx) {
  const auto& c = ctx.cfg;
  require_valid(c.model);
  const auto t0 = std::chrono::steady_clock::now();
  auto g = make_grid(c.M, c.L, c.model.N);
  Hartree H(g, c.model);
  const auto gs = ground_state_for(H, c.seed);
  const auto snap = snapshot_bytes(gs.phi, 0.0);
  OutputSet out{ctx.out, {}};
  out.put("phi.snap", snap);
  json report = ground_json(gs, git_blob_hash(snap));
  out.put("ground.json", report.dump(2) + "\n");
  json m;
  m["command"] = "ground";
  m["config"] = config_json(c);
  m["exponents"] = exponents_json(c.model);
  m["ground_state"] = report;
  m["outputs"] = out.hashes();
  m["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_atomic(ctx.out / "manifest.json", m.dump(2) + "\n");
  *ctx.log << "C_gn = " << fmt_num(gs.C_gn) << ", residual " << fmt_num(gs.phi_residual) << "\n";
  return ok;
}

inline int run_evolve(const Context& ctx) {
  const auto& c = ctx.cfg;
  require_valid(c.model);
  const auto t0 = std::chrono::steady_clock::now();
  auto g = make_grid(c.M, c.L, c.model.N);
  Hartree H(g, c.model);
  const auto gs = ground_state_for(H, c.seed);
  const auto u0 = initial_data(c, g, &gs);
  const auto res = simulate(H, gs, u0, c.evolve, c.diag);
  OutputSet out{ctx.out, {}};
  const bool csv = std::find(c.formats.begin(), c.formats.end(), "csv") != c.formats.end();
  const bool partial = res.traj.status == RunStatus::overflow || res.traj.status == RunStatus::aborted;
  const std::string prefix = partial ? "partial_" : "";
  if (csv) {
    out.put(prefix + "trajectory.csv", trajectory_csv(res.rows));
    out.put(prefix + "local_norms.csv", local_norms_csv(res, c.diag.R_list));
  }
  const auto phi_snap = snapshot_bytes(gs.phi, 0.0);
  out.put("phi.snap", phi_snap);
  for (std::size_t k = 0; k < res.traj.snapshots.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "%ssnap_%05zu.snap", prefix.c_str(), k);
    out.put(name, snapshot_bytes(res.traj.snapshots[k].second, res.traj.snapshots[k].first));
  }
  const auto cls = classification_json(res.verdict);
  out.put(prefix + "classification.json", cls.dump(2) + "\n");
  json m;
  m["command"] = "evolve";
  m["config"] = config_json(c);
  m["exponents"] = exponents_json(c.model);
  m["ground_state"] = ground_json(gs, git_blob_hash(phi_snap));
  m["initial"] = {{"mass", res.u0_mass}, {"ME", res.initial.ME ? json(*res.initial.ME) : json(nullptr)}, {"GM", res.initial.GM}};
  m["status"] = to_string(res.traj.status);
  m["reason"] = res.traj.reason;
  m["partial"] = partial;
  m["t_final"] = res.traj.t_final;
  m["t_wrap"] = jnum(res.traj.t_wrap);
  m["steps"] = res.traj.steps;
  m["verdict"] = to_string(res.verdict.verdict);
  m["outputs"] = out.hashes();
  m["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_atomic(ctx.out / (prefix + "manifest.json"), m.dump(2) + "\n");
  *ctx.log << "status " << to_string(res.traj.status) << ", verdict " << to_string(res.verdict.verdict) << "\n";
  return partial ? run_failed : ok;
}

inline int run_sweep(const Context& ctx) {
  const auto& c = ctx.cfg;
  require_valid(c.model);
  const auto t0 = std::chrono::steady_clock::now();
  OutputSet out{ctx.out, {}};
  std::vector<SweepRow> rows;
  json gsj = nullptr;
  if (!c.sweep_c.empty()) {
    auto g = make_grid(c.M, c.L, c.model.N);
    Hartree H(g, c.model);
    const auto gs = ground_state_for(H, c.seed);
    gsj = ground_json(gs, git_blob_hash(snapshot_bytes(gs.phi, 0.0)));
    rows = sweep_rows(H, gs, c.sweep_c, c.evolve, c.diag, ctx.workers);
  }
  out.put("sweep.csv", sweep_csv(c.model, rows));
  json m;
  m["command"] = "sweep";
  m["config"] = config_json(c);
  m["exponents"] = exponents_json(c.model);
  m["ground_state"] = gsj;
  m["workers"] = ctx.workers;
  m["outputs"] = out.hashes();
  m["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_atomic(ctx.out / "manifest.json", m.dump(2) + "\n");
  return ok;
}

struct CheckOptions {
  bool reference = false;
  bool inject_fault = false;
  std::set<std::string> only;
};

// the property suite; tiny grids unless reference is set
inline int run_check(const Context& ctx, const CheckOptions& co) {
  suite::Options o;
  o.scale = co.reference ? suite::reference_scale() : suite::tiny_scale();
  o.inject_fault = co.inject_fault;
  o.only = co.only;
  o.log = ctx.log;
  const auto res = suite::run_suite(o);
  const auto report = suite::report_json(res, o.scale);
  if (!ctx.out.empty()) write_atomic(ctx.out / "check.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return report["all_pass"].get<bool>() ? ok : check_failed;
}

// ---- plots-data: derived tables from a run directory ---------------------------------

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ConfigError("missing column: " + name);
    return static_cast<std::size_t>(it - columns.begin());
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV");
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) t.columns.push_back(trim(c));
  }
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) row.push_back(c == "nan" ? NAN : std::strtod(c.c_str(), nullptr));
    if (row.size() != t.columns.size()) throw ConfigError("ragged CSV row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline int run_plots_data(const Context& ctx, const fs::path& run_dir) {
  const auto traj = parse_csv(read_file(run_dir / "trajectory.csv"));
  const auto it = traj.col("t"), iv = traj.col("v_a"), im = traj.col("m_a"), ir = traj.col("vpp_total");
  OutputSet out{ctx.out, {}};
  {
    std::string s = "t,vpp_total,fd_vpp,fd_dma,defect\n";
    const auto& R = traj.rows;
    for (std::size_t k = 1; k + 1 < R.size(); ++k) {
      const double h1 = R[k][it] - R[k - 1][it], h2 = R[k + 1][it] - R[k][it];
      const double d2 = 2 * (h1 * R[k + 1][iv] - (h1 + h2) * R[k][iv] + h2 * R[k - 1][iv]) / (h1 * h2 * (h1 + h2));
      const double dm = (R[k + 1][im] - R[k - 1][im]) / (h1 + h2);
      const double rhs = R[k][ir];
      s += fmt_num(R[k][it]) + ',' + fmt_num(rhs) + ',' + fmt_num(d2) + ',' + fmt_num(dm) + ',' + fmt_num(std::abs(d2 - rhs)) + '\n';
    }
    out.put("identity_defect.csv", s);
  }
  if (fs::exists(run_dir / "local_norms.csv")) {
    const auto ln = parse_csv(read_file(run_dir / "local_norms.csv"));
    const auto man = json::parse(read_file(run_dir / "manifest.json"));
    const auto cfg = load_config([&] {
      KeyValues kv;
      for (const auto& [k, v] : man.at("config").items()) kv[k] = v.get<std::string>();
      return kv;
    }());
    const auto& m = cfg.model;
    const double Bexp = derived_exponents(m).B;
    std::string s = "T,R,lhs_avg,rhs_model,kappa_fit\n";
    const auto jt = ln.col("t");
    for (double R : cfg.diag.R_list) {
      const auto jr = ln.col("lr_R" + fmt_num(R));
      for (double T : {10.0, 20.0, 40.0}) {
        if (ln.rows.empty() || ln.rows.back()[jt] < T * (1 - 1e-9)) continue;
        double acc = 0;
        for (std::size_t k = 1; k < ln.rows.size() && ln.rows[k - 1][jt] < T; ++k) {
          const double a = ln.rows[k - 1][jt], b = std::min(ln.rows[k][jt], T);
          acc += 0.5 * (ln.rows[k - 1][jr] * ln.rows[k - 1][jr] + ln.rows[k][jr] * ln.rows[k][jr]) * (b - a);
        }
        const double lhs = acc / T, rhs = R / T + std::pow(R, -(m.N - 1) * Bexp / m.N);
        s += fmt_num(T) + ',' + fmt_num(R) + ',' + fmt_num(lhs) + ',' + fmt_num(rhs) + ',' + fmt_num(lhs / rhs) + '\n';
      }
    }
    out.put("morawetz.csv", s);
    std::vector<LocalNormRow> rows;
    const auto jb = ln.col("ball_sqrt_t");
    for (const auto& r : ln.rows) rows.push_back({r[jt], r[jb], {}});
    const auto ev = evacuation_from(rows, cfg.diag.evacuation_t0);
    std::string e = "t,R,norm\n";
    for (const auto& p : ev.points) e += fmt_num(p.t) + ',' + fmt_num(p.R) + ',' + fmt_num(p.norm) + '\n';
    out.put("evacuation.csv", e);
  }
  if (fs::exists(run_dir / "phi.snap")) {
    const auto [phi, t] = parse_snapshot(read_file(run_dir / "phi.snap"));
    (void)t;
    const auto& g = phi.grid();
    rvec re(g.n);
    for (std::size_t i = 0; i < g.n; ++i) re[i] = phi.values()[i].real();
    const auto prof = shell_average(g, re);
    std::string s = "r,phi\n";
    for (std::size_t k = 0; k < prof.size(); ++k)
      if (g.shell_r[k] <= g.L) s += fmt_num(g.shell_r[k]) + ',' + fmt_num(prof[k]) + '\n';
    out.put("profile.csv", s);
  }
  json m;
  m["command"] = "plots-data";
  m["source"] = run_dir.string();
  m["outputs"] = out.hashes();
  write_atomic(ctx.out / "plots_manifest.json", m.dump(2) + "\n");
  return ok;
}

}  // namespace choquard::cli
