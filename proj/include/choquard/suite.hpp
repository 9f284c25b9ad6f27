#pragma once

// Property suite shared by the acceptance binary and `choquard check`.

#include "choquard/run.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace choquard::suite {

using json = nlohmann::ordered_json;

inline const ModelParams bench{3, 2.0, -0.5, 2.5};

struct Scale {
  std::string name;
  int tuples = 1000;
  int oracle_M = 16;
  double oracle_L = 4;
  std::vector<std::pair<int, double>> el_grids{{16, 4}, {32, 8}};
  int el_fields = 20;
  int ref_M = 64;
  double ref_L = 16;
  int gn_fields = 200;
  // conservation / variance / threshold run
  double cons_dt = 1e-3, cons_t_end = 10, var_t_end = 1;
  int cons_stride = 10;
  double R_weight = 6;
  // long runs (scattering, soliton)
  int long_M = 64;
  double long_L = 32, long_dt = 1e-2, long_T = 40, sponge_width = 8, sponge_strength = 1;
  std::vector<double> morawetz_T{10, 20, 40};
  std::vector<double> morawetz_R{4, 6, 8};
  double evac_t0 = 5;
  // blow-up run
  double blow_dt = 1e-3, blow_t_end = 2, blow_trigger = 1.25;
  // sweep
  int sweep_M = 32;
  double sweep_L = 16, sweep_dt = 1e-2, sweep_T = 20, sweep_sponge_width = 4, sweep_sponge_strength = 1;
  std::vector<double> sweep_c{0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3};
  int sweep_workers = 4;
};

inline Scale reference_scale() {
  Scale s;
  s.name = "reference";
  return s;
}

// every grid 16³; times shortened where the run would not fit in a minute
inline Scale tiny_scale() {
  Scale s;
  s.name = "tiny";
  s.tuples = 200;
  s.el_grids = {{16, 4}};
  s.ref_M = 16;
  s.ref_L = 6;
  s.gn_fields = 50;
  s.cons_t_end = 2;
  s.R_weight = 3;
  s.long_M = 16;
  s.long_L = 8;
  s.long_T = 20;
  s.sponge_width = 2;
  s.morawetz_T = {5, 10, 20};
  s.morawetz_R = {2, 3, 4};
  s.evac_t0 = 2.5;
  s.sweep_M = 16;
  s.sweep_L = 8;
  s.sweep_T = 5;
  s.sweep_sponge_width = 2;
  s.sweep_c = {0.3, 0.7, 1.0, 1.3};
  return s;
}

struct Options {
  Scale scale = reference_scale();
  bool inject_fault = false;  // corrupt one kernel multiplier before the oracle comparison
  std::set<std::string> only;  // criterion keys; empty = all
  std::ostream* log = nullptr;
};

struct Criterion {
  Criterion() = default;
  Criterion(std::string k, std::string t) : key(std::move(k)), title(std::move(t)) {}
  std::string key, title;
  bool pass = false;
  json measured = json::object();
  std::string note;
  double seconds = 0;
};

inline std::string fmt(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", x);
  return b;
}

inline std::string summary_line(const Criterion& c) {
  std::string s = std::string(c.pass ? "PASS" : "FAIL") + "  " + c.title + ":";
  for (const auto& [k, v] : c.measured.items()) {
    s += " " + k + "=";
    if (v.is_number()) {
      s += fmt(v.get<double>());
    } else if (v.is_boolean()) {
      s += v.get<bool>() ? "true" : "false";
    } else if (v.is_string()) {
      s += v.get<std::string>();
    } else {
      s += v.dump();
    }
  }
  if (!c.note.empty()) s += "  [" + c.note + "]";
  return s;
}

// scale the multiplier on the first nonzero frequency shell; keeps the Hermitian symmetry
inline void corrupt_multiplier(RieszKernel& k) {
  const auto& g = *k.grid;
  for (std::size_t i = 0; i < g.n; ++i)
    if (g.ksq[i] == g.ksq[1]) k.m[i] *= 1.5;
}

inline double rel(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

// random valid tuple with margins from the window edges
inline ModelParams random_valid_params(std::mt19937_64& rng, double margin = 0.02) {
  std::uniform_real_distribution<double> U(0, 1);
  while (true) {
    ModelParams m;
    m.N = 3 + static_cast<int>(U(rng) * 3);
    m.alpha = m.N * (margin + (1 - 2 * margin) * U(rng));
    m.b = -m.N * (margin + (1 - 2 * margin) * U(rng));
    if (4 + m.alpha + 2 * m.b - m.N <= margin) continue;
    const auto e0 = derived_exponents_unchecked(m);
    const double lo = std::max(2.0, e0.p_star), hi = e0.p_sup;
    if (hi - lo < 4 * margin) continue;
    m.p = lo + (hi - lo) * (margin + (1 - 2 * margin) * U(rng));
    if (validate_params(m).valid) return m;
  }
}

// smooth complex field: Gaussian envelope times a random low-order polynomial and tilt
inline SpectralField random_smooth(const GridPtr& g, std::mt19937_64& rng, double width) {
  std::normal_distribution<double> Z;
  double c[8];
  for (double& x : c) x = Z(rng);
  return sample(g, [&](const double* x) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    const cplx poly(1 + 0.3 * (c[0] * x[0] + c[1] * x[1]), 0.3 * (c[2] * x[2] + c[3] * x[0] * x[1]));
    return poly * std::exp(-r2 / (width * width) + 0.2 * c[4] * x[0] + 0.1 * c[6] * x[1]) * (1 + 0.1 * c[5]) * std::polar(1.0, 0.3 * c[7] * x[2]);
  });
}

class Suite {
 public:
  explicit Suite(Options o) : o_(std::move(o)) {}

  std::vector<Criterion> run() {
    std::vector<Criterion> out;
    auto add = [&](const char* key, Criterion (Suite::*f)()) {
      if (!o_.only.empty() && !o_.only.count(key)) return;
      const auto t0 = std::chrono::steady_clock::now();
      Criterion c;
      try {
        c = (this->*f)();
      } catch (const std::exception& e) {
        c.key = key;
        c.title = key;
        c.pass = false;
        c.note = std::string("exception: ") + e.what();
      }
      c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (o_.log) *o_.log << summary_line(c) << "  (" << fmt(c.seconds) << " s)" << std::endl;
      out.push_back(std::move(c));
    };
    add("exponents", &Suite::exponents);
    add("convolution", &Suite::convolution);
    add("euler_lagrange", &Suite::euler_lagrange);
    add("ground_state", &Suite::ground_state);
    add("gn_sharpness", &Suite::gn_sharpness);
    add("conservation", &Suite::conservation);
    add("scaling", &Suite::scaling);
    add("variance", &Suite::variance);
    add("below_threshold", &Suite::below_threshold);
    add("morawetz_evacuation", &Suite::morawetz_evacuation);
    add("classifier", &Suite::classifier);
    return out;
  }

 private:
  Options o_;
  std::map<std::pair<int, double>, std::unique_ptr<Hartree>> hartree_;
  std::map<std::tuple<int, double, unsigned long long>, GroundState> gs_;

  const Scale& S() const { return o_.scale; }

  void note(const std::string& s) {
    if (o_.log) *o_.log << "  .. " << s << std::endl;
  }

  const Hartree& hartree(int M, double L) {
    auto& h = hartree_[{M, L}];
    if (!h) h = std::make_unique<Hartree>(make_grid(M, L, 3), bench);
    return *h;
  }

  const GroundState& ground(int M, double L, unsigned long long seed = 0) {
    auto key = std::make_tuple(M, L, seed);
    auto it = gs_.find(key);
    if (it != gs_.end()) return it->second;
    note("ground state " + std::to_string(M) + "^3, L=" + fmt(L) + ", seed " + std::to_string(seed));
    GroundStateOptions go;
    go.seed = seed;
    return gs_.emplace(key, compute_ground_state(hartree(M, L), go)).first->second;
  }

  // ---- criteria -------------------------------------------------------------------

  Criterion exponents() {
    Criterion c{"exponents", "exponent algebra"};
    const auto q = derived_exponents_exact(bench);
    const bool exact = q && q->s_c == rational(1, 2) && q->A == rational(3, 2) && q->B == rational(7, 2) && q->p_star == rational(2) &&
                       q->p_sup == rational(4);
    std::mt19937_64 rng(2024);
    double worst = 0;
    for (int k = 0; k < S().tuples; ++k) {
      const auto m = random_valid_params(rng);
      const auto e = derived_exponents(m);
      worst = std::max(worst, std::abs(e.s_c - (e.B - 2) / (2 * (m.p - 1))));
    }
    c.measured["benchmark_exact"] = exact;
    c.measured["tuples"] = S().tuples;
    c.measured["max_identity_defect"] = worst;
    c.pass = exact && worst <= 1e-12;
    return c;
  }

  Criterion convolution() {
    Criterion c{"convolution", "convolution oracle"};
    // system under test: the FFT path with the kernel held by H; oracle: direct periodic sum of a fresh kernel
    auto g = make_grid(S().oracle_M, S().oracle_L, 3);
    Hartree H(g, bench);
    if (o_.inject_fault) corrupt_multiplier(H.kernel_mut());
    const auto fresh = make_riesz_kernel(g, bench.alpha);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> Z;
    double worst = 0;
    for (int t = 0; t < 3; ++t) {
      rvec f(g->n);
      for (auto& x : f) x = Z(rng);
      const auto a = riesz_convolve(H.kernel(), f), b = riesz_convolve_direct(fresh, f);
      double d = 0, m = 0;
      for (std::size_t i = 0; i < g->n; ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
        m = std::max(m, std::abs(b[i]));
      }
      worst = std::max(worst, d / std::max(1.0, m));
    }
    // -Δ(I∗g) = g - mean(g) with α = N - 2 on the reference grid
    const auto& Hr = hartree(S().ref_M, S().ref_L);
    const auto& gr = Hr.grid();
    auto kr = Hr.kernel();
    if (o_.inject_fault) corrupt_multiplier(kr);
    rvec gauss(gr.n);
    double mean = 0;
    for (std::size_t i = 0; i < gr.n; ++i) mean += (gauss[i] = std::exp(-gr.r[i] * gr.r[i]));
    mean /= static_cast<double>(gr.n);
    const auto V = riesz_convolve(kr, gauss);
    SpectralField vf(Hr.grid_ptr());
    for (std::size_t i = 0; i < gr.n; ++i) vf.values_mut()[i] = V[i];
    const auto lap = laplacian(vf);
    double err = 0, nrm = 0;
    for (std::size_t i = 0; i < gr.n; ++i) {
      const double t = gauss[i] - mean;
      err += std::pow(-lap[i].real() - t, 2);
      nrm += t * t;
    }
    const double newton = std::sqrt(err / nrm);
    c.measured["fft_vs_direct"] = worst;
    c.measured["newtonian_rel_l2"] = newton;
    if (o_.inject_fault) c.note = "fault injected";
    c.pass = worst <= 1e-12 && newton <= 1e-3;
    return c;
  }

  Criterion euler_lagrange() {
    Criterion c{"euler_lagrange", "Euler-Lagrange certification"};
    std::mt19937_64 rng(8);
    double worst = 0;
    int n = 0;
    for (const auto& [M, L] : S().el_grids) {
      const auto& H = hartree(M, L);
      for (int t = 0; t < S().el_fields; ++t, ++n) {
        auto u = random_smooth(H.grid_ptr(), rng, 1.2);
        auto v = random_smooth(H.grid_ptr(), rng, 1.0);
        auto gE = laplacian(u);
        gE *= -1.0;
        gE -= H.nonlinearity(u);
        const double lin = 2 * inner_real(gE, v);
        const double e = 1e-4;
        auto up = u, um = u, ve = v;
        ve *= e;
        up += ve;
        um -= ve;
        const double fd = (H.functionals(up).energy - H.functionals(um).energy) / (2 * e);
        worst = std::max(worst, std::abs(fd - lin) / std::abs(lin));
      }
    }
    std::string grids;
    for (const auto& [M, L] : S().el_grids) grids += (grids.empty() ? "" : ",") + std::to_string(M) + "^3";
    c.measured["fields"] = n;
    c.measured["grids"] = grids;
    c.measured["max_rel_defect"] = worst;
    c.pass = worst <= 1e-5;
    return c;
  }

  Criterion ground_state() {
    Criterion c{"ground_state", "ground state"};
    const auto& H = hartree(S().ref_M, S().ref_L);
    const auto& a = ground(S().ref_M, S().ref_L, 0);
    const auto& b = ground(S().ref_M, S().ref_L, 1);
    const auto& ex = H.exponents();
    const double eg = rel(a.ratio_EG, (ex.B - 2) / ex.B), em = rel(a.ratio_EM, (ex.B - 2) / ex.A);
    const double cr = rel(a.C_relation, a.C_gn);
    const double seeds = std::max(rel(b.me_threshold, a.me_threshold), rel(b.gm_threshold, a.gm_threshold));
    c.measured["residual"] = a.phi_residual;
    c.measured["E/G"] = a.ratio_EG;
    c.measured["E/G_rel"] = eg;
    c.measured["E/M"] = a.ratio_EM;
    c.measured["E/M_rel"] = em;
    c.measured["C_relation_rel"] = cr;
    c.measured["seed_threshold_rel"] = seeds;
    c.pass = a.phi_residual <= 1e-4 && b.phi_residual <= 1e-4 && eg <= 1e-3 && em <= 1e-3 && cr <= 1e-3 && seeds <= 1e-3;
    return c;
  }

  Criterion gn_sharpness() {
    Criterion c{"gn_sharpness", "GN sharpness"};
    const auto& H = hartree(S().ref_M, S().ref_L);
    const auto& gs = ground(S().ref_M, S().ref_L, 0);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> W(0.8, 3.0);
    double lo = INFINITY;
    for (int k = 0; k < S().gn_fields; ++k) {
      const auto f = H.functionals(random_smooth(H.grid_ptr(), rng, W(rng)));
      if (f.J_finite) lo = std::min(lo, gs.C_gn * f.J);
    }
    const double atQ = gs.C_gn * H.functionals(gs.Q).J;
    c.measured["fields"] = S().gn_fields;
    c.measured["min_CJ"] = lo;
    c.measured["CJ_at_Q"] = atQ;
    c.pass = lo >= 1 - 1e-6 && std::abs(atQ - 1) <= 1e-3;
    return c;
  }

  // c = 0.5 run without absorber; shared by conservation, variance and below-threshold
  struct ConservationRun {
    Trajectory fine, coarse;
    std::vector<VarianceSample> five, comm;
    std::vector<double> gm, coercivity;
    double delta = 0, delta_prime = 0;
    bool done = false;
  } cons_;

  const ConservationRun& conservation_run() {
    if (cons_.done) return cons_;
    const auto& H = hartree(S().ref_M, S().ref_L);
    const auto& gs = ground(S().ref_M, S().ref_L, 0);
    SpectralField u0 = gs.phi;
    u0 *= 0.5;
    const double m0 = mass(u0);
    const auto w = morawetz_weight(H.grid(), std::min(S().R_weight, H.grid().L / 2));
    const auto cut = cutoff_psi(H.grid(), std::min(S().R_weight, H.grid().L / 2));
    EvolveConfig cfg;
    cfg.dt = S().cons_dt;
    cfg.t_end = S().cons_t_end;
    cfg.output_stride = S().cons_stride;
    note("conservation run dt=" + fmt(cfg.dt));
    cons_.fine = evolve(H, u0, cfg, [&](const Record& r, const SpectralField& u) {
      if (r.t <= S().var_t_end + 1e-9) {
        const auto va = variance_and_action(u, w);
        cons_.five.push_back({r.t, va.V_a, va.M_a, variance_rhs(H, u, w, false, 0.0).total});
        cons_.comm.push_back({r.t, va.V_a, va.M_a, variance_rhs_commutator(H, u, w)});
      }
      cons_.gm.push_back(me_gm_from(r.energy, m0, r.grad_sq, r.mass, gs, H.exponents().s_c).GM);
      cons_.coercivity.push_back(coercivity_check(H, u, cut).ratio);
      return true;
    });
    cfg.dt *= 2;
    cfg.output_stride = std::max(1, S().cons_stride / 2);
    note("conservation run dt=" + fmt(cfg.dt));
    cons_.coarse = evolve(H, u0, cfg);
    cons_.delta = 1 - cons_.gm.front();
    cons_.delta_prime = cons_.coercivity.front();
    cons_.done = true;
    return cons_;
  }

  Criterion conservation() {
    Criterion c{"conservation", "conservation"};
    const auto& r = conservation_run();
    const double md = mass_drift(r.fine), ed = energy_drift(r.fine), ed2 = energy_drift(r.coarse);
    const double ratio = ed2 / ed;
    c.measured["steps"] = r.fine.steps;
    c.measured["mass_drift"] = md;
    c.measured["energy_drift"] = ed;
    c.measured["energy_drift_2dt"] = ed2;
    c.measured["halving_ratio"] = ratio;
    c.pass = r.fine.status == RunStatus::completed && md <= 1e-12 && ed <= 1e-6 && ratio >= 3.5 && ratio <= 4.5;
    return c;
  }

  Criterion scaling() {
    Criterion c{"scaling", "scaling"};
    const auto& H = hartree(S().ref_M, S().ref_L);
    const double sc = H.exponents().s_c;
    // band-limited datum: Δ²(e^{-|x|²/8})
    const auto u = laplacian(laplacian(gaussian(H.grid_ptr(), 1.0, std::sqrt(8.0))));
    const double lambda = 2;
    RescaleReport rep;
    const auto ul = rescale(u, lambda, H.params().N / 2.0 - sc, &rep);
    const double hs = rel(norm_hs(ul, sc), norm_hs(u, sc));
    const double l2 = rel(std::sqrt(mass(ul)), std::pow(lambda, -sc) * std::sqrt(mass(u)));
    c.measured["hsc_rel"] = hs;
    c.measured["l2_rel"] = l2;
    c.measured["aliasing"] = rep.aliasing_fraction;
    c.pass = hs <= 1e-6 && l2 <= 1e-6;
    return c;
  }

  Criterion variance() {
    Criterion c{"variance", "variance identity"};
    const auto& r = conservation_run();
    const auto five = variance_identity_check(r.five), comm = variance_identity_check(r.comm);
    const auto& H = hartree(S().ref_M, S().ref_L);
    const auto& gs = ground(S().ref_M, S().ref_L, 0);
    const auto quad = MorawetzWeight::quadratic(H.grid());
    double virial = 0;
    for (const auto* f : {&gs.phi}) {
      const double lhs = variance_rhs(H, *f, quad, false, 0.0).total, rhs = virial_reduction(H, *f);
      virial = std::max(virial, rel(lhs, rhs));
    }
    {
      const auto gsn = gaussian(H.grid_ptr(), 1.0, 1.5);
      virial = std::max(virial, rel(variance_rhs(H, gsn, quad, false, 0.0).total, virial_reduction(H, gsn)));
    }
    c.measured["samples"] = five.samples;
    c.measured["defect_Ma"] = five.defect_Ma;
    c.measured["defect_Va"] = five.defect_Va;
    c.measured["virial_rel"] = virial;
    c.measured["commutator_defect"] = comm.max_defect;
    c.pass = five.max_defect <= 1e-3 && virial <= 1e-10;
    return c;
  }

  Criterion below_threshold() {
    Criterion c{"below_threshold", "below-threshold invariance"};
    const auto& r = conservation_run();
    const double gm_sup = *std::max_element(r.gm.begin(), r.gm.end());
    const double co_inf = *std::min_element(r.coercivity.begin(), r.coercivity.end());
    c.measured["delta"] = r.delta;
    c.measured["sup_GM"] = gm_sup;
    c.measured["GM_bound"] = 1 - r.delta / 2;
    c.measured["delta_prime"] = r.delta_prime;
    c.measured["min_coercivity"] = co_inf;
    c.pass = r.delta > 0 && gm_sup < 1 - r.delta / 2 && r.delta_prime > 0 && co_inf >= r.delta_prime / 2;
    return c;
  }

  // long runs on the large box with the sponge
  struct LongRuns {
    RunResult scatter, soliton;
    bool done = false;
  } long_;

  RunOptions long_options() const {
    RunOptions o;
    o.R_list = S().morawetz_R;
    o.evacuation_t0 = S().evac_t0;
    o.R_weight = S().R_weight;
    return o;
  }

  const LongRuns& long_runs() {
    if (long_.done) return long_;
    const auto& H = hartree(S().long_M, S().long_L);
    const auto& gs = ground(S().long_M, S().long_L, 0);
    EvolveConfig cfg;
    cfg.dt = S().long_dt;
    cfg.t_end = S().long_T;
    cfg.output_stride = 10;
    cfg.absorb = {true, S().sponge_width, S().sponge_strength};
    SpectralField u = gs.phi;
    u *= 0.5;
    note("long run c=0.5");
    long_.scatter = simulate(H, gs, u, cfg, long_options());
    note("long run c=1 (ground state)");
    long_.soliton = simulate(H, gs, gs.phi, cfg, long_options());
    long_.done = true;
    return long_;
  }

  static double evacuation_ratio(const RunResult& r) {
    const auto& p = r.evacuation.points;
    if (p.size() < 2) return NAN;
    return p.back().norm / p.front().norm;
  }

  Criterion morawetz_evacuation() {
    Criterion c{"morawetz_evacuation", "Morawetz/evacuation"};
    const auto& L = long_runs();
    const auto& H = hartree(S().long_M, S().long_L);
    double kmin = INFINITY, kmax = 0;
    for (std::size_t j = 0; j < S().morawetz_R.size(); ++j)
      for (double T : S().morawetz_T) {
        const auto m = morawetz_from(L.scatter, j, S().morawetz_R[j], T, H);
        kmin = std::min(kmin, m.kappa_fit);
        kmax = std::max(kmax, m.kappa_fit);
      }
    const double ev = evacuation_ratio(L.scatter), sol = evacuation_ratio(L.soliton);
    const auto& sr = L.soliton.rows;
    const double sol_mass = sr.back().local_mass / sr.front().local_mass;
    c.measured["kappa_spread"] = kmax / kmin;
    c.measured["evacuation_ratio"] = ev;
    c.measured["evacuation_tau"] = L.scatter.evacuation.kendall_tau;
    c.measured["soliton_evacuation_ratio"] = sol;
    c.measured["soliton_local_mass_ratio"] = sol_mass;
    c.pass = kmin > 0 && kmax / kmin <= 10 && ev <= 0.2 && sol >= 0.8 && sol_mass >= 0.9;
    return c;
  }

  static std::vector<double> radii_below(const std::vector<double>& R, double L) {
    std::vector<double> out;
    for (double r : R)
      if (r < L) out.push_back(r);
    return out;
  }

  static int verdict_rank(const std::string& v) {
    if (v == "scattering") return 0;
    if (v == "undecided") return 1;
    if (v == "blow-up") return 2;
    return -1;
  }

  Criterion classifier() {
    Criterion c{"classifier", "classifier dichotomy"};
    const auto& L = long_runs();
    const auto v05 = L.scatter.verdict.verdict, v10 = L.soliton.verdict.verdict;
    // c = 1.3 on the reference grid with step refinement
    const auto& H = hartree(S().ref_M, S().ref_L);
    const auto& gs = ground(S().ref_M, S().ref_L, 0);
    EvolveConfig bc;
    bc.dt = S().blow_dt;
    bc.t_end = S().blow_t_end;
    bc.output_stride = 10;
    bc.adapt = {true, S().blow_trigger, S().blow_dt / 4};
    SpectralField u = gs.phi;
    u *= 1.3;
    note("blow-up run c=1.3");
    RunOptions bo;
    bo.R_weight = S().R_weight;
    bo.R_list = radii_below(S().morawetz_R, S().ref_L);
    const auto blow = simulate(H, gs, u, bc, bo);
    // sweep
    const auto& Hs = hartree(S().sweep_M, S().sweep_L);
    const auto& gss = ground(S().sweep_M, S().sweep_L, 0);
    EvolveConfig sc;
    sc.dt = S().sweep_dt;
    sc.t_end = S().sweep_T;
    sc.output_stride = 10;
    sc.absorb = {true, S().sweep_sponge_width, S().sweep_sponge_strength};
    sc.adapt = {true, S().blow_trigger, S().sweep_dt / 4};
    RunOptions so;
    so.R_weight = std::min(S().R_weight, S().sweep_L / 2);
    so.R_list = radii_below(S().morawetz_R, S().sweep_L);
    note("sweep, 1 worker");
    const auto serial = sweep_rows(Hs, gss, S().sweep_c, sc, so, 1);
    note("sweep, " + std::to_string(S().sweep_workers) + " workers");
    const auto parallel = sweep_rows(Hs, gss, S().sweep_c, sc, so, S().sweep_workers);
    auto table = [&](const std::vector<SweepRow>& rows) {
      std::string s;
      for (const auto& r : rows)
        s += fmt_num(r.c) + ',' + r.verdict + ',' + fmt_num(r.gm) + ',' + fmt_num(r.evidence.local_mass_inf) + ',' +
             fmt_num(r.evidence.grad_sup_ratio) + ',' + fmt_num(r.evidence.decay_exponent_fit) + ',' + fmt_num(r.evidence.cauchy_defect) + '\n';
      return s;
    };
    bool monotone = true;
    int prev = 0;
    std::string verdicts;
    for (const auto& r : serial) {
      const int k = verdict_rank(r.verdict);
      if (k < prev) monotone = false;
      prev = std::max(prev, k);
      verdicts += (verdicts.empty() ? "" : " ") + fmt(r.c) + ":" + r.verdict;
    }
    const bool identical = table(serial) == table(parallel);
    c.measured["c0.5"] = to_string(v05);
    c.measured["c1.3"] = to_string(blow.verdict.verdict);
    c.measured["c1.3_t_blowup"] = blow.traj.t_blowup;
    c.measured["c1.0"] = to_string(v10);
    c.measured["sweep"] = verdicts;
    c.measured["sweep_monotone"] = monotone;
    c.measured["workers_identical"] = identical;
    c.pass = v05 == Verdict::scattering && blow.verdict.verdict == Verdict::blowup && v10 == Verdict::undecided && monotone && identical;
    return c;
  }
};

inline std::vector<Criterion> run_suite(const Options& o) { return Suite(o).run(); }

inline json report_json(const std::vector<Criterion>& cs, const Scale& s) {
  json j;
  j["scale"] = s.name;
  j["all_pass"] = std::all_of(cs.begin(), cs.end(), [](const Criterion& c) { return c.pass; });
  j["criteria"] = json::array();
  for (const auto& c : cs) j["criteria"].push_back({{"key", c.key}, {"title", c.title}, {"pass", c.pass}, {"measured", c.measured}, {"note", c.note}});
  return j;
}

}  // namespace choquard::suite
