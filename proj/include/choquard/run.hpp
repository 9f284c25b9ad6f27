#pragma once

#include "choquard/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace choquard {

struct RunOptions {
  double R_weight = 6;           // Morawetz weight radius, clipped to L/2
  double R_crit = NAN;           // local-mass radius; NaN means L/4
  std::vector<double> R_list{4, 6, 8};
  ClassifierThresholds thresholds;
  double evacuation_t0 = 5;
  bool linear_only = false;
};

// per record: ‖u‖_{L^r(|x| ≤ √t)} and ‖ψ_R u‖_{L^r} for each R in R_list
struct LocalNormRow {
  double t = 0, ball = 0;
  std::vector<double> lr;
};

struct RunResult {
  Trajectory traj;
  std::vector<DiagnosticsRecord> rows;
  std::vector<LocalNormRow> local;
  ClassifierSeries series;
  ClassificationResult verdict;
  EvacuationScan evacuation;
  MeGm initial;
  double u0_mass = 0, R_crit = 0, R_weight = 0;
};

inline double default_R_crit(const BoxGrid& g, const RunOptions& o) { return std::isnan(o.R_crit) ? g.L / 4 : o.R_crit; }

// nearest record to each geometric time t0·2^k ≤ T
inline EvacuationScan evacuation_from(const std::vector<LocalNormRow>& rows, double t0) {
  std::vector<EvacuationPoint> pts;
  if (rows.empty()) return evacuation_scan(pts);
  for (double t : evacuation_times(t0, rows.back().t)) {
    const auto it = std::min_element(rows.begin(), rows.end(), [&](const auto& a, const auto& b) { return std::abs(a.t - t) < std::abs(b.t - t); });
    pts.push_back({it->t, std::sqrt(it->t), it->ball});
  }
  return evacuation_scan(std::move(pts));
}

// Morawetz time average from the local-norm series for R_list[j]
inline MorawetzAverage morawetz_from(const RunResult& r, std::size_t j, double R, double T, const Hartree& H) {
  std::vector<std::pair<double, double>> s;
  for (const auto& row : r.local) s.emplace_back(row.t, row.lr.at(j));
  return morawetz_average(s, R, T, H);
}

inline RunResult simulate(const Hartree& H, const GroundState& gs, const SpectralField& u0, const EvolveConfig& cfg, const RunOptions& opt = {}) {
  const auto& g = H.grid();
  RunResult out;
  out.u0_mass = mass(u0);
  out.R_crit = default_R_crit(g, opt);
  out.R_weight = std::min(opt.R_weight, g.L / 2);
  const bool lin = cfg.linear_only || opt.linear_only;
  {
    const double G0 = grad_norm_sq(u0);
    const double P0 = lin ? 0.0 : H.interaction(u0);
    out.initial = me_gm_from(G0 - P0 / H.params().p, out.u0_mass, G0, out.u0_mass, gs, H.exponents().s_c);
  }
  DiagnosticsContext ctx(H, gs, out.R_weight, out.R_crit, out.u0_mass, lin);
  ctx.radial_tol = 0;
  std::vector<Cutoff> cuts;
  for (double R : opt.R_list) cuts.push_back(cutoff_psi(g, R));
  const double r_exp = coercivity_exponent(H.params());
  SpectralField v_prev(u0.grid_ptr());
  bool have_prev = false;
  EvolveConfig run = cfg;
  run.linear_only = lin;
  out.traj = evolve(H, u0, run, [&](const Record& rec, const SpectralField& u) {
    auto d = diagnostics_record(ctx, u, rec.t);
    LocalNormRow ln;
    ln.t = rec.t;
    ln.ball = ball_lr(u, std::sqrt(rec.t), r_exp);
    for (const auto& c : cuts) ln.lr.push_back(localized_lr(u, c.values, r_exp));
    auto v = interaction_representation(u, rec.t);
    double cd = NAN;
    if (have_prev) {
      SpectralField diff = v;
      diff -= v_prev;
      cd = norm_h1(diff);
    }
    v_prev = std::move(v);
    have_prev = true;
    out.series.t.push_back(rec.t);
    out.series.local_mass_crit.push_back(d.local_mass);
    out.series.grad_norm.push_back(d.grad_norm);
    out.series.lr_norm.push_back(d.lr_norm);
    out.series.cauchy_defect.push_back(cd);
    out.rows.push_back(std::move(d));
    out.local.push_back(std::move(ln));
    return true;
  });
  out.series.u0_mass = out.u0_mass;
  out.series.status = out.traj.status;
  out.series.adapt_events = out.traj.adapt_events;
  ClassifierThresholds th = opt.thresholds;
  th.R_crit = out.R_crit;
  out.verdict = classify(out.series, H.params(), th);
  out.evacuation = evacuation_from(out.local, opt.evacuation_t0);
  return out;
}

// ---- amplitude sweep ---------------------------------------------------------------

struct SweepRow {
  double c = 0;
  std::optional<double> me;
  double gm = 0;
  std::string verdict;
  ClassificationResult evidence;
};

inline std::string sweep_header() {
  return "N,alpha,b,p,c,me,gm,verdict,local_mass_inf,grad_sup_ratio,decay_exponent_fit,cauchy_defect";
}

inline std::string sweep_line(const ModelParams& m, const SweepRow& r) {
  const auto& e = r.evidence;
  return std::to_string(m.N) + ',' + fmt_num(m.alpha) + ',' + fmt_num(m.b) + ',' + fmt_num(m.p) + ',' + fmt_num(r.c) + ',' +
         (r.me ? fmt_num(*r.me) : std::string("nan")) + ',' + fmt_num(r.gm) + ',' + r.verdict + ',' + fmt_num(e.local_mass_inf) + ',' +
         fmt_num(e.grad_sup_ratio) + ',' + fmt_num(e.decay_exponent_fit) + ',' + fmt_num(e.cauchy_defect);
}

// rows sorted by c; the worker count does not change any row
inline std::vector<SweepRow> sweep_rows(const Hartree& H, const GroundState& gs, const std::vector<double>& cs, const EvolveConfig& cfg,
                                        const RunOptions& opt, int workers) {
  std::vector<SweepRow> rows(cs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < rows.size();) {
      SweepRow r;
      r.c = cs[i];
      try {
        SpectralField u = gs.phi;
        u *= r.c;
        const auto res = simulate(H, gs, u, cfg, opt);
        r.me = res.initial.ME;
        r.gm = res.initial.GM;
        r.evidence = res.verdict;
        r.verdict = res.traj.status == RunStatus::overflow ? "error" : to_string(res.verdict.verdict);
      } catch (const std::exception&) {
        r.verdict = "error";
        r.evidence = ClassificationResult{};
      }
      rows[i] = std::move(r);
    }
  };
  const int k = std::max(1, std::min<int>(workers, static_cast<int>(rows.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < k; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.c < b.c; });
  return rows;
}

inline std::string sweep_csv(const ModelParams& m, const std::vector<SweepRow>& rows) {
  std::string s = sweep_header() + "\n";
  for (const auto& r : rows) s += sweep_line(m, r) + "\n";
  return s;
}

}  // namespace choquard
