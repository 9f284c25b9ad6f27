#pragma once

#include "choquard/evolve.hpp"
#include "choquard/groundstate.hpp"
#include "choquard/nonlocal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace choquard {

// 2Np/(N+α+2b), the localized Lebesgue exponent
inline double coercivity_exponent(const ModelParams& m) { return 2.0 * m.N * m.p / (m.N + m.alpha + 2 * m.b); }

// ---- V_a, M_a --------------------------------------------------------------------

struct VarianceAction {
  double V_a = 0, M_a = 0;
};

inline VarianceAction variance_and_action(const SpectralField& u, const MorawetzWeight& w, const std::vector<SpectralField>* grad = nullptr) {
  const auto& g = u.grid();
  if (w.a.size() != g.n) throw std::invalid_argument("variance_and_action: weight not sampled on this grid");
  std::vector<SpectralField> own;
  if (!grad) {
    own = gradient(u);
    grad = &own;
  }
  const auto& v = u.values();
  double va = 0, ma = 0;
  for (std::size_t i = 0; i < g.n; ++i) {
    va += w.a[i] * abs2(v[i]);
    const double s = w.da[i] / g.r[i];
    cplx dr = 0;
    for (int ax = 0; ax < g.dim; ++ax) dr += g.coord(i, ax) * (*grad)[ax][i];
    ma += s * (std::conj(v[i]) * dr).imag();
  }
  const double hv = g.cell_volume();
  return {va * hv, 2 * ma * hv};
}

// ---- variance identity right-hand side ----------------------------------------------

struct VarianceTerms {
  std::array<double, 5> t{};
  double total = 0;
};

namespace detail {
inline void require_radial(const SpectralField& u, double tol) {
  if (tol > 0 && radial_deviation(u) > tol) throw std::invalid_argument("variance_rhs: input is not radial within tolerance");
}
}  // namespace detail

// five terms of V_a'' for a radial weight a:
//   4∫a_kl Re(∂_k u ∂_l ū), -∫Δ²a|u|², 2(2/p-1)∫Δa V W|u|^p, (4b/p)∫(x·∇a)|x|^{b-2} V|u|^p, (4/p)∫∇a·∇V W|u|^p
inline VarianceTerms variance_rhs(const Hartree& H, const SpectralField& u, const MorawetzWeight& w, bool linear_only = false,
                                  double radial_tol = 1e-2, const std::vector<SpectralField>* grad = nullptr) {
  detail::require_radial(u, radial_tol);
  const auto& g = u.grid();
  const auto& prm = H.params();
  const double p = prm.p;
  std::vector<SpectralField> own;
  if (!grad) {
    own = gradient(u);
    grad = &own;
  }
  const auto& v = u.values();
  VarianceTerms out;
  double t1 = 0, t2 = 0;
  for (std::size_t i = 0; i < g.n; ++i) {
    const double r = g.r[i];
    double gsq = 0;
    cplx dr = 0;
    for (int ax = 0; ax < g.dim; ++ax) {
      const cplx d = (*grad)[ax][i];
      gsq += abs2(d);
      dr += g.coord(i, ax) * d;
    }
    const double s = w.da[i] / r;
    t1 += s * gsq + (w.d2a[i] - s) * abs2(dr) / (r * r);
    t2 += w.bilap[i] * abs2(v[i]);
  }
  const double hv = g.cell_volume();
  out.t[0] = 4 * t1 * hv;
  out.t[1] = -t2 * hv;
  if (!linear_only) {
    const auto dens = H.density(v);  // W|u|^p
    const auto V = riesz_convolve(H.kernel(), dens);
    const auto dV = riesz_gradient(H.kernel(), dens);
    double t3 = 0, t4 = 0, t5 = 0;
    for (std::size_t i = 0; i < g.n; ++i) {
      const double r = g.r[i];
      t3 += w.lap[i] * V[i] * dens[i];
      // (x·∇a)|x|^{b-2}|u|^p = (a'/r) W|u|^p
      t4 += w.da[i] / r * V[i] * dens[i];
      double xg = 0;
      for (int ax = 0; ax < g.dim; ++ax) xg += g.coord(i, ax) * dV[ax][i];
      t5 += w.da[i] / r * xg * dens[i];
    }
    out.t[2] = 2 * (2 / p - 1) * t3 * hv;
    out.t[3] = 4 * prm.b / p * t4 * hv;
    out.t[4] = 4 / p * t5 * hv;
  }
  for (double x : out.t) out.total += x;
  return out;
}

// M_a' of the semi-discrete flow u_t = i(Δu + c u), c = V W|u|^{p-2}, with A = ∇a·∇ spectral:
// 2 Re Σ [ū A(Lu) - conj(Lu) A u] h^N, L = Δ + c. No product rule is used.
inline double variance_rhs_commutator(const Hartree& H, const SpectralField& u, const MorawetzWeight& w, bool linear_only = false) {
  const auto& g = u.grid();
  auto apply_A = [&](const SpectralField& f) {
    const auto d = gradient(f);
    cvec out(g.n, cplx(0));
    for (int ax = 0; ax < g.dim; ++ax)
      for (std::size_t i = 0; i < g.n; ++i) out[i] += w.da[i] / g.r[i] * g.coord(i, ax) * d[ax][i];
    return out;
  };
  SpectralField Lu = laplacian(u);
  if (!linear_only) {
    const auto c = H.coefficient(u.values(), H.potential(u));
    auto& x = Lu.values_mut();
    const auto& v = u.values();
    for (std::size_t i = 0; i < g.n; ++i) x[i] += c[i] * v[i];
  }
  const auto ALu = apply_A(Lu), Au = apply_A(u);
  const auto& v = u.values();
  const auto& l = Lu.values();
  double s = 0;
  for (std::size_t i = 0; i < g.n; ++i) s += (std::conj(v[i]) * ALu[i] - std::conj(l[i]) * Au[i]).real();
  return 2 * s * g.cell_volume();
}

// 4‖∇u‖² - (2B/p)P with the same spectral gradient as the term-wise evaluation
inline double virial_reduction(const Hartree& H, const SpectralField& u) {
  double gsq = 0;
  for (const auto& d : gradient(u)) gsq += mass(d);
  return 4 * gsq - 2 * H.exponents().B / H.params().p * H.interaction(u);
}

// direct vector-kernel oracle for the fifth term on small grids:
// (4/p)(α-N) Σ_x Σ_y ∇a(x)·d/|d|² K(d) g(y) g(x), d = x - y (minimal image)
inline double variance_t5_direct(const Hartree& H, const SpectralField& u, const MorawetzWeight& w) {
  const auto& g = u.grid();
  if (g.M > 16) throw std::invalid_argument("variance_t5_direct: grid too large (M <= 16)");
  const auto& prm = H.params();
  const auto dens = H.density(u.values());
  const int N = g.dim;
  const double c = riesz_constant(N, prm.alpha);
  const double hv = g.cell_volume();
  double acc = 0;
  std::vector<double> d(N);
  for (std::size_t i = 0; i < g.n; ++i) {
    double inner = 0;
    for (std::size_t j = 0; j < g.n; ++j) {
      if (i == j) continue;
      double d2 = 0;
      for (int a = 0; a < N; ++a) {
        double x = g.coord(i, a) - g.coord(j, a);
        if (x > g.L) x -= 2 * g.L;
        if (x < -g.L) x += 2 * g.L;
        d[a] = x;
        d2 += x * x;
      }
      double dot = 0;
      for (int a = 0; a < N; ++a) dot += g.coord(i, a) * d[a];
      inner += dot / d2 * c * std::pow(d2, (prm.alpha - N) / 2) * dens[j];
    }
    acc += w.da[i] / g.r[i] * inner * dens[i];
  }
  return 4 / prm.p * (prm.alpha - N) * acc * hv * hv;
}

struct VarianceSample {
  double t = 0, V_a = 0, M_a = 0, rhs = 0;
};

struct VarianceCheck {
  double defect_Ma = 0;      // max |FD(M_a) - rhs| / (|rhs| + ε)
  double defect_Va = 0;      // max |FD²(V_a) - rhs| / (|rhs| + ε)
  double defect_first = 0;   // max |FD(V_a) - M_a| / (|M_a| + ε)
  double max_defect = 0;
  double scale = 0;
  std::size_t samples = 0;
};

// ε = 1e-3 · max|rhs| over the window
inline VarianceCheck variance_identity_check(const std::vector<VarianceSample>& s) {
  if (s.size() < 5) throw std::invalid_argument("variance_identity_check: need at least 5 samples");
  VarianceCheck c;
  c.samples = s.size();
  double scale = 0, mscale = 0;
  for (const auto& x : s) {
    scale = std::max(scale, std::abs(x.rhs));
    mscale = std::max(mscale, std::abs(x.M_a));
  }
  const double eps = 1e-3 * scale + 1e-300, meps = 1e-3 * mscale + 1e-300;
  c.scale = scale;
  for (std::size_t k = 1; k + 1 < s.size(); ++k) {
    const double h1 = s[k].t - s[k - 1].t, h2 = s[k + 1].t - s[k].t;
    const double dM = (s[k + 1].M_a - s[k - 1].M_a) / (h1 + h2);
    const double dV = (s[k + 1].V_a - s[k - 1].V_a) / (h1 + h2);
    const double d2V = 2 * (h1 * s[k + 1].V_a - (h1 + h2) * s[k].V_a + h2 * s[k - 1].V_a) / (h1 * h2 * (h1 + h2));
    c.defect_Ma = std::max(c.defect_Ma, std::abs(dM - s[k].rhs) / (std::abs(s[k].rhs) + eps));
    c.defect_Va = std::max(c.defect_Va, std::abs(d2V - s[k].rhs) / (std::abs(s[k].rhs) + eps));
    c.defect_first = std::max(c.defect_first, std::abs(dV - s[k].M_a) / (std::abs(s[k].M_a) + meps));
  }
  c.max_defect = std::max(c.defect_Ma, c.defect_Va);
  return c;
}

// ---- local quantities --------------------------------------------------------

inline double local_mass(const SpectralField& u, const Cutoff& c) {
  const auto& v = u.values();
  double s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) s += c.values[i] * abs2(v[i]);
  return s * u.grid().cell_volume();
}

inline double local_mass(const SpectralField& u, double R) { return local_mass(u, cutoff_psi(u.grid(), R)); }

// ‖ψ u‖_{L^r}
inline double localized_lr(const SpectralField& u, const rvec& psi, double r) {
  const auto& v = u.values();
  double s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) s += std::pow(psi[i] * std::abs(v[i]), r);
  return std::pow(s * u.grid().cell_volume(), 1 / r);
}

// ‖u‖_{L^r(|x| ≤ R)}
inline double ball_lr(const SpectralField& u, double R, double r) {
  const auto& g = u.grid();
  const auto& v = u.values();
  double s = 0;
  for (std::size_t i = 0; i < g.n; ++i)
    if (g.r[i] <= R) s += std::pow(std::abs(v[i]), r);
  return std::pow(s * g.cell_volume(), 1 / r);
}

struct CoercivityResult {
  double lhs = 0, rhs = 0, ratio = 0;
  double grad_local_sq = 0, grad_sq = 0, mass = 0;
  double localization_constant = 0;  // (‖∇(ψu)‖² - ‖∇u‖²) R² / ‖u‖², the C needed
};

inline CoercivityResult coercivity_check(const Hartree& H, const SpectralField& u, const Cutoff& c) {
  const auto& ex = H.exponents();
  const double p = H.params().p;
  SpectralField v(u.grid_ptr());
  {
    auto& o = v.values_mut();
    const auto& x = u.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = c.values[i] * x[i];
  }
  CoercivityResult r;
  r.grad_local_sq = grad_norm_sq(v);
  r.grad_sq = grad_norm_sq(u);
  r.mass = mass(u);
  r.lhs = r.grad_local_sq - ex.B / (2 * p) * H.interaction(v);
  const double q = norm_lr(v, coercivity_exponent(H.params()));
  r.rhs = q * q;
  r.ratio = r.rhs > 0 ? r.lhs / r.rhs : 0.0;
  r.localization_constant = r.mass > 0 ? (r.grad_local_sq - r.grad_sq) * c.R * c.R / r.mass : 0.0;
  return r;
}

inline CoercivityResult coercivity_check(const Hartree& H, const SpectralField& u, double R) {
  return coercivity_check(H, u, cutoff_psi(u.grid(), R));
}

// ---- scattering-side diagnostics ------------------------------------------------

// e^{-itΔ}u(t), multiplier e^{+i|ξ|²t}
inline SpectralField interaction_representation(const SpectralField& u, double t) {
  const auto& g = u.grid();
  cvec k = u.spectrum();
  for (std::size_t i = 0; i < g.n; ++i) k[i] *= std::polar(1.0, g.ksq[i] * t);
  return SpectralField::from_spectrum(u.grid_ptr(), std::move(k));
}

struct MorawetzAverage {
  double lhs_avg = 0, rhs_model = 0, kappa_fit = 0;
};

// (1/T)∫_0^T ‖ψ_R u‖²_{L^r} dt by the trapezoid rule over (t, ‖ψ_R u‖_{L^r}) samples
inline MorawetzAverage morawetz_average(const std::vector<std::pair<double, double>>& samples, double R, double T, const Hartree& H) {
  if (samples.size() < 2 || samples.back().first < T * (1 - 1e-9)) throw std::invalid_argument("morawetz_average: samples do not cover [0, T]");
  const auto& ex = H.exponents();
  const int N = H.params().N;
  double acc = 0;
  for (std::size_t k = 1; k < samples.size(); ++k) {
    const double a = samples[k - 1].first, b = std::min(samples[k].first, T);
    if (a >= T) break;
    const double fa = samples[k - 1].second * samples[k - 1].second, fb = samples[k].second * samples[k].second;
    acc += 0.5 * (fa + fb) * (b - a);
  }
  MorawetzAverage m;
  m.lhs_avg = acc / T;
  m.rhs_model = R / T + std::pow(R, -(N - 1) * ex.B / N);
  m.kappa_fit = m.lhs_avg / m.rhs_model;
  return m;
}

struct EvacuationPoint {
  double t = 0, R = 0, norm = 0;
};

struct EvacuationScan {
  std::vector<EvacuationPoint> points;
  double kendall_tau = 0;
};

inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  long long conc = 0, disc = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double s = (x[j] - x[i]) * (y[j] - y[i]);
      if (s > 0) ++conc;
      if (s < 0) ++disc;
    }
  const long long tot = static_cast<long long>(x.size() * (x.size() - 1) / 2);
  return tot > 0 ? static_cast<double>(conc - disc) / static_cast<double>(tot) : 0.0;
}

// points carry ‖u(t_n)‖_{L^r(|x| ≤ √t_n)}
inline EvacuationScan evacuation_scan(std::vector<EvacuationPoint> pts) {
  EvacuationScan s;
  s.points = std::move(pts);
  std::vector<double> t, n;
  for (const auto& p : s.points) {
    t.push_back(p.t);
    n.push_back(p.norm);
  }
  s.kendall_tau = kendall_tau(t, n);
  return s;
}

// geometric sequence t_0, 2t_0, ... ≤ T
inline std::vector<double> evacuation_times(double t0, double T) {
  std::vector<double> out;
  for (double t = t0; t <= T * (1 + 1e-12); t *= 2) out.push_back(t);
  return out;
}

// ---- per-record diagnostics -------------------------------------------------------

struct DiagnosticsRecord {
  double t = 0, mass = 0, energy = 0, grad_norm = 0;
  std::optional<double> me;
  double gm = 0, func_I = 0, v_a = 0, m_a = 0;
  std::array<double, 5> vpp{};
  double vpp_total = 0, local_mass = 0, lr_norm = 0, hsc_norm = 0, strauss = 0;
};

struct DiagnosticsContext {
  const Hartree* H = nullptr;
  const GroundState* gs = nullptr;
  MorawetzWeight weight;
  Cutoff cutoff;
  double u0_mass = 0;
  bool linear_only = false;
  double radial_tol = 1e-2;

  DiagnosticsContext(const Hartree& h, const GroundState& g, double R_weight, double R_local, double m0, bool lin = false)
      : H(&h), gs(&g), weight(morawetz_weight(h.grid(), R_weight)), cutoff(cutoff_psi(h.grid(), R_local)), u0_mass(m0), linear_only(lin) {}
};

inline DiagnosticsRecord diagnostics_record(const DiagnosticsContext& c, const SpectralField& u, double t) {
  const auto& H = *c.H;
  DiagnosticsRecord d;
  d.t = t;
  const double M = mass(u), G = grad_norm_sq(u);
  const double P = c.linear_only ? 0.0 : H.interaction(u);
  const auto f = H.functionals_from(M, G, P);
  d.mass = M;
  d.energy = f.energy;
  d.grad_norm = std::sqrt(G);
  const auto mg = me_gm_from(f.energy, c.u0_mass, G, M, *c.gs, H.exponents().s_c);
  d.me = mg.ME;
  d.gm = mg.GM;
  d.func_I = f.func_I;
  const auto grad = gradient(u);
  const auto va = variance_and_action(u, c.weight, &grad);
  d.v_a = va.V_a;
  d.m_a = va.M_a;
  const auto vt = variance_rhs(H, u, c.weight, c.linear_only, c.radial_tol, &grad);
  d.vpp = vt.t;
  d.vpp_total = vt.total;
  d.local_mass = local_mass(u, c.cutoff);
  d.lr_norm = norm_lr(u, coercivity_exponent(H.params()));
  d.hsc_norm = norm_hs(u, H.exponents().s_c);
  d.strauss = strauss_ratio(u);
  return d;
}

inline const char* csv_header() {
  return "t,mass,energy,grad_norm,me,gm,func_I,v_a,m_a,vpp_t1,vpp_t2,vpp_t3,vpp_t4,vpp_t5,vpp_total,local_mass,lr_norm,hsc_norm,strauss";
}

inline std::string fmt_num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_row(const DiagnosticsRecord& d) {
  std::ostringstream os;
  os << fmt_num(d.t) << ',' << fmt_num(d.mass) << ',' << fmt_num(d.energy) << ',' << fmt_num(d.grad_norm) << ','
     << (d.me ? fmt_num(*d.me) : std::string("nan")) << ',' << fmt_num(d.gm) << ',' << fmt_num(d.func_I) << ',' << fmt_num(d.v_a) << ','
     << fmt_num(d.m_a);
  for (double x : d.vpp) os << ',' << fmt_num(x);
  os << ',' << fmt_num(d.vpp_total) << ',' << fmt_num(d.local_mass) << ',' << fmt_num(d.lr_norm) << ',' << fmt_num(d.hsc_norm) << ','
     << fmt_num(d.strauss);
  return os.str();
}

// ---- classifier --------------------------------------------------------------------

struct ClassifierThresholds {
  double R_crit = NAN;          // default L/4
  double eps_crit_frac = 0.01;  // ε_crit = frac · mass(u0)
  double grad_sup_max = 3.0;
  double tail_fraction = 0.5;    // share of the run treated as the tail (at least 0.25)
  double decay_tolerance = 0.5;  // relative to the linear rate N(1/2 - 1/r)
};

// what the classifier reads from a run, sampled at the output records
struct ClassifierSeries {
  std::vector<double> t, local_mass_crit, grad_norm, lr_norm, cauchy_defect;
  double u0_mass = 0;
  RunStatus status = RunStatus::completed;
  std::vector<AdaptEvent> adapt_events;
};

enum class Verdict { scattering, blowup, undecided, error };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::scattering: return "scattering";
    case Verdict::blowup: return "blow-up";
    case Verdict::undecided: return "undecided";
    case Verdict::error: return "error";
  }
  return "?";
}

struct ClassificationResult {
  Verdict verdict = Verdict::undecided;
  double local_mass_inf = NAN, eps_crit = NAN;
  double grad_sup_ratio = NAN;
  double decay_exponent_fit = NAN, decay_exponent_linear = NAN;
  double cauchy_defect = NAN;        // last tail defect
  double cauchy_defect_ratio = NAN;  // min tail defect / first tail defect
  bool local_mass_ok = false, grad_ok = false, cauchy_ok = false, decay_ok = false;
  bool floor_hit = false, monotone_growth = false;
  ClassifierThresholds thresholds;
};

// least-squares slope of log y against log t
inline double loglog_slope(const std::vector<double>& t, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0 && y[i] > 0)) continue;
    const double x = std::log(t[i]), z = std::log(y[i]);
    sx += x;
    sy += z;
    sxx += x * x;
    sxy += x * z;
    ++n;
  }
  if (n < 2) return NAN;
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline ClassificationResult classify(const ClassifierSeries& s, const ModelParams& prm, ClassifierThresholds th) {
  ClassificationResult c;
  c.thresholds = th;
  c.floor_hit = s.status == RunStatus::blowup_suspected;
  c.monotone_growth = !s.adapt_events.empty();
  for (std::size_t k = 1; k < s.adapt_events.size(); ++k)
    c.monotone_growth = c.monotone_growth && s.adapt_events[k].grad_norm > s.adapt_events[k - 1].grad_norm;
  if (c.floor_hit && c.monotone_growth) {
    c.verdict = Verdict::blowup;
    return c;
  }
  if (s.status != RunStatus::completed || s.t.size() < 4) {
    c.verdict = s.status == RunStatus::overflow ? Verdict::error : Verdict::undecided;
    return c;
  }
  const double T = s.t.back();
  const double t_tail = T * (1 - th.tail_fraction);
  c.eps_crit = th.eps_crit_frac * s.u0_mass;
  c.local_mass_inf = INFINITY;
  double gmax = 0;
  std::vector<double> tt, ll, cd;
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    gmax = std::max(gmax, s.grad_norm[i]);
    if (s.t[i] >= t_tail) {
      c.local_mass_inf = std::min(c.local_mass_inf, s.local_mass_crit[i]);
      tt.push_back(s.t[i]);
      ll.push_back(s.lr_norm[i]);
      if (i < s.cauchy_defect.size() && std::isfinite(s.cauchy_defect[i])) cd.push_back(s.cauchy_defect[i]);
    }
  }
  c.grad_sup_ratio = s.grad_norm.front() > 0 ? gmax / s.grad_norm.front() : INFINITY;
  const double r = coercivity_exponent(prm);
  c.decay_exponent_linear = prm.N * (0.5 - 1 / r);
  c.decay_exponent_fit = -loglog_slope(tt, ll);
  if (!cd.empty()) {
    c.cauchy_defect = cd.back();
    c.cauchy_defect_ratio = *std::min_element(cd.begin(), cd.end()) / cd.front();
  }
  c.local_mass_ok = c.local_mass_inf < c.eps_crit;
  c.grad_ok = c.grad_sup_ratio <= th.grad_sup_max;
  c.cauchy_ok = cd.size() >= 2 && c.cauchy_defect_ratio <= 0.5;
  c.decay_ok = std::isfinite(c.decay_exponent_fit) &&
               std::abs(c.decay_exponent_fit - c.decay_exponent_linear) <= th.decay_tolerance * c.decay_exponent_linear;
  c.verdict = c.local_mass_ok && c.grad_ok && c.cauchy_ok && c.decay_ok ? Verdict::scattering : Verdict::undecided;
  return c;
}

}  // namespace choquard
