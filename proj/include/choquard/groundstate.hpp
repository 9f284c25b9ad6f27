#pragma once

#include "choquard/nonlocal.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace choquard {

struct WeinsteinOptions {
  double el_tol = 1e-6;
  int max_iter = 5000;
  int stall_window = 50;
  double stall_rel = 1e-10;
  double armijo = 1e-4;
};

struct WeinsteinResult {
  SpectralField Q;
  double J = 0, C_gn = 0;
  double el_residual = 0;
  double mass = 0, grad_sq = 0, P = 0;
  int iterations = 0;
  bool converged_residual = false, converged_stall = false;
  bool radially_decreasing = false;
  double positivity_defect = 0;  // max over samples of max(0, -Re u) / max|u|
};

class GroundStateError : public std::runtime_error {
 public:
  GroundStateError(const std::string& what, SpectralField last, double residual)
      : std::runtime_error(what), last_(std::move(last)), residual_(residual) {}
  const SpectralField& last_iterate() const { return last_; }
  double residual() const { return residual_; }

 private:
  SpectralField last_;
  double residual_;
};

namespace detail {

template <class F>
SpectralField apply_multiplier(const SpectralField& u, F&& m) {
  const auto& g = u.grid();
  cvec k = u.spectrum();
  for (std::size_t i = 0; i < g.n; ++i) k[i] *= m(g.ksq[i]);
  return SpectralField::from_spectrum(u.grid_ptr(), std::move(k));
}

inline SpectralField abs_field(const SpectralField& u) {
  SpectralField out(u.grid_ptr());
  auto& o = out.values_mut();
  const auto& v = u.values();
  for (std::size_t i = 0; i < v.size(); ++i) o[i] = std::abs(v[i]);
  return out;
}

inline SpectralField axpy(const SpectralField& x, double a, const SpectralField& y) {
  SpectralField out(x.grid_ptr());
  auto& o = out.values_mut();
  const auto& xv = x.values();
  const auto& yv = y.values();
  for (std::size_t i = 0; i < xv.size(); ++i) o[i] = xv[i] + a * yv[i];
  return out;
}

// shell averages of |u| must not increase with radius for r < L/2 (periodic images bend the tail)
inline bool radially_decreasing(const SpectralField& u, double slack = 1e-10) {
  const auto& g = u.grid();
  rvec a(g.n);
  for (std::size_t i = 0; i < g.n; ++i) a[i] = std::abs(u[i]);
  const auto prof = shell_average(g, a);
  const double mx = *std::max_element(prof.begin(), prof.end());
  for (std::size_t s = 1; s < prof.size() && g.shell_r[s] < g.L / 2; ++s)
    if (prof[s] > prof[s - 1] + slack * mx) return false;
  return true;
}

// L² distance of g from span{u, -Δu}, relative to scale·‖u‖
inline double constrained_residual(const SpectralField& g, const SpectralField& u, double scale) {
  auto c2 = laplacian(u);
  c2 *= -1.0;
  const double a11 = inner_real(u, u), a12 = inner_real(u, c2), a22 = inner_real(c2, c2);
  const double b1 = inner_real(u, g), b2 = inner_real(c2, g);
  const double det = a11 * a22 - a12 * a12;
  const double x1 = (b1 * a22 - a12 * b2) / det, x2 = (a11 * b2 - a12 * b1) / det;
  const auto r = axpy(axpy(g, -x1, u), -x2, c2);
  return std::sqrt(mass(r)) / (scale * std::sqrt(mass(u)));
}

// heat-type multiplier e^{-τ|ξ|²} with τ chosen so that ‖∇u‖ = ‖u‖, then unit mass
inline SpectralField retract_normalized(const SpectralField& u) {
  const auto& g = u.grid();
  const auto& k = u.spectrum();
  auto moments = [&](double tau, double& m0, double& m1, double& m2) {
    m0 = m1 = m2 = 0;
    for (std::size_t i = 0; i < g.n; ++i) {
      const double w = abs2(k[i]) * std::exp(-2 * tau * g.ksq[i]);
      m0 += w;
      m1 += w * g.ksq[i];
      m2 += w * g.ksq[i] * g.ksq[i];
    }
  };
  double tau = 0;
  for (int it = 0; it < 50; ++it) {
    double m0, m1, m2;
    moments(tau, m0, m1, m2);
    const double f = std::log(m1 / m0);
    if (std::abs(f) < 1e-14) break;
    const double df = -2 * (m2 / m1 - m1 / m0);
    tau -= f / df;
  }
  auto v = apply_multiplier(u, [&](double k2) { return std::exp(-tau * k2); });
  v *= 1 / std::sqrt(mass(v));
  return v;
}

}  // namespace detail

// EL operator of log J: (A/M)u - (B/G)Δu - (2p/P)𝒩(u)
inline SpectralField weinstein_gradient(const Hartree& H, const SpectralField& u, double M, double G, double P) {
  const auto& ex = H.exponents();
  const double p = H.params().p;
  auto lap = laplacian(u);
  auto nl = H.nonlinearity(u);
  SpectralField g(u.grid_ptr());
  auto& o = g.values_mut();
  const auto& uv = u.values();
  const auto& lv = lap.values();
  const auto& nv = nl.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (ex.A / M) * uv[i] - (ex.B / G) * lv[i] - (2 * p / P) * nv[i];
  return g;
}

// residual of the constrained EL equation on {‖u‖ = ‖∇u‖ = 1}
inline double weinstein_residual(const Hartree& H, const SpectralField& u) {
  const auto f = H.functionals(u);
  if (!f.J_finite) return INFINITY;
  const auto g = weinstein_gradient(H, u, f.mass, f.grad_sq, f.P);
  return detail::constrained_residual(g, u, H.exponents().A / f.mass);
}

// default Gaussian, or a seeded radial perturbation of it
inline SpectralField weinstein_init(const GridPtr& g, unsigned long long seed = 0) {
  if (seed == 0) return gaussian(g, 1.0, 1.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1, 1);
  const double w = 1.0 + 0.3 * U(rng);
  std::array<double, 3> c{0.2 * U(rng), 0.2 * U(rng), 0.2 * U(rng)};
  return sample_radial(g, [&](double r) {
    const double s = r / 2;
    return cplx(std::exp(-r * r / (w * w)) * (1 + c[0] * std::exp(-s * s) + c[1] * s * s * std::exp(-s * s) + c[2] * std::cos(r) * std::exp(-r)));
  });
}

// Sobolev-preconditioned projected descent on log J with ‖u‖ = 1 and ‖∇u‖ ≈ 1
inline WeinsteinResult minimize_weinstein(const Hartree& H, SpectralField init, const WeinsteinOptions& opt = {}) {
  const auto& ex = H.exponents();
  if (mass(init) == 0) throw std::invalid_argument("minimize_weinstein: init must be nonzero");
  auto u = detail::abs_field(init);
  {
    // exact dilation to ‖∇u‖ = ‖u‖, then unit mass
    const double lam = std::sqrt(mass(u) / grad_norm_sq(u));
    if (std::abs(lam - 1) > 1e-12) u = detail::abs_field(resample(u, lam));
    u = detail::retract_normalized(u);
  }
  auto f = H.functionals(u);
  if (!f.J_finite) throw std::invalid_argument("minimize_weinstein: interaction vanishes on init");
  double logJ = std::log(f.J);
  std::vector<double> hist{logJ};
  double step = 1.0, res = INFINITY;
  WeinsteinResult out;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const double M = f.mass, G = f.grad_sq, P = f.P;
    auto gr = weinstein_gradient(H, u, M, G, P);
    res = detail::constrained_residual(gr, u, ex.A / M);
    if (res < opt.el_tol) {
      out.converged_residual = true;
      break;
    }
    if (static_cast<int>(hist.size()) > opt.stall_window) {
      const double old = hist[hist.size() - 1 - opt.stall_window];
      if (std::abs(std::exp(old - logJ) - 1) < opt.stall_rel) {
        out.converged_stall = true;
        break;
      }
    }
    auto Kinv = [&](const SpectralField& v) { return detail::apply_multiplier(v, [&](double k2) { return 1.0 / (ex.B / G * k2 + ex.A / M); }); };
    const auto lap = laplacian(u);
    SpectralField c2(u.grid_ptr());
    {
      auto& o = c2.values_mut();
      const auto& l = lap.values();
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = -l[i];
    }
    auto z0 = Kinv(gr), z1 = Kinv(u), z2 = Kinv(c2);
    const double S11 = inner_real(u, z1), S12 = inner_real(u, z2), S21 = inner_real(c2, z1), S22 = inner_real(c2, z2);
    const double r1 = inner_real(u, z0), r2 = inner_real(c2, z0);
    const double det = S11 * S22 - S12 * S21;
    const double a1 = (r1 * S22 - S12 * r2) / det, a2 = (S11 * r2 - S21 * r1) / det;
    auto d = detail::axpy(detail::axpy(z0, -a1, z1), -a2, z2);
    const double slope = inner_real(gr, d);
    if (!(slope > 0)) {
      // projection killed the descent direction; fall back to the plain preconditioned gradient
      d = z0;
    }
    const double sl = inner_real(gr, d);
    bool accepted = false;
    double t = std::min(2 * step, 4.0);
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      auto trial = detail::abs_field(detail::axpy(u, -t, d));
      if (!(mass(trial) > 0)) continue;
      trial = detail::retract_normalized(trial);
      const auto ft = H.functionals(trial);
      if (!ft.J_finite) continue;
      const double lt = std::log(ft.J);
      if (lt <= logJ - opt.armijo * t * sl) {
        u = std::move(trial);
        f = ft;
        logJ = lt;
        step = t;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.converged_stall = true;  // no further decrease representable
      break;
    }
    hist.push_back(logJ);
  }
  out.iterations = it;
  out.el_residual = res;
  if (!out.converged_residual && !out.converged_stall)
    throw GroundStateError("minimize_weinstein: no convergence after " + std::to_string(it) + " iterations", u, res);
  out.mass = f.mass;
  out.grad_sq = f.grad_sq;
  out.P = f.P;
  out.J = f.J;
  out.C_gn = 1 / f.J;
  double mx = 0, neg = 0;
  for (const auto& z : u.values()) {
    mx = std::max(mx, std::abs(z));
    neg = std::max(neg, -z.real());
  }
  out.positivity_defect = mx > 0 ? neg / mx : 0;
  out.radially_decreasing = detail::radially_decreasing(u);
  out.Q = std::move(u);
  return out;
}

// ---- φ from Q --------------------------------------------------------------------

struct RescaleGsOptions {
  double polish_tol = 1e-11;  // relative max change per Petviashvili iteration
  int polish_max = 2000;
  double residual_max = 1e-4;
};

struct PhiResult {
  SpectralField phi;
  double gamma = 0, beta = 0;
  double residual_before_polish = 0, residual = 0;
  int polish_iterations = 0;
};

// ‖Δφ - φ + 𝒩(φ)‖ / ‖φ‖_{H¹}
inline double groundstate_residual(const Hartree& H, const SpectralField& phi) {
  auto r = laplacian(phi);
  r -= phi;
  r += H.nonlinearity(phi);
  const double n = norm_h1(phi);
  return n > 0 ? std::sqrt(mass(r)) / n : INFINITY;
}

// Petviashvili iteration for -Δφ + φ = 𝒩(φ) on the grid
inline int petviashvili_polish(const Hartree& H, SpectralField& phi, double tol, int max_iter) {
  const double p = H.params().p;
  const double expo = (2 * p - 1) / (2 * p - 2);
  int it = 0;
  for (; it < max_iter; ++it) {
    auto nl = H.nonlinearity(phi);
    const double lhs = mass(phi) + grad_norm_sq(phi);
    const double rhs = inner_real(nl, phi);
    if (!(rhs > 0)) break;
    auto next = detail::apply_multiplier(nl, [](double k2) { return 1.0 / (1.0 + k2); });
    next *= std::pow(lhs / rhs, expo);
    double dmax = 0, umax = 0;
    const auto& a = next.values();
    const auto& b = phi.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
      dmax = std::max(dmax, std::abs(a[i] - b[i]));
      umax = std::max(umax, std::abs(a[i]));
    }
    phi = std::move(next);
    if (dmax <= tol * umax) {
      ++it;
      break;
    }
  }
  return it;
}

// φ(x) = β Q(γx): γ² = B M(Q) / (A G(Q)), β^{2p-2} = (2p M(Q) / (A P(Q))) γ^{α+2b}
inline PhiResult rescale_to_groundstate(const Hartree& H, const SpectralField& Q, const RescaleGsOptions& opt = {}) {
  const auto& ex = H.exponents();
  const auto& prm = H.params();
  const auto f = H.functionals(Q);
  if (!f.J_finite) throw std::invalid_argument("rescale_to_groundstate: Q must have positive mass, gradient and interaction");
  PhiResult out;
  out.gamma = std::sqrt(ex.B * f.mass / (ex.A * f.grad_sq));
  out.beta = std::pow(2 * prm.p * f.mass / (ex.A * f.P) * std::pow(out.gamma, prm.alpha + 2 * prm.b), 1 / (2 * prm.p - 2));
  auto phi = resample(Q, out.gamma);
  phi *= out.beta;
  out.residual_before_polish = groundstate_residual(H, phi);
  out.polish_iterations = petviashvili_polish(H, phi, opt.polish_tol, opt.polish_max);
  out.residual = groundstate_residual(H, phi);
  if (!(out.residual <= opt.residual_max))
    throw GroundStateError("rescale_to_groundstate: residual " + std::to_string(out.residual) + " above tolerance", phi, out.residual);
  out.phi = std::move(phi);
  return out;
}

// ---- ground state and thresholds -----------------------------------------------

struct GroundState {
  SpectralField Q, phi;
  double C_gn = 0, J_min = 0;
  double el_residual = 0, phi_residual = 0;
  int iterations = 0, polish_iterations = 0;
  double gamma = 0, beta = 0;
  Functionals fphi;
  std::array<double, 2> pohozaev_res{};  // |E - (B-2)/B G|, |E - (B-2)/A M|
  double ratio_EG = 0, ratio_EM = 0;     // E/G, E/M
  double C_relation = 0;                 // (2p/A)(A/B)^{B/2} ‖φ‖^{-2(p-1)}
  double me_threshold = 0;               // E(φ)^{s_c} M(φ)^{1-s_c}
  double gm_threshold = 0;               // ‖∇φ‖^{s_c} ‖φ‖^{1-s_c}
  double m_action = 0;                   // 𝒮(φ)
  bool radially_decreasing = false;
  double Q_grad_norm = 0;
};

struct GroundStateOptions {
  WeinsteinOptions weinstein;
  RescaleGsOptions rescale;
  unsigned long long seed = 0;
};

inline GroundState compute_ground_state(const Hartree& H, const GroundStateOptions& opt = {}) {
  const auto& ex = H.exponents();
  const double p = H.params().p;
  auto w = minimize_weinstein(H, weinstein_init(H.grid_ptr(), opt.seed), opt.weinstein);
  auto ph = rescale_to_groundstate(H, w.Q, opt.rescale);
  GroundState gs;
  gs.C_gn = w.C_gn;
  gs.J_min = w.J;
  gs.el_residual = w.el_residual;
  gs.iterations = w.iterations;
  gs.radially_decreasing = w.radially_decreasing;
  gs.Q_grad_norm = std::sqrt(w.grad_sq);
  gs.phi_residual = ph.residual;
  gs.polish_iterations = ph.polish_iterations;
  gs.gamma = ph.gamma;
  gs.beta = ph.beta;
  gs.fphi = H.functionals(ph.phi);
  const auto& F = gs.fphi;
  gs.pohozaev_res = {std::abs(F.energy - (ex.B - 2) / ex.B * F.grad_sq), std::abs(F.energy - (ex.B - 2) / ex.A * F.mass)};
  gs.ratio_EG = F.energy / F.grad_sq;
  gs.ratio_EM = F.energy / F.mass;
  gs.C_relation = (2 * p / ex.A) * std::pow(ex.A / ex.B, ex.B / 2) * std::pow(F.mass, -(p - 1));
  gs.me_threshold = std::pow(F.energy, ex.s_c) * std::pow(F.mass, 1 - ex.s_c);
  gs.gm_threshold = std::pow(F.grad_sq, ex.s_c / 2) * std::pow(F.mass, (1 - ex.s_c) / 2);
  gs.m_action = F.action;
  gs.Q = std::move(w.Q);
  gs.phi = std::move(ph.phi);
  return gs;
}

struct MeGm {
  std::optional<double> ME;  // empty when E(u) < 0
  double GM = 0;
  bool negative_energy = false;
};

inline MeGm me_gm_from(double E, double M0, double G, double M, const GroundState& gs, double s_c) {
  MeGm r;
  r.GM = std::pow(G, s_c / 2) * std::pow(M, (1 - s_c) / 2) / gs.gm_threshold;
  if (E >= 0) {
    r.ME = std::pow(E, s_c) * std::pow(M0, 1 - s_c) / gs.me_threshold;
  } else {
    r.negative_energy = true;
  }
  return r;
}

inline MeGm me_gm(const Hartree& H, const SpectralField& u, const GroundState& gs, double u0_mass) {
  const auto f = H.functionals(u);
  return me_gm_from(f.energy, u0_mass, f.grad_sq, f.mass, gs, H.exponents().s_c);
}

struct ThresholdRow {
  double c = 0;
  std::optional<double> ME;
  double GM = 0, func_I = 0, energy = 0;
};

// amplitude family cφ from the stored functionals of φ
inline std::vector<ThresholdRow> threshold_family(const Hartree& H, const GroundState& gs, const std::vector<double>& cs) {
  const double p = H.params().p;
  std::vector<ThresholdRow> out;
  for (double c : cs) {
    const double c2 = c * c, c2p = std::pow(std::abs(c), 2 * p);
    const auto f = H.functionals_from(c2 * gs.fphi.mass, c2 * gs.fphi.grad_sq, c2p * gs.fphi.P);
    const auto m = me_gm_from(f.energy, f.mass, f.grad_sq, f.mass, gs, H.exponents().s_c);
    out.push_back({c, m.ME, m.GM, f.func_I, f.energy});
  }
  return out;
}

// smallest c > 0 with ℐ(cφ) = 0
inline double func_I_zero(const Hartree& H, const GroundState& gs) {
  const auto& ex = H.exponents();
  const double p = H.params().p;
  // c^{2p-2} = G / ((B/4p) P)
  return std::pow(gs.fphi.grad_sq / (ex.B / (4 * p) * gs.fphi.P), 1 / (2 * p - 2));
}

}  // namespace choquard
