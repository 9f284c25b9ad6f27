#pragma once

#include "choquard/nonlocal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace choquard {

struct AdaptConfig {
  bool enabled = false;
  double grad_growth_trigger = 2.0;
  double dt_min = 1e-6;
};

// cosine-ramp sponge on the outer layer of the box (breaks exact mass conservation)
struct AbsorbConfig {
  bool enabled = false;
  double width = 4.0;     // layer thickness
  double strength = 5.0;  // damping rate at the box face
};

struct EvolveConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  int output_stride = 10;
  int snapshot_stride = 0;  // in output records; 0 = none
  AdaptConfig adapt;
  AbsorbConfig absorb;
  bool linear_only = false;
  double overflow_guard = 1e12;
};

enum class RunStatus { completed, blowup_suspected, overflow, aborted };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::blowup_suspected: return "blow-up suspected";
    case RunStatus::overflow: return "overflow";
    case RunStatus::aborted: return "aborted";
  }
  return "?";
}

struct Record {
  double t = 0, dt = 0;
  double mass = 0, grad_sq = 0, energy = 0, P = 0;
};

struct AdaptEvent {
  double t = 0, dt_new = 0, grad_norm = 0;
};

struct Trajectory {
  std::vector<Record> records;
  std::vector<std::pair<double, SpectralField>> snapshots;
  std::vector<AdaptEvent> adapt_events;
  RunStatus status = RunStatus::completed;
  std::string reason;
  double t_final = 0, dt_final = 0, t_blowup = NAN;
  long long steps = 0;
  double t_wrap = 0;
};

// ---- single step ----------------------------------------------------------------

// kinetic table stores e^{-iτ|ξ|²} − 1 = (−2 sin²(τ|ξ|²/2), −sin τ|ξ|²); the update z += z·w keeps |z| to
// well below an ulp on the low modes, where multiplying by a phase just under 1 rounds with a bias
inline cvec kinetic_phases(const BoxGrid& g, double tau) {
  cvec w(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    const double th = -g.ksq[i] * tau, h = std::sin(th / 2);
    w[i] = {-2 * h * h, std::sin(th)};
  }
  return w;
}

inline void kinetic_step(SpectralField& u, const cvec& phases_m1) {
  auto& k = u.spectrum_mut();
  for (std::size_t i = 0; i < k.size(); ++i) k[i] += k[i] * phases_m1[i];
}

inline void kinetic_step(SpectralField& u, double tau) { kinetic_step(u, kinetic_phases(u.grid(), tau)); }

inline rvec absorb_profile(const BoxGrid& g, const AbsorbConfig& a) {
  rvec rho(g.n, 0.0);
  if (!a.enabled) return rho;
  const double w = std::min(a.width, g.L);
  for (std::size_t i = 0; i < g.n; ++i) {
    double m = 0;
    for (int ax = 0; ax < g.dim; ++ax) {
      const double s = (std::abs(g.coord(i, ax)) - (g.L - w)) / w;
      if (s > 0) m = std::max(m, std::pow(std::sin(0.5 * std::numbers::pi * std::min(s, 1.0)), 2));
    }
    rho[i] = a.strength * m;
  }
  return rho;
}

// u ↦ exp(iτ V W|u|^{p-2}) e^{-τρ} u with V frozen (exact: |u| is invariant under the phase flow)
inline void nonlinear_step(const Hartree& H, SpectralField& u, double tau, const rvec* damping = nullptr) {
  const auto& v = u.values();
  const auto c = H.coefficient(v, H.potential(u));
  auto& x = u.values_mut();
  // x += x·(e^{a+iθ} − 1), a = −τρ, written with expm1 and sin² as in the kinetic table
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = damping ? -tau * (*damping)[i] : 0.0, th = tau * c[i], h = std::sin(th / 2), ea = std::exp(a);
    x[i] += x[i] * cplx(std::expm1(a) - 2 * ea * h * h, ea * std::sin(th));
  }
}

// half kinetic, full nonlinear, half kinetic; half_phases holds e^{-i|ξ|²dt/2} − 1
inline void step_strang(const Hartree& H, SpectralField& u, double dt, const cvec& half_phases, bool linear_only = false,
                        const rvec* damping = nullptr) {
  kinetic_step(u, half_phases);
  if (!linear_only) {
    nonlinear_step(H, u, dt, damping);
  } else if (damping) {
    auto& x = u.values_mut();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= std::exp(-dt * (*damping)[i]);
  }
  kinetic_step(u, half_phases);
}

inline void step_strang(const Hartree& H, SpectralField& u, double dt, bool linear_only = false, const rvec* damping = nullptr) {
  step_strang(H, u, dt, kinetic_phases(u.grid(), dt / 2), linear_only, damping);
}

// ---- wrap-around time -----------------------------------------------------------

// L / (2 v_max) with v_max = 2|ξ| at the radius holding all but 1e-6 of the spectral mass
inline double wrap_time(const SpectralField& u0, double tail = 1e-6) {
  const auto& g = u0.grid();
  const auto& k = u0.spectrum();
  std::vector<std::pair<double, double>> e(g.n);
  double tot = 0;
  for (std::size_t i = 0; i < g.n; ++i) {
    e[i] = {g.ksq[i], abs2(k[i])};
    tot += e[i].second;
  }
  if (tot == 0) return INFINITY;
  std::sort(e.begin(), e.end());
  double acc = 0, kres = 0;
  for (const auto& [k2, w] : e) {
    acc += w;
    kres = std::sqrt(k2);
    if (acc >= (1 - tail) * tot) break;
  }
  return kres > 0 ? g.L / (2 * 2 * kres) : INFINITY;
}

// ---- time loop ---------------------------------------------------------------

namespace detail {
// max|u|, using the spectral bound Σ|û|/n first so that no transform is needed in the common case
inline double sup_norm_cheap(const SpectralField& u) {
  const auto& k = u.spectrum();
  double s = 0;
  for (const auto& z : k) s += std::abs(z.real()) + std::abs(z.imag());
  const double bound = s / static_cast<double>(k.size());
  if (std::isfinite(bound) && bound < 1e6) return bound;
  double m = 0;
  for (const auto& z : u.values()) m = std::max(m, abs2(z));
  return std::sqrt(m);
}
}  // namespace detail

inline Record make_record(const Hartree& H, const SpectralField& u, double t, double dt, bool linear_only) {
  Record r;
  r.t = t;
  r.dt = dt;
  r.mass = mass(u);
  r.grad_sq = grad_norm_sq(u);
  r.P = linear_only ? 0.0 : H.interaction(u);
  r.energy = r.grad_sq - r.P / H.params().p;
  return r;
}

// hook(record, u) runs at every output record; returning false aborts the run
using EvolveHook = std::function<bool(const Record&, const SpectralField&)>;

inline Trajectory evolve(const Hartree& H, SpectralField u, const EvolveConfig& cfg, const EvolveHook& hook = {}) {
  if (!(cfg.dt > 0) || !(cfg.t_end >= 0) || cfg.output_stride < 1) throw std::invalid_argument("evolve: invalid config");
  Trajectory tr;
  tr.t_wrap = wrap_time(u);
  const rvec damping = absorb_profile(u.grid(), cfg.absorb);
  const rvec* dmp = cfg.absorb.enabled ? &damping : nullptr;
  double t = 0, dt = cfg.dt;
  cvec half = kinetic_phases(u.grid(), dt / 2);
  double half_dt = dt;
  long long since_out = 0;
  double grad_ref = std::sqrt(grad_norm_sq(u));
  auto emit = [&]() {
    auto rec = make_record(H, u, t, dt, cfg.linear_only);
    tr.records.push_back(rec);
    if (cfg.snapshot_stride > 0 && (tr.records.size() - 1) % cfg.snapshot_stride == 0) tr.snapshots.emplace_back(t, u);
    return hook ? hook(rec, u) : true;
  };
  if (!emit()) {
    tr.status = RunStatus::aborted;
    tr.reason = "hook requested stop";
    return tr;
  }
  const double eps_t = 1e-9 * cfg.dt;
  while (t < cfg.t_end - eps_t) {
    const double h = std::min(dt, cfg.t_end - t);
    if (h != half_dt) {
      half = kinetic_phases(u.grid(), h / 2);
      half_dt = h;
    }
    step_strang(H, u, h, half, cfg.linear_only, dmp);
    t += h;
    ++tr.steps;
    ++since_out;
    if (!(detail::sup_norm_cheap(u) <= cfg.overflow_guard)) {
      tr.status = RunStatus::overflow;
      tr.reason = "max|u| exceeded the overflow guard";
      break;
    }
    if (cfg.adapt.enabled) {
      const double gn = std::sqrt(grad_norm_sq(u));
      if (gn > cfg.adapt.grad_growth_trigger * grad_ref) {
        grad_ref = gn;
        if (dt / 2 < cfg.adapt.dt_min) {
          tr.adapt_events.push_back({t, dt, gn});
          tr.status = RunStatus::blowup_suspected;
          tr.reason = "gradient growth continued at dt_min";
          tr.t_blowup = t;
          emit();
          break;
        }
        dt /= 2;
        tr.adapt_events.push_back({t, dt, gn});
      }
    }
    const bool last = t >= cfg.t_end - eps_t;
    if (since_out >= cfg.output_stride || last) {
      since_out = 0;
      if (!emit()) {
        tr.status = RunStatus::aborted;
        tr.reason = "hook requested stop";
        break;
      }
    }
  }
  tr.t_final = t;
  tr.dt_final = dt;
  return tr;
}

// max over records of |E(t) - E(0)| / |E(0)|
inline double energy_drift(const Trajectory& tr) {
  if (tr.records.empty()) return 0;
  const double e0 = tr.records.front().energy;
  double d = 0;
  for (const auto& r : tr.records) d = std::max(d, std::abs(r.energy - e0));
  return e0 != 0 ? d / std::abs(e0) : d;
}

inline double mass_drift(const Trajectory& tr) {
  if (tr.records.empty()) return 0;
  const double m0 = tr.records.front().mass;
  double d = 0;
  for (const auto& r : tr.records) d = std::max(d, std::abs(r.mass - m0));
  return m0 != 0 ? d / m0 : d;
}

}  // namespace choquard
