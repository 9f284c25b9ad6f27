#include "choquard/evolve.hpp"

#include <gtest/gtest.h>

using namespace choquard;

namespace {

const ModelParams bench{3, 2.0, -0.5, 2.5};

double max_diff(const SpectralField& a, const SpectralField& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

SpectralField final_state(const Hartree& H, const SpectralField& u0, const EvolveConfig& cfg) {
  SpectralField last(u0.grid_ptr());
  evolve(H, u0, cfg, [&](const Record&, const SpectralField& u) {
    last = u;
    return true;
  });
  return last;
}

}  // namespace

TEST(Evolve, StrangStepIsReversible) {
  auto g = make_grid(32, 8, 3);
  Hartree H(g, bench);
  auto u0 = gaussian(g, 1.5, 1.2);
  auto u = u0;
  for (int k = 0; k < 20; ++k) step_strang(H, u, 1e-2);
  for (int k = 0; k < 20; ++k) step_strang(H, u, -1e-2);
  EXPECT_LE(max_diff(u, u0), 1e-12);
}

TEST(Evolve, GaugeCovariance) {
  auto g = make_grid(16, 6, 3);
  Hartree H(g, bench);
  auto u0 = gaussian(g, 1.2, 1.5);
  EvolveConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_end = 0.5;
  auto a = final_state(H, u0, cfg);
  const cplx ph = std::polar(1.0, 0.7);
  auto v0 = u0;
  for (auto& z : v0.values_mut()) z *= ph;
  auto b = final_state(H, v0, cfg);
  for (auto& z : a.values_mut()) z *= ph;
  EXPECT_LE(max_diff(a, b), 1e-12);
}

TEST(Evolve, LinearFlowPreservesSobolevNorms) {
  auto g = make_grid(32, 8, 3);
  Hartree H(g, bench);
  auto u0 = gaussian(g, 1.0, 1.0);
  EvolveConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_end = 1;
  cfg.linear_only = true;
  auto u = final_state(H, u0, cfg);
  for (double s : {0.0, 0.5, 1.0}) EXPECT_NEAR(norm_hs(u, s), norm_hs(u0, s), 1e-12 * norm_hs(u0, s));
}

TEST(Evolve, FreeGaussianClosedForm) {
  // i u_t + Δu = 0, u0 = e^{-|x|²}: u = (1+4it)^{-3/2} exp(-|x|²/(1+4it)), peak (1+16t²)^{-3/4}
  auto g = make_grid(64, 8, 3);
  Hartree H(g, bench);
  EvolveConfig cfg;
  cfg.dt = 0.05;
  cfg.t_end = 0.25;
  cfg.linear_only = true;
  auto u = final_state(H, gaussian(g, 1.0, 1.0), cfg);
  const double t = 0.25;
  const cplx d(1, 4 * t);
  double err = 0;
  for (std::size_t i = 0; i < g->n; ++i) {
    const double r = g->r[i];
    err = std::max(err, std::abs(u.values()[i] - std::pow(d, -1.5) * std::exp(-r * r / d)));
  }
  EXPECT_LE(err, 1e-10);
  EXPECT_NEAR(std::abs(std::pow(d, -1.5)), std::pow(1 + 16 * t * t, -0.75), 1e-15);
}

TEST(Evolve, MassConservedOverThousandSteps) {
  auto g = make_grid(32, 8, 3);
  Hartree H(g, bench);
  EvolveConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 1;
  cfg.output_stride = 100;
  const auto tr = evolve(H, gaussian(g, 1.0, 1.3), cfg);
  EXPECT_EQ(tr.steps, 1000);
  EXPECT_EQ(tr.status, RunStatus::completed);
  EXPECT_LE(mass_drift(tr), 1e-12);
  EXPECT_EQ(tr.records.size(), 11u);
}

TEST(Evolve, EnergyDriftSecondOrder) {
  auto g = make_grid(32, 8, 3);
  Hartree H(g, bench);
  auto u0 = gaussian(g, 1.0, 1.3);
  EvolveConfig cfg;
  cfg.dt = 4e-3;
  cfg.t_end = 0.4;
  cfg.output_stride = 1;
  const double e1 = energy_drift(evolve(H, u0, cfg));
  cfg.dt = 2e-3;
  const double e2 = energy_drift(evolve(H, u0, cfg));
  EXPECT_GT(e1 / e2, 3.5);
  EXPECT_LT(e1 / e2, 4.5);
}

TEST(Evolve, OverflowGuardStopsRun) {
  auto g = make_grid(16, 6, 3);
  Hartree H(g, bench);
  EvolveConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_end = 1;
  cfg.overflow_guard = 1e-3;
  const auto tr = evolve(H, gaussian(g, 1.0, 1.0), cfg);
  EXPECT_EQ(tr.status, RunStatus::overflow);
  EXPECT_EQ(tr.steps, 1);
}

TEST(Evolve, HookCanAbort) {
  auto g = make_grid(16, 6, 3);
  Hartree H(g, bench);
  EvolveConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_end = 1;
  cfg.output_stride = 5;
  int calls = 0;
  const auto tr = evolve(H, gaussian(g, 1.0, 1.0), cfg, [&](const Record&, const SpectralField&) { return ++calls < 3; });
  EXPECT_EQ(tr.status, RunStatus::aborted);
  EXPECT_EQ(calls, 3);
  EXPECT_NEAR(tr.t_final, 0.1, 1e-12);
}

TEST(Evolve, AdaptiveFloorFlagsBlowup) {
  auto g = make_grid(32, 8, 3);
  Hartree H(g, bench);
  EvolveConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 1;
  cfg.adapt = {true, 1.1, 2.5e-4};
  // strongly focusing bump: the gradient keeps growing under refinement
  const auto tr = evolve(H, gaussian(g, 4.0, 1.0), cfg);
  EXPECT_EQ(tr.status, RunStatus::blowup_suspected);
  ASSERT_GE(tr.adapt_events.size(), 3u);
  for (std::size_t k = 1; k < tr.adapt_events.size(); ++k) EXPECT_GT(tr.adapt_events[k].grad_norm, tr.adapt_events[k - 1].grad_norm);
  EXPECT_TRUE(std::isfinite(tr.t_blowup));
}

TEST(Evolve, WrapTimeScalesWithBox) {
  const double t1 = wrap_time(gaussian(make_grid(32, 8, 3), 1.0, 1.0));
  const double t2 = wrap_time(gaussian(make_grid(64, 16, 3), 1.0, 1.0));
  EXPECT_GT(t1, 0.0);
  EXPECT_NEAR(t2 / t1, 2.0, 0.05);
}

TEST(Evolve, SpongeOnlyActsOnOuterLayer) {
  auto g = make_grid(32, 8, 3);
  const auto rho = absorb_profile(*g, {true, 2.0, 3.0});
  double inner = 0, outer = 0;
  for (std::size_t i = 0; i < g->n; ++i) {
    bool in = true;
    for (int a = 0; a < 3; ++a) in = in && std::abs(g->coord(i, a)) <= 6;
    (in ? inner : outer) = std::max(in ? inner : outer, rho[i]);
  }
  EXPECT_EQ(inner, 0.0);
  EXPECT_GT(outer, 2.0);
  EXPECT_LE(outer, 3.0);
  Hartree H(g, bench);
  EvolveConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_end = 2;
  cfg.linear_only = true;
  cfg.absorb = {true, 2.0, 3.0};
  const auto tr = evolve(H, gaussian(g, 1.0, 0.7), cfg);
  EXPECT_LT(tr.records.back().mass, 0.9 * tr.records.front().mass);
}
