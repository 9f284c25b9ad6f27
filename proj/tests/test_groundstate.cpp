#include "choquard/groundstate.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace choquard;

namespace {

const ModelParams bench{3, 2.0, -0.5, 2.5};

struct Shared {
  GridPtr g = make_grid(32, 8, 3);
  Hartree H{g, bench};
  GroundState gs = compute_ground_state(H);
};

const Shared& shared() {
  static const Shared s;
  return s;
}

SpectralField random_bump(const GridPtr& g, std::mt19937_64& rng) {
  std::normal_distribution<double> Z;
  std::uniform_real_distribution<double> W(0.8, 2.5);
  const double w = W(rng), a = Z(rng), b = Z(rng), c = Z(rng);
  return sample(g, [&](const double* x) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return cplx(1 + 0.3 * a * x[0], 0.3 * b * x[1] * x[2]) * std::exp(-r2 / (w * w) + 0.2 * c * x[2]);
  });
}

}  // namespace

TEST(GroundState, ResidualAndShape) {
  const auto& s = shared();
  EXPECT_LE(s.gs.phi_residual, 1e-4);
  EXPECT_LE(s.gs.el_residual, 1e-6);
  EXPECT_TRUE(s.gs.radially_decreasing);
  double neg = 0, mx = 0;
  for (const auto& z : s.gs.phi.values()) {
    neg = std::max(neg, -z.real());
    mx = std::max(mx, std::abs(z));
    EXPECT_LE(std::abs(z.imag()), 1e-12);
  }
  EXPECT_LE(neg, 1e-8 * mx);
}

TEST(GroundState, QNormalizedAndConstantIsInverseJ) {
  const auto& s = shared();
  EXPECT_NEAR(mass(s.gs.Q), 1.0, 1e-10);
  EXPECT_NEAR(grad_norm_sq(s.gs.Q), 1.0, 1e-10);
  EXPECT_NEAR(s.gs.C_gn * s.H.functionals(s.gs.Q).J, 1.0, 1e-12);
  EXPECT_NEAR(s.gs.C_gn, 1 / s.gs.J_min, 1e-12 * s.gs.C_gn);
}

TEST(GroundState, DilationFactorFromNormalization) {
  const auto& s = shared();
  const auto& ex = s.H.exponents();
  EXPECT_NEAR(s.gs.gamma * s.gs.gamma, ex.B / ex.A, 1e-10);
}

TEST(GroundState, GnInequalityOnRandomFields) {
  const auto& s = shared();
  std::mt19937_64 rng(31);
  double lo = INFINITY;
  for (int k = 0; k < 40; ++k) lo = std::min(lo, s.gs.C_gn * s.H.functionals(random_bump(s.g, rng)).J);
  EXPECT_GE(lo, 1 - 1e-6);
}

TEST(GroundState, DeterministicForSeed) {
  const auto& s = shared();
  const auto again = compute_ground_state(s.H);
  EXPECT_EQ(again.C_gn, s.gs.C_gn);
  EXPECT_EQ(again.phi.values(), s.gs.phi.values());
}

TEST(GroundState, ThresholdFamily) {
  const auto& s = shared();
  const auto rows = threshold_family(s.H, s.gs, {0.5, 1.0, 1.3, 2.0});
  for (const auto& r : rows) EXPECT_NEAR(r.GM, r.c, 1e-12);
  ASSERT_TRUE(rows[1].ME.has_value());
  EXPECT_NEAR(*rows[1].ME, 1.0, 1e-12);
  EXPECT_LT(*rows[0].ME, 1.0);
  EXPECT_LT(rows[2].energy, 0.0);
  EXPECT_FALSE(rows[2].ME.has_value());
  // direct evaluation agrees with the stored functionals
  auto u = s.gs.phi;
  u *= 0.5;
  const auto m = me_gm(s.H, u, s.gs, mass(u));
  EXPECT_NEAR(m.GM, 0.5, 1e-12);
  EXPECT_NEAR(*m.ME, *rows[0].ME, 1e-12);
}

TEST(GroundState, FunctionalIZero) {
  const auto& s = shared();
  const double c = func_I_zero(s.H, s.gs);
  const auto r = threshold_family(s.H, s.gs, {c, 0.9 * c, 1.1 * c});
  EXPECT_NEAR(r[0].func_I, 0.0, 1e-10 * s.gs.fphi.grad_sq);
  EXPECT_GT(r[1].func_I, 0.0);
  EXPECT_LT(r[2].func_I, 0.0);
}

TEST(GroundState, PohozaevRatiosReportedConsistently) {
  const auto& s = shared();
  const auto& f = s.gs.fphi;
  EXPECT_NEAR(s.gs.ratio_EG, f.energy / f.grad_sq, 1e-15);
  EXPECT_NEAR(s.gs.ratio_EM, f.energy / f.mass, 1e-15);
  EXPECT_GT(f.energy, 0.0);
  EXPECT_NEAR(s.gs.gm_threshold, std::sqrt(std::sqrt(f.grad_sq) * std::sqrt(f.mass)), 1e-12 * s.gs.gm_threshold);
}

TEST(GroundState, NonConvergenceRaises) {
  const auto& s = shared();
  GroundStateOptions o;
  o.weinstein.max_iter = 2;
  try {
    compute_ground_state(s.H, o);
    FAIL() << "expected GroundStateError";
  } catch (const GroundStateError& e) {
    EXPECT_GT(e.residual(), 0.0);
  }
}
