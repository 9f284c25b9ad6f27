#include "choquard/grid.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

using namespace choquard;

TEST(Grid, ReferenceGridGeometry) {
  auto g = make_grid(64, 16, 3);
  EXPECT_EQ(g->n, 64u * 64 * 64);
  EXPECT_DOUBLE_EQ(g->h, 0.5);
  EXPECT_NEAR(g->min_radius(), std::sqrt(3 * 0.25 * 0.25), 1e-15);
  EXPECT_GT(*std::min_element(g->r.begin(), g->r.end()), 0.0);
  EXPECT_DOUBLE_EQ(g->x1d.front(), -16 + 0.25);
}

TEST(Grid, RejectsNonPowerOfTwo) {
  EXPECT_THROW(make_grid(15, 8, 3), std::invalid_argument);
  EXPECT_THROW(make_grid(24, 8, 3), std::invalid_argument);
  EXPECT_THROW(make_grid(8, 8, 3), std::invalid_argument);
  EXPECT_NO_THROW(make_grid(16, 8, 3));
}

TEST(Grid, FftRoundTripAndParseval) {
  auto g = make_grid(32, 8, 3);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> Z;
  SpectralField u(g);
  for (auto& v : u.values_mut()) v = cplx(Z(rng), Z(rng));
  const cvec orig = u.values();
  auto k = u.spectrum();
  auto back = SpectralField::from_spectrum(g, k);
  double err = 0, nrm = 0;
  for (std::size_t i = 0; i < g->n; ++i) {
    err += std::norm(back[i] - orig[i]);
    nrm += std::norm(orig[i]);
  }
  EXPECT_LE(std::sqrt(err / nrm), 1e-12);
  double spec = 0;
  for (const auto& z : k) spec += std::norm(z);
  EXPECT_NEAR(spec * spectral_measure(*g), mass(u), 1e-10 * mass(u));
}

TEST(Grid, ConstantLrNorm) {
  auto g = make_grid(16, 4, 3);
  auto u = sample_radial(g, [](double) { return cplx(0, 2.0); });
  for (double r : {1.0, 2.0, 3.0, 7.5}) EXPECT_NEAR(norm_lr(u, r), 2 * std::pow(8.0, 3 / r), 1e-10);
  EXPECT_DOUBLE_EQ(norm_lr(u, INFINITY), 2.0);
  EXPECT_THROW(norm_lr(u, 0.5), std::domain_error);
}

TEST(Grid, GaussianNorms) {
  auto g = make_grid(32, 8, 3);
  auto u = gaussian(g);
  EXPECT_NEAR(norm_lr(u, 2), std::pow(std::numbers::pi / 2, 0.75), 1e-6);
  const double x = g->min_radius();
  EXPECT_DOUBLE_EQ(norm_lr(u, INFINITY), std::exp(-x * x));
  EXPECT_NEAR(norm_hs(u, 0), norm_lr(u, 2), 1e-10 * norm_lr(u, 2));
}

TEST(Grid, SingleModeSobolevNorm) {
  auto g = make_grid(16, 4, 3);
  const double k0 = std::numbers::pi / 4 * 3, k1 = -std::numbers::pi / 4 * 2;
  auto u = sample(g, [&](const double* x) { return std::exp(cplx(0, k0 * x[0] + k1 * x[2])); });
  const double kk = std::sqrt(k0 * k0 + k1 * k1);
  for (double s : {-1.0, -0.5, 0.5, 1.0, 2.0}) EXPECT_NEAR(norm_hs(u, s), std::pow(kk, s) * std::pow(8.0, 1.5), 1e-10 * std::pow(8.0, 1.5) * std::pow(kk, s));
  auto d = derivative(u, 0);
  for (std::size_t i = 0; i < g->n; i += 37) EXPECT_NEAR(std::abs(d[i] - cplx(0, k0) * u[i]), 0.0, 1e-12);
}

TEST(Grid, NegativeSobolevNeedsMeanFree) {
  auto g = make_grid(16, 4, 3);
  auto u = gaussian(g);
  EXPECT_THROW(norm_hs(u, -0.5), std::domain_error);
}

TEST(Grid, GaussianLaplacian) {
  auto g = make_grid(64, 8, 3);
  auto u = gaussian(g);
  auto lap = laplacian(u);
  double err = 0;
  for (std::size_t i = 0; i < g->n; ++i) {
    const double r2 = g->r[i] * g->r[i];
    err = std::max(err, std::abs(lap[i] - (4 * r2 - 6) * std::exp(-r2)));
  }
  EXPECT_LE(err, 1e-6);
}

TEST(Grid, GradientParseval) {
  auto g = make_grid(64, 8, 3);
  auto u = sample(g, [](const double* x) { return std::exp(-x[0] * x[0] - 0.5 * x[1] * x[1] - 2 * x[2] * x[2]) * cplx(1, x[0]); });
  double phys = 0;
  for (const auto& d : gradient(u)) phys += mass(d);
  EXPECT_NEAR(phys, grad_norm_sq(u), 1e-10 * phys);
}

TEST(Grid, RadialGradientIsRadial) {
  auto g = make_grid(64, 8, 3);
  auto u = gaussian(g, 1.0, 1.3);
  auto gr = gradient(u);
  double worst = 0;
  for (std::size_t i = 0; i < g->n; ++i) {
    // x × ∇u vanishes for radial u
    const double x = g->coord(i, 0), y = g->coord(i, 1), z = g->coord(i, 2);
    const double cx = y * gr[2][i].real() - z * gr[1][i].real();
    const double cy = z * gr[0][i].real() - x * gr[2][i].real();
    worst = std::max({worst, std::abs(cx), std::abs(cy), std::abs(gr[0][i].imag())});
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(Grid, CutoffProperties) {
  auto g = make_grid(32, 8, 3);
  const double R = 4;
  auto c = cutoff_psi(*g, R);
  std::vector<std::size_t> idx(g->n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return g->r[a] < g->r[b]; });
  for (std::size_t k = 1; k < idx.size(); ++k) EXPECT_LE(c.values[idx[k]], c.values[idx[k - 1]] + 1e-15);
  for (std::size_t i = 0; i < g->n; ++i) {
    EXPECT_GE(c.values[i], 0.0);
    EXPECT_LE(c.values[i], 1.0);
    if (g->r[i] <= R / 2) {
      EXPECT_EQ(c.values[i], 1.0);
    }
    if (g->r[i] >= R) {
      EXPECT_EQ(c.values[i], 0.0);
    }
  }
  EXPECT_EQ(psi_profile(1.1), 0.0);
  EXPECT_EQ(c.values[idx[0]], 1.0);
  EXPECT_THROW(cutoff_psi(*g, 8.0), std::invalid_argument);
}

TEST(Grid, MorawetzWeightRegimes) {
  auto g = make_grid(32, 16, 3);
  const double R = 6;
  auto w = morawetz_weight(*g, R);
  for (double r : {0.1, 1.0, 2.9}) {
    auto p = w.profile(r);
    EXPECT_DOUBLE_EQ(p.a, r * r / 2);
    EXPECT_DOUBLE_EQ(p.d2a, 1.0);
    EXPECT_DOUBLE_EQ(w.laplacian(r), 3.0);
    EXPECT_DOUBLE_EQ(w.bilaplacian(r), 0.0);
  }
  const double shift = R * 7.0 - w.profile(7.0).a;
  for (double r : {6.0, 7.5, 12.0}) {
    auto p = w.profile(r);
    EXPECT_NEAR(R * r - p.a, shift, 1e-12);
    EXPECT_DOUBLE_EQ(p.da, R);
    EXPECT_NEAR(w.laplacian(r), 2 * R / r, 1e-14);
    EXPECT_NEAR(w.bilaplacian(r), 0.0, 1e-14);
  }
  auto v = validate_weight(w);
  EXPECT_TRUE(v.ok);
  EXPECT_LE(v.continuity_defect, 1e-8);
  EXPECT_GE(v.min_d2a, 0.0);
  EXPECT_GT(v.min_da, 0.0);
  EXPECT_LE(v.C1, 1.0 + 1e-12);
  EXPECT_THROW(morawetz_weight(*g, 9.0), std::invalid_argument);
}

TEST(Grid, MorawetzBlendDerivativesConsistent) {
  MorawetzWeight w;
  w.R = 6;
  w.dim = 3;
  for (double r = 3.05; r < 6; r += 0.1) {
    const double e = 1e-5;
    auto m = w.profile(r - e), p = w.profile(r + e), c = w.profile(r);
    EXPECT_NEAR((p.a - m.a) / (2 * e), c.da, 1e-8);
    EXPECT_NEAR((p.da - m.da) / (2 * e), c.d2a, 1e-8);
    EXPECT_NEAR((p.d2a - m.d2a) / (2 * e), c.d3a, 1e-7);
    EXPECT_NEAR((p.d3a - m.d3a) / (2 * e), c.d4a, 1e-6);
    // Δ²a against a finite difference of Δa
    auto lap = [&](double s) { return w.laplacian(s); };
    const double d1 = (lap(r + e) - lap(r - e)) / (2 * e);
    const double d2 = (lap(r + e) - 2 * lap(r) + lap(r - e)) / (e * e);
    EXPECT_NEAR(d2 + 2 * d1 / r, w.bilaplacian(r), 1e-3);
  }
}

TEST(Grid, WeightIsRadialOnShells) {
  auto g = make_grid(32, 16, 3);
  auto w = morawetz_weight(*g, 6);
  std::vector<double> lo(g->n_shells(), INFINITY), hi(g->n_shells(), -INFINITY);
  for (std::size_t i = 0; i < g->n; ++i) {
    lo[g->shell[i]] = std::min(lo[g->shell[i]], w.lap[i]);
    hi[g->shell[i]] = std::max(hi[g->shell[i]], w.lap[i]);
  }
  for (std::size_t s = 0; s < lo.size(); ++s) EXPECT_LE(hi[s] - lo[s], 1e-12);
}

TEST(Grid, StraussRatioGaussianFamily) {
  auto g = make_grid(64, 16, 3);
  double worst = 0;
  for (double gam = 0.5; gam <= 4.0001; gam += 0.25) {
    auto u = sample_radial(g, [&](double r) { return cplx(std::exp(-gam * r * r)); });
    bool radial = false;
    worst = std::max(worst, strauss_ratio(u, &radial));
    EXPECT_TRUE(radial);
  }
  EXPECT_LE(worst, 1.0);
  // golden from this sweep
  EXPECT_NEAR(worst, 0.16130, 1e-4);
}

TEST(Grid, StraussRatioDegenerateAndHomogeneous) {
  auto g = make_grid(32, 8, 3);
  SpectralField z(g);
  EXPECT_EQ(strauss_ratio(z), 0.0);
  auto u = gaussian(g);
  auto v = u;
  v *= cplx(3.7, -1.1);
  EXPECT_NEAR(strauss_ratio(u), strauss_ratio(v), 1e-12);
}

TEST(Grid, RescaleScalingIdentities) {
  auto g = make_grid(64, 16, 3);
  const double sc = 0.5, amp = 1.0;  // (2+2b+α)/(2(p-1)) = 1 at the benchmark
  auto u = gaussian(g, 1.0, 2.0);
  RescaleReport rep;
  auto ul = rescale(u, 2.0, amp, &rep);
  EXPECT_LE(rep.aliasing_fraction, 1e-8);
  EXPECT_NEAR(norm_lr(ul, 2), std::pow(2.0, -sc) * norm_lr(u, 2), 1e-6);
  // mean-free band-limited datum for the homogeneous norm
  auto v = sample_radial(g, [](double r) { return cplx((1 - r * r / 6) * std::exp(-r * r / 4)); });
  auto vl = rescale(v, 2.0, amp);
  EXPECT_NEAR(norm_hs(vl, sc), norm_hs(v, sc), 1e-5 * norm_hs(v, sc));
}

TEST(Grid, ResampleIdentityAndExactness) {
  auto g = make_grid(32, 8, 3);
  auto u = gaussian(g, 1.0, 1.5);
  auto same = resample(u, 1.0);
  for (std::size_t i = 0; i < g->n; i += 11) EXPECT_NEAR(std::abs(same[i] - u[i]), 0.0, 1e-13);
  auto half = resample(u, 0.5);
  for (std::size_t i = 0; i < g->n; i += 11) {
    const double r = g->r[i] * 0.5;
    EXPECT_NEAR(half[i].real(), std::exp(-r * r / 2.25), 1e-9);
  }
}

TEST(Grid, SnapshotRoundTrip) {
  auto g = make_grid(16, 4, 3);
  auto u = gaussian(g);
  u *= cplx(0.3, 0.7);
  auto bytes = snapshot_bytes(u, 1.25);
  EXPECT_EQ(bytes.size(), 24 + g->n * 16);
  auto [v, t] = parse_snapshot(bytes);
  EXPECT_EQ(t, 1.25);
  for (std::size_t i = 0; i < g->n; ++i) EXPECT_EQ(v[i], u[i]);
}
