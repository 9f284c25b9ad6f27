#pragma once

#include "choquard/grid.hpp"
#include "choquard/params.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace choquard {

// c_{N,α} with I_α = c_{N,α}|x|^{α-N} having Fourier multiplier |ξ|^{-α}
inline double riesz_constant(int N, double alpha) {
  return std::tgamma((N - alpha) / 2) / (std::tgamma(alpha / 2) * std::pow(std::numbers::pi, N / 2.0) * std::pow(2.0, alpha));
}

// Σ'_{n∈Z^N} |n|^{-s}, analytically continued (theta-function splitting at t=1).
inline double epstein_zeta(int N, double s, int K = 6) {
  using boost::math::tgamma;
  const double pi = std::numbers::pi;
  auto G = [&](double sigma, double n2) { return tgamma(sigma / 2, pi * n2) * std::pow(pi * n2, -sigma / 2); };
  double acc = 0;
  std::vector<int> n(N, -K);
  while (true) {
    long long n2 = 0;
    for (int v : n) n2 += static_cast<long long>(v) * v;
    if (n2 > 0) acc += G(s, static_cast<double>(n2)) + G(N - s, static_cast<double>(n2));
    int a = 0;
    while (a < N && ++n[a] > K) n[a++] = -K;
    if (a == N) break;
  }
  const double phi = acc - 2.0 / (N - s) - 2.0 / s;
  return phi * std::pow(pi, s / 2) / std::tgamma(s / 2);
}

enum class ZeroMode {
  zero,        // m(0) = 0: potential of the mean-free periodic density
  free_space,  // m(0) cancels the leading periodic offset of the kernel near x = 0
};

struct RieszKernel {
  double alpha = 0;
  ZeroMode zero_mode = ZeroMode::zero;
  GridPtr grid;
  rvec m;  // multiplier per DFT index

  double m0() const { return m.empty() ? 0.0 : m[0]; }
};

inline RieszKernel make_riesz_kernel(const GridPtr& g, double alpha, ZeroMode zm = ZeroMode::zero) {
  if (!(alpha > 0 && alpha < g->dim)) throw std::invalid_argument("riesz kernel: need 0 < alpha < N");
  RieszKernel k;
  k.alpha = alpha;
  k.zero_mode = zm;
  k.grid = g;
  k.m.resize(g->n);
  for (std::size_t i = 1; i < g->n; ++i) k.m[i] = std::pow(g->ksq[i], -alpha / 2);
  k.m[0] = 0;
  if (zm == ZeroMode::free_space) {
    const int N = g->dim;
    const double Z = epstein_zeta(N, N - alpha);
    k.m[0] = -riesz_constant(N, alpha) * Z * std::pow(2 * g->L, alpha);
  }
  return k;
}

namespace detail {
inline void check_residue(const cvec& w, const rvec& g) {
  double res = 0, gn = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    res += w[i].imag() * w[i].imag();
    gn += g[i] * g[i];
  }
  if (std::sqrt(res) > 1e-10 * std::sqrt(gn) + 1e-300) throw std::runtime_error("riesz_convolve: imaginary residue too large");
}
}  // namespace detail

inline rvec riesz_convolve(const RieszKernel& k, const rvec& g) {
  const auto& G = *k.grid;
  cvec w(G.n);
  for (std::size_t i = 0; i < G.n; ++i) w[i] = g[i];
  G.fft->forward(w);
  for (std::size_t i = 0; i < G.n; ++i) w[i] *= k.m[i];
  G.fft->backward(w);
  detail::check_residue(w, g);
  rvec out(G.n);
  for (std::size_t i = 0; i < G.n; ++i) out[i] = w[i].real();
  return out;
}

// discrete periodic kernel K with (I∗g)_i = Σ_j K[i-j] g_j
inline rvec riesz_physical_kernel(const RieszKernel& k) {
  const auto& G = *k.grid;
  cvec w(G.n);
  for (std::size_t i = 0; i < G.n; ++i) w[i] = k.m[i];
  G.fft->backward(w);
  rvec out(G.n);
  for (std::size_t i = 0; i < G.n; ++i) out[i] = w[i].real();
  return out;
}

inline rvec riesz_convolve_direct(const RieszKernel& k, const rvec& g) {
  const auto& G = *k.grid;
  if (G.M > 24) throw std::invalid_argument("riesz_convolve_direct: grid too large (M <= 24)");
  const auto K = riesz_physical_kernel(k);
  rvec out(G.n, 0.0);
  std::vector<int> ii(G.dim), jj(G.dim);
  for (std::size_t i = 0; i < G.n; ++i) {
    for (int a = 0; a < G.dim; ++a) ii[a] = G.axis_index(i, a);
    double s = 0;
    for (std::size_t j = 0; j < G.n; ++j) {
      std::size_t d = 0;
      for (int a = 0; a < G.dim; ++a) d += static_cast<std::size_t>(((ii[a] - G.axis_index(j, a)) % G.M + G.M) % G.M) * G.stride[a];
      s += K[d] * g[j];
    }
    out[i] = s;
  }
  return out;
}

// ∇(I_α∗g) via the multiplier iξ|ξ|^{-α}
inline std::vector<rvec> riesz_gradient(const RieszKernel& k, const rvec& g) {
  const auto& G = *k.grid;
  cvec w(G.n), d(G.n);
  for (std::size_t i = 0; i < G.n; ++i) w[i] = g[i];
  G.fft->forward(w);
  std::vector<rvec> out;
  for (int a = 0; a < G.dim; ++a) {
    for (std::size_t i = 0; i < G.n; ++i)
      d[i] = G.is_nyquist(i, a) ? cplx(0) : w[i] * cplx(0, G.freq(i, a) * k.m[i]);
    G.fft->backward(d);
    rvec r(G.n);
    for (std::size_t i = 0; i < G.n; ++i) r[i] = d[i].real();
    out.push_back(std::move(r));
  }
  return out;
}

// ---- weight, powers -------------------------------------------------------------

struct SingularWeight {
  double b = 0, eps = 0;
  rvec W;
};

inline SingularWeight make_singular_weight(const BoxGrid& g, double b, double eps_sing = 0.0) {
  SingularWeight w;
  w.b = b;
  w.eps = eps_sing;
  w.W.resize(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    const double r2 = g.r[i] * g.r[i] + eps_sing * eps_sing;
    w.W[i] = std::pow(r2, b / 2);
  }
  return w;
}

// x ↦ (x²)^{e/2} from x² with fast paths for quarter-integer e/2
class PowFromSquare {
 public:
  explicit PowFromSquare(double e) : e_(e) {
    const double q = 2 * e;  // exponent of a2 is q/4
    iq_ = static_cast<int>(std::lround(q));
    fast_ = std::abs(q - iq_) < 1e-14 && iq_ >= 0;
  }
  double operator()(double a2) const {
    if (!fast_) return a2 > 0 ? std::pow(a2, 0.5 * e_) : (e_ == 0 ? 1.0 : 0.0);
    double r = 1.0;
    int whole = iq_ / 4, rem = iq_ % 4;
    for (int i = 0; i < whole; ++i) r *= a2;
    if (rem == 0) return r;
    const double s = std::sqrt(a2);
    if (rem == 2) return r * s;
    const double q = std::sqrt(s);
    return rem == 1 ? r * q : r * s * q;
  }

  // out[i] = W[i] (|u_i|²)^{e/2}, branch-free inner loops on the fast path
  void scaled(const cvec& u, const rvec& W, rvec& out) const {
    const std::size_t n = u.size();
    out.resize(n);
    if (!fast_) {
      for (std::size_t i = 0; i < n; ++i) out[i] = W[i] * (*this)(abs2(u[i]));
      return;
    }
    const int whole = iq_ / 4, rem = iq_ % 4;
    auto run = [&](auto tail) {
      for (std::size_t i = 0; i < n; ++i) {
        const double a2 = abs2(u[i]);
        double r = W[i];
        for (int k = 0; k < whole; ++k) r *= a2;
        out[i] = r * tail(a2);
      }
    };
    switch (rem) {
      case 0: run([](double) { return 1.0; }); break;
      case 1: run([](double a2) { return std::sqrt(std::sqrt(a2)); }); break;
      case 2: run([](double a2) { return std::sqrt(a2); }); break;
      default: run([](double a2) { const double s = std::sqrt(a2); return s * std::sqrt(s); }); break;
    }
  }

 private:
  double e_;
  int iq_ = 0;
  bool fast_ = false;
};

// ---- functionals ------------------------------------------------------------------

struct Functionals {
  double mass = 0, grad_sq = 0, P = 0, energy = 0;
  double J = std::numeric_limits<double>::infinity();
  bool J_finite = false;
  double func_I = 0, action = 0;
};

class Hartree {
 public:
  Hartree(GridPtr g, ModelParams prm, double eps_sing = 0.0, ZeroMode zm = ZeroMode::zero, bool validate = true)
      : g_(std::move(g)), prm_(prm) {
    if (validate) {
      auto rep = validate_params(prm);
      if (!rep.valid) throw std::invalid_argument("invalid model parameters: " + join_violations(rep));
    }
    if (prm.N != g_->dim) throw std::invalid_argument("grid dimension does not match N");
    ex_ = derived_exponents_unchecked(prm);
    kernel_ = make_riesz_kernel(g_, prm.alpha, zm);
    weight_ = make_singular_weight(*g_, prm.b, eps_sing);
  }

  const GridPtr& grid_ptr() const { return g_; }
  const BoxGrid& grid() const { return *g_; }
  const ModelParams& params() const { return prm_; }
  const DerivedExponents& exponents() const { return ex_; }
  const RieszKernel& kernel() const { return kernel_; }
  RieszKernel& kernel_mut() { return kernel_; }
  const rvec& weight() const { return weight_.W; }

  // W|u|^p
  rvec density(const cvec& u) const {
    rvec d;
    PowFromSquare(prm_.p).scaled(u, weight_.W, d);
    return d;
  }
  rvec potential(const SpectralField& u) const { return riesz_convolve(kernel_, density(u.values())); }

  // V W |u|^{p-2}, the real coefficient of u in 𝒩(u)
  rvec coefficient(const cvec& u, const rvec& V) const {
    rvec c;
    PowFromSquare(prm_.p - 2).scaled(u, weight_.W, c);
    for (std::size_t i = 0; i < g_->n; ++i) c[i] *= V[i];
    return c;
  }

  SpectralField nonlinearity(const SpectralField& u) const {
    const auto& v = u.values();
    const auto c = coefficient(v, potential(u));
    SpectralField out(g_);
    auto& o = out.values_mut();
    for (std::size_t i = 0; i < g_->n; ++i) o[i] = c[i] * v[i];
    return out;
  }

  double interaction(const SpectralField& u) const {
    const auto d = density(u.values());
    const auto V = riesz_convolve(kernel_, d);
    double s = 0;
    for (std::size_t i = 0; i < g_->n; ++i) s += V[i] * d[i];
    return s * g_->cell_volume();
  }

  Functionals functionals_from(double M, double G, double P) const {
    Functionals f;
    const double p = prm_.p, N = prm_.N, A = ex_.A, B = ex_.B;
    f.mass = M;
    f.grad_sq = G;
    f.P = P;
    f.energy = G - P / p;
    f.func_I = (4.0 / N) * (G - B / (4 * p) * P);
    f.action = f.energy + M;
    if (P > 0 && M > 0 && G > 0) {
      f.J = std::pow(M, A / 2) * std::pow(G, B / 2) / P;
      f.J_finite = true;
    }
    return f;
  }

  Functionals functionals(const SpectralField& u) const { return functionals_from(mass(u), grad_norm_sq(u), interaction(u)); }

  // P/(C‖u‖^A‖∇u‖^B) = 1/(C J)
  double gn_ratio(const SpectralField& u, double C_gn) const {
    if (!(C_gn > 0)) throw std::invalid_argument("gn_ratio: ground-state constant required");
    const auto f = functionals(u);
    if (!f.J_finite) return 0.0;
    return 1.0 / (C_gn * f.J);
  }

 private:
  GridPtr g_;
  ModelParams prm_;
  DerivedExponents ex_;
  RieszKernel kernel_;
  SingularWeight weight_;
};

// ---- HLS ----------------------------------------------------------------------------

struct HlsResult {
  double lhs = 0, norm_product = 0, ratio = 0, ratio_dilated = 0;
  bool holds_scaling = false;
};

// ∬ f(x) g(y) |x-y|^{-λ} with 1/r + 1/s + λ/N = 2
inline HlsResult hls_check(const SpectralField& f, const SpectralField& g, double lambda, double r, double s, double tol = 1e-3) {
  const auto& G = f.grid();
  const int N = G.dim;
  if (!(lambda > 0 && lambda < N)) throw std::invalid_argument("hls_check: need 0 < lambda < N");
  if (std::abs(1 / r + 1 / s + lambda / N - 2) > 1e-12) throw std::invalid_argument("hls_check: exponent relation violated");
  const auto K = make_riesz_kernel(f.grid_ptr(), N - lambda, ZeroMode::free_space);
  const double c = riesz_constant(N, N - lambda);
  auto eval = [&](const SpectralField& a, const SpectralField& b, double& lhs, double& prod) {
    rvec ar(G.n), br(G.n);
    for (std::size_t i = 0; i < G.n; ++i) {
      ar[i] = a[i].real();
      br[i] = b[i].real();
    }
    const auto Ib = riesz_convolve(K, br);
    double acc = 0;
    for (std::size_t i = 0; i < G.n; ++i) acc += ar[i] * Ib[i];
    lhs = acc * G.cell_volume() / c;
    prod = norm_lr(a, r) * norm_lr(b, s);
  };
  HlsResult res;
  eval(f, g, res.lhs, res.norm_product);
  res.ratio = res.norm_product > 0 ? res.lhs / res.norm_product : 0.0;
  double l2, p2;
  eval(resample(f, 0.5), resample(g, 0.5), l2, p2);
  res.ratio_dilated = p2 > 0 ? l2 / p2 : 0.0;
  res.holds_scaling = res.lhs == 0 || std::abs(res.ratio_dilated - res.ratio) <= tol * std::abs(res.ratio);
  return res;
}

}  // namespace choquard
