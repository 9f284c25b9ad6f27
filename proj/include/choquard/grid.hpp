#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace choquard {

using cplx = std::complex<double>;

// |z|² without the hypot detour of std::norm
inline double abs2(const cplx& z) { return z.real() * z.real() + z.imag() * z.imag(); }

template <class T>
struct aligned_allocator {
  using value_type = T;
  static constexpr std::align_val_t align{64};
  aligned_allocator() noexcept = default;
  template <class U>
  aligned_allocator(const aligned_allocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), align)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, align); }
  template <class U>
  bool operator==(const aligned_allocator<U>&) const noexcept { return true; }
};

using cvec = std::vector<cplx, aligned_allocator<cplx>>;
using rvec = std::vector<double, aligned_allocator<double>>;

// ---- FFT --------------------------------------------------------------------

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
inline fftw_complex* fc(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }
inline fftw_complex* fc(const cplx* p) { return reinterpret_cast<fftw_complex*>(const_cast<cplx*>(p)); }
}  // namespace detail

// Unnormalized forward DFT, backward scaled by 1/n.
class FftPlan {
 public:
  FftPlan(int dim, int M) : dim_(dim), M_(M) {
    n_ = 1;
    std::vector<int> dims(dim, M);
    for (int i = 0; i < dim; ++i) n_ *= static_cast<std::size_t>(M);
    cvec a(n_), b(n_);
    std::lock_guard<std::mutex> lk(detail::fftw_planner_mutex());
    const unsigned flags = FFTW_ESTIMATE;
    fwd_oop_ = fftw_plan_dft(dim, dims.data(), detail::fc(a.data()), detail::fc(b.data()), FFTW_FORWARD, flags);
    bwd_oop_ = fftw_plan_dft(dim, dims.data(), detail::fc(a.data()), detail::fc(b.data()), FFTW_BACKWARD, flags);
    fwd_ip_ = fftw_plan_dft(dim, dims.data(), detail::fc(a.data()), detail::fc(a.data()), FFTW_FORWARD, flags);
    bwd_ip_ = fftw_plan_dft(dim, dims.data(), detail::fc(a.data()), detail::fc(a.data()), FFTW_BACKWARD, flags);
    if (!fwd_oop_ || !bwd_oop_ || !fwd_ip_ || !bwd_ip_) throw std::runtime_error("fftw planning failed");
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  ~FftPlan() {
    std::lock_guard<std::mutex> lk(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd_oop_);
    fftw_destroy_plan(bwd_oop_);
    fftw_destroy_plan(fwd_ip_);
    fftw_destroy_plan(bwd_ip_);
  }

  std::size_t size() const { return n_; }

  void forward(const cplx* in, cplx* out) const {
    fftw_execute_dft(in == out ? fwd_ip_ : fwd_oop_, detail::fc(in), detail::fc(out));
  }
  void backward(const cplx* in, cplx* out) const {
    fftw_execute_dft(in == out ? bwd_ip_ : bwd_oop_, detail::fc(in), detail::fc(out));
    const double s = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] *= s;
  }
  void forward(cvec& v) const { forward(v.data(), v.data()); }
  void backward(cvec& v) const { backward(v.data(), v.data()); }

 private:
  int dim_, M_;
  std::size_t n_ = 0;
  fftw_plan fwd_oop_{}, bwd_oop_{}, fwd_ip_{}, bwd_ip_{};
};

inline std::shared_ptr<const FftPlan> fft_plan(int dim, int M) {
  static std::mutex m;
  static std::map<std::pair<int, int>, std::weak_ptr<const FftPlan>> cache;
  std::lock_guard<std::mutex> lk(m);
  auto& slot = cache[{dim, M}];
  if (auto sp = slot.lock()) return sp;
  auto sp = std::make_shared<const FftPlan>(dim, M);
  slot = sp;
  return sp;
}

// ---- grid -------------------------------------------------------------------

struct BoxGrid {
  int dim = 3, M = 0;
  double L = 0, h = 0;
  std::size_t n = 0;
  std::vector<double> x1d, k1d;
  std::vector<std::size_t> stride;
  rvec r, ksq;
  std::vector<int> shell;         // equal-radius shell id per point
  std::vector<double> shell_r;    // radius per shell, increasing
  std::shared_ptr<const FftPlan> fft;

  double cell_volume() const { return std::pow(h, dim); }
  double volume() const { return std::pow(2 * L, dim); }
  double k_nyquist() const { return std::numbers::pi / h; }
  int axis_index(std::size_t i, int a) const { return static_cast<int>((i / stride[a]) % M); }
  double coord(std::size_t i, int a) const { return x1d[axis_index(i, a)]; }
  double freq(std::size_t i, int a) const { return k1d[axis_index(i, a)]; }
  bool is_nyquist(std::size_t i, int a) const { return axis_index(i, a) == M / 2; }
  double min_radius() const { return shell_r.front(); }
  std::size_t n_shells() const { return shell_r.size(); }
};

using GridPtr = std::shared_ptr<const BoxGrid>;

inline bool is_power_of_two(int m) { return m > 0 && (m & (m - 1)) == 0; }

inline GridPtr make_grid(int M, double L, int dim = 3) {
  if (!is_power_of_two(M) || M < 16) throw std::invalid_argument("make_grid: M must be a power of two >= 16");
  if (!(L > 0)) throw std::invalid_argument("make_grid: L must be positive");
  if (dim < 1 || dim > 4) throw std::invalid_argument("make_grid: dim must be in 1..4");
  auto g = std::make_shared<BoxGrid>();
  g->dim = dim;
  g->M = M;
  g->L = L;
  g->h = 2 * L / M;
  g->n = 1;
  for (int a = 0; a < dim; ++a) g->n *= static_cast<std::size_t>(M);
  g->x1d.resize(M);
  g->k1d.resize(M);
  for (int j = 0; j < M; ++j) {
    g->x1d[j] = -L + (j + 0.5) * g->h;
    const int kw = j < M / 2 ? j : j - M;
    g->k1d[j] = std::numbers::pi / L * kw;
  }
  g->stride.assign(dim, 1);
  for (int a = dim - 2; a >= 0; --a) g->stride[a] = g->stride[a + 1] * M;

  g->r.resize(g->n);
  g->ksq.resize(g->n);
  g->shell.resize(g->n);
  // shells keyed by the exact integer sum of (2j+1-M)^2
  std::unordered_map<long long, int> key_to_tmp;
  std::vector<long long> keys(g->n);
  for (std::size_t i = 0; i < g->n; ++i) {
    double rr = 0, kk = 0;
    long long key = 0;
    for (int a = 0; a < dim; ++a) {
      const int j = g->axis_index(i, a);
      rr += g->x1d[j] * g->x1d[j];
      kk += g->k1d[j] * g->k1d[j];
      const long long o = 2LL * j + 1 - M;
      key += o * o;
    }
    g->r[i] = std::sqrt(rr);
    g->ksq[i] = kk;
    keys[i] = key;
  }
  std::vector<long long> uniq(keys.begin(), keys.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::unordered_map<long long, int> id;
  id.reserve(uniq.size());
  g->shell_r.resize(uniq.size());
  for (std::size_t s = 0; s < uniq.size(); ++s) {
    id[uniq[s]] = static_cast<int>(s);
    g->shell_r[s] = 0.5 * g->h * std::sqrt(static_cast<double>(uniq[s]));
  }
  for (std::size_t i = 0; i < g->n; ++i) g->shell[i] = id[keys[i]];
  g->fft = fft_plan(dim, M);
  return g;
}

// ---- fields -----------------------------------------------------------------

// Physical samples with a lazily synchronized spectrum (unnormalized DFT).
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(GridPtr g) : g_(std::move(g)), x_(g_->n, cplx(0)), x_ok_(true), k_ok_(false) {}
  SpectralField(GridPtr g, cvec values) : g_(std::move(g)), x_(std::move(values)), x_ok_(true), k_ok_(false) {
    if (x_.size() != g_->n) throw std::invalid_argument("SpectralField: size mismatch");
  }
  static SpectralField from_spectrum(GridPtr g, cvec spec) {
    SpectralField f(g);
    if (spec.size() != g->n) throw std::invalid_argument("SpectralField: size mismatch");
    f.k_ = std::move(spec);
    f.k_ok_ = true;
    f.x_ok_ = false;
    return f;
  }

  const GridPtr& grid_ptr() const { return g_; }
  const BoxGrid& grid() const { return *g_; }
  std::size_t size() const { return g_ ? g_->n : 0; }

  const cvec& values() const {
    if (!x_ok_) {
      x_.resize(g_->n);
      g_->fft->backward(k_.data(), x_.data());
      x_ok_ = true;
    }
    return x_;
  }
  // mutable access drops the spectral cache
  cvec& values_mut() {
    values();
    k_ok_ = false;
    return x_;
  }
  const cvec& spectrum() const {
    if (!k_ok_) {
      k_.resize(g_->n);
      g_->fft->forward(x_.data(), k_.data());
      k_ok_ = true;
    }
    return k_;
  }
  cvec& spectrum_mut() {
    spectrum();
    x_ok_ = false;
    return k_;
  }
  const cplx& operator[](std::size_t i) const { return values()[i]; }

  SpectralField& operator*=(cplx c) {
    if (x_ok_) for (auto& v : x_) v *= c;
    if (k_ok_) for (auto& v : k_) v *= c;
    return *this;
  }
  SpectralField& operator+=(const SpectralField& o) {
    auto& x = values_mut();
    const auto& y = o.values();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
    return *this;
  }
  SpectralField& operator-=(const SpectralField& o) {
    auto& x = values_mut();
    const auto& y = o.values();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= y[i];
    return *this;
  }
  friend SpectralField operator*(cplx c, SpectralField f) { return f *= c; }
  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }

 private:
  GridPtr g_;
  mutable cvec x_, k_;
  mutable bool x_ok_ = false, k_ok_ = false;
};

template <class F>
SpectralField sample(const GridPtr& g, F&& f) {
  SpectralField u(g);
  auto& v = u.values_mut();
  std::vector<double> x(g->dim);
  for (std::size_t i = 0; i < g->n; ++i) {
    for (int a = 0; a < g->dim; ++a) x[a] = g->coord(i, a);
    v[i] = f(x.data());
  }
  return u;
}

template <class F>
SpectralField sample_radial(const GridPtr& g, F&& f) {
  SpectralField u(g);
  auto& v = u.values_mut();
  for (std::size_t i = 0; i < g->n; ++i) v[i] = f(g->r[i]);
  return u;
}

inline SpectralField gaussian(const GridPtr& g, double amp = 1.0, double width = 1.0) {
  return sample_radial(g, [&](double r) { return cplx(amp * std::exp(-r * r / (width * width)), 0.0); });
}

// ---- norms ------------------------------------------------------------------

inline double inner_real(const SpectralField& u, const SpectralField& v) {
  const auto& a = u.values();
  const auto& b = v.values();
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return s * u.grid().cell_volume();
}

// extended accumulator: a plain double sum over 64³ cells moves by ~1e-13 as the profile spreads
inline double mass(const SpectralField& u) {
  long double s = 0;
  for (const auto& v : u.values()) s += abs2(v);
  return static_cast<double>(s * u.grid().cell_volume());
}

inline double norm_lr(const SpectralField& u, double r) {
  if (!(r >= 1)) throw std::domain_error("norm_lr: r must be >= 1");
  const auto& v = u.values();
  if (std::isinf(r)) {
    double m = 0;
    for (const auto& z : v) m = std::max(m, std::abs(z));
    return m;
  }
  if (r == 2) return std::sqrt(mass(u));
  double s = 0;
  for (const auto& z : v) s += std::pow(std::abs(z), r);
  return std::pow(s * u.grid().cell_volume(), 1.0 / r);
}

// spectral sum weight h^N / n
inline double spectral_measure(const BoxGrid& g) { return g.cell_volume() / static_cast<double>(g.n); }

inline double grad_norm_sq(const SpectralField& u) {
  const auto& k = u.spectrum();
  const auto& g = u.grid();
  double s = 0;
  for (std::size_t i = 0; i < g.n; ++i) s += g.ksq[i] * abs2(k[i]);
  return s * spectral_measure(g);
}

inline double norm_hs(const SpectralField& u, double s) {
  const auto& k = u.spectrum();
  const auto& g = u.grid();
  if (s == 0) return std::sqrt(mass(u));
  double acc = 0, tot = 0;
  for (std::size_t i = 1; i < g.n; ++i) {
    tot += abs2(k[i]);
    acc += std::pow(g.ksq[i], s) * abs2(k[i]);
  }
  if (s < 0 && abs2(k[0]) > 1e-16 * (tot + abs2(k[0])))
    throw std::domain_error("norm_hs: zero mode must vanish for negative s");
  return std::sqrt(acc * spectral_measure(g));
}

inline double norm_h1(const SpectralField& u) { return std::sqrt(mass(u) + grad_norm_sq(u)); }

// ---- differentiation --------------------------------------------------------

inline SpectralField derivative(const SpectralField& u, int axis) {
  const auto& g = u.grid();
  cvec k = u.spectrum();
  for (std::size_t i = 0; i < g.n; ++i) {
    // odd derivative: Nyquist mode dropped so real stays real
    k[i] *= g.is_nyquist(i, axis) ? cplx(0) : cplx(0, g.freq(i, axis));
  }
  return SpectralField::from_spectrum(u.grid_ptr(), std::move(k));
}

inline std::vector<SpectralField> gradient(const SpectralField& u) {
  std::vector<SpectralField> out;
  for (int a = 0; a < u.grid().dim; ++a) out.push_back(derivative(u, a));
  return out;
}

inline SpectralField laplacian(const SpectralField& u) {
  const auto& g = u.grid();
  cvec k = u.spectrum();
  for (std::size_t i = 0; i < g.n; ++i) k[i] *= -g.ksq[i];
  return SpectralField::from_spectrum(u.grid_ptr(), std::move(k));
}

// ---- radial helpers -----------------------------------------------------------

// Max over shells of the spread of |u| within the shell, relative to max |u|.
inline double radial_deviation(const SpectralField& u) {
  const auto& g = u.grid();
  const auto& v = u.values();
  std::vector<double> lo(g.n_shells(), INFINITY), hi(g.n_shells(), -INFINITY);
  double mx = 0;
  for (std::size_t i = 0; i < g.n; ++i) {
    const double a = std::abs(v[i]);
    lo[g.shell[i]] = std::min(lo[g.shell[i]], a);
    hi[g.shell[i]] = std::max(hi[g.shell[i]], a);
    mx = std::max(mx, a);
  }
  if (mx == 0) return 0;
  double d = 0;
  for (std::size_t s = 0; s < lo.size(); ++s) d = std::max(d, hi[s] - lo[s]);
  return d / mx;
}

// shell-averaged profile of a real field
inline std::vector<double> shell_average(const BoxGrid& g, const rvec& f) {
  std::vector<double> sum(g.n_shells(), 0.0), cnt(g.n_shells(), 0.0);
  for (std::size_t i = 0; i < g.n; ++i) {
    sum[g.shell[i]] += f[i];
    cnt[g.shell[i]] += 1;
  }
  for (std::size_t s = 0; s < sum.size(); ++s) sum[s] /= cnt[s];
  return sum;
}

// ---- cutoff ψ_R --------------------------------------------------------------

inline double smoothstep5(double t) {
  if (t <= 0) return 0;
  if (t >= 1) return 1;
  return t * t * t * (10 + t * (-15 + 6 * t));
}

// ψ(r) = 1 on r ≤ 1/2, 0 on r ≥ 1
inline double psi_profile(double r) { return 1.0 - smoothstep5((r - 0.5) / 0.5); }

struct Cutoff {
  double R = 0;
  rvec values;
};

inline Cutoff cutoff_psi(const BoxGrid& g, double R) {
  if (!(R > 0) || R >= g.L) throw std::invalid_argument("cutoff_psi: need 0 < R < L");
  Cutoff c;
  c.R = R;
  c.values.resize(g.n);
  for (std::size_t i = 0; i < g.n; ++i) c.values[i] = psi_profile(g.r[i] / R);
  return c;
}

// ---- Morawetz weight ----------------------------------------------------------

struct RadialWeight {
  double a, da, d2a, d3a, d4a;
};

class MorawetzWeight {
 public:
  // quadratic: a = r^2/2 everywhere (virial test weight)
  static MorawetzWeight quadratic(const BoxGrid& g) {
    MorawetzWeight w;
    w.R = INFINITY;
    w.dim = g.dim;
    w.fill(g);
    return w;
  }

  double R = 0;
  int dim = 3;
  rvec a, da, d2a, lap, bilap;

  RadialWeight profile(double r) const {
    if (!(R < INFINITY) || r <= R / 2) return {0.5 * r * r, r, 1.0, 0.0, 0.0};
    if (r >= R) return {R * r - outer_shift(), R, 0.0, 0.0, 0.0};
    const double s = R / 2, t = (r - s) / s;
    const double g = t + t * t * t * (4 + t * (-7 + 3 * t));
    const double g1 = 1 + t * t * (12 + t * (-28 + 15 * t));
    const double g2 = t * (24 + t * (-84 + 60 * t));
    const double g3 = 24 + t * (-168 + 180 * t);
    const double G = t * t * (0.5 + t * t * (1 + t * (-1.4 + 0.5 * t)));
    return {R * R / 8 + s * s * (t + G), s + s * g, g1, g2 / s, g3 / (s * s)};
  }
  // a = R r - shift for r ≥ R
  double outer_shift() const { return R * R - (R * R / 8 + 0.4 * R * R); }

  double laplacian(double r) const {
    const auto w = profile(r);
    return w.d2a + (dim - 1) * w.da / r;
  }
  double bilaplacian(double r) const {
    const auto w = profile(r);
    const double n1 = dim - 1;
    return w.d4a + 2 * n1 * w.d3a / r + n1 * (dim - 3) * (w.d2a / (r * r) - w.da / (r * r * r));
  }

  void fill(const BoxGrid& g) {
    a.resize(g.n);
    da.resize(g.n);
    d2a.resize(g.n);
    lap.resize(g.n);
    bilap.resize(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
      const double r = g.r[i];
      const auto w = profile(r);
      a[i] = w.a;
      da[i] = w.da;
      d2a[i] = w.d2a;
      lap[i] = laplacian(r);
      bilap[i] = bilaplacian(r);
    }
  }
};

struct WeightValidation {
  bool ok = false;
  double min_da = 0, min_d2a = 0;
  double C1 = 0, C2 = 0;  // |a'| ≤ C1 R, |a''| ≤ C2 R / r on the annulus
  double continuity_defect = 0;
};

inline WeightValidation validate_weight(const MorawetzWeight& w, int samples = 10000) {
  WeightValidation v;
  v.min_da = INFINITY;
  v.min_d2a = INFINITY;
  const double R = w.R;
  for (int i = 1; i <= samples; ++i) {
    const double r = 1.5 * R * i / samples;
    const auto p = w.profile(r);
    v.min_da = std::min(v.min_da, p.da);
    v.min_d2a = std::min(v.min_d2a, p.d2a);
    if (r > R / 2 && r < R) {
      v.C1 = std::max(v.C1, std::abs(p.da) / R);
      v.C2 = std::max(v.C2, std::abs(p.d2a) * r / R);
    }
  }
  const double eps = 1e-9 * R;
  for (double rb : {R / 2, R}) {
    const auto l = w.profile(rb - eps), u = w.profile(rb + eps);
    v.continuity_defect = std::max({v.continuity_defect, std::abs(l.a - u.a) / (R * R), std::abs(l.da - u.da) / R,
                                    std::abs(l.d2a - u.d2a)});
  }
  v.ok = v.min_da > 0 && v.min_d2a >= -1e-14 && v.continuity_defect <= 1e-8;
  return v;
}

inline MorawetzWeight morawetz_weight(const BoxGrid& g, double R) {
  if (!(R > 0) || R > g.L / 2 * (1 + 1e-12)) throw std::invalid_argument("morawetz_weight: need 0 < R <= L/2");
  MorawetzWeight w;
  w.R = R;
  w.dim = g.dim;
  w.fill(g);
  if (!validate_weight(w).ok) throw std::runtime_error("morawetz_weight: blend violates convexity");
  return w;
}

// ---- Strauss ratio ------------------------------------------------------------

inline double strauss_ratio(const SpectralField& u, bool* radial = nullptr) {
  const auto& g = u.grid();
  const auto& v = u.values();
  if (radial) *radial = radial_deviation(u) < 1e-6;
  double mx = 0;
  for (std::size_t i = 0; i < g.n; ++i) mx = std::max(mx, std::pow(g.r[i], 0.5 * (g.dim - 1)) * std::abs(v[i]));
  const double h1 = norm_h1(u);
  return h1 > 0 ? mx / h1 : 0.0;
}

// ---- rescaling ------------------------------------------------------------------

struct RescaleReport {
  double aliasing_fraction = 0;    // spectral energy that would pass Nyquist
  double truncation_fraction = 0;  // mass outside the sampled region
};

// 1-D trigonometric interpolation matrix from grid samples to points lambda*x_i.
inline std::vector<double> trig_interp_matrix(const BoxGrid& g, double lambda) {
  const int M = g.M;
  std::vector<double> T(static_cast<std::size_t>(M) * M, 0.0);
  for (int i = 0; i < M; ++i) {
    const double y = lambda * g.x1d[i];
    if (std::abs(y) > g.L) continue;  // outside the sampled box: treated as zero
    for (int j = 0; j < M; ++j) {
      const double d = y - g.x1d[j];
      // sum over k in (-M/2, M/2) plus a cosine Nyquist term
      double s = 1.0;
      for (int k = 1; k < M / 2; ++k) s += 2 * std::cos(std::numbers::pi / g.L * k * d);
      s += std::cos(std::numbers::pi / g.L * (M / 2) * d);
      T[static_cast<std::size_t>(i) * M + j] = s / M;
    }
  }
  return T;
}

inline SpectralField resample(const SpectralField& u, double lambda, RescaleReport* rep = nullptr) {
  const auto& g = u.grid();
  const auto T = trig_interp_matrix(g, lambda);
  cvec cur = u.values();
  cvec nxt(g.n);
  const int M = g.M;
  for (int a = 0; a < g.dim; ++a) {
    const std::size_t st = g.stride[a];
    for (std::size_t base = 0; base < g.n; ++base) {
      if (g.axis_index(base, a) != 0) continue;
      for (int i = 0; i < M; ++i) {
        cplx s = 0;
        const double* row = &T[static_cast<std::size_t>(i) * M];
        for (int j = 0; j < M; ++j) s += row[j] * cur[base + j * st];
        nxt[base + i * st] = s;
      }
    }
    std::swap(cur, nxt);
  }
  if (rep) {
    const auto& k = u.spectrum();
    const double kcut = g.k_nyquist() / std::max(lambda, 1.0);
    double tot = 0, hi = 0;
    for (std::size_t i = 0; i < g.n; ++i) {
      tot += abs2(k[i]);
      bool out = false;
      for (int ax = 0; ax < g.dim; ++ax) out = out || std::abs(g.freq(i, ax)) >= kcut * (1 - 1e-12);
      if (out) hi += abs2(k[i]);
    }
    rep->aliasing_fraction = tot > 0 ? hi / tot : 0;
    const auto& v = u.values();
    const double lcut = g.L * std::min(lambda, 1.0);
    double mt = 0, mo = 0;
    for (std::size_t i = 0; i < g.n; ++i) {
      mt += abs2(v[i]);
      bool out = false;
      for (int ax = 0; ax < g.dim; ++ax) out = out || std::abs(g.coord(i, ax)) > lcut;
      if (out) mo += abs2(v[i]);
    }
    rep->truncation_fraction = mt > 0 ? mo / mt : 0;
  }
  return SpectralField(u.grid_ptr(), std::move(cur));
}

// u_λ(x) = λ^{amp_exp} u(λx)
inline SpectralField rescale(const SpectralField& u, double lambda, double amp_exp, RescaleReport* rep = nullptr) {
  if (!(lambda > 0)) throw std::invalid_argument("rescale: lambda must be positive");
  auto out = resample(u, lambda, rep);
  out *= std::pow(lambda, amp_exp);
  return out;
}

// ---- snapshots ------------------------------------------------------------------

struct SnapshotHeader {
  std::int32_t dim = 3, M = 0;
  double L = 0, time = 0;
};

inline std::string snapshot_bytes(const SpectralField& u, double time) {
  const auto& g = u.grid();
  const auto& v = u.values();
  std::string out;
  const std::int32_t dim = g.dim, M = g.M;
  out.append(reinterpret_cast<const char*>(&dim), sizeof dim);
  out.append(reinterpret_cast<const char*>(&M), sizeof M);
  out.append(reinterpret_cast<const char*>(&g.L), sizeof(double));
  out.append(reinterpret_cast<const char*>(&time), sizeof(double));
  for (const auto& z : v) {
    const double re = z.real(), im = z.imag();
    out.append(reinterpret_cast<const char*>(&re), sizeof re);
    out.append(reinterpret_cast<const char*>(&im), sizeof im);
  }
  return out;
}

inline std::pair<SpectralField, double> parse_snapshot(const std::string& bytes) {
  SnapshotHeader h;
  constexpr std::size_t hdr = 2 * sizeof(std::int32_t) + 2 * sizeof(double);
  if (bytes.size() < hdr) throw std::runtime_error("snapshot: truncated header");
  std::memcpy(&h.dim, bytes.data(), 4);
  std::memcpy(&h.M, bytes.data() + 4, 4);
  std::memcpy(&h.L, bytes.data() + 8, 8);
  std::memcpy(&h.time, bytes.data() + 16, 8);
  auto g = make_grid(h.M, h.L, h.dim);
  if (bytes.size() != hdr + g->n * 16) throw std::runtime_error("snapshot: payload size mismatch");
  SpectralField u(g);
  auto& v = u.values_mut();
  for (std::size_t i = 0; i < g->n; ++i) {
    double re, im;
    std::memcpy(&re, bytes.data() + hdr + 16 * i, 8);
    std::memcpy(&im, bytes.data() + hdr + 16 * i + 8, 8);
    v[i] = cplx(re, im);
  }
  return {std::move(u), h.time};
}

inline std::pair<SpectralField, double> read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open snapshot " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_snapshot(bytes);
}

}  // namespace choquard
