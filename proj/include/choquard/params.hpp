#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace choquard {

using rational = boost::multiprecision::cpp_rational;

struct ModelParams {
  int N = 3;
  double alpha = 2.0;
  double b = -0.5;
  double p = 2.5;
};

struct ValidityReport {
  bool valid = false;
  bool structural = false;  // the five-term min condition alone
  std::vector<std::string> violations;
};

struct DerivedExponents {
  double s_c = 0, p_star = 0, p_sup = 0, A = 0, B = 0;
};

struct ExactExponents {
  rational s_c, p_star, p_sup, A, B;
};

// Smallest-denominator rational whose double rounds to x (denominator <= max_den).
inline std::optional<rational> to_rational(double x, long long max_den = 1000000) {
  if (!std::isfinite(x)) return std::nullopt;
  using boost::multiprecision::cpp_int;
  // continued fraction convergents
  cpp_int h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double r = x;
  for (int it = 0; it < 64; ++it) {
    double fl = std::floor(r);
    cpp_int a = static_cast<long long>(fl);
    cpp_int h2 = a * h1 + h0, k2 = a * k1 + k0;
    if (k2 > max_den) break;
    h0 = h1; h1 = h2; k0 = k1; k1 = k2;
    rational q(h1, k1);
    if (static_cast<double>(q) == x) return q;
    double frac = r - fl;
    if (frac == 0.0) break;
    r = 1.0 / frac;
  }
  return std::nullopt;
}

namespace detail {

inline double to_d(const rational& q) { return static_cast<double>(q); }

struct ExactParams {
  int N;
  rational alpha, b, p;
};

inline std::optional<ExactParams> exact(const ModelParams& m) {
  auto a = to_rational(m.alpha), b = to_rational(m.b), p = to_rational(m.p);
  if (!a || !b || !p) return std::nullopt;
  return ExactParams{m.N, *a, *b, *p};
}

}  // namespace detail

inline ExactExponents exact_exponents(const detail::ExactParams& q) {
  const rational N = q.N;
  ExactExponents e;
  e.p_star = 1 + (q.alpha + 2 + 2 * q.b) / N;
  e.p_sup = 1 + (q.alpha + 2 + 2 * q.b) / (N - 2);
  e.B = N * q.p - N - q.alpha - 2 * q.b;
  e.A = 2 * q.p - e.B;
  e.s_c = N / 2 - (2 + 2 * q.b + q.alpha) / (2 * (q.p - 1));
  return e;
}

inline DerivedExponents derived_exponents_unchecked(const ModelParams& m) {
  const double N = m.N;
  DerivedExponents e;
  e.p_star = 1 + (m.alpha + 2 + 2 * m.b) / N;
  e.p_sup = 1 + (m.alpha + 2 + 2 * m.b) / (N - 2);
  e.B = N * m.p - N - m.alpha - 2 * m.b;
  e.A = 2 * m.p - e.B;
  e.s_c = N / 2 - (2 + 2 * m.b + m.alpha) / (2 * (m.p - 1));
  return e;
}

inline ValidityReport validate_params(const ModelParams& m) {
  ValidityReport rep;
  auto ex = detail::exact(m);
  // exact comparisons when all inputs are short rationals
  auto pos = [&](double dv, const std::optional<rational>& qv) {
    return qv ? (*qv > 0) : (dv > 0);
  };
  std::optional<rational> mb, ma, mna, mnb, mlast;
  if (ex) {
    mb = -ex->b;
    ma = ex->alpha;
    mna = rational(m.N) - ex->alpha;
    mnb = rational(m.N) + ex->b;
    mlast = 4 + ex->alpha + 2 * ex->b - m.N;
  }
  if (m.N < 3) rep.violations.push_back("N ≥ 3");
  if (!pos(-m.b, mb)) rep.violations.push_back("−b > 0");
  if (!pos(m.alpha, ma)) rep.violations.push_back("α > 0");
  if (!pos(m.N - m.alpha, mna)) rep.violations.push_back("N−α > 0");
  if (!pos(m.N + m.b, mnb)) rep.violations.push_back("N+b > 0");
  if (!pos(4 + m.alpha + 2 * m.b - m.N, mlast)) rep.violations.push_back("4+α+2b−N > 0");
  rep.structural = rep.violations.empty();

  bool p_ge2, p_lo, p_hi;
  if (ex && m.N >= 3) {
    auto e = exact_exponents(*ex);
    p_ge2 = ex->p >= 2;
    p_lo = ex->p > e.p_star;
    p_hi = ex->p < e.p_sup;
  } else {
    auto e = derived_exponents_unchecked(m);
    p_ge2 = m.p >= 2;
    p_lo = m.p > e.p_star;
    p_hi = m.N >= 3 && m.p < e.p_sup;
  }
  if (!p_ge2) rep.violations.push_back("p ≥ 2");
  if (!p_lo) rep.violations.push_back("p > p_*");
  if (!p_hi) rep.violations.push_back("p < p^*");
  rep.valid = rep.violations.empty();
  return rep;
}

inline std::string join_violations(const ValidityReport& r) {
  std::string s;
  for (const auto& v : r.violations) {
    if (!s.empty()) s += ", ";
    s += v;
  }
  return s;
}

inline DerivedExponents derived_exponents(const ModelParams& m) {
  auto rep = validate_params(m);
  if (!rep.valid) throw std::invalid_argument("invalid model parameters: " + join_violations(rep));
  return derived_exponents_unchecked(m);
}

inline std::optional<ExactExponents> derived_exponents_exact(const ModelParams& m) {
  auto rep = validate_params(m);
  if (!rep.valid) throw std::invalid_argument("invalid model parameters: " + join_violations(rep));
  auto ex = detail::exact(m);
  if (!ex) return std::nullopt;
  return exact_exponents(*ex);
}

// ---- admissible pairs -------------------------------------------------------

// inv_q = 1/q, so q = infinity is inv_q = 0.
inline bool is_admissible_exact(const rational& inv_q, const rational& r, const rational& s, int N) {
  if (N < 3 || r < 2 || inv_q < 0 || inv_q > rational(1, 2)) return false;
  const rational n = N;
  if (n * (rational(1, 2) - 1 / r) != 2 * inv_q + s) return false;
  return 2 * n / (n - 2 * s) <= r && r < 2 * n / (n - 2);
}

inline bool is_admissible(double q, double r, double s, int N, double tol = 1e-12) {
  const bool qinf = std::isinf(q);
  std::optional<rational> rq = rational(0);
  if (!qinf) {
    auto qq = to_rational(q);
    rq = (qq && *qq != 0) ? std::optional<rational>(1 / *qq) : std::nullopt;
  }
  auto rr = to_rational(r), rs = to_rational(s);
  if (rq && rr && rs) return is_admissible_exact(*rq, *rr, *rs, N);
  if (N < 3 || r < 2 || (!qinf && q < 2)) return false;
  const double lhs = N * (0.5 - 1.0 / r), rhs = (qinf ? 0.0 : 2.0 / q) + s;
  if (std::abs(lhs - rhs) > tol * std::max(1.0, std::abs(rhs))) return false;
  return 2.0 * N / (N - 2 * s) <= r * (1 + tol) && r < 2.0 * N / (N - 2);
}

// scaling defect N(1/2-1/r) - 2/q - s, used for s outside [0,1) as well
inline double admissibility_defect(double q, double r, double s, int N) {
  return N * (0.5 - 1.0 / r) - (std::isinf(q) ? 0.0 : 2.0 / q) - s;
}

// ---- exponent systems -------------------------------------------------------

struct Lemma41System {
  double theta = 0, a = 0, d = 0, r = 0, d_prime = 0;
  double mu_inner = 0, r1_inner = 0, sign_inner = 0;
  double mu_outer = 0, r1_outer = 2, sign_outer = 0;
  double max_identity_defect = 0;
};

inline double rel_defect(double x, double y) {
  return std::abs(x - y) / std::max({1.0, std::abs(x), std::abs(y)});
}

inline Lemma41System lemma41_system(const ModelParams& m, double theta = 0.01) {
  const auto e = derived_exponents(m);
  const double N = m.N, p = m.p, sc = e.s_c;
  if (!(theta > 0 && theta < 2 * p - 1)) throw std::domain_error("theta outside (0, 2p-1)");
  Lemma41System s;
  s.theta = theta;
  const double k = 2 * p - theta;
  s.a = k / (1 - sc);
  s.d = k / (1 + (2 * p - 1 - theta) * sc);
  s.r = 2 * N * k / ((N - 2 * sc) * k - 4 * (1 - sc));
  s.d_prime = 1.0 / (1.0 - 1.0 / s.d);

  std::vector<double> defects;
  defects.push_back(rel_defect((2 * p - 1 - theta) * s.d_prime, s.a));
  defects.push_back(std::abs(admissibility_defect(s.a, s.r, sc, m.N)));
  defects.push_back(std::abs(admissibility_defect(s.d, s.r, -sc, m.N)));

  auto mu_for = [&](double r1) { return 2.0 / (1 + m.alpha / N - theta / r1 - k / s.r); };
  s.r1_inner = 2 * N / (N - 2);
  s.mu_inner = mu_for(s.r1_inner);
  s.mu_outer = mu_for(2.0);
  for (double r1 : {s.r1_inner, 2.0}) {
    const double mu = mu_for(r1);
    defects.push_back(rel_defect(1 + m.alpha / N, 2 / mu + theta / r1 + k / s.r));
    // closed form of 2N/mu
    defects.push_back(rel_defect(2 * N / mu, -2 * m.b - N * theta / r1 + theta * (2 + 2 * m.b + m.alpha) / (2 * (p - 1))));
  }
  s.sign_inner = 2 * N / s.mu_inner + 2 * m.b;
  s.sign_outer = 2 * N / s.mu_outer + 2 * m.b;
  defects.push_back(rel_defect(s.sign_inner, theta / (2 * (p - 1)) * (2 + 2 * m.b + m.alpha - (p - 1) * (N - 2))));
  defects.push_back(rel_defect(s.sign_outer, -theta * sc));
  for (double d : defects) s.max_identity_defect = std::max(s.max_identity_defect, d);

  if (s.max_identity_defect > 1e-12) throw std::runtime_error("lemma41_system: identity violated");
  const double rmin = 2 * N / (N - 2 * sc), rmax = 2 * N / (N - 2);
  if (!(s.r > rmin && s.r < rmax && s.a >= 2 && s.d >= 1 && s.d_prime > 0))
    throw std::runtime_error("lemma41_system: admissibility window broken for this theta");
  if (!(s.mu_inner > 0 && s.mu_outer > 0 && s.sign_inner > 0 && s.sign_outer < 0))
    throw std::runtime_error("lemma41_system: sign condition broken for this theta");
  return s;
}

struct Appendix72System {
  double eps_exp = 1e-3;
  double mu1 = 0, r1 = 0, q1 = 0, theta1 = 0;
  double rho = 0, r2 = 0, q2 = 0, theta2 = 0;
  bool tight_window = false;  // 0 < theta_i < 2(p-1)
  bool loose_window = false;  // 0 < theta_i < 2p (lemma statement)
  double max_identity_defect = 0;
};

inline Appendix72System appendix72_system(const ModelParams& m, double eps_exp = 1e-3) {
  const auto e = derived_exponents(m);
  (void)e;
  const double N = m.N, p = m.p, al = m.alpha, b = m.b;
  Appendix72System s;
  s.eps_exp = eps_exp;
  s.mu1 = N / (-b) - eps_exp;
  s.r1 = 2 * N * p / (al + N - 2 * N / s.mu1);
  s.q1 = 2.0 / (N * (0.5 - 1.0 / s.r1));
  s.theta1 = s.q1 - 2;

  s.r2 = 2 * N * p / (N + al + 2 * b) + eps_exp;
  // 1/rho from the identity
  const double inv_rho = 1 + al / N - 2 * p / s.r2 + 1.0 / N;
  s.rho = 1.0 / inv_rho;
  s.q2 = 2.0 / (N * (0.5 - 1.0 / s.r2));
  s.theta2 = s.q2 - 2;

  const double q1p = s.q1 / (s.q1 - 1), q2p = s.q2 / (s.q2 - 1);
  std::vector<double> defects{
      rel_defect(1 + al / N, 2 / s.mu1 + 2 * p / s.r1),
      std::abs(admissibility_defect(s.q1, s.r1, 0, m.N)),
      rel_defect((1 + s.theta1) * q1p, s.q1),
      rel_defect(1 + al / N, 1 / s.r2 + 1 / s.rho + 2 * (p - 1) / s.r2 + 1 / s.r2 - 1 / N),
      std::abs(admissibility_defect(s.q2, s.r2, 0, m.N)),
      rel_defect((1 + s.theta2) * q2p, s.q2),
  };
  for (double d : defects) s.max_identity_defect = std::max(s.max_identity_defect, d);
  if (s.max_identity_defect > 1e-9) throw std::runtime_error("appendix72_system: identity violated");

  const double rmax = 2 * N / (N - 2);
  if (!(s.mu1 > 0 && s.r1 > 2 && s.r1 < rmax && s.r2 > 2 && s.r2 < rmax))
    throw std::runtime_error("appendix72_system: Lebesgue window broken");
  if (!(s.rho > 0 && s.rho < N / (1 - 2 * b)))
    throw std::runtime_error("appendix72_system: rho not below N/(1-2b)");
  auto in = [&](double th, double hi) { return th > 0 && th < hi; };
  s.tight_window = in(s.theta1, 2 * (p - 1)) && in(s.theta2, 2 * (p - 1));
  s.loose_window = in(s.theta1, 2 * p) && in(s.theta2, 2 * p);
  if (!s.tight_window) throw std::runtime_error("appendix72_system: theta outside (0, 2(p-1))");
  return s;
}

// ---- bootstrap lemma ----------------------------------------------------------

struct BootstrapResult {
  bool applies = false;
  double bound = std::numeric_limits<double>::quiet_NaN();
  double a_threshold = 0, x_threshold = 0;
};

inline BootstrapResult bootstrap_bound(double a, double bcoef, double theta, double X0) {
  if (!(theta > 1)) throw std::domain_error("bootstrap_bound: theta must exceed 1");
  if (!(a > 0 && bcoef > 0)) throw std::domain_error("bootstrap_bound: a and b must be positive");
  BootstrapResult r;
  r.x_threshold = std::pow(theta * bcoef, 1.0 / (1.0 - theta));
  r.a_threshold = (1 - 1 / theta) * r.x_threshold;
  r.applies = a < r.a_threshold && X0 <= r.x_threshold;
  if (r.applies) r.bound = theta * a / (theta - 1);
  return r;
}

}  // namespace choquard
