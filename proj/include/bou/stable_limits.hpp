#pragma once
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "ou_hermite.hpp"
#include "quadrature.hpp"

namespace bou {

inline constexpr double kPi = 3.14159265358979323846;

struct RegimeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// z^{1+beta} on the branch with arg in (-pi, pi), analytic off the negative real axis
inline std::complex<double> complex_power_1pbeta(std::complex<double> z, double beta) {
  if (z.real() < -1e-12 && z.imag() == 0.0)
    throw std::domain_error("complex_power_1pbeta: argument on the branch cut");
  if (z.real() == 0.0 && z.imag() == 0.0) return {0.0, 0.0};
  return std::exp((1.0 + beta) * std::log(z));
}

// (i v)^{1+beta} for real v: |v|^{1+beta} exp(i sign(v) pi (1+beta)/2)
inline std::complex<double> ipow_1pbeta(double v, double beta) {
  if (v == 0.0) return {0.0, 0.0};
  const double r = std::pow(std::abs(v), 1.0 + beta);
  const double ang = (v > 0.0 ? 0.5 : -0.5) * kPi * (1.0 + beta);
  return {r * std::cos(ang), r * std::sin(ang)};
}

struct QuadOptions {
  int quad_s = 24;          // Gauss-Legendre nodes for the time integrals
  int quad_x_order = 48;    // tensor Gauss-Hermite order for d > 1 expectations
  int nodes_per_panel = 16; // panel-split Gauss-Legendre nodes for d = 1 expectations
  bool cross_check = true;  // verify each m_k against the independent second formula
  double cross_check_tol = 1e-7;
};

struct RegimeReport {
  double lambda = 0.0, mu = 0.0, beta = 0.0;
  int kappa_g = 0;
  double threshold = 0.0;  // (1 + 1/beta) * kappa * mu
  std::string regime;      // "small" | "critical" | "large"
  std::string normalization_descriptor;
};

inline RegimeReport classify_regime(const OUParams& ou, double lambda, double beta,
                                    const PolynomialFn& g) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("classify_regime: beta must be in (0,1)");
  if (!(lambda > 0.0)) throw std::invalid_argument("classify_regime: lambda must be positive");
  if (g.is_zero()) throw std::invalid_argument("classify_regime: test function is zero");
  RegimeReport r;
  r.lambda = lambda;
  r.mu = ou.mu;
  r.beta = beta;
  r.kappa_g = g.kappa;
  r.threshold = (1.0 + 1.0 / beta) * g.kappa * ou.mu;
  const double tol = 1e-9 * std::max(1.0, std::abs(r.threshold));
  if (std::abs(lambda - r.threshold) <= tol) {
    r.regime = "critical";
    r.normalization_descriptor = "(t*|X_t|)^{1/(1+beta)}";
  } else if (lambda < r.threshold) {
    r.regime = "small";
    r.normalization_descriptor = "|X_t|^{1/(1+beta)}";
  } else {
    r.regime = "large";
    r.normalization_descriptor = "exp((lambda-kappa*mu)*t)";
  }
  return r;
}

namespace detail {

// E over the shifted isotropic Gaussian N(mean, sd^2 Id) by tensor Gauss-Hermite (d > 1 path)
template <class F>
std::complex<double> expect_shifted_gaussian(F&& f, int d, const double* mean, double sd, int order) {
  auto g = [&](const double* xi) {
    double y[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i < d; ++i) y[i] = mean[i] + xi[i];
    return f(y);
  };
  return expect_isotropic_gaussian(g, d, sd, order);
}

}  // namespace detail

// E_phi[(i h(x))^{1+beta}], phi = N(0, sigma^2/(2 mu) Id)
inline std::complex<double> phi_ipow_expectation(const OUParams& ou, double beta,
                                                 const PolynomialFn& h, const QuadOptions& opts) {
  if (h.is_zero() || h.mono.empty()) return {0.0, 0.0};
  const double s_inf = ou.stationary_sd();
  if (ou.d == 1) {
    const std::vector<double> c = dense_coeffs_1d(h.mono);
    const std::vector<double> roots = sign_change_roots(c, -14.0 * s_inf, 14.0 * s_inf);
    return expect_gaussian_1d([&](double y) { return ipow_1pbeta(horner(c, y), beta); }, 0.0,
                              s_inf, roots, opts.nodes_per_panel);
  }
  const CompiledPoly cp(h.mono);
  return expect_isotropic_gaussian([&](const double* x) { return ipow_1pbeta(cp.eval(x), beta); },
                                   ou.d, s_inf, opts.quad_x_order);
}

// Z_h(x) = ∫_0^1 T_{1-s}^lambda[ lambda (i T_s^lambda h)^{1+beta} ](x) ds.
// The outer expectation is over the OU transition kernel from x over time 1-s; the
// integrand has |.|^{1+beta} kinks at the real roots of T_s^lambda h, so the d = 1 path
// splits panels at those roots.  Scaling: Z_{c h} = c^{1+beta} Z_h for c > 0.
inline std::complex<double> compute_Z(const OUParams& ou, double lambda, double beta,
                                      const PolynomialFn& h, const double* x,
                                      const QuadOptions& opts = {}) {
  if (h.is_zero() || h.mono.empty()) return {0.0, 0.0};
  const QuadRule& rs = gauss_legendre(opts.quad_s);
  std::complex<double> acc{0.0, 0.0};
  for (int i = 0; i < opts.quad_s; ++i) {
    const double s = 0.5 + 0.5 * rs.x[i];
    const double ws = 0.5 * rs.w[i];
    const PolynomialFn Tsh = semigroup_apply(ou, h, s, lambda);
    const double sd1 = ou.transition_sd(1.0 - s);
    std::complex<double> inner;
    if (ou.d == 1) {
      const std::vector<double> c = dense_coeffs_1d(Tsh.mono);
      const double mean = x[0] * std::exp(-ou.mu * (1.0 - s));
      const std::vector<double> roots =
          sign_change_roots(c, mean - 13.0 * sd1, mean + 13.0 * sd1);
      inner = expect_gaussian_1d(
          [&](double y) { return lambda * ipow_1pbeta(horner(c, y), beta); }, mean, sd1, roots,
          opts.nodes_per_panel);
    } else {
      double mean[3] = {0.0, 0.0, 0.0};
      const double decay = std::exp(-ou.mu * (1.0 - s));
      for (int j = 0; j < ou.d; ++j) mean[j] = x[j] * decay;
      const CompiledPoly cp(Tsh.mono);
      inner = detail::expect_shifted_gaussian(
          [&](const double* y) { return lambda * ipow_1pbeta(cp.eval(y), beta); }, ou.d, mean,
          sd1, opts.quad_x_order);
    }
    acc += ws * std::exp(lambda * (1.0 - s)) * inner;
  }
  return acc;
}

// R_t = e^{-(lambda - kappa mu) t} T_t^lambda g = sum_p a_p e^{-(|p|-kappa) mu t} h_p.
// Bounded in t, which keeps every m_k quadrature overflow-free at large k.
// Coefficients at or below the kappa detection threshold are expansion noise and are
// dropped (they would be amplified by e^{kappa mu t}).
inline PolynomialFn reduced_semigroup_poly(const OUParams& ou, const PolynomialFn& g, double t) {
  PolynomialFn out;
  if (g.is_zero()) return out;
  const int kappa = g.kappa;
  for (const auto& [p, a] : g.hermite_coeffs) {
    if (std::abs(a) <= kKappaThreshold) continue;
    out.hermite_coeffs[p] = a * std::exp(-(p.order() - kappa) * ou.mu * t);
  }
  if (out.hermite_coeffs.empty()) return out;
  out.mono = hermite_to_polynomial(ou, out.hermite_coeffs);
  out.kappa = kappa;
  out.degree = g.degree;
  return out;
}

namespace detail {

// definition route: m_k = e^{-lambda(k+1)} <Z_{T_k^lambda g}, phi>, computed as
// e^{rho k - lambda} <Z_{R_k}, phi> via the exact scaling law.  The s-loop is outermost
// so kink roots are found once per s-node and shared across the outer phi nodes.
inline std::complex<double> m_k_definition_route(const OUParams& ou, double lambda, double beta,
                                                 const PolynomialFn& g, int k,
                                                 const QuadOptions& opts) {
  const double rho = lambda * beta - g.kappa * ou.mu * (1.0 + beta);
  const PolynomialFn Rk = reduced_semigroup_poly(ou, g, k);
  if (Rk.is_zero()) return {0.0, 0.0};
  const double s_inf = ou.stationary_sd();
  std::complex<double> acc{0.0, 0.0};
  if (ou.d == 1) {
    const QuadRule xs = gaussian_nodes_1d(0.0, s_inf, {}, opts.nodes_per_panel);
    const QuadRule& rs = gauss_legendre(opts.quad_s);
    for (int i = 0; i < opts.quad_s; ++i) {
      const double s = 0.5 + 0.5 * rs.x[i];
      const double ws = 0.5 * rs.w[i];
      const PolynomialFn Tsh = semigroup_apply(ou, Rk, s, lambda);
      const std::vector<double> c = dense_coeffs_1d(Tsh.mono);
      const double decay = std::exp(-ou.mu * (1.0 - s));
      const double sd1 = ou.transition_sd(1.0 - s);
      // window covering the supports of every outer-node transition kernel
      const double w = 12.0 * s_inf * decay + 13.0 * sd1 + s_inf;
      const int grid = std::min(65536, std::max(2048, static_cast<int>(512.0 * w / s_inf)));
      const std::vector<double> roots = sign_change_roots(c, -w, w, grid);
      std::complex<double> over_x{0.0, 0.0};
      for (std::size_t j = 0; j < xs.x.size(); ++j) {
        const std::complex<double> inner = expect_gaussian_1d(
            [&](double y) { return lambda * ipow_1pbeta(horner(c, y), beta); }, xs.x[j] * decay,
            sd1, roots, opts.nodes_per_panel);
        over_x += xs.w[j] * inner;
      }
      acc += ws * std::exp(lambda * (1.0 - s)) * over_x;
    }
  } else {
    acc = expect_isotropic_gaussian(
        [&](const double* x) { return compute_Z(ou, lambda, beta, Rk, x, opts); }, ou.d, s_inf,
        opts.quad_x_order);
  }
  return std::exp(rho * k - lambda) * acc;
}

// interval route: m_k = lambda ∫_k^{k+1} e^{-lambda s} <(i T_s^lambda g)^{1+beta}, phi> ds
//                     = lambda ∫_0^1 e^{rho (k+u)} <(i R_{k+u})^{1+beta}, phi> du
inline std::complex<double> m_k_interval_route(const OUParams& ou, double lambda, double beta,
                                               const PolynomialFn& g, int k,
                                               const QuadOptions& opts) {
  const double rho = lambda * beta - g.kappa * ou.mu * (1.0 + beta);
  const QuadRule& ru = gauss_legendre(opts.quad_s);
  std::complex<double> acc{0.0, 0.0};
  for (int i = 0; i < opts.quad_s; ++i) {
    const double u = 0.5 + 0.5 * ru.x[i];
    const double wu = 0.5 * ru.w[i];
    const PolynomialFn R = reduced_semigroup_poly(ou, g, k + u);
    acc += wu * std::exp(rho * (k + u)) * phi_ipow_expectation(ou, beta, R, opts);
  }
  return lambda * acc;
}

}  // namespace detail

// m_k[g]; when opts.cross_check is set the two independent formulas (definition via Z
// against the unit-interval integral) must agree within opts.cross_check_tol
inline std::complex<double> compute_m_k(const OUParams& ou, double lambda, double beta,
                                        const PolynomialFn& g, int k,
                                        const QuadOptions& opts = {}) {
  if (k < 0) throw std::invalid_argument("compute_m_k: k must be >= 0");
  if (!(lambda > 0.0)) throw std::invalid_argument("compute_m_k: lambda must be positive");
  if (g.is_zero()) return {0.0, 0.0};
  const std::complex<double> mk = detail::m_k_interval_route(ou, lambda, beta, g, k, opts);
  if (opts.cross_check) {
    const std::complex<double> alt = detail::m_k_definition_route(ou, lambda, beta, g, k, opts);
    if (std::abs(alt - mk) > opts.cross_check_tol)
      throw std::runtime_error("compute_m_k: the two m_k formulas disagree beyond tolerance");
  }
  return mk;
}

// closed form for an eigenfunction g = h_p: lambda e^{rho k} (e^rho - 1)/rho <(i h_p)^{1+beta}>_phi
inline std::complex<double> eigen_m_k_closed_form(const OUParams& ou, double lambda, double beta,
                                                  const MultiIndex& p, int k,
                                                  const QuadOptions& opts = {}) {
  const double rho = lambda * beta - p.order() * ou.mu * (1.0 + beta);
  const std::complex<double> base = phi_ipow_expectation(ou, beta, hermite_fn(ou, p), opts);
  const double interval = std::abs(rho) < 1e-14 ? 1.0 : std::expm1(rho) / rho;
  return lambda * std::exp(rho * k) * interval * base;
}

struct StableLimitParams {
  double lambda = 0.0, mu = 0.0, beta = 0.0;
  int kappa = 0;
  double rho = 0.0;  // lambda beta - kappa mu (1+beta); negative in the small regime
  std::vector<std::complex<double>> m_k_values;
  std::complex<double> m_series{0.0, 0.0};
  std::complex<double> m_bar{0.0, 0.0};
  int K = 0;
  double tail_bound = 0.0;
};

// m[g] = sum_k m_k[g] in the small regime; K adapted until the geometric tail bound
// C e^{rho (K+1)}/(1 - e^rho) falls below 1e-8, then cross-checked against the direct
// time integral computed with a different node budget
inline StableLimitParams compute_m_series(const OUParams& ou, double lambda, double beta,
                                          const PolynomialFn& g, const QuadOptions& opts = {},
                                          int max_K = 200) {
  const RegimeReport reg = classify_regime(ou, lambda, beta, g);
  if (reg.regime != "small")
    throw RegimeMismatch("compute_m_series: the series converges only in the small regime");
  StableLimitParams out;
  out.lambda = lambda;
  out.mu = ou.mu;
  out.beta = beta;
  out.kappa = g.kappa;
  out.rho = lambda * beta - g.kappa * ou.mu * (1.0 + beta);

  std::complex<double> sum{0.0, 0.0};
  double C = 0.0;
  const double geo = std::exp(out.rho);
  for (int k = 0; k <= max_K; ++k) {
    const std::complex<double> mk = compute_m_k(ou, lambda, beta, g, k, opts);
    out.m_k_values.push_back(mk);
    sum += mk;
    C = std::max(C, std::abs(mk) * std::exp(-out.rho * k));
    out.K = k;
    out.tail_bound = C * std::exp(out.rho * (k + 1)) / (1.0 - geo);
    if (k >= 4 && out.tail_bound < 1e-8) break;
  }
  out.m_series = sum;

  if (opts.cross_check) {
    QuadOptions alt = opts;
    alt.quad_s = opts.quad_s + 9;
    alt.nodes_per_panel = opts.nodes_per_panel + 8;
    alt.cross_check = false;
    std::complex<double> direct{0.0, 0.0};
    for (int k = 0; k <= out.K; ++k)
      direct += detail::m_k_interval_route(ou, lambda, beta, g, k, alt);
    if (std::abs(direct - sum) > 1e-6)
      throw std::runtime_error("compute_m_series: direct-integral cross-check failed");
  }
  if (out.m_series.real() > 1e-10)
    throw std::runtime_error("compute_m_series: Re m[g] > 0, not a CF parameter");
  return out;
}

// m_bar[g] = lambda <(i h)^{1+beta}, phi> with h the kappa-level projection of g
inline std::complex<double> compute_m_bar(const OUParams& ou, double lambda, double beta,
                                          const PolynomialFn& g, const QuadOptions& opts = {}) {
  const RegimeReport reg = classify_regime(ou, lambda, beta, g);
  if (reg.regime != "critical")
    throw RegimeMismatch("compute_m_bar: defined only at the critical threshold");
  const PolynomialFn h = extract_level(ou, g, g.kappa);
  const std::complex<double> mb = lambda * phi_ipow_expectation(ou, beta, h, opts);
  if (mb.real() > 1e-10)
    throw std::runtime_error("compute_m_bar: Re m_bar > 0, not a CF parameter");
  return mb;
}

// (1/t) sum_{k=0}^{t} m_k[g] (cross-checks disabled: used for long Cesaro scans)
inline std::complex<double> cesaro_mean(const OUParams& ou, double lambda, double beta,
                                        const PolynomialFn& g, int t,
                                        const QuadOptions& opts = {}) {
  if (t < 1) throw std::invalid_argument("cesaro_mean: t must be >= 1");
  QuadOptions fast = opts;
  fast.cross_check = false;
  std::complex<double> sum{0.0, 0.0};
  for (int k = 0; k <= t; ++k) sum += detail::m_k_interval_route(ou, lambda, beta, g, k, fast);
  return sum / static_cast<double>(t);
}

// exp(theta^{1+beta} m) for theta >= 0, extended to theta < 0 by conjugate symmetry
inline std::complex<double> limit_cf(std::complex<double> m, double beta, double theta) {
  if (theta < 0.0) return std::conj(limit_cf(m, beta, -theta));
  return std::exp(std::pow(theta, 1.0 + beta) * m);
}

}  // namespace bou
