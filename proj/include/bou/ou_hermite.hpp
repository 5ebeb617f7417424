#pragma once
#include <climits>
#include <concepts>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "polynomial.hpp"
#include "quadrature.hpp"
#include "rng.hpp"

namespace bou {

// OU diffusion dY = sigma dB - mu Y dt; invariant measure N(0, sigma^2/(2 mu) Id)
struct OUParams {
  double sigma = 1.0;
  double mu = 1.0;
  int d = 1;

  double stationary_sd() const { return sigma / std::sqrt(2.0 * mu); }
  double transition_sd(double t) const {
    return stationary_sd() * std::sqrt(-std::expm1(-2.0 * mu * t));
  }
};

inline OUParams make_ou_params(double sigma, double mu, int d) {
  if (!(sigma > 0.0)) throw std::invalid_argument("ou: sigma must be positive");
  if (!(mu > 0.0)) throw std::invalid_argument("ou: mu must be positive");
  if (d < 1 || d > 3) throw std::invalid_argument("ou: dimension must be 1..3");
  return OUParams{sigma, mu, d};
}

// exact draw from N(x e^{-mu t}, (sigma^2/2mu)(1-e^{-2mu t}) Id)
inline void ou_transition_sample(const OUParams& params, const double* x, double t, Stream& rng,
                                 double* out) {
  if (t < 0.0) throw std::invalid_argument("ou_transition_sample: t >= 0 required");
  const double decay = std::exp(-params.mu * t);
  const double sd = params.transition_sd(t);
  for (int i = 0; i < params.d; ++i) out[i] = x[i] * decay + sd * rng.normal();
}

namespace detail {

// h_n as dense 1-d coefficient vectors: h_n(x) = H_n(c x)/sqrt(n! 2^n), c = sqrt(mu)/sigma
inline std::vector<std::vector<double>> hermite1d_table(double c, int nmax) {
  std::vector<std::vector<double>> H(nmax + 1);
  H[0] = {1.0};
  if (nmax >= 1) H[1] = {0.0, 2.0 * c};
  for (int n = 1; n < nmax; ++n) {
    std::vector<double> next(n + 2, 0.0);
    for (std::size_t i = 0; i < H[n].size(); ++i) next[i + 1] += 2.0 * c * H[n][i];
    for (std::size_t i = 0; i < H[n - 1].size(); ++i) next[i] -= 2.0 * n * H[n - 1][i];
    H[n + 1] = std::move(next);
  }
  for (int n = 0; n <= nmax; ++n) {
    double norm = 1.0 / std::sqrt(factorial(n) * std::pow(2.0, n));
    for (double& v : H[n]) v *= norm;
  }
  return H;
}

inline Polynomial hermite_poly(const OUParams& params,
                               const std::vector<std::vector<double>>& table,
                               const MultiIndex& p) {
  Polynomial f(params.d);
  f.set(MultiIndex::zero(params.d), 1.0);
  for (int axis = 0; axis < params.d; ++axis) {
    Polynomial axis_poly(params.d);
    const std::vector<double>& c = table[p.v[axis]];
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k] == 0.0) continue;
      MultiIndex q = MultiIndex::zero(params.d);
      q.v[axis] = static_cast<std::uint16_t>(k);
      axis_poly.set(q, c[k]);
    }
    f = f * axis_poly;
  }
  return f;
}

}  // namespace detail

// h_p(x) = prod_i H_{p_i}(sqrt(mu) x_i / sigma) / sqrt(p_i! 2^{p_i})
inline double hermite_basis_eval(const OUParams& params, const MultiIndex& p, const double* x) {
  if (p.d != params.d) throw std::invalid_argument("hermite_basis_eval: dimension mismatch");
  const double c = std::sqrt(params.mu) / params.sigma;
  double val = 1.0;
  for (int i = 0; i < params.d; ++i) {
    const int n = p.v[i];
    double h0 = 1.0, h1 = 2.0 * c * x[i];
    double h = n == 0 ? h0 : h1;
    for (int k = 1; k < n; ++k) {
      double h2 = 2.0 * c * x[i] * h1 - 2.0 * k * h0;
      h0 = h1;
      h1 = h2;
      h = h2;
    }
    val *= h / std::sqrt(factorial(n) * std::pow(2.0, n));
  }
  return val;
}

// polynomial together with its (exact, finite) Hermite expansion
struct PolynomialFn {
  Polynomial mono{1};
  std::map<MultiIndex, double, GradedLess> hermite_coeffs;
  int kappa = INT_MAX;  // INT_MAX marks the zero polynomial
  int degree = 0;

  int dim() const { return mono.dim(); }
  bool is_zero() const { return kappa == INT_MAX; }
};

constexpr double kKappaThreshold = 1e-12;

// exact monomial -> Hermite basis change by leading-term elimination in graded-lex order
inline PolynomialFn expand_in_hermite(const OUParams& params, const Polynomial& f) {
  if (f.dim() != params.d) throw std::invalid_argument("expand_in_hermite: dimension mismatch");
  PolynomialFn out;
  out.mono = f;
  out.degree = f.total_degree();
  auto table = detail::hermite1d_table(std::sqrt(params.mu) / params.sigma, out.degree);

  Polynomial rem = f;
  while (!rem.empty()) {
    auto it = std::prev(rem.terms().end());
    const MultiIndex p = it->first;
    const double c = it->second;
    double lead = 1.0;
    for (int i = 0; i < params.d; ++i) lead *= table[p.v[i]].back();
    const double a = c / lead;
    out.hermite_coeffs[p] = a;
    Polynomial hp = detail::hermite_poly(params, table, p);
    hp.set(p, 0.0);  // cancel the leading term exactly
    rem.set(p, 0.0);
    rem -= a * hp;
  }

  out.kappa = INT_MAX;
  for (const auto& [p, a] : out.hermite_coeffs)
    if (std::abs(a) > kKappaThreshold) out.kappa = std::min(out.kappa, p.order());
  return out;
}

inline Polynomial hermite_to_polynomial(const OUParams& params,
                                        const std::map<MultiIndex, double, GradedLess>& coeffs) {
  int nmax = 0;
  for (const auto& [p, a] : coeffs)
    for (int i = 0; i < params.d; ++i) nmax = std::max<int>(nmax, p.v[i]);
  auto table = detail::hermite1d_table(std::sqrt(params.mu) / params.sigma, nmax);
  Polynomial f(params.d);
  for (const auto& [p, a] : coeffs) {
    if (a == 0.0) continue;
    f += a * detail::hermite_poly(params, table, p);
  }
  return f;
}

// T_t^lambda f = e^{lambda t} sum_p a_p e^{-|p| mu t} h_p, exact
inline PolynomialFn semigroup_apply(const OUParams& params, const PolynomialFn& f, double t,
                                    double lambda = 0.0) {
  if (t < 0.0) throw std::invalid_argument("semigroup_apply: t >= 0 required");
  PolynomialFn out;
  for (const auto& [p, a] : f.hermite_coeffs)
    out.hermite_coeffs[p] = a * std::exp((lambda - p.order() * params.mu) * t);
  out.mono = hermite_to_polynomial(params, out.hermite_coeffs);
  out.degree = f.degree;
  out.kappa = f.kappa;
  return out;
}

// L f = (sigma^2/2) Δf - mu (x · ∇f)
inline PolynomialFn generator_apply(const OUParams& params, const PolynomialFn& f) {
  Polynomial g(params.d);
  for (int i = 0; i < params.d; ++i) {
    Polynomial di = f.mono.derivative(i);
    g += (params.sigma * params.sigma / 2.0) * di.derivative(i);
    MultiIndex xi = MultiIndex::zero(params.d);
    xi.v[i] = 1;
    g -= params.mu * (monomial(params.d, xi) * di);
  }
  return expand_in_hermite(params, g);
}

// E_phi[f] by tensor Gauss-Hermite; exact for polynomials of degree < 2*order
template <class F>
  requires std::invocable<F&, const double*>
auto quadrature_expectation(const OUParams& params, F&& f, int order) {
  auto guarded = [&](const double* x) {
    auto v = f(x);
    if constexpr (std::is_same_v<decltype(v), std::complex<double>>) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw std::runtime_error("quadrature_expectation: non-finite integrand value");
    } else {
      if (!std::isfinite(v)) throw std::runtime_error("quadrature_expectation: non-finite integrand value");
    }
    return v;
  };
  return expect_isotropic_gaussian(guarded, params.d, params.stationary_sd(), order);
}

inline double quadrature_expectation(const OUParams& params, const PolynomialFn& f, int order) {
  const CompiledPoly cp(f.mono);
  return quadrature_expectation(params, [&](const double* x) { return cp.eval(x); }, order);
}

// the basis function h_p as a PolynomialFn
inline PolynomialFn hermite_fn(const OUParams& params, const MultiIndex& p) {
  if (p.d != params.d) throw std::invalid_argument("hermite_fn: dimension mismatch");
  PolynomialFn out;
  out.hermite_coeffs[p] = 1.0;
  out.mono = hermite_to_polynomial(params, out.hermite_coeffs);
  out.kappa = p.order();
  out.degree = p.order();
  return out;
}

// kappa-level part of f: sum_{|p| = level} a_p h_p
inline PolynomialFn extract_level(const OUParams& params, const PolynomialFn& f, int level) {
  PolynomialFn out;
  for (const auto& [p, a] : f.hermite_coeffs)
    if (p.order() == level && std::abs(a) > kKappaThreshold) out.hermite_coeffs[p] = a;
  out.mono = hermite_to_polynomial(params, out.hermite_coeffs);
  out.degree = out.mono.total_degree();
  out.kappa = out.hermite_coeffs.empty() ? INT_MAX : level;
  return out;
}

}  // namespace bou
