#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "bou/ou_hermite.hpp"

using namespace bou;

namespace {

Polynomial random_poly(Stream& s, int dim, int max_deg) {
  Polynomial f(dim);
  // a handful of random monomials plus a constant
  for (int k = 0; k < 6; ++k) {
    MultiIndex p = MultiIndex::zero(dim);
    int budget = max_deg;
    for (int i = 0; i < dim; ++i) {
      const int e = static_cast<int>(s.uniform() * (budget + 1));
      p.v[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(e);
      budget -= e;
    }
    f.add_term(p, 2.0 * s.uniform() - 1.0);
  }
  return f;
}

}  // namespace

TEST_CASE("killed semigroup on a cubic matches the closed form") {
  const OUParams ou = make_ou_params(1.3, 0.7, 1);
  Polynomial f(1);
  f.set(MultiIndex::zero(1), 1.0);
  f.add_term(parse_multi_index("1", 1), -2.0);
  f.add_term(parse_multi_index("3", 1), 1.0);
  const PolynomialFn pf = expand_in_hermite(ou, f);
  const PolynomialFn Tf = semigroup_apply(ou, pf, 1.0, 0.9);
  const std::vector<double> c = dense_coeffs_1d(Tf.mono);
  REQUIRE(c.size() == 4);
  REQUIRE_THAT(c[0], Catch::Matchers::WithinAbs(2.45960311115695, 1e-12));
  REQUIRE_THAT(c[1], Catch::Matchers::WithinAbs(0.889664004734801, 1e-12));
  REQUIRE_THAT(c[2], Catch::Matchers::WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(c[3], Catch::Matchers::WithinAbs(0.301194211912202, 1e-12));
}

TEST_CASE("basis is orthonormal under the stationary Gaussian") {
  const OUParams ou = make_ou_params(1.2, 0.8, 1);
  std::vector<PolynomialFn> h;
  for (int n = 0; n <= 8; ++n) {
    MultiIndex p = MultiIndex::zero(1);
    p.v[0] = static_cast<std::uint16_t>(n);
    h.push_back(hermite_fn(ou, p));
  }
  for (int i = 0; i <= 8; ++i)
    for (int j = i; j <= 8; ++j) {
      PolynomialFn prod;
      prod.mono = h[static_cast<std::size_t>(i)].mono * h[static_cast<std::size_t>(j)].mono;
      const double ip = quadrature_expectation(ou, prod, 64);
      REQUIRE_THAT(ip, Catch::Matchers::WithinAbs(i == j ? 1.0 : 0.0, 1e-10));
    }
}

TEST_CASE("orthonormality holds in two dimensions") {
  const OUParams ou = make_ou_params(0.9, 1.1, 2);
  const std::vector<MultiIndex> ps = {parse_multi_index("0,0", 2), parse_multi_index("1,0", 2),
                                      parse_multi_index("0,1", 2), parse_multi_index("2,1", 2),
                                      parse_multi_index("1,3", 2)};
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t j = i; j < ps.size(); ++j) {
      PolynomialFn prod;
      prod.mono = hermite_fn(ou, ps[i]).mono * hermite_fn(ou, ps[j]).mono;
      const double ip = quadrature_expectation(ou, prod, 32);
      REQUIRE_THAT(ip, Catch::Matchers::WithinAbs(i == j ? 1.0 : 0.0, 1e-10));
    }
}

TEST_CASE("semigroup acts diagonally with exact eigenvalue decay") {
  const OUParams ou = make_ou_params(1.0, 0.6, 1);
  for (int n = 1; n <= 6; ++n) {
    MultiIndex p = MultiIndex::zero(1);
    p.v[0] = static_cast<std::uint16_t>(n);
    const PolynomialFn h = hermite_fn(ou, p);
    const PolynomialFn Th = semigroup_apply(ou, h, 0.7, 0.0);
    // coefficientwise: T_t h_p = e^{-n mu t} h_p
    REQUIRE(Th.hermite_coeffs.size() == 1);
    REQUIRE_THAT(Th.hermite_coeffs.at(p),
                 Catch::Matchers::WithinRel(std::exp(-n * ou.mu * 0.7), 1e-14));
    // pointwise against an independent transition-kernel quadrature
    for (double x : {-1.3, 0.2, 2.4}) {
      const double mean = x * std::exp(-ou.mu * 0.7);
      const QuadRule q = gaussian_nodes_1d(mean, ou.transition_sd(0.7), {}, 24);
      double acc = 0.0;
      for (std::size_t k = 0; k < q.x.size(); ++k) {
        const double y[1] = {q.x[k]};
        acc += q.w[k] * h.mono.eval(y);
      }
      const double xx[1] = {x};
      REQUIRE_THAT(acc, Catch::Matchers::WithinAbs(std::exp(-n * ou.mu * 0.7) * h.mono.eval(xx),
                                                   1e-12));
    }
  }
}

TEST_CASE("semigroup composes: T_s T_t equals T_{s+t}") {
  const OUParams ou = make_ou_params(1.4, 0.5, 1);
  Stream s(808u);
  const Polynomial f = random_poly(s, 1, 5);
  const PolynomialFn pf = expand_in_hermite(ou, f);
  const PolynomialFn once = semigroup_apply(ou, pf, 1.9, 0.3);
  const PolynomialFn twice = semigroup_apply(ou, semigroup_apply(ou, pf, 1.2, 0.3), 0.7, 0.3);
  for (const auto& [p, a] : once.hermite_coeffs)
    REQUIRE_THAT(twice.hermite_coeffs.at(p), Catch::Matchers::WithinAbs(a, 1e-12));
}

TEST_CASE("generator has the Hermite eigenrelation") {
  const OUParams ou = make_ou_params(1.1, 0.9, 1);
  for (int n = 0; n <= 5; ++n) {
    MultiIndex p = MultiIndex::zero(1);
    p.v[0] = static_cast<std::uint16_t>(n);
    const PolynomialFn h = hermite_fn(ou, p);
    const PolynomialFn Lh = generator_apply(ou, h);
    const Polynomial diff = Lh.mono - (-static_cast<double>(n) * ou.mu) * h.mono;
    REQUIRE(diff.max_abs_coeff() <= 1e-10);
  }
}

TEST_CASE("expansion round-trips random polynomials") {
  Stream s(4242u);
  for (int dim = 1; dim <= 3; ++dim) {
    const OUParams ou = make_ou_params(0.8 + 0.3 * dim, 1.3 - 0.2 * dim, dim);
    for (int rep = 0; rep < 10; ++rep) {
      const Polynomial f = random_poly(s, dim, 4);
      const PolynomialFn pf = expand_in_hermite(ou, f);
      const Polynomial back = hermite_to_polynomial(ou, pf.hermite_coeffs);
      const Polynomial diff = back - f;
      REQUIRE(diff.max_abs_coeff() <= 1e-9 * std::max(1.0, f.max_abs_coeff()));
    }
  }
}

TEST_CASE("kappa identifies the lowest active level") {
  const OUParams ou = make_ou_params(std::sqrt(2.0), 1.0, 1);  // h_1(x) = x, stationary N(0,1)
  Polynomial g1(1);
  g1.add_term(parse_multi_index("1", 1), 1.0);
  REQUIRE(expand_in_hermite(ou, g1).kappa == 1);

  Polynomial g0 = g1 + monomial(1, MultiIndex::zero(1), 0.25);
  REQUIRE(expand_in_hermite(ou, g0).kappa == 0);

  // x^2 centered at its stationary mean has kappa = 2
  Polynomial g2(1);
  g2.add_term(parse_multi_index("2", 1), 1.0);
  g2.add_term(MultiIndex::zero(1), -1.0);
  REQUIRE(expand_in_hermite(ou, g2).kappa == 2);

  Polynomial z(1);
  const PolynomialFn zf = expand_in_hermite(ou, z);
  REQUIRE(zf.is_zero());
}

TEST_CASE("differentiation lowers kappa by at most one") {
  Stream s(99u);
  const OUParams ou = make_ou_params(1.0, 1.0, 1);
  int checked = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const Polynomial f = random_poly(s, 1, 6);
    const PolynomialFn pf = expand_in_hermite(ou, f);
    if (pf.is_zero()) continue;
    Polynomial df = f.derivative(0);
    const PolynomialFn pdf = expand_in_hermite(ou, df);
    const int kd = pdf.is_zero() ? pf.kappa : pdf.kappa;  // zero derivative never violates
    REQUIRE(kd >= pf.kappa - 1);
    ++checked;
  }
  REQUIRE(checked >= 40);
}

TEST_CASE("basis evaluation matches the expanded polynomial") {
  const OUParams ou = make_ou_params(1.7, 0.4, 2);
  const MultiIndex p = parse_multi_index("3,2", 2);
  const PolynomialFn h = hermite_fn(ou, p);
  const double pts[3][2] = {{0.3, -1.1}, {2.0, 0.7}, {-0.4, -0.2}};
  for (const auto& x : pts)
    REQUIRE_THAT(hermite_basis_eval(ou, p, x), Catch::Matchers::WithinRel(h.mono.eval(x), 1e-12));
}

TEST_CASE("level extraction keeps only one graded slice") {
  const OUParams ou = make_ou_params(1.0, 1.0, 2);
  Stream s(313u);
  const Polynomial f = random_poly(s, 2, 4);
  const PolynomialFn pf = expand_in_hermite(ou, f);
  const PolynomialFn lvl = extract_level(ou, pf, pf.kappa);
  REQUIRE(!lvl.is_zero());
  for (const auto& [p, a] : lvl.hermite_coeffs) {
    REQUIRE(p.order() == pf.kappa);
    REQUIRE_THAT(a, Catch::Matchers::WithinAbs(pf.hermite_coeffs.at(p), 1e-15));
  }
}
