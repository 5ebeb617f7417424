#pragma once
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "polynomial.hpp"

namespace bou {

struct QuadRule {
  std::vector<double> x;
  std::vector<double> w;
};

namespace detail {
inline std::mutex& rule_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Gauss-Legendre on [-1,1], Newton iteration on the three-term recurrence
inline const QuadRule& gauss_legendre(int n) {
  static std::map<int, QuadRule> cache;
  std::lock_guard<std::mutex> lock(detail::rule_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1 required");
  QuadRule r;
  r.x.resize(n);
  r.w.resize(n);
  int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    long double z = std::cos(3.14159265358979323846L * (i + 0.75L) / (n + 0.5L));
    long double pp = 0.0L;
    for (int it2 = 0; it2 < 100; ++it2) {
      long double p1 = 1.0L, p2 = 0.0L;
      for (int j = 0; j < n; ++j) {
        long double p3 = p2;
        p2 = p1;
        p1 = ((2.0L * j + 1.0L) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0L);
      long double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-19L) break;
    }
    r.x[i] = static_cast<double>(-z);
    r.x[n - 1 - i] = static_cast<double>(z);
    double w = static_cast<double>(2.0L / ((1.0L - z * z) * pp * pp));
    r.w[i] = w;
    r.w[n - 1 - i] = w;
  }
  return cache.emplace(n, std::move(r)).first->second;
}

// Gauss-Hermite with weight e^{-x^2} (physicists'), exact for polynomials of degree < 2n
inline const QuadRule& gauss_hermite(int n) {
  static std::map<int, QuadRule> cache;
  std::lock_guard<std::mutex> lock(detail::rule_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 1) throw std::invalid_argument("gauss_hermite: n >= 1 required");
  QuadRule r;
  r.x.resize(n);
  r.w.resize(n);
  const long double pim4 = 0.7511255444649424828587030047762276930510L;  // pi^{-1/4}
  int m = (n + 1) / 2;
  long double z = 0.0L;
  for (int i = 0; i < m; ++i) {
    if (i == 0)
      z = std::sqrt(2.0L * n + 1.0L) - 1.85575L * std::pow(2.0L * n + 1.0L, -0.16667L);
    else if (i == 1)
      z -= 1.14L * std::pow((long double)n, 0.426L) / z;
    else if (i == 2)
      z = 1.86L * z - 0.86L * (long double)r.x[n - 1];
    else if (i == 3)
      z = 1.91L * z - 0.91L * (long double)r.x[n - 2];
    else
      z = 2.0L * z - (long double)r.x[n - i + 1];
    long double pp = 0.0L;
    for (int it2 = 0; it2 < 100; ++it2) {
      long double p1 = pim4, p2 = 0.0L;
      for (int j = 1; j <= n; ++j) {
        long double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0L / j) * p2 - std::sqrt((j - 1.0L) / j) * p3;
      }
      pp = std::sqrt(2.0L * n) * p2;
      long double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-19L) break;
    }
    r.x[n - 1 - i] = static_cast<double>(z);
    r.x[i] = static_cast<double>(-z);
    double w = static_cast<double>(2.0L / (pp * pp));
    r.w[n - 1 - i] = w;
    r.w[i] = w;
  }
  return cache.emplace(n, std::move(r)).first->second;
}

// E[f(X)] for X ~ N(0, s^2 Id) in d dimensions by tensor Gauss-Hermite
template <class F>
auto expect_isotropic_gaussian(F&& f, int d, double s, int order) {
  const QuadRule& r = gauss_hermite(order);
  const double c = s * std::sqrt(2.0);
  const double norm = std::pow(3.14159265358979323846, -0.5 * d);
  using R = decltype(f(static_cast<const double*>(nullptr)));
  R acc{};
  double x[3] = {0, 0, 0};
  int n = order;
  int n1 = d >= 2 ? n : 1, n2 = d >= 3 ? n : 1;
  for (int i = 0; i < n; ++i) {
    x[0] = c * r.x[i];
    for (int j = 0; j < n1; ++j) {
      if (d >= 2) x[1] = c * r.x[j];
      for (int k = 0; k < n2; ++k) {
        if (d >= 3) x[2] = c * r.x[k];
        double w = r.w[i] * (d >= 2 ? r.w[j] : 1.0) * (d >= 3 ? r.w[k] : 1.0);
        acc += w * f(static_cast<const double*>(x));
      }
    }
  }
  return acc * norm;
}

// panel edges for a 1-d Gaussian-weight integral with integrand kinks:
// base edges at mean + {0,±1,±2,±3,±4,±6,±8,±12}·sd, each kink inserted with
// geometrically graded edges kink ± 1e-4·sd·4^j
inline std::vector<double> panel_edges(double mean, double sd, const std::vector<double>& kinks) {
  const double lo = mean - 12.0 * sd, hi = mean + 12.0 * sd;
  std::vector<double> e;
  for (double off : {-12.0, -8.0, -6.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0})
    e.push_back(mean + off * sd);
  for (double k : kinks) {
    if (k <= lo || k >= hi) continue;
    e.push_back(k);
    for (double w = 1e-4 * sd; w < 8.0 * sd; w *= 4.0) {
      if (k - w > lo) e.push_back(k - w);
      if (k + w < hi) e.push_back(k + w);
    }
  }
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end(),
                      [sd](double a, double b) { return std::abs(a - b) <= 1e-14 * sd; }),
          e.end());
  return e;
}

// materialized nodes/weights for E[f(Y)], Y ~ N(mean, sd^2): E[f] ≈ Σ w_i f(x_i)
inline QuadRule gaussian_nodes_1d(double mean, double sd, const std::vector<double>& kinks,
                                  int nodes_per_panel) {
  QuadRule out;
  if (!(sd > 0.0)) {
    out.x = {mean};
    out.w = {1.0};
    return out;
  }
  const QuadRule& r = gauss_legendre(nodes_per_panel);
  const std::vector<double> e = panel_edges(mean, sd, kinks);
  const double inv = 1.0 / (sd * 2.50662827463100050241576528481);  // sd*sqrt(2π)
  for (std::size_t p = 0; p + 1 < e.size(); ++p) {
    const double h = 0.5 * (e[p + 1] - e[p]), c = 0.5 * (e[p + 1] + e[p]);
    for (int i = 0; i < nodes_per_panel; ++i) {
      const double y = c + h * r.x[i];
      const double u = (y - mean) / sd;
      out.x.push_back(y);
      out.w.push_back(h * r.w[i] * std::exp(-0.5 * u * u) * inv);
    }
  }
  return out;
}

// integral of f(y)·N(y; mean, sd^2) dy; f may return double or complex<double>
template <class F>
auto expect_gaussian_1d(F&& f, double mean, double sd, const std::vector<double>& kinks,
                        int nodes_per_panel) {
  using R = decltype(f(0.0));
  if (!(sd > 0.0)) return static_cast<R>(f(mean));
  const QuadRule& r = gauss_legendre(nodes_per_panel);
  const std::vector<double> e = panel_edges(mean, sd, kinks);
  const double inv = 1.0 / (sd * 2.50662827463100050241576528481);  // sd*sqrt(2π)
  R acc{};
  for (std::size_t p = 0; p + 1 < e.size(); ++p) {
    const double h = 0.5 * (e[p + 1] - e[p]), c = 0.5 * (e[p + 1] + e[p]);
    R panel{};
    for (int i = 0; i < nodes_per_panel; ++i) {
      double y = c + h * r.x[i];
      double u = (y - mean) / sd;
      panel += (r.w[i] * std::exp(-0.5 * u * u) * inv) * f(y);
    }
    acc += h * panel;
  }
  return acc;
}

// sign-change roots of a dense 1-d polynomial on [lo,hi] (bisection after a grid scan)
inline std::vector<double> sign_change_roots(const std::vector<double>& c, double lo, double hi,
                                             int grid = 2048) {
  std::vector<double> roots;
  if (c.size() < 2 || !(hi > lo)) return roots;
  double prev_x = lo, prev_v = horner(c, lo);
  for (int i = 1; i <= grid; ++i) {
    double x = lo + (hi - lo) * i / grid;
    double v = horner(c, x);
    if (prev_v == 0.0) {
      roots.push_back(prev_x);
    } else if (v != 0.0 && std::signbit(v) != std::signbit(prev_v)) {
      double a = prev_x, b = x, va = prev_v;
      for (int it = 0; it < 90; ++it) {
        double mid = 0.5 * (a + b), vm = horner(c, mid);
        if (vm == 0.0) {
          a = b = mid;
          break;
        }
        if (std::signbit(vm) == std::signbit(va)) {
          a = mid;
          va = vm;
        } else {
          b = mid;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    prev_x = x;
    prev_v = v;
  }
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [&](double a, double b) { return std::abs(a - b) <= 1e-13 * (hi - lo); }),
              roots.end());
  return roots;
}

}  // namespace bou
