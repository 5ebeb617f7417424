#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace bou {

// offspring law with pgf F(s) = ms - (m-1) + (m-1)(1-s)^{1+beta}:
//   p_0 = 0, p_1 = m - (1+beta)(m-1), p_n = (m-1)(-1)^n binom(1+beta, n) for n >= 2,
// tail p_n ~ tail_constant · n^{-(2+beta)}
struct OffspringLaw {
  double m = 0;
  double beta = 0;
  double a = 0;
  double lambda = 0;  // a(m-1)
  int truncation_N = 0;
  std::vector<double> pmf_table;  // p_0..p_N
  std::vector<double> cum;        // cumulative, cum[N] = 1 - tail mass
  double tail_constant = 0;

  // survival past j: sum_{n>j} p_n = (m-1)·beta·Γ(j-beta) / (Γ(1-beta)·Γ(j+1)), exact
  double tail_mass(std::int64_t j) const {
    return (m - 1.0) * beta *
           std::exp(std::lgamma(static_cast<double>(j) - beta) -
                    std::lgamma(static_cast<double>(j) + 1.0)) /
           std::tgamma(1.0 - beta);
  }

  // sum_{n>j} n·p_n = (m-1)(1+beta)·Γ(j-beta) / (Γ(1-beta)·Γ(j)), exact
  double tail_mean(std::int64_t j) const {
    return (m - 1.0) * (1.0 + beta) *
           std::exp(std::lgamma(static_cast<double>(j) - beta) -
                    std::lgamma(static_cast<double>(j))) /
           std::tgamma(1.0 - beta);
  }
};

inline OffspringLaw build_offspring_law(double m, double beta, double a, int truncation_N) {
  if (!(beta > 0.0) || !(beta < 1.0)) throw std::invalid_argument("offspring: beta must lie in (0,1)");
  if (!(m > 1.0)) throw std::invalid_argument("offspring: m must exceed 1 (supercritical)");
  if (m > (1.0 + beta) / beta + 1e-12)
    throw std::invalid_argument("offspring: m > (1+beta)/beta makes p_1 negative, F is not a pgf");
  if (!(a > 0.0)) throw std::invalid_argument("offspring: branching intensity a must be positive");
  if (truncation_N < 2) throw std::invalid_argument("offspring: truncation_N >= 2 required");

  OffspringLaw law;
  law.m = m;
  law.beta = beta;
  law.a = a;
  law.lambda = a * (m - 1.0);
  law.truncation_N = truncation_N;
  law.tail_constant = (m - 1.0) / std::tgamma(-(1.0 + beta));

  law.pmf_table.assign(truncation_N + 1, 0.0);
  law.pmf_table[1] = std::max(0.0, m - (1.0 + beta) * (m - 1.0));
  law.pmf_table[2] = (m - 1.0) * (1.0 + beta) * beta / 2.0;
  for (int n = 2; n < truncation_N; ++n)
    law.pmf_table[n + 1] = law.pmf_table[n] * (n - 1.0 - beta) / (n + 1.0);

  law.cum.assign(truncation_N + 1, 0.0);
  double run = 0.0;
  for (int n = 0; n <= truncation_N; ++n) {
    run += law.pmf_table[n];
    law.cum[n] = run;
  }

  double tail = law.tail_mass(truncation_N);
  if (std::abs(1.0 - run - tail) > 1e-12)
    throw std::runtime_error("offspring: table + analytic tail does not sum to 1");
  double mean = 0.0;
  for (int n = 1; n <= truncation_N; ++n) mean += n * law.pmf_table[n];
  if (std::abs(mean + law.tail_mean(truncation_N) - m) > 1e-9)
    throw std::runtime_error("offspring: table + analytic tail mean does not equal m");
  return law;
}

inline double evaluate_pgf(const OffspringLaw& law, double s) {
  if (s < 0.0 || s > 1.0) throw std::invalid_argument("pgf argument outside [0,1]");
  return law.m * s - (law.m - 1.0) + (law.m - 1.0) * std::pow(1.0 - s, 1.0 + law.beta);
}

// inverse CDF over the table, analytic survival inversion past truncation_N
inline std::int64_t sample_offspring(const OffspringLaw& law, Stream& rng) {
  double u = rng.uniform();
  const int N = law.truncation_N;
  if (u < law.cum[N]) {
    auto it = std::upper_bound(law.cum.begin(), law.cum.end(), u);
    return it - law.cum.begin();
  }
  // conditional tail: smallest j > N with survival(j) < w
  double tauN = law.tail_mass(N);
  double w = (1.0 - u) * (tauN / (1.0 - law.cum[N]));
  if (!(w > 0.0)) w = tauN * 1e-17;
  std::int64_t lo = N;  // tail_mass(lo) >= w
  auto guess = static_cast<std::int64_t>(
      static_cast<double>(N) * std::pow(tauN / w, 1.0 / (1.0 + law.beta)));
  std::int64_t hi = std::max<std::int64_t>(guess, N + 1);
  while (law.tail_mass(hi) >= w) {
    lo = hi;
    hi *= 2;
  }
  while (law.tail_mass(hi / 2) < w && hi / 2 > N) hi /= 2;
  if (hi / 2 > lo) lo = hi / 2;
  while (hi - lo > 1) {
    std::int64_t mid = lo + (hi - lo) / 2;
    if (law.tail_mass(mid) >= w)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

inline void write_pmf_csv(const OffspringLaw& law, std::ostream& os) {
  os << "n,p_n\n";
  char buf[64];
  for (int n = 0; n <= law.truncation_N; ++n) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g\n", n, law.pmf_table[n]);
    os << buf;
  }
}

}  // namespace bou
