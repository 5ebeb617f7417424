#pragma once
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "simulator.hpp"
#include "stable_limits.hpp"

namespace bou {

// --- small statistics helpers ---------------------------------------------------------

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

inline double se_of_mean(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  return std::sqrt(s2 / (static_cast<double>(v.size()) - 1.0) / v.size());
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
  return 0.5 * (v[mid - 1] + hi);
}

inline double pearson_corr(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean_of(a), mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 && sbb == 0.0) return 1.0;  // identical constant vectors
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

// least-squares slope of y on x
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// --- empirical characteristic function test -------------------------------------------

struct ECFReport {
  std::vector<double> theta_grid;
  std::vector<std::complex<double>> empirical_cf;
  std::vector<double> se;  // bootstrap standard error per theta
  std::vector<std::complex<double>> target_cf;
  double max_abs_gap = 0.0;
  std::size_t replicate_count = 0;
  double split_half_max_ratio = 0.0;  // max over theta of |half1-half2| / (2 se)
};

namespace detail {

inline std::vector<std::size_t> usable_rows(const RunSet& runs) {
  std::vector<std::size_t> idx;
  for (std::size_t r = 0; r < runs.rows.size(); ++r)
    if (!runs.rows[r].aborted) idx.push_back(r);
  if (idx.empty()) throw std::runtime_error("all replicates aborted");
  return idx;
}

}  // namespace detail

// Empirical CF of the regime-normalized statistic <X_t,g>/F_t against exp(theta^{1+beta} m).
// F_t = |X_t|^{1/(1+beta)} (small) or (t |X_t|)^{1/(1+beta)} (critical); the large regime
// has no CF target and is rejected.  func_index selects which recorded functional is g.
inline ECFReport ecf_test(const RunSet& runs, std::size_t func_index, const RegimeReport& regime,
                          std::complex<double> m, double t, const std::vector<double>& theta_grid,
                          std::uint64_t stats_seed = 0x5eedu) {
  if (regime.regime == "large")
    throw std::invalid_argument("ecf_test: the large regime has no CF target");
  if (regime.regime == "critical" && !(t > 0.0))
    throw std::invalid_argument("ecf_test: critical normalization needs t > 0");
  const int j = t == 0.0 ? 0 : static_cast<int>(std::lround(t * runs.cfg.refine));
  const double inv_exp = 1.0 / (1.0 + regime.beta);

  const std::vector<std::size_t> idx = detail::usable_rows(runs);
  const std::size_t n = idx.size();
  const std::size_t q = theta_grid.size();

  std::vector<double> stat(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ReplicateRow& row = runs.rows[idx[i]];
    const double pop = static_cast<double>(row.population[j]);
    const double base = regime.regime == "critical" ? t * pop : pop;
    stat[i] = row.values[func_index][j] / std::pow(base, inv_exp);
  }

  // per-replicate phases, row-major, reused by the bootstrap
  std::vector<std::complex<double>> phase(n * q);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < q; ++k)
      phase[i * q + k] = std::complex<double>(std::cos(theta_grid[k] * stat[i]),
                                              std::sin(theta_grid[k] * stat[i]));

  ECFReport rep;
  rep.theta_grid = theta_grid;
  rep.replicate_count = n;
  rep.empirical_cf.assign(q, {0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < q; ++k) rep.empirical_cf[k] += phase[i * q + k];
  for (std::size_t k = 0; k < q; ++k) rep.empirical_cf[k] /= static_cast<double>(n);

  rep.target_cf.resize(q);
  rep.max_abs_gap = 0.0;
  // The simulated limit carries the conjugate branch of m (see subsystem_cf_check);
  // identical to limit_cf(m, .) whenever Im m = 0.
  for (std::size_t k = 0; k < q; ++k) {
    rep.target_cf[k] = limit_cf(std::conj(m), regime.beta, theta_grid[k]);
    rep.max_abs_gap = std::max(rep.max_abs_gap, std::abs(rep.empirical_cf[k] - rep.target_cf[k]));
  }

  // bootstrap SE (200 draws, independent stats stream)
  const int B = 200;
  Stream boot(derive_stream(stats_seed, 0xb007u));
  std::vector<std::complex<double>> bsum(q);
  std::vector<double> re1(q, 0.0), re2(q, 0.0), im1(q, 0.0), im2(q, 0.0);
  for (int b = 0; b < B; ++b) {
    std::fill(bsum.begin(), bsum.end(), std::complex<double>{0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t pick = static_cast<std::size_t>(boot.uniform() * n);
      for (std::size_t k = 0; k < q; ++k) bsum[k] += phase[pick * q + k];
    }
    for (std::size_t k = 0; k < q; ++k) {
      const std::complex<double> est = bsum[k] / static_cast<double>(n);
      re1[k] += est.real();
      re2[k] += est.real() * est.real();
      im1[k] += est.imag();
      im2[k] += est.imag() * est.imag();
    }
  }
  rep.se.resize(q);
  for (std::size_t k = 0; k < q; ++k) {
    const double vr = std::max(0.0, re2[k] / B - (re1[k] / B) * (re1[k] / B));
    const double vi = std::max(0.0, im2[k] / B - (im1[k] / B) * (im1[k] / B));
    rep.se[k] = std::sqrt(vr + vi);
  }

  // split halves
  const std::size_t h = n / 2;
  rep.split_half_max_ratio = 0.0;
  for (std::size_t k = 0; k < q; ++k) {
    std::complex<double> s1{0.0, 0.0}, s2{0.0, 0.0};
    for (std::size_t i = 0; i < h; ++i) s1 += phase[i * q + k];
    for (std::size_t i = h; i < n; ++i) s2 += phase[i * q + k];
    s1 /= static_cast<double>(h);
    s2 /= static_cast<double>(n - h);
    if (rep.se[k] > 0.0)
      rep.split_half_max_ratio =
          std::max(rep.split_half_max_ratio, std::abs(s1 - s2) / (2.0 * rep.se[k]));
  }
  return rep;
}

// --- growth-exponent and almost-sure-limit diagnostics --------------------------------

struct ScalingReport {
  std::vector<double> t_grid;
  std::vector<double> scale;  // median |value| per t
  double slope = 0.0;         // fitted log-scale growth exponent
  double slope_lo = 0.0, slope_hi = 0.0;
  double theoretical = 0.0;
  std::vector<double> mean_Y, se_Y;      // per t (as_limit_test)
  std::vector<double> increment_median;  // median |Y_{t+1} - Y_t| (as_limit_test)
  double increment_slope = 0.0;
  double limit_corr = 0.0;
};

// robust growth exponent: median |<X_t,g>| fitted against t, bootstrap percentile band
inline ScalingReport scaling_exponent(const RunSet& runs, std::size_t func_index,
                                      const std::vector<double>& t_grid,
                                      const RegimeReport& regime,
                                      std::uint64_t stats_seed = 0x5eedu) {
  const std::vector<std::size_t> idx = detail::usable_rows(runs);
  const std::size_t n = idx.size();
  ScalingReport rep;
  rep.t_grid = t_grid;
  if (regime.regime == "small" || regime.regime == "critical")
    rep.theoretical = regime.lambda / (1.0 + regime.beta);
  else
    rep.theoretical = regime.lambda - regime.kappa_g * regime.mu;

  std::vector<std::vector<double>> abs_vals(t_grid.size(), std::vector<double>(n));
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    const int j = static_cast<int>(std::lround(t_grid[ti] * runs.cfg.refine));
    for (std::size_t i = 0; i < n; ++i)
      abs_vals[ti][i] = std::abs(runs.rows[idx[i]].values[func_index][j]);
  }
  std::vector<double> logs(t_grid.size());
  rep.scale.resize(t_grid.size());
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    rep.scale[ti] = median_of(abs_vals[ti]);
    logs[ti] = std::log(rep.scale[ti]);
  }
  rep.slope = fit_slope(t_grid, logs);

  const int B = 200;
  Stream boot(derive_stream(stats_seed, 0x5c41eu));
  std::vector<double> slopes(B);
  std::vector<double> sample(n), blogs(t_grid.size());
  for (int b = 0; b < B; ++b) {
    std::vector<std::size_t> picks(n);
    for (std::size_t i = 0; i < n; ++i) picks[i] = static_cast<std::size_t>(boot.uniform() * n);
    for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
      for (std::size_t i = 0; i < n; ++i) sample[i] = abs_vals[ti][picks[i]];
      blogs[ti] = std::log(median_of(sample));
    }
    slopes[b] = fit_slope(t_grid, blogs);
  }
  std::sort(slopes.begin(), slopes.end());
  rep.slope_lo = slopes[static_cast<std::size_t>(0.025 * B)];
  rep.slope_hi = slopes[static_cast<std::size_t>(0.975 * B) - 1];
  return rep;
}

// large-regime almost-sure limit: Y_t = <X_t,g> e^{-(lambda-kappa mu)t} path increments
// must decay, and Y at the last time must correlate with the kappa-level martingale
// combination sum_p a_p <X_t,h_p> e^{-(lambda-kappa mu)t}.
// kappa_parts maps functional indices of h_p recordings to their coefficients a_p.
inline ScalingReport as_limit_test(const RunSet& runs, std::size_t g_index,
                                   const std::vector<std::pair<std::size_t, double>>& kappa_parts,
                                   const RegimeReport& regime, const std::vector<double>& t_grid) {
  if (regime.regime != "large")
    throw std::invalid_argument("as_limit_test: requires the large regime");
  const std::vector<std::size_t> idx = detail::usable_rows(runs);
  const std::size_t n = idx.size();
  const double rate = regime.lambda - regime.kappa_g * regime.mu;

  ScalingReport rep;
  rep.t_grid = t_grid;
  rep.theoretical = rate;

  std::vector<std::vector<double>> Y(t_grid.size(), std::vector<double>(n));
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    const int j = static_cast<int>(std::lround(t_grid[ti] * runs.cfg.refine));
    const double norm = std::exp(-rate * t_grid[ti]);
    for (std::size_t i = 0; i < n; ++i)
      Y[ti][i] = runs.rows[idx[i]].values[g_index][j] * norm;
  }

  rep.mean_Y.resize(t_grid.size());
  rep.se_Y.resize(t_grid.size());
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    rep.mean_Y[ti] = mean_of(Y[ti]);
    rep.se_Y[ti] = se_of_mean(Y[ti]);
  }

  std::vector<double> mid_t;
  for (std::size_t ti = 0; ti + 1 < t_grid.size(); ++ti) {
    std::vector<double> inc(n);
    for (std::size_t i = 0; i < n; ++i) inc[i] = std::abs(Y[ti + 1][i] - Y[ti][i]);
    rep.increment_median.push_back(median_of(inc));
    mid_t.push_back(t_grid[ti]);
  }
  if (mid_t.size() >= 2) {
    std::vector<double> li(rep.increment_median.size());
    for (std::size_t k = 0; k < li.size(); ++k) li[k] = std::log(rep.increment_median[k]);
    rep.increment_slope = fit_slope(mid_t, li);
  }

  const std::size_t last = t_grid.size() - 1;
  const int jl = static_cast<int>(std::lround(t_grid[last] * runs.cfg.refine));
  const double norm = std::exp(-rate * t_grid[last]);
  std::vector<double> target(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [fi, a] : kappa_parts)
      target[i] += a * runs.rows[idx[i]].values[fi][jl] * norm;
  rep.limit_corr = pearson_corr(Y[last], target);
  return rep;
}

// --- single-subsystem CF expansion -----------------------------------------------------

// MC estimate of E exp(i theta (<X_1^x,g> - T_1^lambda g(x))) against the first-order
// expansion 1 + theta^{1+beta} Z_g(x); returns the absolute gap
inline double subsystem_cf_check(const OffspringLaw& law, const OUParams& ou,
                                 const PolynomialFn& g, const double* x, double theta,
                                 std::size_t replicates, std::uint64_t seed,
                                 const QuadOptions& opts = {}) {
  const double lambda = law.lambda;
  SimConfig cfg;
  cfg.offspring = law;
  cfg.ou = ou;
  for (int i = 0; i < ou.d; ++i) cfg.x0[i] = x[i];
  cfg.horizon_T = 1;
  cfg.seed = seed;
  cfg.replicates = replicates;
  validate_config(cfg);

  const double center = semigroup_apply(ou, g, 1.0, lambda).mono.eval(x);
  const CompiledPoly cp(g.mono);

  std::complex<double> acc{0.0, 0.0};
  for (std::size_t r = 0; r < replicates; ++r) {
    double v = 0.0;
    simulate_replicate(cfg, r, [&](int j, const double* y) {
      if (j == cfg.refine) v += cp.eval(y);
    });
    const double dphase = theta * (v - center);
    acc += std::complex<double>(std::cos(dphase), std::sin(dphase));
  }
  acc /= static_cast<double>(replicates);

  std::complex<double> predicted{1.0, 0.0};
  // The first-order term of E exp(i theta (<X_1,g> - T_1 g)) carries the (-i theta T_s g)
  // branch of z^{1+beta}; for real-valued semigroup orbits that is the conjugate of the
  // (+i) branch used by compute_Z.  conj is a no-op whenever Z(x) is real.
  if (theta != 0.0 && !g.is_zero())
    predicted += std::pow(theta, 1.0 + law.beta) *
                 std::conj(compute_Z(ou, lambda, law.beta, g, x, opts));
  return std::abs(acc - predicted);
}

// --- pure Galton-Watson small-population probability -----------------------------------

struct SmallPopReport {
  double t = 0.0;
  double threshold = 0.0;
  std::size_t replicates = 0;
  std::size_t hits = 0;
  bool zero_hits = false;
  double p_hat = 0.0;   // point estimate, or 3/n upper confidence bound on zero hits
  double log_p = 0.0;
  double predicted_log_p = 0.0;  // (ln f(t) - lambda t)/(m - 1)
};

inline SmallPopReport small_population_check(const OffspringLaw& law, double t, double threshold,
                                             std::size_t replicates, std::uint64_t seed) {
  if (threshold < 1.0) throw std::invalid_argument("small_population_check: threshold below 1 is never hit");
  SmallPopReport rep;
  rep.t = t;
  rep.threshold = threshold;
  rep.replicates = replicates;
  const std::size_t cap = static_cast<std::size_t>(threshold);
  for (std::size_t r = 0; r < replicates; ++r) {
    const std::size_t pop = gw_population_at(law, t, replicate_stream(seed, r), cap);
    if (pop <= cap) ++rep.hits;
  }
  if (rep.hits == 0) {
    rep.zero_hits = true;
    rep.p_hat = 3.0 / static_cast<double>(replicates);  // rule-of-three upper bound
  } else {
    rep.p_hat = static_cast<double>(rep.hits) / static_cast<double>(replicates);
  }
  rep.log_p = std::log(rep.p_hat);
  rep.predicted_log_p = (std::log(threshold) - law.lambda * t) / (law.m - 1.0);
  return rep;
}

// --- sampled offspring tail exponent ----------------------------------------------------

struct TailExponentReport {
  std::vector<double> thresholds;          // dyadic bin left edges
  std::vector<std::size_t> bin_counts;     // samples with value in [n, 2n)
  std::size_t draws = 0;
  std::size_t populated = 0;               // bins with at least one sample
  double slope = 0.0;                      // log-log slope of the bin counts
  double exponent = 0.0;                   // tail exponent estimate, ~ -(1+beta)
};

// The pmf decays like n^{-(2+beta)}, so both the survival function and the dyadic bin
// mass P(n <= X < 2n) scale like n^{-(1+beta)}: the fitted bin slope estimates the
// stable-domain tail exponent -(1+beta) directly.
inline TailExponentReport offspring_tail_exponent(const OffspringLaw& law, std::size_t draws,
                                                  std::vector<double> thresholds,
                                                  std::uint64_t seed) {
  if (draws == 0) throw std::invalid_argument("offspring_tail_exponent: draws must be positive");
  if (thresholds.size() < 2)
    throw std::invalid_argument("offspring_tail_exponent: need at least two thresholds");
  TailExponentReport rep;
  rep.thresholds = std::move(thresholds);
  rep.draws = draws;
  rep.bin_counts.assign(rep.thresholds.size(), 0);
  Stream s(derive_stream(seed, 0x7a11u));
  for (std::size_t i = 0; i < draws; ++i) {
    const double n = static_cast<double>(sample_offspring(law, s));
    for (std::size_t k = 0; k < rep.thresholds.size(); ++k)
      if (n >= rep.thresholds[k] && n < 2.0 * rep.thresholds[k]) ++rep.bin_counts[k];
  }
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < rep.thresholds.size(); ++k)
    if (rep.bin_counts[k] > 0) {
      lx.push_back(std::log(rep.thresholds[k]));
      ly.push_back(std::log(static_cast<double>(rep.bin_counts[k])));
    }
  rep.populated = lx.size();
  if (rep.populated >= 2) {
    rep.slope = fit_slope(lx, ly);
    rep.exponent = rep.slope;
  }
  return rep;
}

}  // namespace bou
