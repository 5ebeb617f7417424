#pragma once
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "io.hpp"
#include "offspring.hpp"
#include "ou_hermite.hpp"
#include "simulator.hpp"
#include "stable_limits.hpp"
#include "verify.hpp"

namespace bou {

// exit codes: 0 ok, 2 config error, 3 abort rate above ceiling, 4 verification failure
enum ExitCode : int { kOk = 0, kConfigError = 2, kAbortRate = 3, kVerifyFailed = 4 };

struct VerifyFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cli_detail {

inline OffspringLaw offspring_from(const Config& c) {
  return build_offspring_law(c.num("offspring.m"), c.num("offspring.beta"), c.num("offspring.a"),
                             static_cast<std::int64_t>(c.integer_or("offspring.truncation_N", 1024)));
}

inline OUParams ou_from(const Config& c) {
  return make_ou_params(c.num_or("ou.sigma", 1.0), c.num_or("ou.mu", 1.0),
                        static_cast<int>(c.integer_or("ou.d", 1)));
}

inline SimConfig sim_from(const Config& c, const OffspringLaw& law, const OUParams& ou) {
  SimConfig cfg;
  cfg.offspring = law;
  cfg.ou = ou;
  const std::vector<double> x0 = c.num_list_or("sim.x0", std::vector<double>(ou.d, 0.0));
  if (static_cast<int>(x0.size()) != ou.d)
    throw ConfigError("sim.x0 must have ou.d components");
  for (int i = 0; i < ou.d; ++i) cfg.x0[i] = x0[i];
  cfg.horizon_T = static_cast<int>(c.integer("sim.horizon_T"));
  cfg.max_particles = static_cast<std::size_t>(c.uint64_or("sim.max_particles", std::size_t{1} << 22));
  cfg.seed = c.uint64_or("sim.seed", 1);
  cfg.replicates = static_cast<std::size_t>(c.uint64_or("sim.replicates", 1));
  cfg.refine = static_cast<int>(c.integer_or("sim.refine", 1));
  try {
    validate_config(cfg);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline PolynomialFn test_function_from(const Config& c, const OUParams& ou) {
  Polynomial f = c.polynomial("test_function", ou.d);
  if (f.empty()) throw ConfigError("test_function is the zero polynomial");
  return expand_in_hermite(ou, f);
}

inline QuadOptions quad_from(const Config& c) {
  QuadOptions q;
  q.quad_s = static_cast<int>(c.integer_or("quad.s", q.quad_s));
  q.quad_x_order = static_cast<int>(c.integer_or("quad.x_order", q.quad_x_order));
  q.nodes_per_panel = static_cast<int>(c.integer_or("quad.panel_nodes", q.nodes_per_panel));
  q.cross_check = c.flag_or("quad.cross_check", q.cross_check);
  return q;
}

inline std::filesystem::path output_dir_from(const Config& c) {
  const char* env = std::getenv("BOU_OUTPUT_DIR");
  const std::string dir = env != nullptr ? std::string(env) : c.str_or("output_dir", "out");
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

inline std::vector<int> integer_times(const Config& c, const std::string& key,
                                      const std::vector<double>& fallback) {
  const std::vector<double> vals = c.num_list_or(key, fallback);
  std::vector<int> out;
  for (double v : vals) {
    const int t = static_cast<int>(std::lround(v));
    if (std::abs(v - t) > 1e-9 || t < 0) throw ConfigError(key + " must list non-negative integers");
    out.push_back(t);
  }
  return out;
}

inline unsigned threads_from(const Config& c) {
  const long long n = c.integer_or("threads", 0);
  if (n < 0) throw ConfigError("threads must be non-negative");
  if (n > 0) return static_cast<unsigned>(n);
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

inline int check_abort_rate(const Config& c, const RunSet& rs, std::string& note) {
  const double ceiling = c.num_or("abort_ceiling", 0.01);
  if (rs.abort_rate() > ceiling) {
    note = "abort rate " + format_full(rs.abort_rate()) + " exceeds ceiling " + format_full(ceiling);
    return kAbortRate;
  }
  return kOk;
}

struct CheckList {
  std::vector<std::string> passed;
  std::vector<std::string> failed;
  void check(bool ok, const std::string& what) { (ok ? passed : failed).push_back(what); }
  bool all_ok() const { return failed.empty(); }
  ordered_json json() const {
    return ordered_json{{"passed", passed}, {"failed", failed}, {"ok", all_ok()}};
  }
  std::string text() const {
    std::string s;
    for (const auto& p : passed) s += "PASS " + p + "\n";
    for (const auto& f : failed) s += "FAIL " + f + "\n";
    return s;
  }
};

// --- simulate --------------------------------------------------------------------------

inline int mode_simulate(const Config& c, const std::filesystem::path& out) {
  const OffspringLaw law = offspring_from(c);
  const OUParams ou = ou_from(c);
  const SimConfig sim = sim_from(c, law, ou);
  write_json_file(out / "manifest.json", make_manifest("simulate", c, sim.seed, sim.replicates));

  std::vector<FunctionalSpec> funcs;
  if (c.has("test_function")) funcs.push_back({"g", test_function_from(c, ou)});
  const RunSet rs = run_replicates(sim, funcs, threads_from(c));

  std::vector<std::string> header = {"replicate", "t", "population", "W"};
  if (!funcs.empty()) header.push_back("g");
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < rs.rows.size(); ++r) {
    if (rs.rows[r].aborted) continue;
    for (int j = 0; j < sim.n_grid(); ++j) {
      const double t = sim.grid_time(j);
      std::vector<double> row = {static_cast<double>(r), t,
                                 static_cast<double>(rs.rows[r].population[j]),
                                 rs.rows[r].population[j] * std::exp(-law.lambda * t)};
      if (!funcs.empty()) row.push_back(rs.rows[r].values[0][j]);
      rows.push_back(std::move(row));
    }
  }
  write_csv_file(out / "runs.csv", header, rows);

  const int jT = sim.n_grid() - 1;
  std::vector<double> W_T;
  for (const auto& row : rs.rows)
    if (!row.aborted)
      W_T.push_back(row.population[jT] * std::exp(-law.lambda * sim.horizon_T));
  ordered_json summary{{"replicates", rs.rows.size()},
                       {"aborted", rs.aborted_count},
                       {"abort_rate", rs.abort_rate()}};
  if (!W_T.empty()) {
    summary["mean_W_T"] = mean_of(W_T);
    summary["se_W_T"] = W_T.size() > 1 ? se_of_mean(W_T) : 0.0;
  }
  write_json_file(out / "summary.json", summary);
  write_text_file(out / "summary.txt",
                  "simulate: " + std::to_string(rs.rows.size()) + " replicates, " +
                      std::to_string(rs.aborted_count) + " aborted\n");

  std::string note;
  const int rc = check_abort_rate(c, rs, note);
  if (rc != kOk) std::cerr << note << "\n";
  return rc;
}

// --- regimes / limits --------------------------------------------------------------------

inline int mode_regimes(const Config& c, const std::filesystem::path& out) {
  const OffspringLaw law = offspring_from(c);
  const OUParams ou = ou_from(c);
  const PolynomialFn g = test_function_from(c, ou);
  write_json_file(out / "manifest.json", make_manifest("regimes", c, c.uint64_or("sim.seed", 1), 0));
  const RegimeReport reg = classify_regime(ou, law.lambda, law.beta, g);
  write_json_file(out / "regimes.json", regime_json(reg));
  char line[128];
  std::snprintf(line, sizeof(line), "regime: %s, threshold %g\n", reg.regime.c_str(), reg.threshold);
  std::cout << line;
  write_text_file(out / "summary.txt", line);
  return kOk;
}

inline int mode_limits(const Config& c, const std::filesystem::path& out) {
  const OffspringLaw law = offspring_from(c);
  const OUParams ou = ou_from(c);
  const PolynomialFn g = test_function_from(c, ou);
  const QuadOptions quad = quad_from(c);
  write_json_file(out / "manifest.json", make_manifest("limits", c, c.uint64_or("sim.seed", 1), 0));

  const RegimeReport reg = classify_regime(ou, law.lambda, law.beta, g);
  StableLimitParams params;
  std::complex<double> cf_param{0.0, 0.0};
  std::string summary;
  if (reg.regime == "small") {
    params = compute_m_series(ou, law.lambda, law.beta, g, quad);
    cf_param = params.m_series;
    summary = "m[g] = " + format_full(params.m_series.real()) + " + " +
              format_full(params.m_series.imag()) + "i (series, K=" + std::to_string(params.K) + ")\n";
  } else {
    params.lambda = law.lambda;
    params.mu = ou.mu;
    params.beta = law.beta;
    params.kappa = g.kappa;
    params.rho = law.lambda * law.beta - g.kappa * ou.mu * (1.0 + law.beta);
    const int table = static_cast<int>(c.integer_or("limits.m_k_table", 10));
    for (int k = 0; k <= table; ++k)
      params.m_k_values.push_back(compute_m_k(ou, law.lambda, law.beta, g, k, quad));
    params.K = table;
    if (reg.regime == "critical") {
      params.m_bar = compute_m_bar(ou, law.lambda, law.beta, g, quad);
      cf_param = params.m_bar;
      summary = "m_bar[g] = " + format_full(params.m_bar.real()) + " + " +
                format_full(params.m_bar.imag()) + "i\n";
    } else {
      summary = "large regime: no CF parameter; m_k table written\n";
    }
  }
  ordered_json j{{"regime", regime_json(reg)}, {"params", stable_params_json(params)}};
  write_json_file(out / "limits.json", j);

  if (c.has("theta_grid") && reg.regime != "large") {
    std::vector<std::vector<double>> rows;
    for (double th : c.num_list("theta_grid")) {
      const std::complex<double> v = limit_cf(cf_param, law.beta, th);
      rows.push_back({th, v.real(), v.imag()});
    }
    write_csv_file(out / "cf_curve.csv", {"theta", "re", "im"}, rows);
  }
  write_text_file(out / "summary.txt", "regime: " + reg.regime + "\n" + summary);
  std::cout << summary;
  return kOk;
}

// --- distributional verification (small / critical) --------------------------------------

inline int mode_verify_distributional(const Config& c, const std::filesystem::path& out,
                                      const std::string& want_regime) {
  const OffspringLaw law = offspring_from(c);
  const OUParams ou = ou_from(c);
  const PolynomialFn g = test_function_from(c, ou);
  const QuadOptions quad = quad_from(c);
  const RegimeReport reg = classify_regime(ou, law.lambda, law.beta, g);
  if (reg.regime != want_regime)
    throw ConfigError("mode requires " + want_regime + "-regime parameters, got " + reg.regime);

  const std::vector<int> t_values = integer_times(c, "verify.t_values", {6.0, 8.0, 10.0});
  const int T = *std::max_element(t_values.begin(), t_values.end());
  Config cc = c;
  if (!c.has("sim.horizon_T")) cc.set("sim.horizon_T", std::to_string(T));
  const SimConfig sim = sim_from(cc, law, ou);
  if (sim.horizon_T < T) throw ConfigError("sim.horizon_T below the largest verify.t_values entry");
  write_json_file(out / "manifest.json", make_manifest("verify-" + want_regime, c, sim.seed, sim.replicates));

  std::vector<double> theta_grid = c.num_list_or(
      "theta_grid", {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0});

  const std::complex<double> m = want_regime == "small"
                                     ? compute_m_series(ou, law.lambda, law.beta, g, quad).m_series
                                     : compute_m_bar(ou, law.lambda, law.beta, g, quad);

  const RunSet rs = run_replicates(sim, {{"g", g}}, threads_from(c));
  std::string note;
  const int rc = check_abort_rate(c, rs, note);

  const std::uint64_t stats_seed = c.uint64_or("stats_seed", 0x5eedu);
  CheckList checks;
  std::vector<double> gaps;
  ordered_json reports = ordered_json::array();
  for (int t : t_values) {
    const ECFReport rep = ecf_test(rs, 0, reg, m, t, theta_grid, stats_seed);
    gaps.push_back(rep.max_abs_gap);
    reports.push_back(ordered_json{{"t", t}, {"report", ecf_json(rep)}});
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < theta_grid.size(); ++k)
      rows.push_back({theta_grid[k], rep.empirical_cf[k].real(), rep.empirical_cf[k].imag(),
                      rep.target_cf[k].real(), rep.target_cf[k].imag(), rep.se[k],
                      std::abs(rep.empirical_cf[k] - rep.target_cf[k])});
    write_csv_file(out / ("ecf_t" + std::to_string(t) + ".csv"),
                   {"theta", "emp_re", "emp_im", "target_re", "target_im", "se", "abs_gap"}, rows);
    if (t == t_values.back())
      checks.check(rep.split_half_max_ratio < 4.0, "split-half stability ratio < 4");
  }
  // critical-regime ECF gaps shrink slowly in t (early unit intervals keep full
  // weight in the limit parameter), so the default terminal tolerance is looser there
  const double gap_tol = c.num_or("verify.gap_tol", reg.regime == "small" ? 0.05 : 0.35);
  for (std::size_t i = 0; i + 1 < gaps.size(); ++i)
    checks.check(gaps[i + 1] <= gaps[i] + 1e-4,
                 "ECF gap non-increasing from t=" + std::to_string(t_values[i]) + " to t=" +
                     std::to_string(t_values[i + 1]));
  checks.check(gaps.back() < gap_tol, "final ECF gap below " + format_full(gap_tol));

  ordered_json vj{{"regime", regime_json(reg)},
                  {"m", complex_json(m)},
                  {"gaps", gaps},
                  {"ecf", reports},
                  {"checks", checks.json()},
                  {"abort_rate", rs.abort_rate()}};
  write_json_file(out / "verify.json", vj);
  write_text_file(out / "summary.txt", "regime: " + reg.regime + "\n" + checks.text());
  std::cout << checks.text();
  if (rc != kOk) {
    std::cerr << note << "\n";
    return rc;
  }
  return checks.all_ok() ? kOk : kVerifyFailed;
}

// --- large-regime verification ------------------------------------------------------------

inline int mode_verify_large(const Config& c, const std::filesystem::path& out) {
  const OffspringLaw law = offspring_from(c);
  const OUParams ou = ou_from(c);
  const PolynomialFn g = test_function_from(c, ou);
  const RegimeReport reg = classify_regime(ou, law.lambda, law.beta, g);
  if (reg.regime != "large") throw ConfigError("verify-large requires large-regime parameters");

  const std::vector<int> t_values = integer_times(c, "verify.t_values", {2, 3, 4, 5, 6, 7, 8});
  const int T = *std::max_element(t_values.begin(), t_values.end());
  Config cc = c;
  if (!c.has("sim.horizon_T")) cc.set("sim.horizon_T", std::to_string(T));
  const SimConfig sim = sim_from(cc, law, ou);
  if (sim.horizon_T < T) throw ConfigError("sim.horizon_T below the largest verify.t_values entry");
  write_json_file(out / "manifest.json", make_manifest("verify-large", c, sim.seed, sim.replicates));

  // record g and every kappa-level basis function
  const PolynomialFn h = extract_level(ou, g, g.kappa);
  std::vector<FunctionalSpec> funcs = {{"g", g}};
  std::vector<std::pair<std::size_t, double>> kappa_parts;
  for (const auto& [p, a] : h.hermite_coeffs) {
    kappa_parts.emplace_back(funcs.size(), a);
    funcs.push_back({"h_" + p.str(), hermite_fn(ou, p)});
  }

  const RunSet rs = run_replicates(sim, funcs, threads_from(c));
  std::string note;
  const int rc = check_abort_rate(c, rs, note);

  std::vector<double> t_grid(t_values.begin(), t_values.end());
  const ScalingReport scal = scaling_exponent(rs, 0, t_grid, reg, c.uint64_or("stats_seed", 0x5eedu));
  const ScalingReport aslim = as_limit_test(rs, 0, kappa_parts, reg, t_grid);

  CheckList checks;
  const double slope_tol = c.num_or("verify.slope_tol", 0.2);
  checks.check(std::abs(scal.slope - scal.theoretical) <= slope_tol,
               "scaling slope within " + format_full(slope_tol) + " of " + format_full(scal.theoretical));
  checks.check(aslim.increment_slope < 0.0, "path increments decay (negative log-slope)");
  const double corr_min = c.num_or("verify.corr_min", 0.9);
  checks.check(aslim.limit_corr >= corr_min,
               "limit correlation with kappa-level martingale >= " + format_full(corr_min));
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    const double exact = std::exp(reg.kappa_g * ou.mu * t_grid[ti]) *
                         semigroup_apply(ou, g, t_grid[ti], 0.0).mono.eval(sim.x0);
    checks.check(std::abs(aslim.mean_Y[ti] - exact) <= 3.0 * aslim.se_Y[ti] + 1e-12,
                 "E Y_t matches the exact mean at t=" + std::to_string(t_values[ti]));
  }

  ordered_json vj{{"regime", regime_json(reg)},
                  {"scaling", scaling_json(scal)},
                  {"as_limit", scaling_json(aslim)},
                  {"checks", checks.json()},
                  {"abort_rate", rs.abort_rate()}};
  write_json_file(out / "verify.json", vj);
  write_text_file(out / "summary.txt", "regime: large\n" + checks.text());
  std::cout << checks.text();
  if (rc != kOk) {
    std::cerr << note << "\n";
    return rc;
  }
  return checks.all_ok() ? kOk : kVerifyFailed;
}

// --- pure Galton-Watson diagnostics --------------------------------------------------------

inline int mode_gw_tail(const Config& c, const std::filesystem::path& out) {
  const OffspringLaw law = offspring_from(c);
  const std::uint64_t seed = c.uint64_or("sim.seed", 1);
  write_json_file(out / "manifest.json",
                  make_manifest("gw-tail", c, seed, static_cast<std::size_t>(c.uint64_or("sim.replicates", 1000000))));

  CheckList checks;

  // sampled offspring tail exponent vs -(1+beta), via dyadic bin counts
  const std::size_t draws = static_cast<std::size_t>(c.uint64_or("gw.tail_draws", 10000000));
  const std::vector<double> thresholds = c.num_list_or("gw.thresholds", {16, 32, 64, 128, 256});
  const TailExponentReport tail = offspring_tail_exponent(law, draws, thresholds, seed);
  std::vector<std::vector<double>> tail_rows;
  for (std::size_t k = 0; k < tail.thresholds.size(); ++k) {
    const auto n = static_cast<std::int64_t>(tail.thresholds[k]);
    tail_rows.push_back({tail.thresholds[k], static_cast<double>(tail.bin_counts[k]),
                         law.tail_mass(n - 1) - law.tail_mass(2 * n - 1)});
  }
  write_csv_file(out / "tail_counts.csv", {"bin_start", "bin_count", "exact_bin_mass"}, tail_rows);
  checks.check(tail.populated >= 3 && std::abs(tail.exponent + (1.0 + law.beta)) <= 0.1,
               "sampled tail exponent within 0.1 of -(1+beta)");

  // small-population probability at t
  const double t = c.num_or("gw.t", 8.0);
  const double threshold = c.num_or("gw.threshold", std::exp(law.lambda * t / 2.0));
  const std::size_t reps = static_cast<std::size_t>(c.uint64_or("sim.replicates", 1000000));
  const SmallPopReport rep = small_population_check(law, t, threshold, reps, seed);
  checks.check(std::abs(rep.log_p - rep.predicted_log_p) <= 1.0,
               "log small-population probability within 1 of the predicted exponent");

  ordered_json j{{"tail_slope", tail.slope},
                 {"tail_exponent", tail.exponent},
                 {"tail_target", -(1.0 + law.beta)},
                 {"small_population", small_pop_json(rep)},
                 {"checks", checks.json()}};
  write_json_file(out / "gw.json", j);
  write_text_file(out / "summary.txt", checks.text());
  std::cout << checks.text();
  return checks.all_ok() ? kOk : kVerifyFailed;
}

}  // namespace cli_detail

inline int cli_run(int argc, const char* const* argv) {
  if (argc < 2 || std::string(argv[1]) == "--help" || std::string(argv[1]) == "-h") {
    std::ostream& os = argc < 2 ? std::cerr : std::cout;
    os << "usage: bou <config-file> [key=value ...]\n"
          "modes (config key 'mode'): simulate | limits | regimes | verify-small |\n"
          "                           verify-critical | verify-large | gw-tail\n"
          "output directory: config key 'output_dir' (env BOU_OUTPUT_DIR overrides)\n";
    return argc < 2 ? kConfigError : kOk;
  }
  try {
    std::vector<std::string> overrides;
    for (int i = 2; i < argc; ++i) overrides.emplace_back(argv[i]);
    const Config cfg = Config::from_file(argv[1], overrides);
    const std::string mode = cfg.str("mode");
    const std::filesystem::path out = cli_detail::output_dir_from(cfg);
    if (mode == "simulate") return cli_detail::mode_simulate(cfg, out);
    if (mode == "regimes") return cli_detail::mode_regimes(cfg, out);
    if (mode == "limits") return cli_detail::mode_limits(cfg, out);
    if (mode == "verify-small") return cli_detail::mode_verify_distributional(cfg, out, "small");
    if (mode == "verify-critical") return cli_detail::mode_verify_distributional(cfg, out, "critical");
    if (mode == "verify-large") return cli_detail::mode_verify_large(cfg, out);
    if (mode == "gw-tail") return cli_detail::mode_gw_tail(cfg, out);
    throw ConfigError("unknown mode: " + mode);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kVerifyFailed;
  }
  return kOk;
}

}  // namespace bou
