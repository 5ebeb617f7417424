#pragma once
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "rng.hpp"
#include "stable_limits.hpp"
#include "verify.hpp"
#include "version.hpp"

namespace bou {

using ordered_json = nlohmann::ordered_json;

inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << content;
}

inline void write_json_file(const std::filesystem::path& path, const ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// CSV with full-precision numeric cells
inline void write_csv_file(const std::filesystem::path& path,
                           const std::vector<std::string>& header,
                           const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    out += header[i];
    out += (i + 1 < header.size()) ? ',' : '\n';
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += format_full(row[i]);
      out += (i + 1 < row.size()) ? ',' : '\n';
    }
  }
  write_text_file(path, out);
}

inline ordered_json complex_json(std::complex<double> z) {
  return ordered_json{{"re", z.real()}, {"im", z.imag()}};
}

// per-replicate root stream ids; prefix-stable in the replicate count
inline std::vector<std::uint64_t> seed_plan(std::uint64_t seed, std::size_t replicates) {
  std::vector<std::uint64_t> ids(replicates);
  for (std::size_t r = 0; r < replicates; ++r) ids[r] = replicate_stream(seed, r);
  return ids;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// manifest echoing the resolved config, library version, and the seed plan
// (first 1000 stream ids verbatim plus an order-sensitive digest of all of them);
// the timestamp fields are the only non-reproducible bytes
inline ordered_json make_manifest(const std::string& mode, const Config& cfg,
                                  std::uint64_t seed, std::size_t replicates) {
  ordered_json m;
  m["mode"] = mode;
  m["library_version"] = kVersion;
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  m["timestamp_unix_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  ordered_json conf = ordered_json::object();
  for (const auto& [k, v] : cfg.raw()) conf[k] = v;
  m["config"] = conf;

  const std::vector<std::uint64_t> plan = seed_plan(seed, replicates);
  ordered_json ids = ordered_json::array();
  const std::size_t shown = std::min<std::size_t>(plan.size(), 1000);
  for (std::size_t i = 0; i < shown; ++i) ids.push_back(hex64(plan[i]));
  std::uint64_t digest = 0x243f6a8885a308d3ull;
  for (std::uint64_t id : plan) digest = mix64(digest ^ id);
  m["seed_plan"] = ordered_json{{"replicates", plan.size()},
                                {"stream_ids", ids},
                                {"digest", hex64(digest)}};
  return m;
}

inline ordered_json regime_json(const RegimeReport& r) {
  return ordered_json{{"lambda", r.lambda},
                      {"mu", r.mu},
                      {"beta", r.beta},
                      {"kappa", r.kappa_g},
                      {"threshold", r.threshold},
                      {"regime", r.regime},
                      {"normalization", r.normalization_descriptor}};
}

inline ordered_json stable_params_json(const StableLimitParams& p) {
  ordered_json mk = ordered_json::array();
  for (const auto& v : p.m_k_values) mk.push_back(complex_json(v));
  return ordered_json{{"lambda", p.lambda}, {"mu", p.mu},       {"beta", p.beta},
                      {"kappa", p.kappa},   {"rho", p.rho},     {"K", p.K},
                      {"tail_bound", p.tail_bound},             {"m_k", mk},
                      {"m_series", complex_json(p.m_series)},   {"m_bar", complex_json(p.m_bar)}};
}

inline ordered_json ecf_json(const ECFReport& r) {
  ordered_json rows = ordered_json::array();
  for (std::size_t k = 0; k < r.theta_grid.size(); ++k)
    rows.push_back(ordered_json{{"theta", r.theta_grid[k]},
                                {"empirical", complex_json(r.empirical_cf[k])},
                                {"target", complex_json(r.target_cf[k])},
                                {"se", r.se[k]},
                                {"abs_gap", std::abs(r.empirical_cf[k] - r.target_cf[k])}});
  return ordered_json{{"replicates", r.replicate_count},
                      {"max_abs_gap", r.max_abs_gap},
                      {"split_half_max_ratio", r.split_half_max_ratio},
                      {"grid", rows}};
}

inline ordered_json scaling_json(const ScalingReport& r) {
  ordered_json j;
  j["t_grid"] = r.t_grid;
  j["scale"] = r.scale;
  j["slope"] = r.slope;
  j["slope_ci"] = ordered_json::array({r.slope_lo, r.slope_hi});
  j["theoretical"] = r.theoretical;
  if (!r.mean_Y.empty()) {
    j["mean_Y"] = r.mean_Y;
    j["se_Y"] = r.se_Y;
    j["increment_median"] = r.increment_median;
    j["increment_slope"] = r.increment_slope;
    j["limit_corr"] = r.limit_corr;
  }
  return j;
}

inline ordered_json small_pop_json(const SmallPopReport& r) {
  return ordered_json{{"t", r.t},
                      {"threshold", r.threshold},
                      {"replicates", r.replicates},
                      {"hits", r.hits},
                      {"zero_hits", r.zero_hits},
                      {"p_hat", r.p_hat},
                      {"log_p", r.log_p},
                      {"predicted_log_p", r.predicted_log_p}};
}

}  // namespace bou
