#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "bou/simulator.hpp"

using namespace bou;

namespace {

SimConfig base_config() {
  SimConfig cfg;
  cfg.offspring = build_offspring_law(2.0, 0.5, 1.0, 1024);
  cfg.ou = make_ou_params(std::sqrt(2.0), 1.0, 1);
  cfg.x0[0] = 0.3;
  cfg.horizon_T = 5;
  cfg.seed = 42;
  return cfg;
}

PolynomialFn quadratic(const OUParams& ou) {
  Polynomial g(1);
  g.add_term(parse_multi_index("2", 1), 1.0);
  g.add_term(parse_multi_index("1", 1), -0.7);
  g.add_term(MultiIndex::zero(1), 0.25);
  return expand_in_hermite(ou, g);
}

}  // namespace

TEST_CASE("replicates are reproducible and seed-sensitive") {
  const SimConfig cfg = base_config();
  const SnapshotSet a = run_replicate(cfg, 3);
  const SnapshotSet b = run_replicate(cfg, 3);
  REQUIRE(a.positions == b.positions);
  const SnapshotSet c = run_replicate(cfg, 4);
  REQUIRE(a.positions != c.positions);
}

TEST_CASE("population is non-decreasing and starts at one") {
  // p_0 = 0: nobody dies childless, so |X_t| never shrinks
  const SimConfig cfg = base_config();
  for (int rep = 0; rep < 50; ++rep) {
    const SnapshotSet snaps = run_replicate(cfg, rep);
    REQUIRE(snaps.population(0) == 1);
    for (int j = 1; j < snaps.n_grid(); ++j)
      REQUIRE(snaps.population(j) >= snaps.population(j - 1));
  }
}

TEST_CASE("grid lookup is exact and rejects off-grid times") {
  SimConfig cfg = base_config();
  cfg.refine = 4;
  const SnapshotSet snaps = run_replicate(cfg, 0);
  REQUIRE(snaps.grid_index(0.0) == 0);
  REQUIRE(snaps.grid_index(2.25) == 9);
  REQUIRE(snaps.grid_index(5.0) == 20);
  REQUIRE_THROWS_AS(snaps.grid_index(2.1), std::invalid_argument);
  REQUIRE_THROWS_AS(snaps.grid_index(5.25), std::invalid_argument);
}

TEST_CASE("decomposition telescopes to the recorded functional") {
  const SimConfig cfg = base_config();
  const PolynomialFn g = quadratic(cfg.ou);
  for (int rep = 0; rep < 100; ++rep) {
    const SnapshotSet snaps = run_replicate(cfg, rep);
    const DecompositionTable tab = decompose(snaps, g);
    REQUIRE(tab.t == cfg.horizon_T);
    REQUIRE(static_cast<int>(tab.M.size()) == cfg.horizon_T);
    const double rel = std::abs(tab.sum() - tab.functional_value) /
                       std::max(1.0, std::abs(tab.functional_value));
    REQUIRE(rel < 1e-9);
  }
}

TEST_CASE("population mean grows like e^{lambda t}") {
  SimConfig cfg = base_config();
  cfg.horizon_T = 3;
  const int R = 20000;
  std::vector<double> pop1(R), pop3(R);
  for (int rep = 0; rep < R; ++rep) {
    const SnapshotSet snaps = run_replicate(cfg, rep);
    pop1[static_cast<std::size_t>(rep)] = static_cast<double>(snaps.population(snaps.grid_index(1.0)));
    pop3[static_cast<std::size_t>(rep)] = static_cast<double>(snaps.population(snaps.grid_index(3.0)));
  }
  double m1 = 0, m3 = 0;
  for (int rep = 0; rep < R; ++rep) {
    m1 += pop1[static_cast<std::size_t>(rep)];
    m3 += pop3[static_cast<std::size_t>(rep)];
  }
  m1 /= R;
  m3 /= R;
  double v1 = 0, v3 = 0;
  for (int rep = 0; rep < R; ++rep) {
    v1 += (pop1[static_cast<std::size_t>(rep)] - m1) * (pop1[static_cast<std::size_t>(rep)] - m1);
    v3 += (pop3[static_cast<std::size_t>(rep)] - m3) * (pop3[static_cast<std::size_t>(rep)] - m3);
  }
  REQUIRE(std::abs(m1 - std::exp(1.0)) < 4.0 * std::sqrt(v1 / R / R));
  REQUIRE(std::abs(m3 - std::exp(3.0)) < 4.0 * std::sqrt(v3 / R / R));
}

TEST_CASE("martingale tracks have unit-mean W and exact start") {
  SimConfig cfg = base_config();
  cfg.horizon_T = 3;
  cfg.refine = 8;
  const MultiIndex p1 = parse_multi_index("1", 1);
  const PolynomialFn h = hermite_fn(cfg.ou, p1);
  double sw = 0.0;
  const int R = 20000;
  for (int rep = 0; rep < R; ++rep) {
    const SnapshotSet snaps = run_replicate(cfg, rep);
    const MartingaleTrack tr = track_martingales(snaps, {p1}, h, 1.0);
    REQUIRE(tr.W.front() == 1.0);
    REQUIRE_THAT(tr.H.at(p1).front(),
                 Catch::Matchers::WithinAbs(hermite_basis_eval(cfg.ou, p1, cfg.x0), 1e-12));
    REQUIRE_THAT(tr.M.front(),
                 Catch::Matchers::WithinAbs(hermite_basis_eval(cfg.ou, p1, cfg.x0), 1e-12));
    sw += tr.W.back();
  }
  REQUIRE(std::abs(sw / R - 1.0) < 0.05);
}

TEST_CASE("eigen-martingale needs no compensator") {
  // h_1 with a=1 makes Lh + a mu h = 0, so M and H coincide pathwise
  SimConfig cfg = base_config();
  cfg.horizon_T = 2;
  cfg.refine = 16;
  const MultiIndex p1 = parse_multi_index("1", 1);
  const PolynomialFn h = hermite_fn(cfg.ou, p1);
  for (int rep = 0; rep < 20; ++rep) {
    const SnapshotSet snaps = run_replicate(cfg, rep);
    const MartingaleTrack tr = track_martingales(snaps, {p1}, h, 1.0);
    for (std::size_t j = 0; j < tr.times.size(); ++j)
      REQUIRE_THAT(tr.M[j], Catch::Matchers::WithinAbs(tr.H.at(p1)[j], 1e-9));
  }
}

TEST_CASE("tiny particle cap aborts the replicate") {
  SimConfig cfg = base_config();
  cfg.horizon_T = 6;
  cfg.max_particles = 8;
  bool hit = false;
  for (int rep = 0; rep < 20 && !hit; ++rep) {
    try {
      (void)run_replicate(cfg, rep);
    } catch (const PopulationCapExceeded&) {
      hit = true;
    }
  }
  REQUIRE(hit);
}

TEST_CASE("run_replicates tallies aborted rows without losing the rest") {
  SimConfig cfg = base_config();
  cfg.horizon_T = 6;
  cfg.max_particles = 64;
  cfg.replicates = 200;
  const PolynomialFn g = quadratic(cfg.ou);
  const RunSet rs = run_replicates(cfg, {{"g", g}});
  REQUIRE(rs.rows.size() == 200);
  REQUIRE(rs.aborted_count > 0);
  REQUIRE(rs.abort_rate() > 0.0);
  std::size_t ok = 0;
  for (const auto& row : rs.rows)
    if (!row.aborted) {
      REQUIRE(row.population.size() == static_cast<std::size_t>(cfg.n_grid()));
      REQUIRE(row.values.size() == 1);
      ++ok;
    }
  REQUIRE(ok + rs.aborted_count == 200);
}

TEST_CASE("recorded functional values match a recomputation") {
  SimConfig cfg = base_config();
  cfg.horizon_T = 3;
  cfg.replicates = 5;
  const PolynomialFn g = quadratic(cfg.ou);
  const RunSet rs = run_replicates(cfg, {{"g", g}});
  for (std::size_t rep = 0; rep < 5; ++rep) {
    const SnapshotSet snaps = run_replicate(cfg, rep);
    for (int t = 0; t <= 3; ++t) {
      REQUIRE_THAT(rs.rows[rep].values[0][static_cast<std::size_t>(snaps.grid_index(t))],
                   Catch::Matchers::WithinRel(functional(snaps, g, t), 1e-12));
      REQUIRE(rs.rows[rep].population[static_cast<std::size_t>(snaps.grid_index(t))] ==
              snaps.population(snaps.grid_index(t)));
    }
  }
}

TEST_CASE("pure GW counter agrees with the spatial simulator population") {
  SimConfig cfg = base_config();
  cfg.horizon_T = 4;
  double s_full = 0.0, s_gw = 0.0;
  const int R = 20000;
  for (int rep = 0; rep < R; ++rep) {
    const std::uint64_t id = replicate_stream(cfg.seed, static_cast<std::uint64_t>(rep));
    s_gw += static_cast<double>(gw_population_at(cfg.offspring, 4.0, id, 1u << 20));
    const SnapshotSet snaps = run_replicate(cfg, rep);
    s_full += static_cast<double>(snaps.population(snaps.grid_index(4.0)));
  }
  // both estimate e^{lambda t}; they share lifetimes only in distribution, not pathwise
  REQUIRE(std::abs(s_gw / R - std::exp(4.0)) / std::exp(4.0) < 0.10);
  REQUIRE(std::abs(s_full / R - std::exp(4.0)) / std::exp(4.0) < 0.10);
}

TEST_CASE("GW early stop short-circuits large populations") {
  const OffspringLaw law = build_offspring_law(2.0, 0.5, 1.0, 1024);
  int capped = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::uint64_t id = replicate_stream(9, static_cast<std::uint64_t>(rep));
    const std::size_t n = gw_population_at(law, 8.0, id, 50);
    if (n > 50) {
      REQUIRE(n == 51);  // sentinel: stop_above + 1
      ++capped;
    }
  }
  REQUIRE(capped > 150);  // e^8 ~ 3000, so nearly every path crosses 50
}

TEST_CASE("multidimensional positions are recorded per axis") {
  SimConfig cfg = base_config();
  cfg.ou = make_ou_params(1.0, 0.5, 2);
  cfg.x0[0] = 0.2;
  cfg.x0[1] = -0.4;
  cfg.horizon_T = 2;
  const SnapshotSet snaps = run_replicate(cfg, 1);
  REQUIRE(snaps.positions[0].size() == 2);
  REQUIRE(snaps.positions[0][0] == 0.2);
  REQUIRE(snaps.positions[0][1] == -0.4);
  const std::size_t n_final = snaps.population(snaps.n_grid() - 1);
  REQUIRE(snaps.positions.back().size() == 2 * n_final);
}

TEST_CASE("config validation rejects bad setups") {
  SimConfig cfg = base_config();
  cfg.horizon_T = -1;
  REQUIRE_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = base_config();
  cfg.refine = 0;
  REQUIRE_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = base_config();
  cfg.max_particles = 0;
  REQUIRE_THROWS_AS(validate_config(cfg), std::invalid_argument);
}
