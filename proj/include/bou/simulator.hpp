#pragma once
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "offspring.hpp"
#include "ou_hermite.hpp"
#include "polynomial.hpp"
#include "rng.hpp"

namespace bou {

struct SimConfig {
  OffspringLaw offspring;
  OUParams ou;
  double x0[3] = {0.0, 0.0, 0.0};
  int horizon_T = 1;  // integer end time; snapshots at {0, 1/refine, ..., T}
  std::size_t max_particles = std::size_t{1} << 22;
  std::uint64_t seed = 1;
  std::size_t replicates = 1;
  int refine = 1;  // sub-grid points per unit time (1 = integer grid only)

  double lambda() const { return offspring.lambda; }
  int n_grid() const { return horizon_T * refine + 1; }
  double grid_time(int j) const { return static_cast<double>(j) / refine; }
};

inline void validate_config(const SimConfig& cfg) {
  if (cfg.horizon_T < 0) throw std::invalid_argument("sim: horizon_T must be a non-negative integer");
  if (cfg.max_particles < 1) throw std::invalid_argument("sim: max_particles must be >= 1");
  if (cfg.refine < 1) throw std::invalid_argument("sim: refine must be >= 1");
  if (cfg.ou.d < 1 || cfg.ou.d > 3) throw std::invalid_argument("sim: dimension must be 1..3");
}

struct PopulationCapExceeded : std::runtime_error {
  explicit PopulationCapExceeded(std::size_t cap)
      : std::runtime_error("population cap exceeded (max_particles = " + std::to_string(cap) + ")") {}
};

// Depth-first exact simulation of one replicate.  Per particle the draw order is:
// lifetime, then d normals per recorded grid time (and at the branch point), then the
// offspring count.  Each particle owns a counter-based stream; children derive theirs
// from the parent's id and child index, so the result is independent of traversal order.
// rec(grid_index, x) is called once per particle alive at that grid time.
template <class Recorder>
void simulate_replicate(const SimConfig& cfg, std::uint64_t replicate_index, Recorder&& rec) {
  struct Task {
    double birth;
    double x[3];
    std::uint64_t stream_id;
  };
  const int n_grid = cfg.n_grid();
  const double T = static_cast<double>(cfg.horizon_T);

  std::vector<Task> stack;
  Task root{0.0, {cfg.x0[0], cfg.x0[1], cfg.x0[2]}, replicate_stream(cfg.seed, replicate_index)};
  stack.push_back(root);
  std::size_t created = 1;

  while (!stack.empty()) {
    Task task = stack.back();
    stack.pop_back();
    Stream rng(task.stream_id);

    const double death = task.birth + rng.exponential(cfg.offspring.a);
    double cur_t = task.birth;
    double cur_x[3] = {task.x[0], task.x[1], task.x[2]};

    int j = static_cast<int>(std::ceil(task.birth * cfg.refine));
    if (cfg.grid_time(j) < task.birth) ++j;
    for (; j < n_grid && cfg.grid_time(j) < death; ++j) {
      const double tj = cfg.grid_time(j);
      if (tj > cur_t) {
        ou_transition_sample(cfg.ou, cur_x, tj - cur_t, rng, cur_x);
        cur_t = tj;
      }
      rec(j, cur_x);
    }

    if (death < T) {
      ou_transition_sample(cfg.ou, cur_x, death - cur_t, rng, cur_x);
      const std::int64_t n = sample_offspring(cfg.offspring, rng);
      if (created + static_cast<std::size_t>(n) > cfg.max_particles)
        throw PopulationCapExceeded(cfg.max_particles);
      created += static_cast<std::size_t>(n);
      for (std::int64_t i = 0; i < n; ++i)
        stack.push_back(Task{death, {cur_x[0], cur_x[1], cur_x[2]}, derive_stream(task.stream_id, static_cast<std::uint64_t>(i) + 1)});
    }
  }
}

// all particle positions at every grid time of one replicate
struct SnapshotSet {
  OUParams ou;
  double lambda = 0.0;
  double x0[3] = {0.0, 0.0, 0.0};
  int horizon_T = 0;
  int refine = 1;
  std::vector<std::vector<double>> positions;  // [grid index][particle*d + axis]

  int n_grid() const { return horizon_T * refine + 1; }
  double grid_time(int j) const { return static_cast<double>(j) / refine; }
  std::size_t population(int j) const { return positions[j].size() / ou.d; }
  double W(int j) const { return population(j) * std::exp(-lambda * grid_time(j)); }

  int grid_index(double t) const {
    const double j_real = t * refine;
    const int j = static_cast<int>(std::lround(j_real));
    if (std::abs(j_real - j) > 1e-9 || j < 0 || j >= n_grid())
      throw std::invalid_argument("time is not on the snapshot grid");
    return j;
  }
};

inline SnapshotSet run_replicate(const SimConfig& cfg, std::uint64_t replicate_index) {
  validate_config(cfg);
  SnapshotSet out;
  out.ou = cfg.ou;
  out.lambda = cfg.lambda();
  for (int i = 0; i < 3; ++i) out.x0[i] = cfg.x0[i];
  out.horizon_T = cfg.horizon_T;
  out.refine = cfg.refine;
  out.positions.assign(cfg.n_grid(), {});
  const int d = cfg.ou.d;
  simulate_replicate(cfg, replicate_index, [&](int j, const double* x) {
    for (int i = 0; i < d; ++i) out.positions[j].push_back(x[i]);
  });
  return out;
}

// <X_t, g> = sum over particles alive at t
inline double functional(const SnapshotSet& snaps, const PolynomialFn& g, double t) {
  if (g.dim() != snaps.ou.d) throw std::invalid_argument("functional: dimension mismatch");
  const int j = snaps.grid_index(t);
  const CompiledPoly cp(g.mono);
  const std::vector<double>& xs = snaps.positions[j];
  const int d = snaps.ou.d;
  double sum = 0.0;
  for (std::size_t u = 0; u + d <= xs.size(); u += d) sum += cp.eval(&xs[u]);
  return sum;
}

// one-step conditional increments of <X_t, g> along the unit grid:
//   M_k = <X_{t-k}, T_k g> - <X_{t-k-1}, T_{k+1} g>   (k = 0..t-1, semigroup with mass growth)
//   terminal = T_t g(x0)
// these sum to <X_t, g> exactly.
struct DecompositionTable {
  int t = 0;
  std::vector<double> M;  // M[k], k = 0..t-1
  double terminal = 0.0;
  double functional_value = 0.0;
  double sum() const {
    double s = terminal;
    for (double v : M) s += v;
    return s;
  }
};

inline DecompositionTable decompose(const SnapshotSet& snaps, const PolynomialFn& g) {
  const int t = snaps.horizon_T;
  DecompositionTable tab;
  tab.t = t;
  tab.functional_value = functional(snaps, g, t);

  std::vector<PolynomialFn> Tg(t + 1);  // Tg[k] = T_k^lambda g
  Tg[0] = g;
  for (int k = 1; k <= t; ++k) Tg[k] = semigroup_apply(snaps.ou, g, k, snaps.lambda);

  tab.M.resize(t);
  for (int k = 0; k < t; ++k) {
    const int s = t - k;
    tab.M[k] = functional(snaps, Tg[k], s) - functional(snaps, Tg[k + 1], s - 1);
  }
  tab.terminal = Tg[t].mono.eval(snaps.x0);
  return tab;
}

// martingale trajectories on the integer grid; the compensator integral for M^{h,a}
// is a trapezoid over the full refine sub-grid
struct MartingaleTrack {
  std::vector<double> times;                                // 0..T
  std::vector<double> W;                                    // |X_t| e^{-lambda t}
  std::map<MultiIndex, std::vector<double>, GradedLess> H;  // H_t^p
  std::vector<double> M;                                    // M_t^{h,a}
};

inline MartingaleTrack track_martingales(const SnapshotSet& snaps,
                                         const std::vector<MultiIndex>& basis,
                                         const PolynomialFn& h, double a_exp) {
  const OUParams& ou = snaps.ou;
  const double lam = snaps.lambda;
  const int T = snaps.horizon_T;
  MartingaleTrack track;
  track.times.resize(T + 1);
  track.W.resize(T + 1);
  for (int t = 0; t <= T; ++t) {
    track.times[t] = t;
    track.W[t] = snaps.W(t * snaps.refine);
  }

  for (const MultiIndex& p : basis) {
    PolynomialFn hp = hermite_fn(ou, p);
    std::vector<double> traj(T + 1);
    for (int t = 0; t <= T; ++t)
      traj[t] = std::exp(-(lam - p.order() * ou.mu) * t) * functional(snaps, hp, t);
    track.H[p] = std::move(traj);
  }

  if (!h.hermite_coeffs.empty()) {
    PolynomialFn drift = generator_apply(ou, h);  // Lh
    Polynomial comp_poly = drift.mono + (a_exp * ou.mu) * h.mono;
    PolynomialFn comp = expand_in_hermite(ou, comp_poly);

    const int n = snaps.n_grid();
    std::vector<double> integrand(n);
    for (int j = 0; j < n; ++j) {
      const double w = snaps.grid_time(j);
      integrand[j] = std::exp(-(lam - a_exp * ou.mu) * w) * functional(snaps, comp, w);
    }
    track.M.resize(T + 1);
    double integral = 0.0;
    int j = 0;
    for (int t = 0; t <= T; ++t) {
      for (; j < t * snaps.refine; ++j)
        integral += 0.5 * (integrand[j] + integrand[j + 1]) / snaps.refine;
      track.M[t] = std::exp(-(lam - a_exp * ou.mu) * t) * functional(snaps, h, t) - integral;
    }
  }
  return track;
}

// --- streaming many-replicate runner -------------------------------------------------

struct FunctionalSpec {
  std::string name;
  PolynomialFn fn;
};

struct ReplicateRow {
  bool aborted = false;
  std::vector<std::size_t> population;        // per grid index
  std::vector<std::vector<double>> values;    // [functional][grid index]
};

struct RunSet {
  SimConfig cfg;
  std::vector<std::string> func_names;
  std::vector<ReplicateRow> rows;  // one per replicate, aborted ones flagged
  std::size_t aborted_count = 0;

  double abort_rate() const {
    return rows.empty() ? 0.0 : static_cast<double>(aborted_count) / rows.size();
  }
};

// simulate cfg.replicates replicates, keeping only per-grid-time population counts and
// the values of the requested functionals (full snapshot sets for large replicate
// counts would not fit in memory).  Replicates are independent and seeded by lineage,
// so a worker pool of any size produces byte-identical rows.
inline RunSet run_replicates(const SimConfig& cfg, const std::vector<FunctionalSpec>& funcs,
                             unsigned threads = 1) {
  validate_config(cfg);
  RunSet out;
  out.cfg = cfg;
  for (const auto& f : funcs) {
    if (f.fn.dim() != cfg.ou.d) throw std::invalid_argument("run_replicates: functional dimension mismatch");
    out.func_names.push_back(f.name);
  }
  std::vector<CompiledPoly> cps;
  cps.reserve(funcs.size());
  for (const auto& f : funcs) cps.emplace_back(f.fn.mono);

  const int n_grid = cfg.n_grid();
  out.rows.resize(cfg.replicates);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> aborted{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto worker = [&]() {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= cfg.replicates) return;
      ReplicateRow& row = out.rows[r];
      row.population.assign(n_grid, 0);
      row.values.assign(cps.size(), std::vector<double>(n_grid, 0.0));
      try {
        simulate_replicate(cfg, r, [&](int j, const double* x) {
          ++row.population[j];
          for (std::size_t f = 0; f < cps.size(); ++f) row.values[f][j] += cps[f].eval(x);
        });
      } catch (const PopulationCapExceeded&) {
        row.aborted = true;
        aborted.fetch_add(1);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(cfg.replicates, 1)));
    pool.reserve(n);
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  out.aborted_count = aborted.load();
  return out;
}

// --- embedded Galton-Watson population (positions ignored) ---------------------------

// population alive at time t, with early stop: returns stop_above + 1 as soon as the
// final count is guaranteed to exceed stop_above (valid because p_0 = 0: every pending
// particle has at least one descendant alive at t)
inline std::size_t gw_population_at(const OffspringLaw& law, double t, std::uint64_t stream_id,
                                    std::size_t stop_above) {
  std::vector<double> stack;  // birth times
  stack.push_back(0.0);
  std::size_t alive = 0;
  std::vector<std::uint64_t> id_stack{stream_id};
  while (!stack.empty()) {
    const double birth = stack.back();
    stack.pop_back();
    const std::uint64_t id = id_stack.back();
    id_stack.pop_back();
    Stream rng(id);
    const double death = birth + rng.exponential(law.a);
    if (death >= t) {
      ++alive;
      if (alive + stack.size() > stop_above) return stop_above + 1;
      continue;
    }
    const std::int64_t n = sample_offspring(law, rng);
    if (alive + stack.size() + static_cast<std::size_t>(n) > stop_above) return stop_above + 1;
    for (std::int64_t i = 0; i < n; ++i) {
      stack.push_back(death);
      id_stack.push_back(derive_stream(id, static_cast<std::uint64_t>(i) + 1));
    }
  }
  return alive;
}

}  // namespace bou
