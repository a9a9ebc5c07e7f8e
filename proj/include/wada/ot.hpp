#pragma once

// Empirical 1-Wasserstein distances used by the convergence diagnostics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "wada/dynamics.hpp"
#include "wada/errors.hpp"
#include "wada/measures.hpp"
#include "wada/util.hpp"

namespace wada::ot {

inline constexpr double kMassMismatchTolerance = 1e-9;
inline constexpr std::size_t kDefaultMaxSupport = 512;

namespace detail {

inline void check_masses(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const double a = mu.total_mass(), b = nu.total_mass();
  if (std::abs(a - b) > kMassMismatchTolerance)
    throw MassMismatch("measures carry different total mass: " + std::to_string(a) + " vs " + std::to_string(b));
}

inline void check_dims(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.size() > 0 && nu.size() > 0 && mu.dim() != nu.dim())
    throw DimensionMismatch("measures live in spaces of different dimension");
}

}  // namespace detail

/// Merges atoms at identical positions, summing their masses. Output sorted lexicographically.
inline DiscreteMeasure deduplicate(const DiscreteMeasure& m) {
  std::vector<std::size_t> order(m.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return m.points[i] < m.points[j]; });
  DiscreteMeasure out;
  for (auto i : order) {
    if (!out.points.empty() && out.points.back() == m.points[i]) {
      out.masses.back() += m.masses[i];
    } else {
      out.points.push_back(m.points[i]);
      out.masses.push_back(m.masses[i]);
    }
  }
  return out;
}

/// Exact W1 on the real line: integral of |F_mu - F_nu|, by merging the sorted atoms.
inline double w1_exact_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  detail::check_masses(mu, nu);
  if ((mu.size() > 0 && mu.dim() != 1) || (nu.size() > 0 && nu.dim() != 1))
    throw DimensionMismatch("w1_exact_1d needs one-dimensional points");
  struct Event {
    double x;
    double dm;  // mass added to F_mu - F_nu
  };
  std::vector<Event> ev;
  ev.reserve(mu.size() + nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) ev.push_back({mu.points[i][0], mu.masses[i]});
  for (std::size_t j = 0; j < nu.size(); ++j) ev.push_back({nu.points[j][0], -nu.masses[j]});
  std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.x < b.x; });
  CompensatedSum diff, w;
  for (std::size_t e = 0; e + 1 < ev.size(); ++e) {
    diff.add(ev[e].dm);
    w.add(std::abs(diff.value()) * (ev[e + 1].x - ev[e].x));
  }
  return w.value();
}

/// Exact W1 between finite measures as a min-cost flow on the bipartite support graph
/// (successive shortest paths with Dijkstra on reduced costs). Euclidean ground cost.
inline double w1_exact_lp(const DiscreteMeasure& mu_in, const DiscreteMeasure& nu_in,
                          std::size_t max_support = kDefaultMaxSupport) {
  detail::check_masses(mu_in, nu_in);
  detail::check_dims(mu_in, nu_in);
  const DiscreteMeasure mu = deduplicate(mu_in);
  const DiscreteMeasure nu = deduplicate(nu_in);
  if (mu.size() > max_support || nu.size() > max_support)
    throw SupportTooLarge("support of size " + std::to_string(std::max(mu.size(), nu.size())) +
                          " exceeds the limit " + std::to_string(max_support));
  const std::size_t n = mu.size(), m = nu.size();
  if (n == 0 || m == 0) return 0.0;

  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = std::sqrt(squared_distance(mu.points[i], nu.points[j]));

  constexpr double inf = std::numeric_limits<double>::infinity();
  const double tol = 1e-15;
  Vec supply = mu.masses, demand = nu.masses;
  std::vector<double> flow(n * m, 0.0);
  Vec pot_l(n, 0.0), pot_r(m, 0.0);
  Vec dist_l(n), dist_r(m);
  std::vector<std::ptrdiff_t> prev_r(m), prev_l(n);  // predecessor: right <- left, left <- right (-1 = source)
  std::vector<char> done_l(n), done_r(m);

  auto remaining = [&](const Vec& v) {
    double s = 0.0;
    for (double x : v)
      if (x > tol) s += x;
    return s;
  };

  while (remaining(supply) > tol && remaining(demand) > tol) {
    std::fill(dist_l.begin(), dist_l.end(), inf);
    std::fill(dist_r.begin(), dist_r.end(), inf);
    std::fill(done_l.begin(), done_l.end(), 0);
    std::fill(done_r.begin(), done_r.end(), 0);
    for (std::size_t i = 0; i < n; ++i)
      if (supply[i] > tol) {
        dist_l[i] = 0.0;
        prev_l[i] = -1;
      }
    std::ptrdiff_t target = -1;
    double target_dist = inf;
    for (;;) {
      // Dense Dijkstra: pick the closest unsettled node on either side.
      double best = inf;
      std::ptrdiff_t bi = -1;
      bool right = false;
      for (std::size_t i = 0; i < n; ++i)
        if (!done_l[i] && dist_l[i] < best) {
          best = dist_l[i];
          bi = static_cast<std::ptrdiff_t>(i);
          right = false;
        }
      for (std::size_t j = 0; j < m; ++j)
        if (!done_r[j] && dist_r[j] < best) {
          best = dist_r[j];
          bi = static_cast<std::ptrdiff_t>(j);
          right = true;
        }
      if (bi < 0) break;
      if (right) {
        const auto j = static_cast<std::size_t>(bi);
        done_r[j] = 1;
        if (demand[j] > tol) {
          target = bi;
          target_dist = best;
          break;
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (done_l[i] || flow[i * m + j] <= tol) continue;
          const double rc = std::max(0.0, -cost[i * m + j] + pot_r[j] - pot_l[i]);
          if (best + rc < dist_l[i]) {
            dist_l[i] = best + rc;
            prev_l[i] = bi;
          }
        }
      } else {
        const auto i = static_cast<std::size_t>(bi);
        done_l[i] = 1;
        for (std::size_t j = 0; j < m; ++j) {
          if (done_r[j]) continue;
          const double rc = std::max(0.0, cost[i * m + j] + pot_l[i] - pot_r[j]);
          if (best + rc < dist_r[j]) {
            dist_r[j] = best + rc;
            prev_r[j] = bi;
          }
        }
      }
    }
    if (target < 0) break;
    for (std::size_t i = 0; i < n; ++i) pot_l[i] += std::min(dist_l[i], target_dist);
    for (std::size_t j = 0; j < m; ++j) pot_r[j] += std::min(dist_r[j], target_dist);

    // Bottleneck along the path target <- ... <- source.
    auto j = static_cast<std::size_t>(target);
    double delta = demand[j];
    for (;;) {
      const auto i = static_cast<std::size_t>(prev_r[j]);
      if (prev_l[i] < 0) {
        delta = std::min(delta, supply[i]);
        break;
      }
      const auto jp = static_cast<std::size_t>(prev_l[i]);
      delta = std::min(delta, flow[i * m + jp]);
      j = jp;
    }
    j = static_cast<std::size_t>(target);
    demand[j] -= delta;
    for (;;) {
      const auto i = static_cast<std::size_t>(prev_r[j]);
      flow[i * m + j] += delta;
      if (prev_l[i] < 0) {
        supply[i] -= delta;
        break;
      }
      const auto jp = static_cast<std::size_t>(prev_l[i]);
      flow[i * m + jp] -= delta;
      j = jp;
    }
  }

  CompensatedSum total;
  for (std::size_t e = 0; e < n * m; ++e)
    if (flow[e] > 0.0) total.add(flow[e] * cost[e]);
  return total.value();
}

/// Mean of exact 1D distances over `n_projections` random unit directions.
inline double w1_sliced(const DiscreteMeasure& mu, const DiscreteMeasure& nu, std::size_t n_projections,
                        std::uint64_t seed) {
  detail::check_masses(mu, nu);
  detail::check_dims(mu, nu);
  if (n_projections == 0) return 0.0;
  const std::size_t d = std::max(mu.dim(), nu.dim());
  Rng rng = make_rng(seed, "sliced");
  std::normal_distribution<double> normal(0.0, 1.0);
  auto project = [](const DiscreteMeasure& m, const Vec& dir) {
    DiscreteMeasure p;
    p.masses = m.masses;
    p.points.reserve(m.size());
    for (const auto& x : m.points) p.points.push_back({dot(x, dir)});
    return p;
  };
  CompensatedSum acc;
  Vec dir(d);
  for (std::size_t r = 0; r < n_projections; ++r) {
    double len = 0.0;
    do {
      for (auto& c : dir) c = normal(rng);
      len = norm(dir);
    } while (len == 0.0);
    for (auto& c : dir) c /= len;
    acc.add(w1_exact_1d(project(mu, dir), project(nu, dir)));
  }
  return acc.value() / static_cast<double>(n_projections);
}

enum class ChaosMode { exact, sliced };

struct ChaosOptions {
  ChaosMode mode = ChaosMode::exact;
  std::size_t n_projections = 64;
  std::uint64_t seed = 0;
  std::size_t max_support = kDefaultMaxSupport;
  unsigned threads = 1;
};

struct ChaosRow {
  std::size_t step = 0;
  double w1_nu = 0.0;
  double w1_pi = 0.0;
  double running_sup = 0.0;
};

struct ChaosSeries {
  std::vector<ChaosRow> rows;
  double sup = 0.0;
};

inline double distance(const DiscreteMeasure& a, const DiscreteMeasure& b, const ChaosOptions& opts,
                       std::uint64_t index) {
  if (opts.mode == ChaosMode::exact) return w1_exact_lp(a, b, opts.max_support);
  return w1_sliced(a, b, opts.n_projections, stream_seed(opts.seed, "chaos", index));
}

/// Per-checkpoint W1(nu_a, nu_b) + W1(pi_a, pi_b) (pi compared on Z x Z) and its running sup.
inline ChaosSeries chaos_metric(const std::vector<Snapshot>& run_a, const std::vector<Snapshot>& run_b,
                                const ChaosOptions& opts = {}) {
  if (run_a.size() != run_b.size()) throw CheckpointMismatch("runs have different numbers of checkpoints");
  for (std::size_t c = 0; c < run_a.size(); ++c)
    if (run_a[c].step != run_b[c].step)
      throw CheckpointMismatch("checkpoint " + std::to_string(c) + " is at step " + std::to_string(run_a[c].step) +
                               " in one run and " + std::to_string(run_b[c].step) + " in the other");
  ChaosSeries out;
  out.rows.resize(run_a.size());
  parallel_for(run_a.size(), opts.threads, [&](std::size_t c) {
    auto& row = out.rows[c];
    row.step = run_a[c].step;
    row.w1_nu = distance(to_discrete(run_a[c].nu), to_discrete(run_b[c].nu), opts, 2 * c);
    row.w1_pi = distance(to_discrete(run_a[c].pi), to_discrete(run_b[c].pi), opts, 2 * c + 1);
  });
  double sup = 0.0;
  for (auto& row : out.rows) {
    sup = std::max(sup, row.w1_nu + row.w1_pi);
    row.running_sup = sup;
  }
  out.sup = sup;
  return out;
}

inline void write_chaos_csv(std::ostream& os, const ChaosSeries& s) {
  os << "checkpoint_step,w1_nu,w1_pi,running_sup\n";
  for (const auto& r : s.rows)
    os << r.step << ',' << csv::format_double(r.w1_nu) << ',' << csv::format_double(r.w1_pi) << ','
       << csv::format_double(r.running_sup) << '\n';
}

}  // namespace wada::ot
