#include "osbm/selection.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "osbm/errors.hpp"
#include "osbm/parallel.hpp"
#include "osbm/rng.hpp"

namespace osbm {

namespace {

/// Per-vertex features: out-profile (row of x) followed by in-profile (column).
Matrix connectivity_features(const AdjacencyMatrix& x) {
  const Index n = x.n();
  Matrix f(n, 2 * n);
  f.leftCols(n) = x.x.cast<double>();
  f.rightCols(n) = x.x.transpose().cast<double>();
  return f;
}

std::vector<Index> kmeans_plus_plus(const Matrix& f, Index k, Rng& rng) {
  const Index n = f.rows();
  std::vector<Index> centers;
  centers.reserve(static_cast<std::size_t>(k));
  centers.push_back(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector min_dist(n);
  for (Index i = 0; i < n; ++i) {
    min_dist(i) = (f.row(i) - f.row(centers[0])).squaredNorm();
  }
  while (static_cast<Index>(centers.size()) < k) {
    const double total = min_dist.sum();
    Index chosen;
    if (total <= 0.0) {
      chosen = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    } else {
      const double u = rng.uniform01() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += min_dist(i);
        if (u < acc) {
          chosen = i;
          break;
        }
      }
    }
    centers.push_back(chosen);
    for (Index i = 0; i < n; ++i) {
      min_dist(i) = std::min(min_dist(i), (f.row(i) - f.row(chosen)).squaredNorm());
    }
  }
  return centers;
}

std::vector<Index> lloyd_assignments(const Matrix& f, Index q, Rng& rng) {
  const Index n = f.rows();
  Matrix centers(q, f.cols());
  {
    const std::vector<Index> picks = kmeans_plus_plus(f, q, rng);
    for (Index c = 0; c < q; ++c) centers.row(c) = f.row(picks[static_cast<std::size_t>(c)]);
  }
  std::vector<Index> assign(static_cast<std::size_t>(n), 0);
  Vector dist_to_center(n);
  for (int round = 0; round < 100; ++round) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index c = 0; c < q; ++c) {
        const double dsq = (f.row(i) - centers.row(c)).squaredNorm();
        if (dsq < best_d) {
          best_d = dsq;
          best = c;
        }
      }
      dist_to_center(i) = best_d;
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }

    // Empty clusters grab the point farthest from its assigned center.
    std::vector<Index> count(static_cast<std::size_t>(q), 0);
    for (Index i = 0; i < n; ++i) count[static_cast<std::size_t>(assign[i])]++;
    for (Index c = 0; c < q; ++c) {
      if (count[static_cast<std::size_t>(c)] > 0) continue;
      Index farthest = 0;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        if (count[static_cast<std::size_t>(assign[i])] > 1 && dist_to_center(i) > far_d) {
          far_d = dist_to_center(i);
          farthest = i;
        }
      }
      count[static_cast<std::size_t>(assign[farthest])]--;
      assign[static_cast<std::size_t>(farthest)] = c;
      count[static_cast<std::size_t>(c)] = 1;
      dist_to_center(farthest) = 0.0;
      changed = true;
    }

    for (Index c = 0; c < q; ++c) {
      Index members = 0;
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(f.cols());
      for (Index i = 0; i < n; ++i) {
        if (assign[static_cast<std::size_t>(i)] == c) {
          mean += f.row(i);
          ++members;
        }
      }
      if (members > 0) centers.row(c) = mean / static_cast<double>(members);
    }

    if (!changed && round > 0) break;
  }
  return assign;
}

Vector total_degrees(const AdjacencyMatrix& x) {
  const Index n = x.n();
  Vector degree(n);
  for (Index i = 0; i < n; ++i) {
    degree(i) = static_cast<double>(x.x.row(i).sum() + x.x.col(i).sum());
  }
  return degree;
}

/// Two-group 1-D split minimizing within-group variance; returns the threshold.
double variance_split_threshold(Vector values, double* lower_mean, double* upper_mean) {
  std::sort(values.data(), values.data() + values.size());
  const Index n = values.size();
  Vector prefix = Vector::Zero(n + 1);
  Vector prefix_sq = Vector::Zero(n + 1);
  for (Index i = 0; i < n; ++i) {
    prefix(i + 1) = prefix(i) + values(i);
    prefix_sq(i + 1) = prefix_sq(i) + values(i) * values(i);
  }
  double best = std::numeric_limits<double>::infinity();
  Index best_cut = 1;
  for (Index cut = 1; cut < n; ++cut) {
    const double s1 = prefix(cut);
    const double s2 = prefix(n) - s1;
    const double v1 = prefix_sq(cut) - s1 * s1 / cut;
    const double v2 = (prefix_sq(n) - prefix_sq(cut)) - s2 * s2 / (n - cut);
    if (v1 + v2 < best) {
      best = v1 + v2;
      best_cut = cut;
    }
  }
  *lower_mean = best_cut > 0 ? prefix(best_cut) / best_cut : 0.0;
  *upper_mean = (prefix(n) - prefix(best_cut)) / (n - best_cut);
  return values(best_cut);
}

Matrix low_mass_random_init(Index n, Index q, std::uint64_t seed) {
  Rng rng(seed);
  Matrix tau(n, q);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < q; ++c) tau(i, c) = 0.05 + 0.45 * rng.uniform01();
  }
  return tau;
}

// k-means assignment with the sparsest vertices moved to the null component when
// the degree histogram splits cleanly (they would otherwise distort every class).
Matrix degree_masked_kmeans_init(const AdjacencyMatrix& x, Index q, std::uint64_t seed) {
  Matrix tau = kmeans_init(x, q, seed);
  const Vector degree = total_degrees(x);
  double lower_mean = 0.0;
  double upper_mean = 0.0;
  const double threshold = variance_split_threshold(degree, &lower_mean, &upper_mean);
  Index below = 0;
  for (Index i = 0; i < x.n(); ++i) below += degree(i) < threshold ? 1 : 0;
  if (lower_mean < 0.8 * upper_mean && below < x.n() / 2) {
    for (Index i = 0; i < x.n(); ++i) {
      if (degree(i) < threshold) tau.row(i).setConstant(0.1);
    }
  }
  return tau;
}

// k-means with one extra cluster; the lowest-degree cluster is treated as the
// null component so outliers start outside every class.
Matrix null_cluster_init(const AdjacencyMatrix& x, Index q, std::uint64_t seed) {
  if (q + 1 > x.n()) return kmeans_init(x, q, seed);
  const Matrix f = connectivity_features(x);
  Rng rng(seed);
  const std::vector<Index> assign = lloyd_assignments(f, q + 1, rng);
  const Vector degree = total_degrees(x);

  Index null_cluster = 0;
  double lowest = std::numeric_limits<double>::infinity();
  for (Index c = 0; c <= q; ++c) {
    double sum = 0.0;
    Index members = 0;
    for (Index i = 0; i < x.n(); ++i) {
      if (assign[static_cast<std::size_t>(i)] == c) {
        sum += degree(i);
        ++members;
      }
    }
    const double mean = members > 0 ? sum / members : std::numeric_limits<double>::infinity();
    if (mean < lowest) {
      lowest = mean;
      null_cluster = c;
    }
  }

  Matrix tau = Matrix::Constant(x.n(), q, 0.1);
  Index column = 0;
  for (Index c = 0; c <= q; ++c) {
    if (c == null_cluster) continue;
    for (Index i = 0; i < x.n(); ++i) {
      if (assign[static_cast<std::size_t>(i)] == c) tau(i, column) = 0.9;
    }
    ++column;
  }
  return tau;
}

// Restart schedule. Plain k-means partitions barely vary with their seed, so a
// single init family explores almost nothing; the rotation mixes partition,
// outlier-aware and random starting points.
Matrix restart_init(const AdjacencyMatrix& x, Index q, int restart, std::uint64_t seed) {
  switch (restart % 4) {
    case 0: return kmeans_init(x, q, seed);
    case 1: return null_cluster_init(x, q, seed);
    case 2: return degree_masked_kmeans_init(x, q, seed);
    default: return low_mass_random_init(x.n(), q, seed);
  }
}

}  // namespace

Matrix kmeans_init(const AdjacencyMatrix& x, Index q, std::uint64_t seed) {
  const Index n = x.n();
  if (q < 1) throw std::invalid_argument("kmeans_init: q must be >= 1");
  if (q > n) throw std::invalid_argument("kmeans_init: q must not exceed N");

  const Matrix f = connectivity_features(x);
  Rng rng(seed);
  const std::vector<Index> assign = lloyd_assignments(f, q, rng);

  Matrix tau = Matrix::Constant(n, q, 0.1);
  for (Index i = 0; i < n; ++i) tau(i, assign[static_cast<std::size_t>(i)]) = 0.9;
  return tau;
}

FitResult fit_restarts(const AdjacencyMatrix& x, Index q, const Hyperpriors& priors,
                       std::uint64_t seed, int restarts, const FitOptions& opts,
                       std::vector<RestartOutcome>* outcomes, int* best_restart) {
  if (restarts < 1) throw std::invalid_argument("fit_restarts: restarts must be >= 1");
  std::optional<FitResult> best;
  int best_index = -1;
  std::string last_error = "no restarts executed";
  for (int r = 0; r < restarts; ++r) {
    RestartOutcome outcome;
    outcome.seed = derive_seed(seed, static_cast<std::uint64_t>(q), static_cast<std::uint64_t>(r));
    try {
      FitResult fitted = fit(x, q, restart_init(x, q, r, outcome.seed), priors, opts);
      outcome.ok = true;
      outcome.il = fitted.il_osbm;
      if (!best || fitted.il_osbm > best->il_osbm) {
        best = std::move(fitted);
        best_index = r;
      }
    } catch (const SingularMatrixError& e) {
      outcome.error = e.what();
      last_error = outcome.error;
    } catch (const NonFiniteError& e) {
      outcome.error = e.what();
      last_error = outcome.error;
    }
    if (outcomes) outcomes->push_back(std::move(outcome));
  }
  if (!best) {
    throw NonFiniteError("fit_restarts: every restart failed: " + last_error);
  }

  // Complement canonicalization: flipping one class's memberships is an exact
  // likelihood symmetry of the model, so coordinate ascent often lands on the
  // mirrored mode; the prior breaks the tie in favour of the canonical one.
  // Refit from each single-class complement of the winner, keep improvements.
  for (int pass = 0; pass < 2; ++pass) {
    bool improved = false;
    for (Index c = 0; c < q; ++c) {
      Matrix init = best->state.tau;
      init.col(c) = (1.0 - init.col(c).array()).matrix();
      try {
        FitResult alt = fit(x, q, init, priors, opts);
        if (alt.il_osbm > best->il_osbm) {
          best = std::move(alt);
          improved = true;
        }
      } catch (const SingularMatrixError&) {
      } catch (const NonFiniteError&) {
      }
    }
    if (!improved) break;
  }

  if (best_restart) *best_restart = best_index;
  return std::move(*best);
}

SelectionReport select_q(const AdjacencyMatrix& x, const std::vector<Index>& q_range,
                         const PriorConfig& priors, std::uint64_t seed,
                         const SelectOptions& opts) {
  if (q_range.empty()) throw std::invalid_argument("select_q: q_range must be non-empty");
  if (opts.restarts < 1) throw std::invalid_argument("select_q: restarts must be >= 1");

  SelectionReport report;
  report.cells.resize(q_range.size());

  parallel_for(q_range.size(), opts.workers, [&](std::size_t ci) {
    const Index q = q_range[ci];
    SelectionCell cell;
    cell.q = q;
    const auto started = std::chrono::steady_clock::now();
    const Hyperpriors hyper = priors.make(q);
    try {
      cell.best = fit_restarts(x, q, hyper, seed, opts.restarts, opts.fit, &cell.restarts,
                               &cell.best_restart);
    } catch (const NonFiniteError&) {
      // every restart failed; the outcome log keeps the reasons
    }
    cell.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    report.cells[ci] = std::move(cell);
  });

  // Argmax over usable cells; ties break toward the smaller Q.
  bool any = false;
  for (const SelectionCell& cell : report.cells) {
    if (!cell.best) continue;
    const double il = cell.best->il_osbm;
    if (!any || il > report.best_il || (il == report.best_il && cell.q < report.q_star)) {
      report.q_star = cell.q;
      report.best_il = il;
      any = true;
    }
  }
  if (!any) {
    throw SelectionFailedError("select_q: every restart of every cell failed");
  }
  return report;
}

}  // namespace osbm
