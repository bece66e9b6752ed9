#include "osbm/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "osbm/errors.hpp"
#include "osbm/parallel.hpp"
#include "osbm/rng.hpp"

namespace osbm {

double cluster_distance(const MembershipMatrix& z, const MembershipMatrix& z_hat) {
  const Index n = z.n();
  if (z_hat.n() != n) throw std::invalid_argument("cluster_distance: vertex counts differ");
  if (n < 2) throw std::invalid_argument("cluster_distance: need at least two vertices");
  const Eigen::MatrixXi shared = z.z * z.z.transpose();
  const Eigen::MatrixXi shared_hat = z_hat.z * z_hat.z.transpose();
  long long total = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      total += std::llabs(static_cast<long long>(shared(i, j)) - shared_hat(i, j));
    }
  }
  return std::sqrt(static_cast<double>(total) / (static_cast<double>(n) * (n - 1)));
}

MembershipMatrix threshold_memberships(const Matrix& tau, double t) {
  if (!(t > 0.0) || !(t < 1.0)) {
    throw std::invalid_argument("threshold_memberships: t must be in (0, 1)");
  }
  MembershipMatrix z;
  z.z.resize(tau.rows(), tau.cols());
  for (Index i = 0; i < tau.rows(); ++i) {
    for (Index c = 0; c < tau.cols(); ++c) {
      z.z(i, c) = tau(i, c) > t ? 1 : 0;
    }
  }
  return z;
}

std::vector<CredibilityInterval> credibility_intervals(const VariationalState& state,
                                                       double level) {
  if (!(level > 0.0) || !(level < 1.0)) {
    throw std::invalid_argument("credibility_intervals: level must be in (0, 1)");
  }
  const Index q = state.q();
  const Index d = q + 1;
  const double z_score = normal_quantile(0.5 * (1.0 + level));
  std::vector<CredibilityInterval> out;
  out.reserve(static_cast<std::size_t>(d * d + q));
  // Weight entries in the column-stacked order of the posterior mean.
  for (Index c = 0; c < d; ++c) {
    for (Index r = 0; r < d; ++r) {
      const Index k = c * d + r;
      const double sd = std::sqrt(std::max(state.sigma_n(k, k), 0.0));
      CredibilityInterval ci;
      ci.label = "w[" + std::to_string(r) + "," + std::to_string(c) + "]";
      ci.lower = state.w_n_vec(k) - z_score * sd;
      ci.upper = state.w_n_vec(k) + z_score * sd;
      ci.level = level;
      out.push_back(std::move(ci));
    }
  }
  for (Index c = 0; c < q; ++c) {
    CredibilityInterval ci;
    ci.label = "alpha[" + std::to_string(c) + "]";
    ci.lower = beta_quantile(state.eta_n(c), state.zeta_n(c), 0.5 * (1.0 - level));
    ci.upper = beta_quantile(state.eta_n(c), state.zeta_n(c), 0.5 * (1.0 + level));
    ci.level = level;
    out.push_back(std::move(ci));
  }
  return out;
}

std::vector<Index> align_classes(const MembershipMatrix& truth, const MembershipMatrix& fitted) {
  const Index q = truth.q();
  if (fitted.q() != q) throw std::invalid_argument("align_classes: class counts differ");
  if (fitted.n() != truth.n()) throw std::invalid_argument("align_classes: vertex counts differ");

  // Disagreement between true column a and fitted column b.
  Matrix cost(q, q);
  for (Index a = 0; a < q; ++a) {
    for (Index b = 0; b < q; ++b) {
      cost(a, b) = (truth.z.col(a) - fitted.z.col(b)).cwiseAbs().sum();
    }
  }

  std::vector<Index> perm(static_cast<std::size_t>(q));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::vector<Index> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (Index a = 0; a < q; ++a) c += cost(a, perm[static_cast<std::size_t>(a)]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<ParameterCoverage> coverage_experiment(const CoverageConfig& config, int n_networks,
                                                   std::uint64_t seed) {
  const Index qt = config.q_true;
  if (qt < 2) throw std::invalid_argument("coverage_experiment: q_true must be >= 2");
  const Index d = qt + 1;
  const Vector alpha = Vector::Constant(qt, 1.0 / static_cast<double>(qt));
  const OsbmParameters params =
      community_parameters(qt, config.lambda, config.epsilon, config.w_star, alpha);
  const double z_score = normal_quantile(0.5 * (1.0 + config.level));

  const std::vector<std::string> labels = {"w[0,0]", "w[0,1]", "u[0]", "w_star", "alpha[0]"};
  std::vector<ParameterCoverage> coverage(labels.size());
  for (std::size_t p = 0; p < labels.size(); ++p) coverage[p].label = labels[p];
  if (n_networks <= 0) return coverage;

  std::vector<std::array<bool, 5>> hits(static_cast<std::size_t>(n_networks));
  std::vector<bool> usable(static_cast<std::size_t>(n_networks), false);

  parallel_for(static_cast<std::size_t>(n_networks), config.workers, [&](std::size_t k) {
    const std::uint64_t net_seed = derive_seed(seed, 0, k);
    auto [x, z_true] = sample_network(params, config.n_vertices, net_seed);

    const Hyperpriors hyper = config.priors.make(qt);
    FitResult best;
    try {
      best = fit_restarts(x, qt, hyper, derive_seed(net_seed, 1), config.restarts, config.fit);
    } catch (const SingularMatrixError&) {
      return;
    } catch (const NonFiniteError&) {
      return;
    }

    const MembershipMatrix z_hat = threshold_memberships(best.state.tau, config.threshold);
    const std::vector<Index> perm = align_classes(z_true, z_hat);
    auto ext = [&](Index c) { return c < qt ? perm[static_cast<std::size_t>(c)] : qt; };

    const Matrix wt_true = assemble_wtilde(params);
    auto gaussian_covers = [&](Index r_true, Index c_true) {
      const Index k_idx = ext(c_true) * d + ext(r_true);
      const double sd = std::sqrt(std::max(best.state.sigma_n(k_idx, k_idx), 0.0));
      const double mean = best.state.w_n_vec(k_idx);
      const double truth = wt_true(r_true, c_true);
      return truth >= mean - z_score * sd && truth <= mean + z_score * sd;
    };

    std::array<bool, 5> h{};
    h[0] = gaussian_covers(0, 0);
    h[1] = gaussian_covers(0, 1);
    h[2] = gaussian_covers(0, qt);
    h[3] = gaussian_covers(qt, qt);
    const Index a0 = perm[0];
    const double alpha_lo =
        beta_quantile(best.state.eta_n(a0), best.state.zeta_n(a0), 0.5 * (1.0 - config.level));
    const double alpha_hi =
        beta_quantile(best.state.eta_n(a0), best.state.zeta_n(a0), 0.5 * (1.0 + config.level));
    h[4] = alpha(0) >= alpha_lo && alpha(0) <= alpha_hi;

    hits[k] = h;
    usable[k] = true;
  });

  for (std::size_t k = 0; k < hits.size(); ++k) {
    if (!usable[k]) continue;
    for (std::size_t p = 0; p < coverage.size(); ++p) {
      coverage[p].total += 1;
      coverage[p].hits += hits[k][p] ? 1 : 0;
    }
  }
  return coverage;
}

const char* balance_name(Balance b) {
  return b == Balance::Balanced ? "balanced" : "geometric";
}

std::vector<ConfusionCell> confusion_experiment(const ConfusionConfig& config,
                                                int n_networks_per_cell, std::uint64_t seed) {
  if (config.q_min > config.q_max) {
    throw std::invalid_argument("confusion_experiment: empty selection range");
  }
  std::vector<ConfusionCell> cells;
  for (double lambda : config.lambdas) {
    for (Balance balance : config.balances) {
      for (Index qt : config.q_trues) {
        ConfusionCell cell;
        cell.lambda = lambda;
        cell.balance = balance;
        cell.q_true = qt;
        cell.outcomes.resize(static_cast<std::size_t>(std::max(n_networks_per_cell, 0)));
        cells.push_back(std::move(cell));
      }
    }
  }

  std::vector<Index> q_range;
  for (Index q = config.q_min; q <= config.q_max; ++q) q_range.push_back(q);

  const std::size_t per_cell = static_cast<std::size_t>(std::max(n_networks_per_cell, 0));
  const std::size_t n_tasks = cells.size() * per_cell;

  parallel_for(n_tasks, config.workers, [&](std::size_t task) {
    const std::size_t ci = task / per_cell;
    const std::size_t k = task % per_cell;
    ConfusionCell& cell = cells[ci];
    NetworkOutcome& outcome = cell.outcomes[k];
    outcome.seed = derive_seed(seed, ci, k);

    const Vector alpha = cell.balance == Balance::Balanced
                             ? Vector::Constant(cell.q_true, 1.0 / static_cast<double>(cell.q_true))
                             : geometric_alpha(cell.q_true, config.geometric_a);
    const OsbmParameters params =
        community_parameters(cell.q_true, cell.lambda, config.epsilon, config.w_star, alpha);
    auto [x, z_true] = sample_network(params, config.n_vertices, outcome.seed);

    SelectOptions opts;
    opts.restarts = config.restarts;
    opts.workers = 1;
    opts.fit = config.fit;
    try {
      const SelectionReport report =
          select_q(x, q_range, config.priors, derive_seed(outcome.seed, 2), opts);
      outcome.q_selected = report.q_star;
      outcome.best_il = report.best_il;
      for (const SelectionCell& sc : report.cells) {
        if (sc.q == report.q_star && sc.best) {
          const MembershipMatrix z_hat =
              threshold_memberships(sc.best->state.tau, config.threshold);
          outcome.distance = cluster_distance(z_true, z_hat);
          break;
        }
      }
      outcome.ok = true;
    } catch (const SelectionFailedError& e) {
      outcome.error = e.what();
    } catch (const SingularMatrixError& e) {
      outcome.error = e.what();
    } catch (const NonFiniteError& e) {
      outcome.error = e.what();
    }
  });

  for (ConfusionCell& cell : cells) {
    cell.failures = 0;
    for (const NetworkOutcome& outcome : cell.outcomes) {
      if (!outcome.ok) cell.failures += 1;
    }
  }
  return cells;
}

ConfusionMatrix tally_confusion(const std::vector<ConfusionCell>& cells, double lambda,
                                Balance balance, Index q_min, Index q_max) {
  ConfusionMatrix m;
  m.q_min = q_min;
  m.q_max = q_max;
  std::vector<const ConfusionCell*> slice;
  for (const ConfusionCell& cell : cells) {
    if (cell.lambda == lambda && cell.balance == balance) slice.push_back(&cell);
  }
  const Index cols = q_max - q_min + 1;
  m.counts.setZero(static_cast<Index>(slice.size()), cols);
  m.failures.setZero(static_cast<Index>(slice.size()));
  for (Index row = 0; row < static_cast<Index>(slice.size()); ++row) {
    const ConfusionCell& cell = *slice[static_cast<std::size_t>(row)];
    m.q_true_rows.push_back(cell.q_true);
    m.failures(row) = cell.failures;
    for (const NetworkOutcome& outcome : cell.outcomes) {
      if (!outcome.ok) continue;
      if (outcome.q_selected >= q_min && outcome.q_selected <= q_max) {
        m.counts(row, outcome.q_selected - q_min) += 1;
      }
    }
  }
  return m;
}

}  // namespace osbm
