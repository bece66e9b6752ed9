#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "osbm/selection.hpp"

namespace osbm {

// Root-mean |co-membership| difference sqrt(sum_{i!=j} |(ZZ^T)_ij -
// (Z^Z^^T)_ij| / (N(N-1))); invariant to column permutations of either side,
// zero iff the co-membership structures agree.
double cluster_distance(const MembershipMatrix& z, const MembershipMatrix& z_hat);

/// z_iq = 1 iff tau_iq > t. All-zero rows are the null component.
MembershipMatrix threshold_memberships(const Matrix& tau, double t = 0.5);

struct CredibilityInterval {
  std::string label;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;
};

// Posterior marginal intervals: Gaussian from (w_n_vec, diag sigma_n) for each
// weight entry (labels "w[r,c]"), Beta(eta_n, zeta_n) for each class
// probability (labels "alpha[q]").
std::vector<CredibilityInterval> credibility_intervals(const VariationalState& state,
                                                       double level);

// Permutation aligning fitted classes to true classes: perm[c] is the fitted
// column matched to true column c, minimizing the membership disagreement
// sum_{i,q} |z_iq - z^_{i,perm[q]}| over all permutations (the co-membership
// distance cannot break label ties). Ties pick the lexicographically smallest
// permutation. Requires equal class counts.
std::vector<Index> align_classes(const MembershipMatrix& truth, const MembershipMatrix& fitted);

struct CoverageConfig {
  Index n_vertices = 100;
  Index q_true = 3;
  double lambda = 1.5;
  double epsilon = 1.0;
  double w_star = -2.0;
  double level = 0.99;
  double threshold = 0.5;
  int restarts = 5;
  int workers = 1;
  PriorConfig priors;
  FitOptions fit;
};

struct ParameterCoverage {
  std::string label;
  int hits = 0;
  int total = 0;
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(hits) / total; }
};

// Samples balanced community networks, fits each with the true Q (best of
// `restarts` kmeans starts), aligns labels to truth and reports the fraction
// of credibility intervals containing the generating values of
// {w[0,0], w[0,1], u[0], w_star, alpha[0]}.
std::vector<ParameterCoverage> coverage_experiment(const CoverageConfig& config, int n_networks,
                                                   std::uint64_t seed);

enum class Balance { Balanced, Geometric };

const char* balance_name(Balance b);

struct ConfusionConfig {
  Index n_vertices = 100;
  double epsilon = 1.0;
  double w_star = -5.5;
  double geometric_a = 0.7;
  std::vector<double> lambdas{6.0};
  std::vector<Balance> balances{Balance::Balanced};
  std::vector<Index> q_trues{2};
  Index q_min = 2;
  Index q_max = 8;
  int restarts = 10;
  double threshold = 0.5;
  int workers = 1;
  PriorConfig priors;
  FitOptions fit;
};

struct NetworkOutcome {
  std::uint64_t seed = 0;
  Index q_selected = 0;
  double best_il = 0.0;
  double distance = 0.0;  // thresholded best fit vs. planted memberships
  bool ok = false;
  std::string error;
};

struct ConfusionCell {
  double lambda = 0.0;
  Balance balance = Balance::Balanced;
  Index q_true = 0;
  std::vector<NetworkOutcome> outcomes;
  int failures = 0;
};

// One cell per (lambda, balance, q_true); each network is sampled, swept over
// [q_min, q_max] with select_q and tallied. Failures are recorded per network,
// never dropped.
std::vector<ConfusionCell> confusion_experiment(const ConfusionConfig& config,
                                                int n_networks_per_cell, std::uint64_t seed);

struct ConfusionMatrix {
  std::vector<Index> q_true_rows;
  Index q_min = 2;
  Index q_max = 8;
  Eigen::MatrixXi counts;    // rows: q_true, cols: selected q in [q_min, q_max]
  Eigen::VectorXi failures;  // per row; row sum of counts + failures = networks per cell
};

/// Gathers the cells of one (lambda, balance) slice into a confusion matrix.
ConfusionMatrix tally_confusion(const std::vector<ConfusionCell>& cells, double lambda,
                                Balance balance, Index q_min, Index q_max);

}  // namespace osbm
