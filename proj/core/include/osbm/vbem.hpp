#pragma once

#include <utility>
#include <vector>

#include "osbm/math.hpp"
#include "osbm/model.hpp"

namespace osbm {

// Full posterior approximation q(Z) q(alpha) q(W) q(beta) plus the local
// logistic-bound parameters xi.
struct VariationalState {
  Matrix tau;      // N x Q membership probabilities, clipped to [1e-10, 1-1e-10]
  Vector eta_n;    // Beta posterior parameters per class
  Vector zeta_n;
  Vector w_n_vec;  // Gaussian posterior mean of the stacked weight matrix, length (Q+1)^2
  Matrix sigma_n;  // Gaussian posterior covariance, (Q+1)^2 x (Q+1)^2
  double a_n = 1.0;  // Gamma posterior of the weight precision
  double b_n = 1.0;
  Matrix xi;       // N x N local bound parameters, diagonal unused

  Index n() const { return tau.rows(); }
  Index q() const { return tau.cols(); }
};

struct FitOptions {
  double xi_init = 1e-3;
  double outer_tol = 1e-6;  // relative change of the bound between outer iterations
  int max_outer = 500;
  double inner_tol = 1e-4;  // max |delta tau| per sweep
  int max_inner = 50;
  double tau_clip = 1e-10;
  double xi_floor = 1e-8;
};

struct FitResult {
  VariationalState state;
  double il_osbm = 0.0;
  std::vector<double> bound_trace;  // one bound value per outer iteration
  bool converged = false;
  int iterations = 0;
};

/// Membership row with the homogeneous coordinate appended: (tau_i1..tau_iQ, 1).
Vector tau_tilde(const Vector& tau_row);

/// All tau_tilde rows stacked, N x (Q+1).
Matrix tau_tilde_matrix(const Matrix& tau);

// Second-moment matrix E[Z~ Z~^T] of one vertex under independent Bernoullis:
// diagonal tau_iq (not squared), cross terms tau_iq*tau_il, border tau~, corner 1.
Matrix e_tilde(const Vector& tau_row);

std::vector<Matrix> e_tilde_all(const Matrix& tau);

/// eta_q = eta0_q + sum_i tau_iq and zeta_q = zeta0_q + N - sum_i tau_iq.
std::pair<Vector, Vector> m_step_alpha(const Matrix& tau, const Hyperpriors& priors);

struct WStep {
  Vector w_n_vec;
  Matrix sigma_n;
};

// Gaussian update of q(W): precision (a_n/b_n) I + 2 sum_{i!=j} lambda(xi_ij)
// (E~_j kron E~_i), mean = covariance times sum_{i!=j} (x_ij - 1/2)
// (tau~_j kron tau~_i).
WStep m_step_w(const AdjacencyMatrix& x, const Matrix& tau, const std::vector<Matrix>& e_tildes,
               const Matrix& xi, double a_n, double b_n);

/// a_n = a0 + (Q+1)^2/2 and b_n = b0 + tr(sigma_n)/2 + |w_n_vec|^2/2.
std::pair<double, double> m_step_beta(const Vector& w_n_vec, const Matrix& sigma_n, Index q,
                                      const Hyperpriors& priors);

// Second-moment blocks of q(W) taken from sigma_n + w w^T under the
// column-stacked layout. first = column block E[W_{.q} W_{.l}^T], second = row
// block E[W_{q.}^T W_{l.}]; q, l are 0-based in [0, Q].
std::pair<Matrix, Matrix> sigma_blocks(const Matrix& sigma_n, const Vector& w_n_vec, Index q,
                                       Index l);

struct EStepResult {
  Matrix tau;
  int sweeps = 0;
  bool converged = false;  // false: sweep cap hit, tau is the last iterate
};

// Coordinate ascent on the membership posteriors: vertices in index order,
// classes in index order, updates in place. Sweeps repeat until
// max |delta tau| < tol or max_sweeps.
EStepResult e_step_tau(const AdjacencyMatrix& x, const VariationalState& state,
                       const Hyperpriors& priors, double tol = 1e-4, int max_sweeps = 50,
                       double clip = 1e-10);

// Per-pair optimum of the local bound parameters:
// xi_ij = sqrt(tr((sigma_n + w w^T)(E~_j kron E~_i))), floored away from zero.
// Stored as a full asymmetric N x N grid.
Matrix xi_step(const VariationalState& state, const std::vector<Matrix>& e_tildes,
               double floor_value = 1e-8);

// Evidence lower bound evaluated from the complete expectation decomposition,
// valid at any state (including the residual terms that vanish only at
// M-step stationarity). Monotone over fit iterations.
double lower_bound(const AdjacencyMatrix& x, const VariationalState& state,
                   const Hyperpriors& priors);

// Closed-form value of the bound, valid when the state is M-step fresh
// (caller contract); used as the model selection criterion.
double il_osbm(const AdjacencyMatrix& x, const VariationalState& state, const Hyperpriors& priors);

// State with every M-step equation satisfied simultaneously for the given
// (tau, xi): alpha/beta hyperparameters refreshed, then the coupled
// sigma_n/w_n/b_n system iterated to its fixed point (the single-pass loop
// leaves b_n one step behind the covariance it scaled). At such a state
// il_osbm and lower_bound coincide.
VariationalState m_step_stationary(const AdjacencyMatrix& x, const Matrix& tau, const Matrix& xi,
                                   const Hyperpriors& priors);

// Full inference loop: initialize xi, a_n, b_n; repeat [E~ update, alpha step,
// W step, beta step, xi step, inner tau loop] until the bound converges.
// il_osbm is taken right after the M steps of the final iteration.
// Throws SingularMatrixError or NonFiniteError on numerical failure.
FitResult fit(const AdjacencyMatrix& x, Index q, const Matrix& init_tau, const Hyperpriors& priors,
              const FitOptions& opts = {});

}  // namespace osbm
