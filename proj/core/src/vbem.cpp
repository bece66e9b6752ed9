#include "osbm/vbem.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace osbm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double clip_unit(double v, double clip) {
  if (v < clip) return clip;
  if (v > 1.0 - clip) return 1.0 - clip;
  return v;
}

/// (x_ij - 1/2) with a zeroed diagonal so ordered-pair sums can run as gemms.
Matrix half_centered_edges(const AdjacencyMatrix& x) {
  const Index n = x.n();
  Matrix s = x.x.cast<double>().array() - 0.5;
  s.diagonal().setZero();
  return s;
}

/// lambda(xi_ij) with a zeroed diagonal.
Matrix lambda_matrix(const Matrix& xi) {
  const Index n = xi.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i != j) l(i, j) = lambda_jj(xi(i, j));
    }
  }
  return l;
}

/// Rows are the column-stacked E~_i, N x (Q+1)^2.
Matrix e_tilde_flat(const std::vector<Matrix>& e_tildes) {
  const Index n = static_cast<Index>(e_tildes.size());
  const Index d2 = e_tildes.empty() ? 0 : e_tildes.front().size();
  Matrix flat(n, d2);
  for (Index i = 0; i < n; ++i) {
    flat.row(i) = Eigen::Map<const Vector>(e_tildes[i].data(), d2).transpose();
  }
  return flat;
}

// Row t = s*D + r holds the column-stacked (r, s) block of m, so that
// (block_flat * vec(E)) recovers the per-block traces against a symmetric E.
Matrix block_trace_operator(const Matrix& m, Index d) {
  Matrix flat(d * d, d * d);
  for (Index s = 0; s < d; ++s) {
    for (Index r = 0; r < d; ++r) {
      const Matrix block = m.block(r * d, s * d, d, d);
      flat.row(s * d + r) = Eigen::Map<const Vector>(block.data(), d * d).transpose();
    }
  }
  return flat;
}

// tr((sigma + w w^T)(E~_j kron E~_i)) for all ordered pairs at once; entry
// (i, j) pairs the inner factor E~_i with the outer factor E~_j.
Matrix pair_second_moments(const Matrix& second_moment, const Matrix& e_flat, Index d) {
  const Matrix ops = block_trace_operator(second_moment, d);
  const Matrix g = e_flat * ops.transpose();  // N x D^2, row i = vec of the trace grid
  return g * e_flat.transpose();              // N x N
}

void check_state_dims(const AdjacencyMatrix& x, const VariationalState& state,
                      const Hyperpriors& priors) {
  const Index n = x.n();
  const Index q = state.q();
  const Index d = q + 1;
  if (state.tau.rows() != n) throw std::invalid_argument("state: tau row count != N");
  if (state.eta_n.size() != q || state.zeta_n.size() != q) {
    throw std::invalid_argument("state: eta_n/zeta_n size != Q");
  }
  if (state.w_n_vec.size() != d * d || state.sigma_n.rows() != d * d ||
      state.sigma_n.cols() != d * d) {
    throw std::invalid_argument("state: weight posterior dimensions inconsistent");
  }
  if (state.xi.rows() != n || state.xi.cols() != n) {
    throw std::invalid_argument("state: xi must be N x N");
  }
  priors.validate(q);
}

}  // namespace

Vector tau_tilde(const Vector& tau_row) {
  Vector t(tau_row.size() + 1);
  t << tau_row, 1.0;
  return t;
}

Matrix tau_tilde_matrix(const Matrix& tau) {
  Matrix t(tau.rows(), tau.cols() + 1);
  t.leftCols(tau.cols()) = tau;
  t.col(tau.cols()).setOnes();
  return t;
}

Matrix e_tilde(const Vector& tau_row) {
  const Index q = tau_row.size();
  Matrix e(q + 1, q + 1);
  for (Index a = 0; a < q; ++a) {
    e(a, a) = tau_row(a);  // E[Z^2] = E[Z] for a Bernoulli coordinate
    for (Index b = a + 1; b < q; ++b) {
      const double v = tau_row(a) * tau_row(b);
      e(a, b) = v;
      e(b, a) = v;
    }
    e(a, q) = tau_row(a);
    e(q, a) = tau_row(a);
  }
  e(q, q) = 1.0;
  return e;
}

std::vector<Matrix> e_tilde_all(const Matrix& tau) {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(tau.rows()));
  for (Index i = 0; i < tau.rows(); ++i) {
    out.push_back(e_tilde(tau.row(i).transpose()));
  }
  return out;
}

std::pair<Vector, Vector> m_step_alpha(const Matrix& tau, const Hyperpriors& priors) {
  const double n = static_cast<double>(tau.rows());
  const Vector class_mass = tau.colwise().sum().transpose();
  return {priors.eta0 + class_mass, priors.zeta0.array() + n - class_mass.array()};
}

WStep m_step_w(const AdjacencyMatrix& x, const Matrix& tau, const std::vector<Matrix>& e_tildes,
               const Matrix& xi, double a_n, double b_n) {
  const Index n = x.n();
  const Index q = tau.cols();
  const Index d = q + 1;
  const Index d2 = d * d;
  if (static_cast<Index>(e_tildes.size()) != n) {
    throw std::invalid_argument("m_step_w: one E~ per vertex required");
  }

  const Matrix t = tau_tilde_matrix(tau);
  const Matrix s = half_centered_edges(x);
  const Matrix lam = lambda_matrix(xi);
  const Matrix e_flat = e_tilde_flat(e_tildes);

  // Linear term sum_{i!=j} (x_ij - 1/2) (tau~_j kron tau~_i), gathered per target j.
  const Matrix targets = s.transpose() * t;  // row j = sum_i (x_ij - 1/2) tau~_i
  Vector linear = Vector::Zero(d2);
  for (Index j = 0; j < n; ++j) {
    for (Index p = 0; p < d; ++p) {
      linear.segment(p * d, d) += t(j, p) * targets.row(j).transpose();
    }
  }

  // Precision (a_n/b_n) I + 2 sum_j (E~_j kron A_j) with A_j = sum_i lambda_ij E~_i.
  const Matrix a_flat = lam.transpose() * e_flat;
  Matrix precision = Matrix::Zero(d2, d2);
  Vector a_row(d2);
  for (Index j = 0; j < n; ++j) {
    a_row = a_flat.row(j).transpose();
    const Eigen::Map<const Matrix> a_j(a_row.data(), d, d);
    const auto& e_j = e_tildes[static_cast<std::size_t>(j)];
    for (Index sc = 0; sc < d; ++sc) {
      for (Index rc = 0; rc < d; ++rc) {
        precision.block(rc * d, sc * d, d, d) += (2.0 * e_j(rc, sc)) * a_j;
      }
    }
  }
  precision.diagonal().array() += a_n / b_n;

  const CholeskyPsd chol(precision);
  WStep out;
  out.sigma_n = chol.inverse();
  // The inverse of a symmetric matrix through LLT picks up rounding asymmetry.
  out.sigma_n = 0.5 * (out.sigma_n + out.sigma_n.transpose()).eval();
  out.w_n_vec = chol.solve(linear);
  return out;
}

std::pair<double, double> m_step_beta(const Vector& w_n_vec, const Matrix& sigma_n, Index q,
                                      const Hyperpriors& priors) {
  const double d2 = static_cast<double>((q + 1) * (q + 1));
  const double a_n = priors.a0 + 0.5 * d2;
  const double b_n = priors.b0 + 0.5 * sigma_n.trace() + 0.5 * w_n_vec.squaredNorm();
  return {a_n, b_n};
}

std::pair<Matrix, Matrix> sigma_blocks(const Matrix& sigma_n, const Vector& w_n_vec, Index q,
                                       Index l) {
  const Index d2 = sigma_n.rows();
  const Index d = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(d2))));
  if (d * d != d2 || w_n_vec.size() != d2) {
    throw std::invalid_argument("sigma_blocks: dimensions inconsistent");
  }
  if (q < 0 || l < 0 || q >= d || l >= d) {
    throw std::invalid_argument("sigma_blocks: block index out of range");
  }
  const Matrix m = sigma_n + w_n_vec * w_n_vec.transpose();
  Matrix columns = m.block(q * d, l * d, d, d);
  Matrix rows(d, d);
  for (Index r = 0; r < d; ++r) {
    for (Index s = 0; s < d; ++s) {
      rows(r, s) = m(r * d + q, s * d + l);
    }
  }
  return {std::move(columns), std::move(rows)};
}

EStepResult e_step_tau(const AdjacencyMatrix& x, const VariationalState& state,
                       const Hyperpriors& priors, double tol, int max_sweeps, double clip) {
  check_state_dims(x, state, priors);
  const Index n = x.n();
  const Index q = state.q();
  const Index d = q + 1;

  const Matrix w = unvec(state.w_n_vec, d);
  const Matrix m = state.sigma_n + state.w_n_vec * state.w_n_vec.transpose();

  // Row/column second-moment blocks of q(W), indexed c*D + l.
  std::vector<Matrix> col_blocks(static_cast<std::size_t>(d * d));
  std::vector<Matrix> row_blocks(static_cast<std::size_t>(d * d));
  for (Index c = 0; c < d; ++c) {
    for (Index l = 0; l < d; ++l) {
      col_blocks[static_cast<std::size_t>(c * d + l)] = m.block(c * d, l * d, d, d);
      Matrix rb(d, d);
      for (Index r = 0; r < d; ++r) {
        for (Index s = 0; s < d; ++s) {
          rb(r, s) = m(r * d + c, s * d + l);
        }
      }
      row_blocks[static_cast<std::size_t>(c * d + l)] = std::move(rb);
    }
  }

  Vector digamma_gap(q);
  for (Index c = 0; c < q; ++c) {
    digamma_gap(c) = digamma(state.eta_n(c)) - digamma(state.zeta_n(c));
  }

  const Matrix s = half_centered_edges(x);
  const Matrix lam = lambda_matrix(state.xi);

  EStepResult result;
  result.tau = state.tau;
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < q; ++c) {
      result.tau(i, c) = clip_unit(result.tau(i, c), clip);
    }
  }
  Matrix t = tau_tilde_matrix(result.tau);
  Matrix e_flat = e_tilde_flat(e_tilde_all(result.tau));

  Matrix b_prime(d, d);
  Matrix b_col(d, d);

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (Index b = 0; b < n; ++b) {
      // Neighbour aggregates exclude j = b via the zeroed diagonals.
      const Vector s_out = (s.row(b) * t).transpose();
      const Vector s_in = (s.col(b).transpose() * t).transpose();
      const Vector lam_out_flat = (lam.row(b) * e_flat).transpose();
      const Vector lam_in_flat = (lam.col(b).transpose() * e_flat).transpose();
      const Eigen::Map<const Matrix> lam_out(lam_out_flat.data(), d, d);
      const Eigen::Map<const Matrix> lam_in(lam_in_flat.data(), d, d);
      const Vector out_term = w * s_out;
      const Vector in_term = w.transpose() * s_in;

      for (Index c = 0; c < q; ++c) {
        b_prime = row_blocks[static_cast<std::size_t>(c * d + c)];
        b_col = col_blocks[static_cast<std::size_t>(c * d + c)];
        for (Index l = 0; l < d; ++l) {
          if (l == c) continue;
          const double weight = 2.0 * t(b, l);
          b_prime.noalias() += weight * row_blocks[static_cast<std::size_t>(c * d + l)];
          b_col.noalias() += weight * col_blocks[static_cast<std::size_t>(c * d + l)];
        }
        // tr(A B) with symmetric B reduces to the elementwise product sum.
        const double trace_term =
            b_prime.cwiseProduct(lam_out).sum() + b_col.cwiseProduct(lam_in).sum();
        const double logit = digamma_gap(c) + out_term(c) + in_term(c) - trace_term;
        const double updated = clip_unit(logistic(logit), clip);
        max_delta = std::max(max_delta, std::fabs(updated - result.tau(b, c)));
        result.tau(b, c) = updated;
        t(b, c) = updated;
      }
      e_flat.row(b) =
          Eigen::Map<const Vector>(e_tilde(result.tau.row(b).transpose()).data(), d * d)
              .transpose();
    }
    result.sweeps = sweep;
    if (max_delta < tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

Matrix xi_step(const VariationalState& state, const std::vector<Matrix>& e_tildes,
               double floor_value) {
  const Index n = state.n();
  const Index d = state.q() + 1;
  if (static_cast<Index>(e_tildes.size()) != n) {
    throw std::invalid_argument("xi_step: one E~ per vertex required");
  }
  const Matrix m = state.sigma_n + state.w_n_vec * state.w_n_vec.transpose();
  const Matrix e_flat = e_tilde_flat(e_tildes);
  const Matrix squared = pair_second_moments(m, e_flat, d);
  Matrix xi = Matrix::Constant(n, n, floor_value);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = squared(i, j);
      xi(i, j) = std::max(v > 0.0 ? std::sqrt(v) : 0.0, floor_value);
    }
  }
  return xi;
}

double lower_bound(const AdjacencyMatrix& x, const VariationalState& state,
                   const Hyperpriors& priors) {
  check_state_dims(x, state, priors);
  const Index n = x.n();
  const Index q = state.q();
  const Index d = q + 1;
  const double d2 = static_cast<double>(d * d);

  const Matrix t = tau_tilde_matrix(state.tau);
  const Matrix w = unvec(state.w_n_vec, d);
  const Matrix m = state.sigma_n + state.w_n_vec * state.w_n_vec.transpose();
  const Matrix e_flat = e_tilde_flat(e_tilde_all(state.tau));

  const Matrix mean_logits = t * w * t.transpose();
  const Matrix second_moments = pair_second_moments(m, e_flat, d);

  // E[log h] under the local quadratic bound.
  double term_h = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double xi_ij = state.xi(i, j);
      const double lam = lambda_jj(xi_ij);
      term_h += (x.x(i, j) - 0.5) * mean_logits(i, j) - 0.5 * xi_ij + log_logistic(xi_ij) -
                lam * (second_moments(i, j) - xi_ij * xi_ij);
    }
  }

  // Memberships against q(alpha), plus the Beta prior/posterior cross terms.
  double term_z_prior = 0.0;
  double term_alpha = 0.0;
  for (Index c = 0; c < q; ++c) {
    const double eta = state.eta_n(c);
    const double zeta = state.zeta_n(c);
    const double e_log_a = digamma(eta) - digamma(eta + zeta);
    const double e_log_1ma = digamma(zeta) - digamma(eta + zeta);
    const double tau_sum = state.tau.col(c).sum();
    term_z_prior += tau_sum * e_log_a + (n - tau_sum) * e_log_1ma;
    term_alpha += log_gamma(priors.eta0(c) + priors.zeta0(c)) - log_gamma(priors.eta0(c)) -
                  log_gamma(priors.zeta0(c)) + (priors.eta0(c) - 1.0) * e_log_a +
                  (priors.zeta0(c) - 1.0) * e_log_1ma;
    term_alpha -= log_gamma(eta + zeta) - log_gamma(eta) - log_gamma(zeta) +
                  (eta - 1.0) * e_log_a + (zeta - 1.0) * e_log_1ma;
  }

  double entropy_z = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < q; ++c) {
      const double tau = state.tau(i, c);
      entropy_z -= tau * std::log(tau) + (1.0 - tau) * std::log1p(-tau);
    }
  }

  const double e_log_beta = digamma(state.a_n) - std::log(state.b_n);
  const double e_beta = state.a_n / state.b_n;
  const double weight_moment = state.sigma_n.trace() + state.w_n_vec.squaredNorm();

  const double term_w_prior =
      -0.5 * d2 * kLog2Pi + 0.5 * d2 * e_log_beta - 0.5 * e_beta * weight_moment;
  const double term_beta_prior = priors.a0 * std::log(priors.b0) - log_gamma(priors.a0) +
                                 (priors.a0 - 1.0) * e_log_beta - priors.b0 * e_beta;

  const CholeskyPsd sigma_chol(state.sigma_n);
  const double entropy_w = 0.5 * d2 * (1.0 + kLog2Pi) + 0.5 * sigma_chol.log_det();
  const double entropy_beta = log_gamma(state.a_n) - (state.a_n - 1.0) * digamma(state.a_n) -
                              std::log(state.b_n) + state.a_n;

  return term_h + term_z_prior + term_alpha + entropy_z + term_w_prior + term_beta_prior +
         entropy_w + entropy_beta;
}

double il_osbm(const AdjacencyMatrix& x, const VariationalState& state,
               const Hyperpriors& priors) {
  check_state_dims(x, state, priors);
  const Index n = x.n();
  const Index q = state.q();

  double xi_sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double xi_ij = state.xi(i, j);
      xi_sum += log_logistic(xi_ij) - 0.5 * xi_ij + lambda_jj(xi_ij) * xi_ij * xi_ij;
    }
  }

  double beta_ratios = 0.0;
  for (Index c = 0; c < q; ++c) {
    beta_ratios += log_gamma(priors.eta0(c) + priors.zeta0(c)) + log_gamma(state.eta_n(c)) +
                   log_gamma(state.zeta_n(c)) - log_gamma(priors.eta0(c)) -
                   log_gamma(priors.zeta0(c)) - log_gamma(state.eta_n(c) + state.zeta_n(c));
  }

  const double gamma_terms = log_gamma(state.a_n) - log_gamma(priors.a0) +
                             priors.a0 * std::log(priors.b0) +
                             state.a_n * (1.0 - priors.b0 / state.b_n - std::log(state.b_n));

  // Quadratic form against the posterior precision plus the log determinant.
  const PsdSolve solved = psd_solve_and_logdet(state.sigma_n, state.w_n_vec);
  const double weight_terms = 0.5 * state.w_n_vec.dot(solved.solution) + 0.5 * solved.log_det;

  double entropy_z = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < q; ++c) {
      const double tau = state.tau(i, c);
      entropy_z -= tau * std::log(tau) + (1.0 - tau) * std::log1p(-tau);
    }
  }

  return xi_sum + beta_ratios + gamma_terms + weight_terms + entropy_z;
}

VariationalState m_step_stationary(const AdjacencyMatrix& x, const Matrix& tau, const Matrix& xi,
                                   const Hyperpriors& priors) {
  const Index q = tau.cols();
  VariationalState state;
  state.tau = tau;
  for (Index i = 0; i < state.tau.rows(); ++i) {
    for (Index c = 0; c < q; ++c) {
      state.tau(i, c) = clip_unit(state.tau(i, c), 1e-10);
    }
  }
  state.xi = xi;

  const auto e_tildes = e_tilde_all(state.tau);
  std::tie(state.eta_n, state.zeta_n) = m_step_alpha(state.tau, priors);
  state.a_n = priors.a0 + 0.5 * static_cast<double>((q + 1) * (q + 1));

  // The covariance is scaled by a_n/b_n while b_n is a function of the
  // covariance; iterate the pair to its fixed point (a contraction here).
  double b_n = priors.b0;
  WStep ws;
  for (int iter = 0; iter < 500; ++iter) {
    ws = m_step_w(x, state.tau, e_tildes, state.xi, state.a_n, b_n);
    const double b_next = m_step_beta(ws.w_n_vec, ws.sigma_n, q, priors).second;
    const bool done = std::fabs(b_next - b_n) <= 1e-13 * std::fabs(b_next);
    b_n = b_next;
    if (done) break;
  }
  ws = m_step_w(x, state.tau, e_tildes, state.xi, state.a_n, b_n);
  state.w_n_vec = ws.w_n_vec;
  state.sigma_n = ws.sigma_n;
  state.b_n = m_step_beta(ws.w_n_vec, ws.sigma_n, q, priors).second;
  return state;
}

FitResult fit(const AdjacencyMatrix& x, Index q, const Matrix& init_tau, const Hyperpriors& priors,
              const FitOptions& opts) {
  const Index n = x.n();
  if (q < 1) throw std::invalid_argument("fit: at least one class required");
  if (n < 2) throw std::invalid_argument("fit: need at least two vertices");
  if (init_tau.rows() != n || init_tau.cols() != q) {
    throw std::invalid_argument("fit: init_tau must be N x Q");
  }
  priors.validate(q);
  if (priors.w0_vec.cwiseAbs().maxCoeff() != 0.0) {
    throw std::invalid_argument("fit: nonzero prior weight means are not supported");
  }

  VariationalState state;
  state.tau = init_tau;
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < q; ++c) {
      if (!std::isfinite(state.tau(i, c))) throw std::invalid_argument("fit: init_tau not finite");
      state.tau(i, c) = clip_unit(state.tau(i, c), opts.tau_clip);
    }
  }
  state.xi = Matrix::Constant(n, n, opts.xi_init);
  state.a_n = priors.a0;
  state.b_n = priors.b0;

  FitResult result;
  double previous = 0.0;
  bool have_previous = false;

  for (int iter = 1; iter <= opts.max_outer; ++iter) {
    const auto e_tildes = e_tilde_all(state.tau);
    std::tie(state.eta_n, state.zeta_n) = m_step_alpha(state.tau, priors);
    WStep ws = m_step_w(x, state.tau, e_tildes, state.xi, state.a_n, state.b_n);
    state.w_n_vec = std::move(ws.w_n_vec);
    state.sigma_n = std::move(ws.sigma_n);
    std::tie(state.a_n, state.b_n) = m_step_beta(state.w_n_vec, state.sigma_n, q, priors);

    // Criterion point: right after the M steps, before the local updates.
    result.il_osbm = il_osbm(x, state, priors);

    state.xi = xi_step(state, e_tildes, opts.xi_floor);
    EStepResult es = e_step_tau(x, state, priors, opts.inner_tol, opts.max_inner, opts.tau_clip);
    state.tau = std::move(es.tau);

    const double bound = lower_bound(x, state, priors);
    result.bound_trace.push_back(bound);
    result.iterations = iter;

    if (!std::isfinite(bound) || !state.tau.allFinite() || !state.w_n_vec.allFinite() ||
        !state.sigma_n.allFinite() || !state.xi.allFinite() || !std::isfinite(state.b_n)) {
      throw NonFiniteError("fit: non-finite state at outer iteration " + std::to_string(iter));
    }

    if (have_previous &&
        std::fabs(bound - previous) <= opts.outer_tol * std::fabs(bound)) {
      result.converged = true;
      break;
    }
    previous = bound;
    have_previous = true;
  }

  result.state = std::move(state);
  return result;
}

}  // namespace osbm
