#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "osbm/metrics.hpp"
#include "osbm/selection.hpp"
#include "osbm/vbem.hpp"

using namespace osbm;

namespace {

AdjacencyMatrix random_graph(Index n, double density, Rng& rng) {
  AdjacencyMatrix x(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i != j) x.x(i, j) = rng.bernoulli(density) ? 1 : 0;
    }
  }
  return x;
}

Matrix random_tau(Index n, Index q, Rng& rng) {
  Matrix tau(n, q);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < q; ++c) tau(i, c) = 0.05 + 0.9 * rng.uniform01();
  }
  return tau;
}

Matrix random_xi(Index n, Rng& rng) {
  Matrix xi(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) xi(i, j) = 0.05 + 3.0 * rng.uniform01();
  }
  return xi;
}

// Literal ordered-pair sums with explicit Kronecker products.
void naive_w_step(const AdjacencyMatrix& x, const Matrix& tau, const Matrix& xi, double a_n,
                  double b_n, Vector* w_out, Matrix* sigma_out) {
  const Index n = x.n();
  const Index q = tau.cols();
  const Index d = q + 1;
  Matrix precision = (a_n / b_n) * Matrix::Identity(d * d, d * d);
  Vector linear = Vector::Zero(d * d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Matrix e_i = e_tilde(tau.row(i).transpose());
      const Matrix e_j = e_tilde(tau.row(j).transpose());
      precision += 2.0 * lambda_jj(xi(i, j)) * oracles::naive_kron(e_j, e_i);
      const Matrix t_i = tau_tilde(tau.row(i).transpose());
      const Matrix t_j = tau_tilde(tau.row(j).transpose());
      linear += (x.x(i, j) - 0.5) * oracles::naive_kron(t_j, t_i).col(0);
    }
  }
  const oracles::EliminationResult sol = oracles::eliminate(precision, linear);
  *w_out = sol.solution;
  Matrix sigma(d * d, d * d);
  for (Index c = 0; c < d * d; ++c) {
    sigma.col(c) = oracles::eliminate(precision, Vector::Unit(d * d, c)).solution;
  }
  *sigma_out = sigma;
}

VariationalState permuted_state(const VariationalState& s, const std::vector<Index>& perm) {
  const Index q = s.q();
  const Index d = q + 1;
  auto ext = [&](Index c) { return c < q ? perm[static_cast<std::size_t>(c)] : q; };
  VariationalState p;
  p.tau.resize(s.n(), q);
  p.eta_n.resize(q);
  p.zeta_n.resize(q);
  for (Index c = 0; c < q; ++c) {
    p.tau.col(c) = s.tau.col(ext(c));
    p.eta_n(c) = s.eta_n(ext(c));
    p.zeta_n(c) = s.zeta_n(ext(c));
  }
  p.w_n_vec.resize(d * d);
  p.sigma_n.resize(d * d, d * d);
  for (Index c = 0; c < d; ++c) {
    for (Index r = 0; r < d; ++r) {
      p.w_n_vec(c * d + r) = s.w_n_vec(ext(c) * d + ext(r));
    }
  }
  for (Index k1 = 0; k1 < d * d; ++k1) {
    const Index r1 = k1 % d;
    const Index c1 = k1 / d;
    for (Index k2 = 0; k2 < d * d; ++k2) {
      const Index r2 = k2 % d;
      const Index c2 = k2 / d;
      p.sigma_n(k1, k2) = s.sigma_n(ext(c1) * d + ext(r1), ext(c2) * d + ext(r2));
    }
  }
  p.a_n = s.a_n;
  p.b_n = s.b_n;
  p.xi = s.xi;
  return p;
}

/// Random but internally consistent mid-run state (one M pass from scratch).
VariationalState random_state(const AdjacencyMatrix& x, Index q, Rng& rng) {
  VariationalState s;
  s.tau = random_tau(x.n(), q, rng);
  s.xi = random_xi(x.n(), rng);
  const Hyperpriors priors = Hyperpriors::defaults(q);
  const auto e = e_tilde_all(s.tau);
  std::tie(s.eta_n, s.zeta_n) = m_step_alpha(s.tau, priors);
  const WStep ws = m_step_w(x, s.tau, e, s.xi, 1.0, 1.0);
  s.w_n_vec = ws.w_n_vec;
  s.sigma_n = ws.sigma_n;
  std::tie(s.a_n, s.b_n) = m_step_beta(ws.w_n_vec, ws.sigma_n, q, priors);
  return s;
}

}  // namespace

TEST_CASE("tau_tilde appends the unit coordinate") {
  Vector row(3);
  row << 0.2, 0.9, 0.4;
  const Vector t = tau_tilde(row);
  CHECK(t.size() == 4);
  CHECK(t(3) == 1.0);
  const Matrix tm = tau_tilde_matrix(Matrix::Constant(5, 2, 0.3));
  CHECK(tm.cols() == 3);
  CHECK((tm.col(2).array() == 1.0).all());
}

TEST_CASE("e_tilde structure") {
  {
    const Matrix e = e_tilde(Vector::Zero(2));
    CHECK(e.rows() == 3);
    for (Index r = 0; r < 2; ++r) {
      for (Index c = 0; c < 3; ++c) {
        CHECK(e(r, c) == 0.0);
        CHECK(e(c, r) == 0.0);
      }
    }
    CHECK(e(2, 2) == 1.0);
  }
  {
    const Matrix e = e_tilde(Vector::Ones(1));
    CHECK(e(0, 0) == 1.0);
    CHECK(e(0, 1) == 1.0);
    CHECK(e(1, 0) == 1.0);
    CHECK(e(1, 1) == 1.0);
  }
  {
    const Matrix e = e_tilde(Vector::Constant(2, 0.5));
    CHECK(e(0, 0) == 0.5);  // diagonal keeps tau, not tau^2
    CHECK(e(1, 1) == 0.5);
    CHECK(e(0, 1) == 0.25);
    CHECK(e(1, 0) == 0.25);
    CHECK(e(0, 2) == 0.5);
    CHECK(e(2, 1) == 0.5);
    CHECK(e(2, 2) == 1.0);
  }
}

TEST_CASE("m_step_alpha formulas and the sum identity") {
  const Hyperpriors priors = Hyperpriors::defaults(1);
  {
    const auto [eta, zeta] = m_step_alpha(Matrix::Zero(10, 1), priors);
    CHECK(eta(0) == doctest::Approx(0.5));
    CHECK(zeta(0) == doctest::Approx(10.5));
  }
  {
    const auto [eta, zeta] = m_step_alpha(Matrix::Ones(10, 1), priors);
    CHECK(eta(0) == doctest::Approx(10.5));
    CHECK(zeta(0) == doctest::Approx(0.5));
  }
  Rng rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const Index n = 3 + static_cast<Index>(rng.below(20));
    const Index q = 1 + static_cast<Index>(rng.below(4));
    const Matrix tau = random_tau(n, q, rng);
    const Hyperpriors h = Hyperpriors::defaults(q);
    const auto [eta, zeta] = m_step_alpha(tau, h);
    for (Index c = 0; c < q; ++c) {
      CHECK(eta(c) + zeta(c) ==
            doctest::Approx(h.eta0(c) + h.zeta0(c) + static_cast<double>(n)).epsilon(1e-12));
    }
  }
}

TEST_CASE("m_step_w pinned two-vertex case") {
  AdjacencyMatrix x(2);
  x.x(0, 1) = 1;
  x.x(1, 0) = 1;
  const Matrix tau = Matrix::Zero(2, 1);
  Matrix xi(2, 2);
  xi << 1.0, 0.7, 1.3, 1.0;
  const double a_n = 2.0;
  const double b_n = 3.0;
  const WStep ws = m_step_w(x, tau, e_tilde_all(tau), xi, a_n, b_n);

  const double coupling = 2.0 * (lambda_jj(0.7) + lambda_jj(1.3));
  const double corner_precision = a_n / b_n + coupling;
  for (Index k = 0; k < 3; ++k) {
    CHECK(ws.w_n_vec(k) == doctest::Approx(0.0));
    CHECK(ws.sigma_n(k, k) == doctest::Approx(b_n / a_n).epsilon(1e-12));
  }
  CHECK(ws.sigma_n(3, 3) == doctest::Approx(1.0 / corner_precision).epsilon(1e-12));
  CHECK(ws.w_n_vec(3) == doctest::Approx(1.0 / corner_precision).epsilon(1e-12));
}

TEST_CASE("m_step_w against the dense assembly oracle") {
  Rng rng(17);
  for (int rep = 0; rep < 4; ++rep) {
    const Index n = 4;
    const Index q = 2;
    const AdjacencyMatrix x = random_graph(n, 0.5, rng);
    const Matrix tau = random_tau(n, q, rng);
    const Matrix xi = random_xi(n, rng);
    const double a_n = 0.5 + rng.uniform01();
    const double b_n = 0.5 + rng.uniform01();
    const WStep ws = m_step_w(x, tau, e_tilde_all(tau), xi, a_n, b_n);
    Vector w_ref;
    Matrix sigma_ref;
    naive_w_step(x, tau, xi, a_n, b_n, &w_ref, &sigma_ref);
    CHECK((ws.w_n_vec - w_ref).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((ws.sigma_n - sigma_ref).cwiseAbs().maxCoeff() < 1e-9);

    // posterior covariance stays symmetric positive definite
    CHECK((ws.sigma_n - ws.sigma_n.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(ws.sigma_n);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("m_step_w prior domination") {
  Rng rng(23);
  const AdjacencyMatrix x = random_graph(6, 0.5, rng);
  const Matrix tau = random_tau(6, 2, rng);
  const Matrix xi = random_xi(6, rng);
  const WStep strong = m_step_w(x, tau, e_tilde_all(tau), xi, 1e12, 1.0);
  CHECK(strong.w_n_vec.cwiseAbs().maxCoeff() < 1e-9);
  const WStep weak = m_step_w(x, tau, e_tilde_all(tau), xi, 1.0, 1.0);
  CHECK(weak.w_n_vec.cwiseAbs().maxCoeff() > strong.w_n_vec.cwiseAbs().maxCoeff());
}

TEST_CASE("m_step_beta") {
  const Hyperpriors h3 = Hyperpriors::defaults(3);
  const auto [a3, b3] = m_step_beta(Vector::Zero(16), Matrix::Zero(16, 16), 3, h3);
  CHECK(a3 == doctest::Approx(9.0));  // a0 + (Q+1)^2/2 with Q=3
  CHECK(b3 == doctest::Approx(1.0));

  const Hyperpriors h1 = Hyperpriors::defaults(1);
  const auto [a1, b1] = m_step_beta(Vector::Zero(4), Matrix::Identity(4, 4), 1, h1);
  CHECK(a1 == doctest::Approx(3.0));
  CHECK(b1 == doctest::Approx(3.0));  // b0 + trace/2

  Rng rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    Vector w(4);
    for (Index k = 0; k < 4; ++k) w(k) = rng.normal();
    const Matrix sigma = oracles::random_spd(4, rng);
    const auto [a, b] = m_step_beta(w, sigma, 1, h1);
    CHECK(b > h1.b0);
    CHECK(a == doctest::Approx(3.0));
  }
}

TEST_CASE("sigma_blocks structure and Monte Carlo oracle") {
  {
    // point-mass posterior: blocks collapse to outer products of the mean
    Vector w(4);
    w << 1.0, 2.0, 3.0, 4.0;  // weight matrix [[1,3],[2,4]]
    const auto [cols, rows] = sigma_blocks(Matrix::Zero(4, 4), w, 0, 1);
    Matrix expected_cols(2, 2);
    expected_cols << 1.0 * 3.0, 1.0 * 4.0, 2.0 * 3.0, 2.0 * 4.0;
    CHECK((cols - expected_cols).cwiseAbs().maxCoeff() == 0.0);
    Matrix expected_rows(2, 2);
    expected_rows << 1.0 * 2.0, 1.0 * 4.0, 3.0 * 2.0, 3.0 * 4.0;
    CHECK((rows - expected_rows).cwiseAbs().maxCoeff() == 0.0);
  }
  {
    const auto [cols_same, rows_same] =
        sigma_blocks(Matrix::Identity(4, 4), Vector::Zero(4), 1, 1);
    CHECK((cols_same - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    const auto [cols_diff, rows_diff] =
        sigma_blocks(Matrix::Identity(4, 4), Vector::Zero(4), 0, 1);
    CHECK(cols_diff.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rows_diff.cwiseAbs().maxCoeff() == 0.0);
  }

  // Monte Carlo second moments of Gaussian draws
  Rng rng(71);
  const Index d = 2;
  Vector mean(4);
  for (Index k = 0; k < 4; ++k) mean(k) = rng.normal();
  const Matrix sigma = oracles::random_spd(4, rng, 0.3);
  const Eigen::LLT<Matrix> llt(sigma);
  const Matrix chol = llt.matrixL();

  const int samples = 200000;
  Matrix acc_cols = Matrix::Zero(d, d);
  Matrix acc_rows = Matrix::Zero(d, d);
  const Index q_idx = 0;
  const Index l_idx = 1;
  for (int s = 0; s < samples; ++s) {
    Vector z(4);
    for (Index k = 0; k < 4; ++k) z(k) = rng.normal();
    const Vector w = mean + chol * z;
    const Matrix wm = unvec(w, d);
    acc_cols += wm.col(q_idx) * wm.col(l_idx).transpose();
    acc_rows += wm.row(q_idx).transpose() * wm.row(l_idx);
  }
  acc_cols /= samples;
  acc_rows /= samples;
  const auto [cols, rows] = sigma_blocks(sigma, mean, q_idx, l_idx);
  const double scale = std::max(1.0, cols.cwiseAbs().maxCoeff());
  CHECK((cols - acc_cols).cwiseAbs().maxCoeff() < 0.015 * scale);
  CHECK((rows - acc_rows).cwiseAbs().maxCoeff() < 0.015 * scale);
}

TEST_CASE("e_step_tau symmetric fixed point") {
  AdjacencyMatrix x(3);
  x.x(0, 1) = 1;
  x.x(2, 0) = 1;
  VariationalState s;
  s.tau = Matrix::Constant(3, 1, 0.37);
  s.eta_n = Vector::Constant(1, 2.0);
  s.zeta_n = Vector::Constant(1, 2.0);
  s.w_n_vec = Vector::Zero(4);
  s.sigma_n = Matrix::Zero(4, 4);
  s.a_n = 1.0;
  s.b_n = 1.0;
  s.xi = Matrix::Constant(3, 3, 0.5);
  const EStepResult r = e_step_tau(x, s, Hyperpriors::defaults(1));
  CHECK(r.converged);
  for (Index i = 0; i < 3; ++i) CHECK(r.tau(i, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("e_step_tau matches grid search of the bound on a two-vertex instance") {
  Rng rng(123);
  AdjacencyMatrix x(2);
  x.x(0, 1) = 1;
  x.x(1, 0) = 0;
  VariationalState s = random_state(x, 1, rng);

  const Hyperpriors priors = Hyperpriors::defaults(1);
  const EStepResult fixed = e_step_tau(x, s, priors, 1e-12, 500);
  CHECK(fixed.converged);

  VariationalState probe = s;
  double best = -1e300;
  double best_t0 = 0.0;
  double best_t1 = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    for (int j = 0; j <= 1000; ++j) {
      const double t0 = std::min(1.0 - 1e-10, std::max(1e-10, i / 1000.0));
      const double t1 = std::min(1.0 - 1e-10, std::max(1e-10, j / 1000.0));
      probe.tau(0, 0) = t0;
      probe.tau(1, 0) = t1;
      const double value = lower_bound(x, probe, priors);
      if (value > best) {
        best = value;
        best_t0 = t0;
        best_t1 = t1;
      }
    }
  }
  CHECK(std::fabs(fixed.tau(0, 0) - best_t0) < 2e-3);
  CHECK(std::fabs(fixed.tau(1, 0) - best_t1) < 2e-3);
  probe.tau = fixed.tau;
  CHECK(lower_bound(x, probe, priors) >= best - 1e-9 * std::fabs(best));
}

TEST_CASE("e_step_tau is equivariant under class relabeling") {
  Rng rng(57);
  const AdjacencyMatrix x = random_graph(8, 0.4, rng);
  const VariationalState s = random_state(x, 3, rng);
  const std::vector<Index> perm = {2, 0, 1};

  const EStepResult base = e_step_tau(x, s, Hyperpriors::defaults(3), 1e-12, 800);
  const VariationalState sp = permuted_state(s, perm);
  const EStepResult permuted = e_step_tau(x, sp, Hyperpriors::defaults(3), 1e-12, 800);
  REQUIRE(base.converged);
  REQUIRE(permuted.converged);
  for (Index c = 0; c < 3; ++c) {
    CHECK((permuted.tau.col(c) - base.tau.col(perm[static_cast<std::size_t>(c)]))
              .cwiseAbs()
              .maxCoeff() < 1e-8);
  }
}

TEST_CASE("xi_step closed forms") {
  Rng rng(91);
  {
    // point-mass posterior with binary memberships: xi is |edge logit|
    const Index n = 5;
    const Index q = 2;
    Matrix tau(n, q);
    for (Index i = 0; i < n; ++i) {
      for (Index c = 0; c < q; ++c) tau(i, c) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    VariationalState s;
    s.tau = tau;
    s.eta_n = Vector::Constant(q, 1.0);
    s.zeta_n = Vector::Constant(q, 1.0);
    Vector w(9);
    for (Index k = 0; k < 9; ++k) w(k) = rng.normal();
    s.w_n_vec = w;
    s.sigma_n = Matrix::Zero(9, 9);
    s.a_n = s.b_n = 1.0;
    s.xi = Matrix::Constant(n, n, 1.0);
    const Matrix xi = xi_step(s, e_tilde_all(tau));
    const Matrix wt = unvec(w, 3);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double logit = edge_logit(tau.row(i).transpose(), tau.row(j).transpose(), wt);
        CHECK(xi(i, j) ==
              doctest::Approx(std::max(std::fabs(logit), 1e-8)).epsilon(1e-9));
      }
    }
  }
  {
    // fully degenerate state floors at 1e-8
    VariationalState s;
    s.tau = Matrix::Zero(3, 1);
    s.eta_n = Vector::Constant(1, 1.0);
    s.zeta_n = Vector::Constant(1, 1.0);
    s.w_n_vec = Vector::Zero(4);
    s.sigma_n = Matrix::Zero(4, 4);
    s.a_n = s.b_n = 1.0;
    s.xi = Matrix::Constant(3, 3, 1.0);
    const Matrix xi = xi_step(s, e_tilde_all(s.tau));
    CHECK(xi(0, 1) == doctest::Approx(1e-8));
  }
}

TEST_CASE("xi_step agrees with the naive Kronecker trace") {
  Rng rng(97);
  const AdjacencyMatrix x = random_graph(4, 0.5, rng);
  const VariationalState s = random_state(x, 2, rng);
  const Matrix xi = xi_step(s, e_tilde_all(s.tau));
  const Matrix m = s.sigma_n + s.w_n_vec * s.w_n_vec.transpose();
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 4; ++j) {
      if (i == j) continue;
      const Matrix k = oracles::naive_kron(e_tilde(s.tau.row(j).transpose()),
                                           e_tilde(s.tau.row(i).transpose()));
      const double expected = std::sqrt((m * k).trace());
      CHECK(xi(i, j) == doctest::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("xi_step maximizes the bound per coordinate") {
  Rng rng(101);
  const AdjacencyMatrix x = random_graph(5, 0.5, rng);
  VariationalState s = random_state(x, 2, rng);
  s.xi = xi_step(s, e_tilde_all(s.tau));
  const Hyperpriors priors = Hyperpriors::defaults(2);
  const double at_optimum = lower_bound(x, s, priors);
  const std::vector<std::pair<Index, Index>> pairs = {{0, 1}, {2, 4}, {3, 0}};
  for (const auto& [i, j] : pairs) {
    for (const double factor : {0.9, 1.1}) {
      VariationalState probe = s;
      probe.xi(i, j) = s.xi(i, j) * factor;
      CHECK(lower_bound(x, probe, priors) <= at_optimum + 1e-10 * std::fabs(at_optimum));
    }
  }
}

TEST_CASE("lower_bound stays below the Monte Carlo evidence") {
  Rng rng(201);
  for (int rep = 0; rep < 2; ++rep) {
    const AdjacencyMatrix x = random_graph(4, 0.5, rng);
    const Hyperpriors priors = Hyperpriors::defaults(1);
    const FitResult fitted = fit(x, 1, Matrix::Constant(4, 1, 0.4), priors);
    Rng mc(500 + rep);
    const oracles::EvidenceEstimate evidence =
        oracles::mc_log_evidence(x.x, 1, 0.5, 0.5, 1.0, 1.0, 200000, mc);
    CHECK(fitted.bound_trace.back() <= evidence.log_mean + 3.0 * evidence.se_log);
    CHECK(fitted.il_osbm <= evidence.log_mean + 3.0 * evidence.se_log);
  }
}

TEST_CASE("il_osbm equals the full decomposition at M-stationary states") {
  Rng rng(301);
  for (const Index q : {1, 2, 3}) {
    const AdjacencyMatrix x = random_graph(7, 0.45, rng);
    const Matrix tau = random_tau(7, q, rng);
    const Matrix xi = random_xi(7, rng);
    const Hyperpriors priors = Hyperpriors::defaults(q);
    const VariationalState s = m_step_stationary(x, tau, xi, priors);
    const double closed_form = il_osbm(x, s, priors);
    const double decomposition = lower_bound(x, s, priors);
    CHECK(std::fabs(closed_form - decomposition) <= 1e-8 * std::fabs(decomposition));
  }
}

TEST_CASE("il_osbm entropy is zero only for clipped-binary tau") {
  Rng rng(311);
  const AdjacencyMatrix x = random_graph(5, 0.5, rng);
  Matrix tau(5, 2);
  for (Index i = 0; i < 5; ++i) {
    for (Index c = 0; c < 2; ++c) tau(i, c) = rng.bernoulli(0.5) ? 1.0 - 1e-10 : 1e-10;
  }
  auto entropy = [](const Matrix& t) {
    double h = 0.0;
    for (Index i = 0; i < t.rows(); ++i) {
      for (Index c = 0; c < t.cols(); ++c) {
        h -= t(i, c) * std::log(t(i, c)) + (1.0 - t(i, c)) * std::log1p(-t(i, c));
      }
    }
    return h;
  };
  CHECK(entropy(tau) < 1e-7);
  CHECK(entropy(Matrix::Constant(5, 2, 0.5)) > 1.0);
}

TEST_CASE("fit recovers planted blocks and keeps the ascent property") {
  const OsbmParameters params =
      community_parameters(2, 6.0, 1.0, -5.5, Vector::Constant(2, 0.5));
  auto [x, z_true] = sample_network(params, 30, std::uint64_t{42});
  const Hyperpriors priors = Hyperpriors::defaults(2);
  const FitResult fitted = fit_restarts(x, 2, priors, 7, 8);
  CHECK(fitted.converged);

  for (std::size_t t = 1; t < fitted.bound_trace.size(); ++t) {
    CHECK(fitted.bound_trace[t] >=
          fitted.bound_trace[t - 1] - 1e-8 * std::fabs(fitted.bound_trace[t - 1]));
  }

  const MembershipMatrix z_hat = threshold_memberships(fitted.state.tau, 0.5);
  CHECK(cluster_distance(z_true, z_hat) < 0.1);

  // tau stays inside the clipping interval
  CHECK(fitted.state.tau.minCoeff() >= 1e-10);
  CHECK(fitted.state.tau.maxCoeff() <= 1.0 - 1e-10);

  // a converged E step barely moves when re-run
  const EStepResult rerun = e_step_tau(x, fitted.state, priors);
  CHECK((rerun.tau - fitted.state.tau).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("fit ascent on random instances") {
  Rng rng(401);
  for (int rep = 0; rep < 6; ++rep) {
    const Index n = 12 + static_cast<Index>(rng.below(10));
    const Index q = 1 + static_cast<Index>(rng.below(3));
    const AdjacencyMatrix x = random_graph(n, 0.15 + 0.4 * rng.uniform01(), rng);
    const FitResult fitted = fit(x, q, random_tau(n, q, rng), Hyperpriors::defaults(q));
    for (std::size_t t = 1; t < fitted.bound_trace.size(); ++t) {
      CHECK(fitted.bound_trace[t] >=
            fitted.bound_trace[t - 1] - 1e-8 * std::fabs(fitted.bound_trace[t - 1]));
    }
  }
}

TEST_CASE("fit determinism") {
  Rng rng(501);
  const AdjacencyMatrix x = random_graph(15, 0.3, rng);
  const Matrix init = kmeans_init(x, 2, 99);
  const Hyperpriors priors = Hyperpriors::defaults(2);
  const FitResult a = fit(x, 2, init, priors);
  const FitResult b = fit(x, 2, init, priors);
  CHECK(a.il_osbm == b.il_osbm);
  CHECK(a.iterations == b.iterations);
  CHECK((a.state.tau - b.state.tau).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.state.w_n_vec - b.state.w_n_vec).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.bound_trace == b.bound_trace);
}

TEST_CASE("fit equivariance under init relabeling") {
  const OsbmParameters params =
      community_parameters(3, 6.0, 1.0, -5.5, Vector::Constant(3, 1.0 / 3.0));
  auto [x, z_true] = sample_network(params, 24, std::uint64_t{77});
  const Hyperpriors priors = Hyperpriors::defaults(3);
  FitOptions tight;
  tight.outer_tol = 1e-10;
  tight.inner_tol = 1e-8;
  tight.max_outer = 2000;
  tight.max_inner = 200;

  const Matrix init = kmeans_init(x, 3, 3);
  const std::vector<Index> perm = {1, 2, 0};
  Matrix init_perm(init.rows(), 3);
  for (Index c = 0; c < 3; ++c) init_perm.col(c) = init.col(perm[static_cast<std::size_t>(c)]);

  const FitResult base = fit(x, 3, init, priors, tight);
  const FitResult permuted = fit(x, 3, init_perm, priors, tight);
  CHECK(std::fabs(base.il_osbm - permuted.il_osbm) <= 1e-8 * std::fabs(base.il_osbm));
  for (Index c = 0; c < 3; ++c) {
    CHECK((permuted.state.tau.col(c) - base.state.tau.col(perm[static_cast<std::size_t>(c)]))
              .cwiseAbs()
              .maxCoeff() < 1e-5);
  }
}

TEST_CASE("fit validates inputs") {
  AdjacencyMatrix x(4);
  CHECK_THROWS_AS(fit(x, 0, Matrix::Zero(4, 1), Hyperpriors::defaults(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit(x, 1, Matrix::Zero(3, 1), Hyperpriors::defaults(1)),
                  std::invalid_argument);
  Hyperpriors shifted = Hyperpriors::defaults(1);
  shifted.w0_vec(0) = 1.0;
  CHECK_THROWS_AS(fit(x, 1, Matrix::Constant(4, 1, 0.5), shifted), std::invalid_argument);
}

TEST_CASE("xi stationarity of the bound after a fit") {
  Rng rng(601);
  const AdjacencyMatrix x = random_graph(6, 0.4, rng);
  const Hyperpriors priors = Hyperpriors::defaults(2);
  FitResult fitted = fit(x, 2, random_tau(6, 2, rng), priors);
  fitted.state.xi = xi_step(fitted.state, e_tilde_all(fitted.state.tau));
  const double bound = lower_bound(x, fitted.state, priors);
  const double tolerance = 1e-5 * (1.0 + std::fabs(bound));
  for (Index i = 0; i < 6; ++i) {
    for (Index j = 0; j < 6; ++j) {
      if (i == j) continue;
      const double h = 1e-4 * std::max(fitted.state.xi(i, j), 1e-3);
      VariationalState plus = fitted.state;
      VariationalState minus = fitted.state;
      plus.xi(i, j) += h;
      minus.xi(i, j) -= h;
      const double derivative =
          (lower_bound(x, plus, priors) - lower_bound(x, minus, priors)) / (2.0 * h);
      CHECK(std::fabs(derivative) < tolerance);
    }
  }
}
