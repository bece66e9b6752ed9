#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "osbm/errors.hpp"

namespace osbm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Logistic sigmoid (1+e^{-x})^{-1}, overflow-safe for any finite x.
double logistic(double x);

/// log of the logistic sigmoid, computed without forming g(x).
double log_logistic(double x);

// Local-bound curvature (g(xi)-1/2)/(2*xi). Switches to the series
// 1/8 - xi^2/96 below xi = 1e-4 where the direct formula cancels.
// Requires xi > 0.
double lambda_jj(double xi);

/// Digamma via upward recurrence plus an asymptotic tail. Requires x > 0.
double digamma(double x);

/// Log-gamma via a Lanczos approximation. Requires x > 0.
double log_gamma(double x);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// Beta(a, b) quantile, bisection on I_x(a, b) to 1e-10.
double beta_quantile(double a, double b, double p);

/// Standard normal quantile.
double normal_quantile(double p);

/// Column-stacking of a square matrix: out[c*dim + r] = m(r, c).
Vector vec(const Matrix& m);

/// Inverse of vec.
Matrix unvec(const Vector& v, Index dim);

/// Kronecker product; block (r, s) of the result is a(r, s) * b.
Matrix kron(const Matrix& a, const Matrix& b);

struct PsdSolve {
  Vector solution;
  double log_det;  // of the input matrix
};

// Cholesky with jitter escalation: on failure add 1e-10 * mean|diag| to the
// diagonal, retrying up to 3 times with a x10 step, then signal
// SingularMatrixError. The precision matrices here go near-singular when the
// membership posteriors collapse.
class CholeskyPsd {
 public:
  explicit CholeskyPsd(const Matrix& m);

  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;
  Matrix inverse() const;
  double log_det() const;
  double jitter() const { return jitter_; }

 private:
  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

/// Solve m*x = rhs for symmetric positive (semi-)definite m and return
/// log|m| as a side product. Jitter policy as in CholeskyPsd.
PsdSolve psd_solve_and_logdet(const Matrix& m, const Vector& rhs);

}  // namespace osbm
