#include "osbm/math.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace osbm {

double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_logistic(double x) {
  if (x >= 0.0) {
    return -std::log1p(std::exp(-x));
  }
  return x - std::log1p(std::exp(x));
}

double lambda_jj(double xi) {
  if (!(xi > 0.0) || !std::isfinite(xi)) {
    throw std::invalid_argument("lambda_jj: xi must be positive and finite");
  }
  if (xi < 1e-4) {
    // Taylor expansion of (g(xi)-1/2)/(2 xi); the direct formula loses ~8
    // digits to cancellation in this range.
    return 0.125 - xi * xi / 96.0;
  }
  return (logistic(xi) - 0.5) / (2.0 * xi);
}

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw std::invalid_argument("digamma: x must be positive and finite");
  }
  double acc = 0.0;
  while (x < 16.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Asymptotic tail with Bernoulli-number coefficients through x^-10.
  const double tail =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return acc + std::log(x) - 0.5 * inv - tail;
}

namespace {

constexpr double kLanczosG = 7.0;
constexpr double kLanczos[9] = {0.99999999999980993,     676.5203681218851,
                                -1259.1392167224028,     771.32342877765313,
                                -176.61502916214059,     12.507343278686905,
                                -0.13857109526572012,    9.9843695780195716e-6,
                                1.5056327351493116e-7};
constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kPi = 3.14159265358979323846;

double log_gamma_lanczos(double x) {
  // Valid for x >= 0.5.
  const double z = x - 1.0;
  double series = kLanczos[0];
  for (int i = 1; i < 9; ++i) {
    series += kLanczos[i] / (z + i);
  }
  const double t = z + kLanczosG + 0.5;
  return kHalfLog2Pi + (z + 0.5) * std::log(t) - t + std::log(series);
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw std::invalid_argument("log_gamma: x must be positive and finite");
  }
  if (x < 0.5) {
    // Reflection keeps the Lanczos series in its accurate range.
    return std::log(kPi / std::sin(kPi * x)) - log_gamma_lanczos(1.0 - x);
  }
  return log_gamma_lanczos(x);
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("regularized_incomplete_beta: a, b must be positive");
  }
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double beta_quantile(double a, double b, double p) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("beta_quantile: a, b must be positive");
  }
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (regularized_incomplete_beta(a, b, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
  }
  // Acklam's rational approximation, then one Halley step through erfc.
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double kLow = 0.02425;
  double x;
  if (p < kLow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - kLow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * kPi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

Vector vec(const Matrix& m) {
  // Eigen stores column-major, so the stacked-columns layout is the raw data.
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix unvec(const Vector& v, Index dim) {
  if (v.size() != dim * dim) {
    throw std::invalid_argument("unvec: length does not match dim^2");
  }
  return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    for (Index s = 0; s < a.cols(); ++s) {
      out.block(r * b.rows(), s * b.cols(), b.rows(), b.cols()) = a(r, s) * b;
    }
  }
  return out;
}

CholeskyPsd::CholeskyPsd(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("CholeskyPsd: matrix must be square");
  }
  const double scale = m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, scale)) {
    throw std::invalid_argument("CholeskyPsd: matrix is not symmetric");
  }
  const double base = 1e-10 * std::max(m.diagonal().cwiseAbs().mean(),
                                       std::numeric_limits<double>::min());
  double jitter = 0.0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Matrix candidate = m;
    if (jitter > 0.0) {
      candidate.diagonal().array() += jitter;
    }
    llt_.compute(candidate);
    if (llt_.info() == Eigen::Success) {
      jitter_ = jitter;
      return;
    }
    jitter = (attempt == 0) ? base : jitter * 10.0;
  }
  throw SingularMatrixError("CholeskyPsd: factorization failed after jitter escalation");
}

Vector CholeskyPsd::solve(const Vector& rhs) const { return llt_.solve(rhs); }

Matrix CholeskyPsd::solve(const Matrix& rhs) const { return llt_.solve(rhs); }

Matrix CholeskyPsd::inverse() const {
  const Index n = llt_.matrixLLT().rows();
  return llt_.solve(Matrix::Identity(n, n));
}

double CholeskyPsd::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

PsdSolve psd_solve_and_logdet(const Matrix& m, const Vector& rhs) {
  const CholeskyPsd chol(m);
  return PsdSolve{chol.solve(rhs), chol.log_det()};
}

}  // namespace osbm
