#include "osbm/model.hpp"

#include <cmath>
#include <stdexcept>

namespace osbm {

void OsbmParameters::validate() const {
  const Index qn = q();
  if (qn < 1) throw std::invalid_argument("OsbmParameters: at least one class required");
  if (w.rows() != qn || w.cols() != qn || u.size() != qn || v.size() != qn) {
    throw std::invalid_argument("OsbmParameters: inconsistent dimensions");
  }
  for (Index i = 0; i < qn; ++i) {
    if (!(alpha(i) > 0.0) || !(alpha(i) < 1.0)) {
      throw std::invalid_argument("OsbmParameters: alpha entries must lie in (0,1)");
    }
  }
  if (!w.allFinite() || !u.allFinite() || !v.allFinite() || !std::isfinite(w_star)) {
    throw std::invalid_argument("OsbmParameters: non-finite entry");
  }
}

Hyperpriors PriorConfig::make(Index q) const {
  Hyperpriors h;
  h.eta0 = Vector::Constant(q, eta0);
  h.zeta0 = Vector::Constant(q, zeta0);
  h.a0 = a0;
  h.b0 = b0;
  h.w0_vec = Vector::Zero((q + 1) * (q + 1));
  h.validate(q);
  return h;
}

Hyperpriors Hyperpriors::defaults(Index q) { return PriorConfig{}.make(q); }

void Hyperpriors::validate(Index q) const {
  if (eta0.size() != q || zeta0.size() != q) {
    throw std::invalid_argument("Hyperpriors: eta0/zeta0 must have one entry per class");
  }
  if ((eta0.array() <= 0.0).any() || (zeta0.array() <= 0.0).any()) {
    throw std::invalid_argument("Hyperpriors: eta0/zeta0 entries must be positive");
  }
  if (!(a0 > 0.0) || !(b0 > 0.0)) {
    throw std::invalid_argument("Hyperpriors: a0, b0 must be positive");
  }
  if (w0_vec.size() != (q + 1) * (q + 1)) {
    throw std::invalid_argument("Hyperpriors: w0_vec must have length (Q+1)^2");
  }
  if (!w0_vec.allFinite()) {
    throw std::invalid_argument("Hyperpriors: w0_vec must be finite");
  }
}

Matrix assemble_wtilde(const OsbmParameters& p) {
  p.validate();
  const Index q = p.q();
  Matrix wt(q + 1, q + 1);
  wt.topLeftCorner(q, q) = p.w;
  wt.block(0, q, q, 1) = p.u;
  wt.block(q, 0, 1, q) = p.v.transpose();
  wt(q, q) = p.w_star;
  return wt;
}

double edge_logit(const Vector& z_i, const Vector& z_j, const Matrix& wtilde) {
  const Index q = wtilde.rows() - 1;
  if (z_i.size() != q || z_j.size() != q) {
    throw std::invalid_argument("edge_logit: membership rows must have length Q");
  }
  Vector zi_t(q + 1);
  zi_t << z_i, 1.0;
  Vector zj_t(q + 1);
  zj_t << z_j, 1.0;
  return zi_t.dot(wtilde * zj_t);
}

Vector geometric_alpha(Index q_true, double a) {
  if (q_true < 1) throw std::invalid_argument("geometric_alpha: q_true must be >= 1");
  if (!(a > 0.0)) throw std::invalid_argument("geometric_alpha: a must be positive");
  Vector alpha(q_true);
  for (Index k = 0; k < q_true; ++k) {
    alpha(k) = std::pow(a, static_cast<double>(k + 1));
  }
  alpha /= alpha.sum();
  return alpha;
}

OsbmParameters community_parameters(Index q, double lambda, double epsilon, double w_star,
                                    Vector alpha) {
  OsbmParameters p;
  p.alpha = std::move(alpha);
  p.w = Matrix::Constant(q, q, -epsilon);
  p.w.diagonal().setConstant(lambda);
  p.u = Vector::Constant(q, epsilon);
  p.v = Vector::Constant(q, epsilon);
  p.w_star = w_star;
  p.validate();
  return p;
}

std::pair<AdjacencyMatrix, MembershipMatrix> sample_network(const OsbmParameters& p, Index n,
                                                            Rng rng) {
  p.validate();
  if (n < 2) throw std::invalid_argument("sample_network: need at least two vertices");
  const Index q = p.q();
  const Matrix wt = assemble_wtilde(p);

  // Memberships first, then edges in row-major order: the seed pins the stream.
  MembershipMatrix z;
  z.z.setZero(n, q);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < q; ++c) {
      z.z(i, c) = rng.bernoulli(p.alpha(c)) ? 1 : 0;
    }
  }

  Matrix z_tilde(n, q + 1);
  z_tilde.leftCols(q) = z.z.cast<double>();
  z_tilde.col(q).setOnes();

  AdjacencyMatrix x(n);
  for (Index i = 0; i < n; ++i) {
    const Vector wt_zi = wt.transpose() * z_tilde.row(i).transpose();
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double logit = wt_zi.dot(z_tilde.row(j).transpose());
      x.x(i, j) = rng.bernoulli(logistic(logit)) ? 1 : 0;
    }
  }
  return {std::move(x), std::move(z)};
}

std::pair<AdjacencyMatrix, MembershipMatrix> sample_network(const OsbmParameters& p, Index n,
                                                            std::uint64_t seed) {
  return sample_network(p, n, Rng(seed));
}

double complete_log_likelihood(const AdjacencyMatrix& x, const MembershipMatrix& z,
                               const Matrix& wtilde) {
  const Index n = x.n();
  if (z.n() != n || wtilde.rows() != z.q() + 1) {
    throw std::invalid_argument("complete_log_likelihood: inconsistent dimensions");
  }
  const Index q = z.q();
  Matrix z_tilde(n, q + 1);
  z_tilde.leftCols(q) = z.z.cast<double>();
  z_tilde.col(q).setOnes();
  const Matrix logits = z_tilde * wtilde * z_tilde.transpose();
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      total += x.x(i, j) * logits(i, j) + log_logistic(-logits(i, j));
    }
  }
  return total;
}

}  // namespace osbm
