#pragma once

#include <cstdint>
#include <utility>

#include "osbm/math.hpp"
#include "osbm/rng.hpp"

namespace osbm {

// Directed binary graph. The diagonal is stored as zero and never read; all
// pair sums in the engine run over ordered pairs i != j.
struct AdjacencyMatrix {
  Eigen::MatrixXi x;

  AdjacencyMatrix() = default;
  explicit AdjacencyMatrix(Index n) : x(Eigen::MatrixXi::Zero(n, n)) {}

  Index n() const { return x.rows(); }
};

// Binary class memberships, one row per vertex. Rows may hold several ones
// (overlaps) or none at all (the null component used for outliers).
struct MembershipMatrix {
  Eigen::MatrixXi z;

  Index n() const { return z.rows(); }
  Index q() const { return z.cols(); }
};

// Generative parameters: class probabilities alpha, class interaction matrix w,
// sender effects u, receiver effects v and the sparsity scalar w_star.
struct OsbmParameters {
  Vector alpha;
  Matrix w;
  Vector u;
  Vector v;
  double w_star = 0.0;

  Index q() const { return alpha.size(); }
  void validate() const;
};

// Scalar prior settings, expanded to full Hyperpriors once Q is known.
struct PriorConfig {
  double eta0 = 0.5;
  double zeta0 = 0.5;
  double a0 = 1.0;
  double b0 = 1.0;

  struct Hyperpriors make(Index q) const;
};

// Prior constants: Beta(eta0, zeta0) per class probability, Gamma(a0, b0) on
// the weight precision, and the Gaussian prior mean w0_vec. The engine
// currently requires w0_vec == 0 (the closed-form updates assume a centred
// prior); the field is kept so the schema will not change when the general
// case lands.
struct Hyperpriors {
  Vector eta0;
  Vector zeta0;
  double a0 = 1.0;
  double b0 = 1.0;
  Vector w0_vec;

  static Hyperpriors defaults(Index q);
  void validate(Index q) const;
};

/// Packs (w, u, v, w_star) into the (Q+1)x(Q+1) block matrix the edge law uses.
Matrix assemble_wtilde(const OsbmParameters& p);

/// Bilinear edge logit for membership rows z_i, z_j (homogeneous coordinate
/// appended internally); wtilde has dimension Q+1.
double edge_logit(const Vector& z_i, const Vector& z_j, const Matrix& wtilde);

/// Class probabilities proportional to a^q, q = 1..q_true.
Vector geometric_alpha(Index q_true, double a);

// Community-structured parameters: within-class weight `lambda` on the
// diagonal of w, -epsilon off it, u = v = epsilon.
OsbmParameters community_parameters(Index q, double lambda, double epsilon, double w_star,
                                    Vector alpha);

// Samples memberships (all rows first) then edges in row-major order, so a
// seed pins the entire bitstream. The generator is taken by value: callers
// keep their stream position.
std::pair<AdjacencyMatrix, MembershipMatrix> sample_network(const OsbmParameters& p, Index n,
                                                            Rng rng);
std::pair<AdjacencyMatrix, MembershipMatrix> sample_network(const OsbmParameters& p, Index n,
                                                            std::uint64_t seed);

/// Sum over ordered pairs of x_ij * a_ij + log g(-a_ij).
double complete_log_likelihood(const AdjacencyMatrix& x, const MembershipMatrix& z,
                               const Matrix& wtilde);

}  // namespace osbm
