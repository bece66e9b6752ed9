#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "osbm/vbem.hpp"

namespace osbm {

// k-means on the concatenated (out-row, in-column) connectivity profiles with
// k-means++ seeding; the assigned class gets tau = 0.9, the others 0.1.
// Deterministic given the seed. Requires q <= N.
Matrix kmeans_init(const AdjacencyMatrix& x, Index q, std::uint64_t seed);

struct RestartOutcome {
  std::uint64_t seed = 0;
  double il = 0.0;
  bool ok = false;
  std::string error;
};

// Best-of-restarts fit. Restart r draws its init from a fixed rotation
// (k-means partition, k-means with a null cluster for the sparsest vertices,
// degree-masked k-means, random soft memberships) seeded by (seed, q, r);
// the winner then gets a complement-canonicalization polish (refits from
// single-class membership flips, kept only when the criterion improves).
// Deterministic given the inputs. Per-restart outcomes are appended to
// `outcomes` when given; `best_restart` receives the index of the restart
// that seeded the returned fit. Throws NonFiniteError if every restart fails.
FitResult fit_restarts(const AdjacencyMatrix& x, Index q, const Hyperpriors& priors,
                       std::uint64_t seed, int restarts, const FitOptions& opts = {},
                       std::vector<RestartOutcome>* outcomes = nullptr,
                       int* best_restart = nullptr);

struct SelectionCell {
  Index q = 0;
  std::optional<FitResult> best;  // absent when every restart failed
  int best_restart = -1;
  std::vector<RestartOutcome> restarts;
  double wall_ms = 0.0;  // diagnostic only, not part of the reproducible payload
};

struct SelectionReport {
  std::vector<SelectionCell> cells;
  Index q_star = 0;
  double best_il = 0.0;
};

struct SelectOptions {
  int restarts = 10;
  int workers = 1;
  FitOptions fit;
};

// fit_restarts per Q with independently derived seeds, then argmax of the
// best il_osbm over the range; ties break toward smaller Q. Cells where all
// restarts fail are kept in the report but excluded from the argmax; if every
// cell fails, signals SelectionFailedError.
SelectionReport select_q(const AdjacencyMatrix& x, const std::vector<Index>& q_range,
                         const PriorConfig& priors, std::uint64_t seed,
                         const SelectOptions& opts = {});

}  // namespace osbm
