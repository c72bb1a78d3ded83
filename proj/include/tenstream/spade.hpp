#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tenstream/parafac2.hpp"

namespace tenstream {

struct SpadeOptions {
  std::uint64_t seed = 0;
  // Alternations between the Procrustes step and the temporal solve on the
  // new slices; 1 is the single pass.
  int refine_max = 25;
  double refine_tol = 1e-10;
  // Reciprocal condition number below which Gram-Hadamard systems fall back
  // to the pseudo-inverse.
  double rcond_min = 1e-12;
};

struct SpadeState {
  Parafac2Factors factors;
  // T[r] = sum_k W(k, r) Y_k with Y_k = Q_k^T X_k, and W^T W, over every
  // subject ingested.
  std::vector<Matrix> T;
  Matrix WtW;
  // Supporting matrices for the current factors. M3 covers the latest batch
  // only.
  Matrix M1, M2, M3, L1, L2, L3;
  Index subjects = 0;
  Index batches = 0;
  SpadeOptions opts;
  std::vector<std::string> warnings;
};

SpadeState spade_init(const IrregularTensor& t_old, const Parafac2Factors& f_old, const SpadeOptions& opts = {});
SpadeState spade_init(const IrregularTensor& t_old, Index rank, const Parafac2Options& als = {},
                      const SpadeOptions& opts = {});

void spade_update(SpadeState& state, const std::vector<Matrix>& x_new);

}  // namespace tenstream
