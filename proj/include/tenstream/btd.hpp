#pragma once

#include <string>
#include <vector>

#include "tenstream/cp.hpp"
#include "tenstream/tensor.hpp"

namespace tenstream {

struct BlockRank {
  Index L = 1, M = 1, N = 1;
};

struct BtdRanks {
  std::vector<BlockRank> blocks;

  static BtdRanks uniform(Index R, Index L, Index M, Index N);
  Index count() const { return static_cast<Index>(blocks.size()); }
  Index width(int mode, Index r) const;
  std::vector<Index> widths(int mode) const;
  Index total(int mode) const;
  Index offset(int mode, Index r) const;
  // Total number of core entries, sum of L_r M_r N_r.
  Index core_size() const;
  void validate() const;
};

struct BtdFactors {
  Matrix A, B, C;
  std::vector<DenseTensor> cores;
  BtdRanks ranks;

  const Matrix& factor(int mode) const { return mode == 0 ? A : mode == 1 ? B : C; }
  Matrix& factor(int mode) { return mode == 0 ? A : mode == 1 ? B : C; }
  Matrix block(int mode, Index r) const;
  std::vector<Matrix> blocks(int mode) const;
};

struct BtdTrace {
  int iterations = 0;
  bool converged = false;
  std::vector<double> loss;  // squared residual per sweep
};

BtdFactors btd_als(const DenseTensor& t, const BtdRanks& ranks, const AlsOptions& opts = {},
                   BtdTrace* trace = nullptr);

DenseTensor btd_reconstruct(const BtdFactors& f);

// ||t - model||_F / ||t||_F.
double btd_relative_error(const DenseTensor& t, const BtdFactors& f);

// Scales every block of A, B and C to unit Frobenius norm, moving the scale
// into the matching core.
void btd_normalize(BtdFactors& f);

// The mode-n unfoldings of every core.
std::vector<Matrix> core_unfoldings(const std::vector<DenseTensor>& cores, int mode);

// Normal-equation system for the stacked vec(core) least-squares problem
// min || vec(t) - sum_r (C_r (x) B_r (x) A_r) vec(G_r) ||.
struct CoreSystem {
  Matrix gram;
  Vector rhs;
};
CoreSystem btd_core_system(const DenseTensor& t, const BtdFactors& f);
std::vector<DenseTensor> cores_from_vector(const Vector& g, const BtdRanks& ranks);
Vector cores_to_vector(const std::vector<DenseTensor>& cores);
// Pseudo-inverse of the explicit stacked Kronecker design matrix (small
// instances only).
std::vector<DenseTensor> btd_core_solve_full(const DenseTensor& t, const BtdFactors& f);
// Same problem through the normal equations.
std::vector<DenseTensor> btd_core_solve(const DenseTensor& t, const BtdFactors& f);

}  // namespace tenstream
