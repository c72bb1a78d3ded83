#pragma once

#include <cstdint>
#include <vector>

#include "tenstream/tensor.hpp"

namespace tenstream {

struct KruskalFactors {
  std::vector<Matrix> factors;
  Vector lambda;

  Index rank() const { return lambda.size(); }
  int order() const { return static_cast<int>(factors.size()); }
};

enum class InitMethod { Random, Hosvd };

struct AlsOptions {
  int max_iters = 1000;
  double tol = 1e-5;
  std::uint64_t seed = 0;
  InitMethod init = InitMethod::Random;
};

struct CpTrace {
  int iterations = 0;
  bool converged = false;
  // Squared residual ||T - model||^2 after each sweep.
  std::vector<double> objective;
};

KruskalFactors cp_als(const DenseTensor& t, Index rank, const AlsOptions& opts = {}, CpTrace* trace = nullptr);
KruskalFactors cp_als(const SparseTensor& t, Index rank, const AlsOptions& opts = {}, CpTrace* trace = nullptr);

DenseTensor reconstruct(const KruskalFactors& k);

// Scales every column to unit norm, folding the norms into lambda.
void normalize(KruskalFactors& k);

// Applies a column permutation: column f of the result is column perm[f].
KruskalFactors permute(const KruskalFactors& k, const std::vector<Index>& perm);

double corcondia(const DenseTensor& t, const KruskalFactors& k);
double corcondia(const SparseTensor& t, const KruskalFactors& k);

struct GetRankOptions {
  AlsOptions als{};
  // Largest candidate whose mean score reaches this value wins; if none
  // does, the best-scoring candidate wins.
  double threshold = 90.0;
  // Only trials whose relative error is within this much of the best trial
  // for the same candidate enter the average.
  double fit_slack = 1e-3;
};

struct GetRankReport {
  Index rank = 1;
  std::vector<double> mean_scores;  // indexed by candidate rank - 1
};

Index get_rank(const DenseTensor& t, Index r_max, int trials, const GetRankOptions& opts = {},
               GetRankReport* report = nullptr);

}  // namespace tenstream
