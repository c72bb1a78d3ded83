#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tenstream/cp.hpp"
#include "tenstream/match.hpp"
#include "tenstream/tensor.hpp"

namespace tenstream {

// Sum of squares over all other modes, one entry per index of `mode`.
Vector moi_weights(const DenseTensor& t, int mode);

// Weighted sampling without replacement (exponential keys). Returns `count`
// distinct indices in ascending order.
std::vector<Index> sample_indices(const Vector& weights, Index count, std::uint64_t seed);
// Same draw, in draw order.
std::vector<Index> sample_indices_ordered(const Vector& weights, Index count, std::uint64_t seed);

struct SambatenOptions {
  Index s = 2;
  int r = 4;
  std::uint64_t seed = 0;
  AlsOptions als{};
  MatchMethod match = MatchMethod::Greedy;
  // Rank estimation on the sampled new slices (quality-control variant).
  int qc_trials = 3;
  GetRankOptions qc{};
};

struct SambatenState {
  KruskalFactors factors;
  DenseTensor data;
  SambatenOptions opts;
  Index batches = 0;
  // Components used by the last update.
  Index last_rank = 0;
  std::vector<std::string> warnings;
};

SambatenState sambaten_init(const DenseTensor& x_old, Index rank, const SambatenOptions& opts = {});
SambatenState sambaten_init(const DenseTensor& x_old, KruskalFactors factors, const SambatenOptions& opts = {});

void sambaten_update(SambatenState& state, const DenseTensor& x_new);
void sambaten_update_qc(SambatenState& state, const DenseTensor& x_new);

}  // namespace tenstream
