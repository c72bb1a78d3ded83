#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tenstream/cp.hpp"
#include "tenstream/match.hpp"
#include "tenstream/tensor.hpp"

namespace tenstream {

// p triplets of compression matrices. U_i and V_i are fixed; row k of W_i is
// generated from the global slice index k, so summaries of successive
// batches add up to the summary of the concatenated tensor.
struct CompressionSet {
  Index Q = 0, p = 0, shared = 0;
  std::uint64_t seed = 0;
  std::vector<Matrix> U, V;
  // When non-empty, rows of W_i are read from these matrices instead of
  // being generated.
  std::vector<Matrix> W_fixed;

  Matrix w_rows(Index replica, Index begin, Index end) const;
};

// Smallest p allowed by the identifiability budget
// p >= max((I - shared) / (Q - shared), J / Q, K / Q).
Index min_replicas(const Shape& dims, Index Q, Index shared);

// dims = (I, J, K) with K the expected third-mode extent used for the budget
// check. A violated budget throws when strict, else adds a warning.
CompressionSet make_compression(const Shape& dims, Index Q, Index p, Index shared, std::uint64_t seed,
                                bool strict = false, std::vector<std::string>* warnings = nullptr);

// One replica whose matrices are Q x Q orthogonal matrices cut to I, J and
// K_max rows (Q >= every dimension), so compression loses nothing.
CompressionSet lossless_compression(const Shape& dims, Index Q, std::uint64_t seed);

DenseTensor compress(const DenseTensor& t, const Matrix& u, const Matrix& v, const Matrix& w);

struct OctenOptions {
  Index Q = 30, p = 20, shared = 5;
  std::uint64_t seed = 0;
  AlsOptions als{};
  bool strict = false;
  // Third-mode extent assumed by the budget check at init (0: the initial
  // slice count).
  Index expected_slices = 0;
};

struct OctenState {
  CompressionSet comp;
  std::vector<DenseTensor> summaries;
  KruskalFactors factors;
  Index slices = 0;
  OctenOptions opts;
  // min(Q, r_A) + min(Q, r_B) + min(Q, r_C) >= 2R + 2 on the last recovery.
  bool kruskal_ok = false;
  std::vector<std::string> warnings;
};

OctenState octen_init(const DenseTensor& x_old, Index rank, const OctenOptions& opts = {});
OctenState octen_init(const DenseTensor& x_old, Index rank, CompressionSet comp, const OctenOptions& opts = {});

void octen_update(OctenState& state, const DenseTensor& x_new);

}  // namespace tenstream
