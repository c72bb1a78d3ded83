#pragma once

#include <string>
#include <vector>

#include "tenstream/btd.hpp"
#include "tenstream/tensor.hpp"

namespace tenstream {

struct LuResult {
  Matrix L, U, P;
};

// Partial-pivot LU with P A = L U. Column k of L and row k of U are rescaled
// by sqrt(|U(k,k)|), so a symmetric positive definite input without pivoting
// gives U = L^T. Throws NumericalError when a pivot column is exactly zero.
LuResult modified_lu(const Matrix& a);

// Solves the square system a x = b with modified_lu and two triangular
// solves.
Vector lu_solve(const Matrix& a, const Vector& b);

struct OnlineBtdOptions {
  bool allow_empty_batch = false;
  // Compare the LU core solve against a pseudo-inverse solve when the core
  // system has at most this many unknowns.
  Index cross_check_max = 2000;
  double cross_check_tol = 1e-8;
};

struct OnlineBtdState {
  BtdFactors factors;
  Index slices = 0;
  OnlineBtdOptions opts;
  std::vector<std::string> warnings;
};

OnlineBtdState onlinebtd_init(const DenseTensor& x_old, const BtdRanks& ranks, const AlsOptions& als = {},
                              const OnlineBtdOptions& opts = {});
// Starts from known factors instead of running BTD-ALS.
OnlineBtdState onlinebtd_init(BtdFactors factors, const OnlineBtdOptions& opts = {});

void onlinebtd_update(OnlineBtdState& state, const DenseTensor& x_new);

}  // namespace tenstream
