#pragma once

#include <vector>

#include "tenstream/tensor.hpp"

namespace tenstream {

// Matricized tensor times block-diagonal core times partitioned Kronecker
// product.
//
// x_mat has P rows and I_p * I_q columns ordered p-fastest. Block r of the
// system matrix is M_r = core_mats[r] * (q_blocks[r] (x) p_blocks[r])^T and
// the kernel returns x_mat * [M_1; ...; M_R]^+, formed as
// (x_mat M^T)(M M^T)^+ with n-mode products and small Gram blocks, so no
// Kronecker product is ever materialized.
struct MttkronpParts {
  Matrix xmt;   // x_mat * M^T
  Matrix gram;  // M * M^T
};

MttkronpParts mttkronp_parts(const Matrix& x_mat, const std::vector<Matrix>& core_mats,
                             const std::vector<Matrix>& p_blocks, const std::vector<Matrix>& q_blocks);
Matrix mttkronp(const Matrix& x_mat, const std::vector<Matrix>& core_mats, const std::vector<Matrix>& p_blocks,
                const std::vector<Matrix>& q_blocks);

// Same kernel reading the unfolding of a 3-way tensor along `mode` directly;
// p and q are the remaining modes in increasing order.
MttkronpParts mttkronp_parts(const DenseTensor& t, int mode, const std::vector<Matrix>& core_mats,
                             const std::vector<Matrix>& p_blocks, const std::vector<Matrix>& q_blocks);

// Reference path with the explicit Kronecker products.
Matrix mttkronp_explicit(const Matrix& x_mat, const std::vector<Matrix>& core_mats,
                         const std::vector<Matrix>& p_blocks, const std::vector<Matrix>& q_blocks);

}  // namespace tenstream
