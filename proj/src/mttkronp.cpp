#include "tenstream/mttkronp.hpp"

#include "tenstream/errors.hpp"

namespace tenstream {

namespace {

void check_blocks(const std::vector<Matrix>& core_mats, const std::vector<Matrix>& p_blocks,
                  const std::vector<Matrix>& q_blocks) {
  if (core_mats.empty() || core_mats.size() != p_blocks.size() || core_mats.size() != q_blocks.size())
    throw InvalidArgument("mttkronp: block counts differ");
  for (std::size_t r = 0; r < core_mats.size(); ++r) {
    if (core_mats[r].cols() != p_blocks[r].cols() * q_blocks[r].cols())
      throw InvalidArgument("mttkronp: core unfolding does not match block widths");
    if (p_blocks[r].rows() != p_blocks[0].rows() || q_blocks[r].rows() != q_blocks[0].rows())
      throw InvalidArgument("mttkronp: blocks have different row counts");
  }
}

Matrix gram_blocks(const std::vector<Matrix>& core_mats, const std::vector<Matrix>& p_blocks,
                   const std::vector<Matrix>& q_blocks) {
  const std::size_t R = core_mats.size();
  std::vector<Index> off(R + 1, 0);
  for (std::size_t r = 0; r < R; ++r) off[r + 1] = off[r] + core_mats[r].rows();
  Matrix g(off[R], off[R]);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t s = r; s < R; ++s) {
      Matrix inner = kron(q_blocks[r].transpose() * q_blocks[s], p_blocks[r].transpose() * p_blocks[s]);
      Matrix blk = core_mats[r] * inner * core_mats[s].transpose();
      g.block(off[r], off[s], blk.rows(), blk.cols()) = blk;
      if (s != r) g.block(off[s], off[r], blk.cols(), blk.rows()) = blk.transpose();
    }
  return g;
}

}  // namespace

MttkronpParts mttkronp_parts(const DenseTensor& t, int mode, const std::vector<Matrix>& core_mats,
                             const std::vector<Matrix>& p_blocks, const std::vector<Matrix>& q_blocks) {
  check_blocks(core_mats, p_blocks, q_blocks);
  if (t.order() != 3 || mode < 0 || mode > 2) throw InvalidArgument("mttkronp: needs a 3-way tensor");
  const int pm = mode == 0 ? 1 : 0;
  const int qm = mode == 2 ? 1 : 2;
  if (p_blocks[0].rows() != t.dim(pm) || q_blocks[0].rows() != t.dim(qm))
    throw InvalidArgument("mttkronp: block rows do not match tensor");
  Index total = 0;
  for (const auto& c : core_mats) total += c.rows();
  MttkronpParts out;
  out.xmt.resize(t.dim(mode), total);
  Index col = 0;
  for (std::size_t r = 0; r < core_mats.size(); ++r) {
    std::vector<Matrix> mats(3);
    mats[pm] = p_blocks[r].transpose();
    mats[qm] = q_blocks[r].transpose();
    DenseTensor z = multi_mode_product(t, mats);
    out.xmt.middleCols(col, core_mats[r].rows()) = matricize(z, mode) * core_mats[r].transpose();
    col += core_mats[r].rows();
  }
  out.gram = gram_blocks(core_mats, p_blocks, q_blocks);
  return out;
}

MttkronpParts mttkronp_parts(const Matrix& x_mat, const std::vector<Matrix>& core_mats,
                             const std::vector<Matrix>& p_blocks, const std::vector<Matrix>& q_blocks) {
  check_blocks(core_mats, p_blocks, q_blocks);
  const Index ip = p_blocks[0].rows(), iq = q_blocks[0].rows();
  if (x_mat.cols() != ip * iq) throw InvalidArgument("mttkronp: x_mat columns do not match blocks");
  // Row s of x_mat is the column-major I_p x I_q matrix X_s; stacking them
  // gives an I_p x I_q x P tensor.
  Matrix xt = x_mat.transpose();
  DenseTensor t({ip, iq, x_mat.rows()}, std::vector<double>(xt.data(), xt.data() + xt.size()));
  return mttkronp_parts(t, 2, core_mats, p_blocks, q_blocks);
}

Matrix mttkronp(const Matrix& x_mat, const std::vector<Matrix>& core_mats, const std::vector<Matrix>& p_blocks,
                const std::vector<Matrix>& q_blocks) {
  MttkronpParts parts = mttkronp_parts(x_mat, core_mats, p_blocks, q_blocks);
  return parts.xmt * pinv_sym(parts.gram);
}

Matrix mttkronp_explicit(const Matrix& x_mat, const std::vector<Matrix>& core_mats,
                         const std::vector<Matrix>& p_blocks, const std::vector<Matrix>& q_blocks) {
  check_blocks(core_mats, p_blocks, q_blocks);
  Index total = 0;
  for (const auto& c : core_mats) total += c.rows();
  Matrix m(total, x_mat.cols());
  Index row = 0;
  for (std::size_t r = 0; r < core_mats.size(); ++r) {
    m.middleRows(row, core_mats[r].rows()) = core_mats[r] * kron(q_blocks[r], p_blocks[r]).transpose();
    row += core_mats[r].rows();
  }
  return x_mat * pinv(m);
}

}  // namespace tenstream
