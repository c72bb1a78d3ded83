#include "tenstream/btd.hpp"

#include <cmath>
#include <limits>

#include "tenstream/errors.hpp"
#include "tenstream/mttkronp.hpp"
#include "tenstream/random.hpp"

namespace tenstream {

BtdRanks BtdRanks::uniform(Index R, Index L, Index M, Index N) {
  BtdRanks r;
  r.blocks.assign(static_cast<std::size_t>(R), BlockRank{L, M, N});
  r.validate();
  return r;
}

Index BtdRanks::width(int mode, Index r) const {
  const BlockRank& b = blocks.at(r);
  return mode == 0 ? b.L : mode == 1 ? b.M : b.N;
}

std::vector<Index> BtdRanks::widths(int mode) const {
  std::vector<Index> w;
  for (Index r = 0; r < count(); ++r) w.push_back(width(mode, r));
  return w;
}

Index BtdRanks::total(int mode) const {
  Index t = 0;
  for (Index r = 0; r < count(); ++r) t += width(mode, r);
  return t;
}

Index BtdRanks::offset(int mode, Index r) const {
  Index t = 0;
  for (Index s = 0; s < r; ++s) t += width(mode, s);
  return t;
}

Index BtdRanks::core_size() const {
  Index t = 0;
  for (const auto& b : blocks) t += b.L * b.M * b.N;
  return t;
}

void BtdRanks::validate() const {
  if (blocks.empty()) throw InvalidArgument("BTD needs at least one block");
  for (const auto& b : blocks)
    if (b.L < 1 || b.M < 1 || b.N < 1) throw InvalidArgument("BTD block ranks must be positive");
}

Matrix BtdFactors::block(int mode, Index r) const {
  return factor(mode).middleCols(ranks.offset(mode, r), ranks.width(mode, r));
}

std::vector<Matrix> BtdFactors::blocks(int mode) const {
  std::vector<Matrix> out;
  for (Index r = 0; r < ranks.count(); ++r) out.push_back(block(mode, r));
  return out;
}

std::vector<Matrix> core_unfoldings(const std::vector<DenseTensor>& cores, int mode) {
  std::vector<Matrix> out;
  for (const auto& g : cores) out.push_back(matricize(g, mode));
  return out;
}

DenseTensor btd_reconstruct(const BtdFactors& f) {
  f.ranks.validate();
  if (static_cast<Index>(f.cores.size()) != f.ranks.count()) throw InvalidArgument("btd_reconstruct: core count");
  for (int m = 0; m < 3; ++m)
    if (f.factor(m).cols() != f.ranks.total(m)) throw InvalidArgument("btd_reconstruct: factor widths");
  DenseTensor out({f.A.rows(), f.B.rows(), f.C.rows()});
  for (Index r = 0; r < f.ranks.count(); ++r) {
    const BlockRank& b = f.ranks.blocks[r];
    const DenseTensor& g = f.cores[r];
    if (g.order() != 3 || g.dim(0) != b.L || g.dim(1) != b.M || g.dim(2) != b.N)
      throw InvalidArgument("btd_reconstruct: core shape does not match block ranks");
    out = out + multi_mode_product(g, {f.block(0, r), f.block(1, r), f.block(2, r)});
  }
  return out;
}

double btd_relative_error(const DenseTensor& t, const BtdFactors& f) {
  const double nt = frobenius_norm(t);
  if (nt == 0.0) throw InvalidArgument("relative error of a zero tensor");
  return frobenius_norm(t - btd_reconstruct(f)) / nt;
}

void btd_normalize(BtdFactors& f) {
  for (Index r = 0; r < f.ranks.count(); ++r) {
    double scale = 1.0;
    for (int m = 0; m < 3; ++m) {
      auto blk = f.factor(m).middleCols(f.ranks.offset(m, r), f.ranks.width(m, r));
      double n = blk.norm();
      if (n > 0) {
        blk /= n;
        scale *= n;
      } else {
        scale = 0.0;
      }
    }
    f.cores[r] = scale * f.cores[r];
  }
}

Vector cores_to_vector(const std::vector<DenseTensor>& cores) {
  Index n = 0;
  for (const auto& g : cores) n += g.size();
  Vector v(n);
  Index o = 0;
  for (const auto& g : cores) {
    v.segment(o, g.size()) = Eigen::Map<const Vector>(g.data(), g.size());
    o += g.size();
  }
  return v;
}

std::vector<DenseTensor> cores_from_vector(const Vector& g, const BtdRanks& ranks) {
  if (g.size() != ranks.core_size()) throw InvalidArgument("cores_from_vector: size mismatch");
  std::vector<DenseTensor> out;
  Index o = 0;
  for (const auto& b : ranks.blocks) {
    Index n = b.L * b.M * b.N;
    out.emplace_back(Shape{b.L, b.M, b.N}, std::vector<double>(g.data() + o, g.data() + o + n));
    o += n;
  }
  return out;
}

CoreSystem btd_core_system(const DenseTensor& t, const BtdFactors& f) {
  const Index R = f.ranks.count();
  std::vector<Index> off(R + 1, 0);
  for (Index r = 0; r < R; ++r) {
    const auto& b = f.ranks.blocks[r];
    off[r + 1] = off[r] + b.L * b.M * b.N;
  }
  CoreSystem sys;
  sys.gram.resize(off[R], off[R]);
  sys.rhs.resize(off[R]);
  auto a = f.blocks(0), bb = f.blocks(1), c = f.blocks(2);
  for (Index r = 0; r < R; ++r) {
    DenseTensor z = multi_mode_product(t, {a[r].transpose(), bb[r].transpose(), c[r].transpose()});
    sys.rhs.segment(off[r], z.size()) = Eigen::Map<const Vector>(z.data(), z.size());
    for (Index s = r; s < R; ++s) {
      Matrix blk = kron(c[r].transpose() * c[s], kron(bb[r].transpose() * bb[s], a[r].transpose() * a[s]));
      sys.gram.block(off[r], off[s], blk.rows(), blk.cols()) = blk;
      if (s != r) sys.gram.block(off[s], off[r], blk.cols(), blk.rows()) = blk.transpose();
    }
  }
  return sys;
}

std::vector<DenseTensor> btd_core_solve(const DenseTensor& t, const BtdFactors& f) {
  CoreSystem sys = btd_core_system(t, f);
  return cores_from_vector(pinv_sym(sys.gram) * sys.rhs, f.ranks);
}

std::vector<DenseTensor> btd_core_solve_full(const DenseTensor& t, const BtdFactors& f) {
  const Index R = f.ranks.count();
  Matrix design(t.size(), f.ranks.core_size());
  Index o = 0;
  for (Index r = 0; r < R; ++r) {
    Matrix k = kron(f.block(2, r), kron(f.block(1, r), f.block(0, r)));
    design.middleCols(o, k.cols()) = k;
    o += k.cols();
  }
  Vector x = Eigen::Map<const Vector>(t.data(), t.size());
  return cores_from_vector(pinv(design) * x, f.ranks);
}

BtdFactors btd_als(const DenseTensor& t, const BtdRanks& ranks, const AlsOptions& opts, BtdTrace* trace) {
  ranks.validate();
  if (t.order() != 3) throw InvalidArgument("btd_als: needs a 3-way tensor");
  if (opts.max_iters < 1 || !(opts.tol > 0)) throw InvalidArgument("btd_als: need max_iters >= 1 and tol > 0");
  for (const auto& b : ranks.blocks)
    if (b.L > t.dim(0) || b.M > t.dim(1) || b.N > t.dim(2) || b.L > b.M * b.N || b.M > b.L * b.N ||
        b.N > b.L * b.M)
      throw InvalidArgument("btd_als: infeasible block ranks");
  const double nt = frobenius_norm(t);
  if (nt == 0.0) throw InvalidArgument("btd_als: zero tensor");

  Rng rng(opts.seed);
  BtdFactors f;
  f.ranks = ranks;
  for (int m = 0; m < 3; ++m) {
    Matrix fm(t.dim(m), ranks.total(m));
    for (Index r = 0; r < ranks.count(); ++r)
      fm.middleCols(ranks.offset(m, r), ranks.width(m, r)) = random_orthonormal(t.dim(m), ranks.width(m, r), rng);
    f.factor(m) = std::move(fm);
  }
  f.cores = btd_core_solve(t, f);

  if (trace) *trace = BtdTrace{};
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iters; ++it) {
    for (int m = 0; m < 3; ++m) {
      const int pm = m == 0 ? 1 : 0;
      const int qm = m == 2 ? 1 : 2;
      MttkronpParts parts = mttkronp_parts(t, m, core_unfoldings(f.cores, m), f.blocks(pm), f.blocks(qm));
      f.factor(m) = parts.xmt * pinv_sym(parts.gram);
    }
    f.cores = btd_core_solve(t, f);
    btd_normalize(f);
    if (!f.A.allFinite() || !f.B.allFinite() || !f.C.allFinite())
      throw NumericalError("btd_als: non-finite factor values");
    const double err = btd_relative_error(t, f);
    if (trace) {
      trace->iterations = it + 1;
      trace->loss.push_back(err * err * nt * nt);
    }
    if (std::abs(prev - err) < opts.tol) {
      if (trace) trace->converged = true;
      break;
    }
    prev = err;
  }
  return f;
}

}  // namespace tenstream
