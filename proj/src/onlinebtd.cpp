#include "tenstream/onlinebtd.hpp"

#include <cmath>
#include <utility>

#include "tenstream/errors.hpp"
#include "tenstream/mttkronp.hpp"

namespace tenstream {

LuResult modified_lu(const Matrix& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("modified_lu: matrix must be square");
  if (!a.allFinite()) throw DataError("modified_lu: non-finite input");
  const Index n = a.rows();
  LuResult r{Matrix::Identity(n, n), a, Matrix::Identity(n, n)};
  Matrix &L = r.L, &U = r.U, &P = r.P;
  for (Index k = 0; k < n; ++k) {
    Index m = 0;
    const double val = U.col(k).tail(n - k).cwiseAbs().maxCoeff(&m);
    m += k;
    if (val == 0.0) throw NumericalError("modified_lu: matrix is singular");
    if (m != k) {
      U.row(k).swap(U.row(m));
      P.row(k).swap(P.row(m));
      if (k >= 1) L.row(k).head(k).swap(L.row(m).head(k));
    }
    for (Index j = k + 1; j < n; ++j) {
      L(j, k) = U(j, k) / U(k, k);
      U.row(j).tail(n - k) -= L(j, k) * U.row(k).tail(n - k);
      U(j, k) = 0.0;
    }
    const double s = std::sqrt(std::abs(U(k, k)));
    L.col(k).tail(n - k) *= s;
    U.row(k).tail(n - k) /= s;
  }
  return r;
}

Vector lu_solve(const Matrix& a, const Vector& b) {
  if (b.size() != a.rows()) throw InvalidArgument("lu_solve: size mismatch");
  LuResult lu = modified_lu(a);
  Vector y = lu.L.triangularView<Eigen::Lower>().solve(lu.P * b);
  return lu.U.triangularView<Eigen::Upper>().solve(y);
}

namespace {

void check_ranks(const BtdFactors& f) {
  f.ranks.validate();
  if (static_cast<Index>(f.cores.size()) != f.ranks.count()) throw InvalidArgument("onlinebtd: core count");
  for (int m = 0; m < 3; ++m)
    if (f.factor(m).cols() != f.ranks.total(m)) throw InvalidArgument("onlinebtd: factor widths");
}

std::vector<DenseTensor> core_refit(OnlineBtdState& s, const DenseTensor& x, const BtdFactors& f) {
  CoreSystem sys = btd_core_system(x, f);
  Vector g;
  bool ok = true;
  try {
    g = lu_solve(sys.gram, sys.rhs);
    ok = g.allFinite();
  } catch (const NumericalError&) {
    ok = false;
  }
  if (ok && sys.gram.rows() <= s.opts.cross_check_max) {
    Vector ref = pinv_sym(sys.gram) * sys.rhs;
    const double scale = std::max(ref.norm(), 1e-300);
    if ((g - ref).norm() > s.opts.cross_check_tol * scale) {
      s.warnings.push_back("core LU solve disagrees with pseudo-inverse; using pseudo-inverse");
      g = std::move(ref);
    }
  } else if (!ok) {
    s.warnings.push_back("core system singular; using pseudo-inverse");
    g = pinv_sym(sys.gram) * sys.rhs;
  }
  return cores_from_vector(g, f.ranks);
}

}  // namespace

OnlineBtdState onlinebtd_init(BtdFactors factors, const OnlineBtdOptions& opts) {
  check_ranks(factors);
  OnlineBtdState s;
  s.factors = std::move(factors);
  s.slices = s.factors.C.rows();
  s.opts = opts;
  return s;
}

OnlineBtdState onlinebtd_init(const DenseTensor& x_old, const BtdRanks& ranks, const AlsOptions& als,
                              const OnlineBtdOptions& opts) {
  return onlinebtd_init(btd_als(x_old, ranks, als), opts);
}

void onlinebtd_update(OnlineBtdState& s, const DenseTensor& x_new) {
  BtdFactors& f = s.factors;
  if (x_new.order() != 3) throw InvalidArgument("onlinebtd_update: batch must be a 3-way tensor");
  if (x_new.dim(0) != f.A.rows() || x_new.dim(1) != f.B.rows())
    throw InvalidArgument("onlinebtd_update: batch shape does not match the fixed modes");
  if (!all_finite(x_new)) throw DataError("onlinebtd_update: non-finite values in batch");
  const Index k2 = x_new.dim(2);
  if (k2 == 0 || frobenius_norm(x_new) == 0.0) {
    if (!s.opts.allow_empty_batch) throw InvalidArgument("onlinebtd_update: empty batch");
    Matrix c(f.C.rows() + k2, f.C.cols());
    c << f.C, Matrix::Zero(k2, f.C.cols());
    f.C = std::move(c);
    s.slices += k2;
    return;
  }

  BtdFactors nf = f;
  MttkronpParts pc = mttkronp_parts(x_new, 2, core_unfoldings(f.cores, 2), f.blocks(0), f.blocks(1));
  nf.C = pc.xmt * pinv_sym(pc.gram);
  MttkronpParts pa = mttkronp_parts(x_new, 0, core_unfoldings(f.cores, 0), f.blocks(1), nf.blocks(2));
  nf.A = pa.xmt * pinv_sym(pa.gram) + f.A;
  MttkronpParts pb = mttkronp_parts(x_new, 1, core_unfoldings(f.cores, 1), nf.blocks(0), nf.blocks(2));
  nf.B = pb.xmt * pinv_sym(pb.gram) + f.B;
  for (int m = 0; m < 2; ++m)
    for (Index r = 0; r < nf.ranks.count(); ++r) {
      auto blk = nf.factor(m).middleCols(nf.ranks.offset(m, r), nf.ranks.width(m, r));
      const double n = blk.norm();
      if (n > 0) blk /= n;
    }
  if (!nf.A.allFinite() || !nf.B.allFinite() || !nf.C.allFinite())
    throw NumericalError("onlinebtd_update: non-finite factor values");
  nf.cores = core_refit(s, x_new, nf);

  Matrix c(f.C.rows() + k2, f.C.cols());
  c << f.C, nf.C;
  nf.C = std::move(c);
  btd_normalize(nf);
  f = std::move(nf);
  s.slices += k2;
}

}  // namespace tenstream
