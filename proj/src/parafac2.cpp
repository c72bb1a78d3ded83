#include "tenstream/parafac2.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tenstream/errors.hpp"
#include "tenstream/parallel.hpp"
#include "tenstream/random.hpp"

namespace tenstream {

void IrregularTensor::validate() const {
  if (slices.empty()) throw InvalidArgument("irregular tensor needs at least one slice");
  const Index j = slices.front().cols();
  if (j < 1) throw InvalidArgument("irregular tensor needs J >= 1");
  for (const auto& s : slices) {
    if (s.cols() != j) throw InvalidArgument("irregular tensor slices must share J");
    if (s.rows() < 1) throw InvalidArgument("irregular tensor slices must have I_k >= 1");
    if (!s.allFinite()) throw DataError("irregular tensor values must be finite");
  }
}

double IrregularTensor::squared_norm() const {
  double s = 0.0;
  for (const auto& x : slices) s += x.squaredNorm();
  return s;
}

Matrix Parafac2Factors::slice_model(Index k) const {
  return Q[k] * H * W.row(k).asDiagonal() * V.transpose();
}

bool procrustes_q(const Matrix& m, Matrix& q) {
  if (!(m.norm() > 0.0) || !m.allFinite()) return false;
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  q = svd.matrixV() * svd.matrixU().transpose();
  return true;
}

double pf2_loss(const IrregularTensor& t, const Parafac2Factors& f) {
  if (f.Q.size() != t.slices.size() || f.W.rows() != t.num_slices() || f.V.rows() != t.cols())
    throw InvalidArgument("pf2_loss: factor shapes do not match tensor");
  double loss = 0.0;
  const Matrix vt = f.V.transpose();
  for (Index k = 0; k < t.num_slices(); ++k) {
    if (f.Q[k].rows() != t.slices[k].rows()) throw InvalidArgument("pf2_loss: Q_k rows do not match slice");
    loss += (t.slices[k] - f.Q[k] * f.H * f.W.row(k).asDiagonal() * vt).squaredNorm();
  }
  return loss;
}

namespace {

Matrix identity_q(Index rows, Index rank) { return Matrix::Identity(rows, rank); }

void normalize_into_w(Parafac2Factors& f) {
  for (Index r = 0; r < f.rank(); ++r) {
    double nh = f.H.col(r).norm(), nv = f.V.col(r).norm();
    if (nh > 0) f.H.col(r) /= nh;
    if (nv > 0) f.V.col(r) /= nv;
    f.W.col(r) *= nh * nv;
  }
}

}  // namespace

Parafac2Factors parafac2_als(const IrregularTensor& t, Index rank, const Parafac2Options& opts,
                             Parafac2Trace* trace) {
  t.validate();
  const Index K = t.num_slices(), J = t.cols();
  if (rank < 1 || rank > J) throw InvalidArgument("parafac2_als: rank must be in [1, J]");
  if (opts.max_iters < 1 || !(opts.tol > 0)) throw InvalidArgument("parafac2_als: need max_iters >= 1 and tol > 0");
  Parafac2Trace local;
  Parafac2Trace& tr = trace ? *trace : local;
  tr = Parafac2Trace{};
  for (const auto& s : t.slices)
    if (s.rows() < rank) {
      tr.warnings.push_back("some slices have fewer rows than the rank; their Q_k cannot have orthonormal columns");
      break;
    }

  Rng rng(opts.seed);
  Parafac2Factors f;
  f.H = Matrix::Identity(rank, rank);
  if (opts.init == InitMethod::Hosvd) {
    Matrix g = Matrix::Zero(J, J);
    for (const auto& s : t.slices) g.noalias() += s.transpose() * s;
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    f.V = es.eigenvectors().rightCols(rank).rowwise().reverse();
  } else {
    f.V = random_orthonormal(J, rank, rng);
  }
  f.W = Matrix::Ones(K, rank);
  f.Q.resize(K);
  for (Index k = 0; k < K; ++k) f.Q[k] = identity_q(t.slices[k].rows(), rank);

  const double norm2 = t.squared_norm();
  double prev = std::numeric_limits<double>::infinity();
  std::vector<char> degenerate(K, 0);
  for (int it = 0; it < opts.max_iters; ++it) {
    parallel_for(static_cast<int>(K), [&](int k) {
      Matrix m = f.H * f.W.row(k).asDiagonal() * (t.slices[k] * f.V).transpose();
      degenerate[k] = procrustes_q(m, f.Q[k]) ? 0 : 1;
    });
    for (Index k = 0; k < K; ++k)
      if (degenerate[k]) tr.warnings.push_back("slice " + std::to_string(k) + " degenerate; previous Q_k reused");

    DenseTensor y({rank, J, K});
    for (Index k = 0; k < K; ++k) y.slice(k) = f.Q[k].transpose() * t.slices[k];
    std::vector<Matrix> fac{f.H, f.V, f.W};
    fac[0] = mttkrp(y, fac, 0) * pinv_sym((fac[2].transpose() * fac[2]).cwiseProduct(fac[1].transpose() * fac[1]));
    fac[1] = mttkrp(y, fac, 1) * pinv_sym((fac[2].transpose() * fac[2]).cwiseProduct(fac[0].transpose() * fac[0]));
    fac[2] = mttkrp(y, fac, 2) * pinv_sym((fac[1].transpose() * fac[1]).cwiseProduct(fac[0].transpose() * fac[0]));
    f.H = std::move(fac[0]);
    f.V = std::move(fac[1]);
    f.W = std::move(fac[2]);
    normalize_into_w(f);
    if (!f.H.allFinite() || !f.V.allFinite() || !f.W.allFinite())
      throw NumericalError("parafac2_als: non-finite factor values");

    const double loss = pf2_loss(t, f);
    tr.iterations = it + 1;
    tr.loss.push_back(loss);
    if (loss <= 1e-24 * norm2 || (std::isfinite(prev) && std::abs(prev - loss) <= opts.tol * prev)) {
      tr.converged = true;
      break;
    }
    prev = loss;
  }
  return f;
}

}  // namespace tenstream
