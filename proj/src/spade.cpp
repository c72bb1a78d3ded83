#include "tenstream/spade.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "tenstream/errors.hpp"
#include "tenstream/parallel.hpp"
#include "tenstream/random.hpp"

namespace tenstream {

namespace {

// Columnwise Y V paired with H: out(n, r) = H(:, r)^T (Y_n V)(:, r).
Matrix temporal_mttkrp(const std::vector<Matrix>& y, const Matrix& h, const Matrix& v) {
  Matrix out(y.size(), h.cols());
  for (std::size_t n = 0; n < y.size(); ++n) out.row(n) = (h.cwiseProduct(y[n] * v)).colwise().sum();
  return out;
}

Matrix solve_gram(SpadeState& s, const Matrix& rhs, const Matrix& gram, const char* what) {
  if (rcond_sym(gram) < s.opts.rcond_min) {
    s.warnings.push_back(std::string(what) + ": ill-conditioned system; using pseudo-inverse");
    return rhs * pinv_sym(gram);
  }
  return gram.llt().solve(rhs.transpose()).transpose();
}

void refresh_supporting(SpadeState& s, const std::vector<Matrix>& y_last) {
  const Parafac2Factors& f = s.factors;
  const Index R = f.rank();
  s.M1.resize(R, R);
  s.M2.resize(f.V.rows(), R);
  for (Index r = 0; r < R; ++r) {
    s.M1.col(r) = s.T[r] * f.V.col(r);
    s.M2.col(r) = s.T[r].transpose() * f.H.col(r);
  }
  const Matrix vtv = f.V.transpose() * f.V, hth = f.H.transpose() * f.H;
  s.L1 = s.WtW.cwiseProduct(vtv);
  s.L2 = s.WtW.cwiseProduct(hth);
  s.L3 = vtv.cwiseProduct(hth);
  s.M3 = temporal_mttkrp(y_last, f.H, f.V);
}

void accumulate(SpadeState& s, const std::vector<Matrix>& y, const Matrix& w) {
  for (Index r = 0; r < s.factors.rank(); ++r)
    for (std::size_t n = 0; n < y.size(); ++n) s.T[r] += w(n, r) * y[n];
  s.WtW += w.transpose() * w;
}

}  // namespace

SpadeState spade_init(const IrregularTensor& t_old, const Parafac2Factors& f, const SpadeOptions& opts) {
  t_old.validate();
  const Index K = t_old.num_slices(), R = f.rank();
  if (static_cast<Index>(f.Q.size()) != K || f.W.rows() != K || f.V.rows() != t_old.cols() || f.H.rows() != R ||
      f.W.cols() != R || f.V.cols() != R)
    throw InvalidArgument("spade_init: factors do not match the tensor");
  SpadeState s;
  s.factors = f;
  s.opts = opts;
  s.subjects = K;
  s.T.assign(R, Matrix::Zero(R, t_old.cols()));
  s.WtW = Matrix::Zero(R, R);
  std::vector<Matrix> y(K);
  for (Index k = 0; k < K; ++k) {
    if (f.Q[k].rows() != t_old.slices[k].rows() || f.Q[k].cols() != R)
      throw InvalidArgument("spade_init: Q_k does not match slice");
    y[k] = f.Q[k].transpose() * t_old.slices[k];
  }
  accumulate(s, y, f.W);
  refresh_supporting(s, y);
  return s;
}

SpadeState spade_init(const IrregularTensor& t_old, Index rank, const Parafac2Options& als, const SpadeOptions& opts) {
  return spade_init(t_old, parafac2_als(t_old, rank, als), opts);
}

void spade_update(SpadeState& s, const std::vector<Matrix>& x_new) {
  Parafac2Factors& f = s.factors;
  const Index R = f.rank(), J = f.V.rows(), N = static_cast<Index>(x_new.size());
  if (N < 1) throw InvalidArgument("spade_update: empty batch");
  for (const auto& x : x_new) {
    if (x.cols() != J) throw InvalidArgument("spade_update: slice column count does not match J");
    if (x.rows() < 1) throw InvalidArgument("spade_update: slice needs at least one row");
    if (!x.allFinite()) throw DataError("spade_update: non-finite values in slice");
  }

  // Each row of W_rand is a convex combination of rows of W_old with
  // Dirichlet(1, ..., 1) weights.
  Rng rng(derive_seed(s.opts.seed, static_cast<std::uint64_t>(s.batches)));
  std::gamma_distribution<double> gamma(1.0, 1.0);
  Matrix w(N, R);
  for (Index n = 0; n < N; ++n) {
    Vector d(f.W.rows());
    for (Index k = 0; k < d.size(); ++k) d(k) = gamma(rng);
    w.row(n) = (d / d.sum()).transpose() * f.W;
  }

  std::vector<Matrix> q(N), y(N);
  std::vector<char> degenerate(N, 0);
  for (Index n = 0; n < N; ++n) {
    q[n] = Matrix::Identity(x_new[n].rows(), R);
    if (x_new[n].rows() < R) s.warnings.push_back("new slice has fewer rows than the rank");
  }
  const Matrix vtv = f.V.transpose() * f.V, hth = f.H.transpose() * f.H;
  const Matrix l3 = vtv.cwiseProduct(hth);
  double prev = std::numeric_limits<double>::infinity();
  for (int pass = 0; pass < std::max(1, s.opts.refine_max); ++pass) {
    parallel_for(static_cast<int>(N), [&](int n) {
      Matrix m = f.H * w.row(n).asDiagonal() * (x_new[n] * f.V).transpose();
      degenerate[n] = procrustes_q(m, q[n]) ? 0 : 1;
      y[n] = q[n].transpose() * x_new[n];
    });
    w = solve_gram(s, temporal_mttkrp(y, f.H, f.V), l3, "temporal update");
    double loss = 0;
    for (Index n = 0; n < N; ++n)
      loss += (x_new[n] - q[n] * f.H * w.row(n).asDiagonal() * f.V.transpose()).squaredNorm();
    if (std::isfinite(prev) && std::abs(prev - loss) <= s.opts.refine_tol * std::max(prev, 1e-300)) break;
    prev = loss;
  }
  for (Index n = 0; n < N; ++n)
    if (degenerate[n]) s.warnings.push_back("degenerate new slice; identity Q used");

  accumulate(s, y, w);
  Matrix m1(R, R);
  for (Index r = 0; r < R; ++r) m1.col(r) = s.T[r] * f.V.col(r);
  f.H = solve_gram(s, m1, s.WtW.cwiseProduct(vtv), "H update");
  Matrix m2(J, R);
  for (Index r = 0; r < R; ++r) m2.col(r) = s.T[r].transpose() * f.H.col(r);
  f.V = solve_gram(s, m2, s.WtW.cwiseProduct(f.H.transpose() * f.H), "V update");
  if (!f.H.allFinite() || !f.V.allFinite() || !w.allFinite())
    throw NumericalError("spade_update: non-finite factor values");

  Matrix wn(f.W.rows() + N, R);
  wn << f.W, w;
  f.W = std::move(wn);
  for (auto& qn : q) f.Q.push_back(std::move(qn));
  s.subjects += N;
  ++s.batches;
  refresh_supporting(s, y);
}

}  // namespace tenstream
