#pragma once

#include <string>
#include <vector>

#include "tenstream/cp.hpp"
#include "tenstream/tensor.hpp"

namespace tenstream {

// K slices X_k of size I_k x J.
struct IrregularTensor {
  std::vector<Matrix> slices;

  Index num_slices() const { return static_cast<Index>(slices.size()); }
  Index cols() const { return slices.empty() ? 0 : slices.front().cols(); }
  // Throws unless there is at least one slice and all share J.
  void validate() const;
  double squared_norm() const;
};

// X_k ~ Q_k H diag(W(k,:)) V^T with orthonormal Q_k.
struct Parafac2Factors {
  std::vector<Matrix> Q;
  Matrix H;
  Matrix V;
  Matrix W;

  Index rank() const { return H.cols(); }
  Matrix U(Index k) const { return Q[k] * H; }
  Matrix slice_model(Index k) const;
};

struct Parafac2Options : AlsOptions {
  Parafac2Options() { tol = 1e-7; }
};

struct Parafac2Trace {
  int iterations = 0;
  bool converged = false;
  std::vector<double> loss;
  std::vector<std::string> warnings;
};

Parafac2Factors parafac2_als(const IrregularTensor& t, Index rank, const Parafac2Options& opts = {},
                             Parafac2Trace* trace = nullptr);

double pf2_loss(const IrregularTensor& t, const Parafac2Factors& f);

// Orthogonal Procrustes factor Z P^T of m^T, where m = P S Z^T: the Q that
// maximizes trace(Q^T m^T) for an R x I_k matrix m. Returns false (leaving q
// untouched) when m is numerically zero.
bool procrustes_q(const Matrix& m, Matrix& q);

}  // namespace tenstream
