#include "tenstream/cp.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tenstream/errors.hpp"
#include "tenstream/parallel.hpp"
#include "tenstream/random.hpp"

namespace tenstream {

namespace {

Matrix leading_vectors(const Matrix& unfolding, Index rank, Rng& rng) {
  Eigen::BDCSVD<Matrix> svd(unfolding, Eigen::ComputeThinU);
  Matrix u = svd.matrixU();
  Matrix out = random_uniform(unfolding.rows(), rank, rng);
  Index take = std::min(rank, u.cols());
  out.leftCols(take) = u.leftCols(take);
  return out;
}

void check_rank(const Shape& shape, Index rank) {
  if (rank < 1) throw InvalidArgument("rank must be at least 1");
  const Index total = shape_product(shape);
  for (Index d : shape)
    if (rank > total / d) throw InvalidArgument("rank " + std::to_string(rank) + " infeasible for tensor shape");
}

Matrix hadamard_grams(const std::vector<Matrix>& u, int skip, Index rank) {
  Matrix g = Matrix::Ones(rank, rank);
  for (int q = 0; q < static_cast<int>(u.size()); ++q)
    if (q != skip) g = g.cwiseProduct(u[q].transpose() * u[q]);
  return g;
}

template <class T>
KruskalFactors cp_als_impl(const T& t, Index rank, const AlsOptions& opts, CpTrace* trace) {
  check_rank(t.shape(), rank);
  if (opts.max_iters < 1 || !(opts.tol > 0)) throw InvalidArgument("cp_als: need max_iters >= 1 and tol > 0");
  const int n = t.order();
  Rng rng(opts.seed);
  std::vector<Matrix> u(n);
  for (int m = 0; m < n; ++m) {
    if (opts.init == InitMethod::Hosvd) u[m] = leading_vectors(matricize(t, m), rank, rng);
    else u[m] = random_uniform(t.dim(m), rank, rng);
    for (Index f = 0; f < rank; ++f) {
      double nrm = u[m].col(f).norm();
      if (nrm > 0) u[m].col(f) /= nrm;
    }
  }
  Vector lambda = Vector::Ones(rank);
  const double norm_x = frobenius_norm(t);
  const double norm_x2 = norm_x * norm_x;
  if (trace) *trace = CpTrace{};
  if (norm_x == 0.0) {
    for (auto& f : u) f.setZero();
    return {u, Vector::Zero(rank)};
  }

  std::vector<bool> rerandomized(rank, false);
  double prev_err = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iters; ++it) {
    Matrix m_last;
    for (int m = 0; m < n; ++m) {
      Matrix mk = mttkrp(t, u, m);
      u[m] = mk * pinv_sym(hadamard_grams(u, m, rank));
      if (!u[m].allFinite()) throw NumericalError("cp_als: non-finite factor values");
      for (Index f = 0; f < rank; ++f) {
        double nrm = u[m].col(f).norm();
        if (nrm > 0) {
          lambda(f) = nrm;
          u[m].col(f) /= nrm;
        } else {
          lambda(f) = 0.0;
          if (!rerandomized[f]) {
            rerandomized[f] = true;
            u[m].col(f) = random_uniform(t.dim(m), 1, rng);
            u[m].col(f).normalize();
          }
        }
      }
      if (m == n - 1) m_last = std::move(mk);
    }
    double ip = 0.0;
    for (Index f = 0; f < rank; ++f) ip += lambda(f) * m_last.col(f).dot(u[n - 1].col(f));
    const double model2 = lambda.dot(hadamard_grams(u, -1, rank) * lambda);
    const double obj = std::max(norm_x2 - 2.0 * ip + model2, 0.0);
    if (!std::isfinite(obj)) throw NumericalError("cp_als: objective diverged");
    const double err = std::sqrt(obj) / norm_x;
    if (trace) {
      trace->iterations = it + 1;
      trace->objective.push_back(obj);
    }
    if (std::abs(prev_err - err) < opts.tol) {
      if (trace) trace->converged = true;
      break;
    }
    prev_err = err;
  }
  return {u, lambda};
}

}  // namespace

KruskalFactors cp_als(const DenseTensor& t, Index rank, const AlsOptions& opts, CpTrace* trace) {
  return cp_als_impl(t, rank, opts, trace);
}

KruskalFactors cp_als(const SparseTensor& t, Index rank, const AlsOptions& opts, CpTrace* trace) {
  return cp_als_impl(t, rank, opts, trace);
}

DenseTensor reconstruct(const KruskalFactors& k) {
  const int n = k.order();
  if (n < 1) throw InvalidArgument("reconstruct: no factors");
  Shape shape;
  for (const auto& f : k.factors) {
    if (f.cols() != k.rank()) throw InvalidArgument("reconstruct: factor column count differs from rank");
    shape.push_back(f.rows());
  }
  if (n == 3) {
    DenseTensor t(shape);
    const Matrix bt = k.factors[1].transpose();
    for (Index c = 0; c < shape[2]; ++c) {
      Vector w = k.lambda.cwiseProduct(k.factors[2].row(c).transpose());
      t.slice(c).noalias() = k.factors[0] * w.asDiagonal() * bt;
    }
    return t;
  }
  if (n == 1) {
    Matrix m = k.factors[0] * k.lambda;
    return DenseTensor(shape, std::vector<double>(m.data(), m.data() + m.size()));
  }
  std::vector<Matrix> chain;
  for (int q = n - 1; q >= 1; --q) chain.push_back(k.factors[q]);
  Matrix x0 = k.factors[0] * k.lambda.asDiagonal() * khatri_rao(chain).transpose();
  return fold(x0, shape, 0);
}

void normalize(KruskalFactors& k) {
  for (auto& f : k.factors)
    for (Index c = 0; c < f.cols(); ++c) {
      double nrm = f.col(c).norm();
      if (nrm > 0) {
        f.col(c) /= nrm;
        k.lambda(c) *= nrm;
      } else {
        k.lambda(c) = 0.0;
      }
    }
  for (Index c = 0; c < k.rank(); ++c)
    if (k.lambda(c) < 0) {
      k.lambda(c) = -k.lambda(c);
      k.factors[0].col(c) = -k.factors[0].col(c);
    }
}

KruskalFactors permute(const KruskalFactors& k, const std::vector<Index>& perm) {
  if (static_cast<Index>(perm.size()) != k.rank()) throw InvalidArgument("permute: size mismatch");
  KruskalFactors out = k;
  for (Index f = 0; f < k.rank(); ++f) {
    out.lambda(f) = k.lambda(perm[f]);
    for (int m = 0; m < k.order(); ++m) out.factors[m].col(f) = k.factors[m].col(perm[f]);
  }
  return out;
}

namespace {

std::vector<Matrix> core_projectors(const KruskalFactors& k) {
  std::vector<Matrix> p(k.order());
  for (int m = 0; m < k.order(); ++m) {
    Matrix f = k.factors[m];
    if (m == 0) f = f * k.lambda.asDiagonal();
    p[m] = pinv(f);
  }
  return p;
}

double superdiagonal_score(const DenseTensor& g, Index rank) {
  double ss = 0.0;
  const int n = g.order();
  std::vector<Index> idx(n, 0);
  for (Index lin = 0; lin < g.size(); ++lin) {
    bool diag = true;
    for (int m = 1; m < n; ++m) diag = diag && idx[m] == idx[0];
    double target = diag ? 1.0 : 0.0;
    double d = g.values()[lin] - target;
    ss += d * d;
    for (int m = 0; m < n; ++m) {
      if (++idx[m] < g.dim(m)) break;
      idx[m] = 0;
    }
  }
  return 100.0 * (1.0 - ss / static_cast<double>(rank));
}

double relative_error_of(const DenseTensor& t, const KruskalFactors& k) {
  const double nt = frobenius_norm(t);
  return nt > 0 ? frobenius_norm(t - reconstruct(k)) / nt : 0.0;
}

}  // namespace

double corcondia(const DenseTensor& t, const KruskalFactors& k) {
  if (k.order() != t.order()) throw InvalidArgument("corcondia: order mismatch");
  return superdiagonal_score(multi_mode_product(t, core_projectors(k)), k.rank());
}

double corcondia(const SparseTensor& t, const KruskalFactors& k) {
  if (k.order() != t.order()) throw InvalidArgument("corcondia: order mismatch");
  if (t.order() != 3) return corcondia(t.to_dense(), k);
  auto p = core_projectors(k);
  const Index r = k.rank();
  DenseTensor g({r, r, r});
  for (Index e = 0; e < t.nnz(); ++e) {
    const double v = t.value(e);
    Vector a = p[0].col(t.index(e, 0)) * v;
    auto b = p[1].col(t.index(e, 1));
    auto c = p[2].col(t.index(e, 2));
    for (Index z = 0; z < r; ++z)
      for (Index y = 0; y < r; ++y) {
        const double s = b(y) * c(z);
        for (Index x = 0; x < r; ++x) g(x, y, z) += a(x) * s;
      }
  }
  return superdiagonal_score(g, r);
}

Index get_rank(const DenseTensor& t, Index r_max, int trials, const GetRankOptions& opts, GetRankReport* report) {
  if (r_max < 1 || trials < 1) throw InvalidArgument("get_rank: need r_max >= 1 and trials >= 1");
  const int jobs = static_cast<int>(r_max) * trials;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> scores(jobs, nan), errors(jobs, nan);
  parallel_for(jobs, [&](int job) {
    const Index r = job / trials + 1;
    AlsOptions o = opts.als;
    o.seed = derive_seed(opts.als.seed, static_cast<std::uint64_t>(job));
    try {
      KruskalFactors k = cp_als(t, r, o);
      errors[job] = relative_error_of(t, k);
      scores[job] = corcondia(t, k);
    } catch (const std::exception&) {
      // A failed trial just does not contribute.
    }
  });
  std::vector<double> mean(r_max, nan);
  bool any = false;
  for (Index r = 0; r < r_max; ++r) {
    double best_err = std::numeric_limits<double>::infinity();
    for (int tr = 0; tr < trials; ++tr)
      if (std::isfinite(scores[r * trials + tr])) best_err = std::min(best_err, errors[r * trials + tr]);
    double sum = 0.0;
    int cnt = 0;
    for (int tr = 0; tr < trials; ++tr) {
      const double s = scores[r * trials + tr];
      // Trials stuck in a worse local minimum are left out of the average.
      if (std::isfinite(s) && errors[r * trials + tr] <= best_err + opts.fit_slack) {
        sum += s;
        ++cnt;
      }
    }
    if (cnt > 0) {
      mean[r] = sum / cnt;
      any = true;
    }
  }
  if (!any) throw NumericalError("get_rank: every trial failed");
  Index best = 0;
  for (Index r = 0; r < r_max; ++r)
    if (std::isfinite(mean[r]) && mean[r] >= opts.threshold) best = r + 1;
  if (best == 0) {
    double top = -std::numeric_limits<double>::infinity();
    for (Index r = 0; r < r_max; ++r)
      if (std::isfinite(mean[r]) && mean[r] > top) {
        top = mean[r];
        best = r + 1;
      }
  }
  if (report) {
    report->rank = best;
    report->mean_scores = mean;
  }
  return best;
}

}  // namespace tenstream
