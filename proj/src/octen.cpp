#include "tenstream/octen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tenstream/errors.hpp"
#include "tenstream/parallel.hpp"
#include "tenstream/random.hpp"

namespace tenstream {

namespace {

constexpr std::uint64_t kSharedStream = 0x5a17;

Vector normal_row(Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

Index numerical_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector s = svd.singularValues();
  const double tol = std::max(m.rows(), m.cols()) * 1e-10 * s(0);
  return (s.array() > tol).count();
}

}  // namespace

Matrix CompressionSet::w_rows(Index replica, Index begin, Index end) const {
  if (replica < 0 || replica >= p || begin < 0 || end < begin) throw InvalidArgument("w_rows: bad range");
  if (!W_fixed.empty()) {
    if (end > W_fixed[replica].rows()) throw InvalidArgument("w_rows: fixed compression has too few rows");
    return W_fixed[replica].middleRows(begin, end - begin);
  }
  Matrix w(end - begin, Q);
  const std::uint64_t own = derive_seed(seed, 0x1000 + static_cast<std::uint64_t>(replica));
  const std::uint64_t common = derive_seed(seed, kSharedStream);
  for (Index k = begin; k < end; ++k) {
    if (shared > 0) w.row(k - begin).head(shared) = normal_row(shared, derive_seed(common, k)).transpose();
    w.row(k - begin).tail(Q - shared) = normal_row(Q - shared, derive_seed(own, k)).transpose();
  }
  return w;
}

Index min_replicas(const Shape& dims, Index Q, Index shared) {
  if (dims.size() != 3 || Q < 1 || shared < 0 || shared >= Q) throw InvalidArgument("min_replicas: bad arguments");
  auto ceil_div = [](Index a, Index b) { return a <= 0 ? Index{0} : (a + b - 1) / b; };
  return std::max<Index>({1, ceil_div(dims[0] - shared, Q - shared), ceil_div(dims[1], Q), ceil_div(dims[2], Q)});
}

CompressionSet make_compression(const Shape& dims, Index Q, Index p, Index shared, std::uint64_t seed, bool strict,
                                std::vector<std::string>* warnings) {
  if (dims.size() != 3) throw InvalidArgument("make_compression: needs three dimensions");
  if (Q < 1 || p < 1 || shared < 0 || shared >= Q) throw InvalidArgument("make_compression: need Q, p >= 1 and 0 <= shared < Q");
  if (p > 1 && shared == 0) throw InvalidArgument("make_compression: several replicas need shared anchor columns");
  const Index need = min_replicas(dims, Q, shared);
  if (p < need) {
    const std::string msg = "compression budget violated: p = " + std::to_string(p) + " < " + std::to_string(need);
    if (strict) throw InvalidArgument(msg);
    if (warnings) warnings->push_back(msg);
  }
  CompressionSet c;
  c.Q = Q;
  c.p = p;
  c.shared = shared;
  c.seed = seed;
  Rng rs(derive_seed(seed, kSharedStream + 1));
  const Matrix us = random_normal(dims[0], shared, rs), vs = random_normal(dims[1], shared, rs);
  for (Index i = 0; i < p; ++i) {
    Rng r(derive_seed(seed, 0x2000 + static_cast<std::uint64_t>(i)));
    Matrix u(dims[0], Q), v(dims[1], Q);
    u << us, random_normal(dims[0], Q - shared, r);
    v << vs, random_normal(dims[1], Q - shared, r);
    c.U.push_back(std::move(u));
    c.V.push_back(std::move(v));
  }
  return c;
}

CompressionSet lossless_compression(const Shape& dims, Index Q, std::uint64_t seed) {
  if (dims.size() != 3) throw InvalidArgument("lossless_compression: needs three dimensions");
  for (Index d : dims)
    if (d > Q) throw InvalidArgument("lossless_compression: Q must be at least every dimension");
  Rng rng(seed);
  CompressionSet c;
  c.Q = Q;
  c.p = 1;
  c.seed = seed;
  c.U.push_back(random_orthonormal(Q, Q, rng).topRows(dims[0]));
  c.V.push_back(random_orthonormal(Q, Q, rng).topRows(dims[1]));
  c.W_fixed.push_back(random_orthonormal(Q, Q, rng).topRows(dims[2]));
  return c;
}

DenseTensor compress(const DenseTensor& t, const Matrix& u, const Matrix& v, const Matrix& w) {
  if (t.order() != 3 || u.rows() != t.dim(0) || v.rows() != t.dim(1) || w.rows() != t.dim(2))
    throw InvalidArgument("compress: compression matrices do not match the tensor");
  return multi_mode_product(t, {u.transpose(), v.transpose(), w.transpose()});
}

namespace {

struct Replica {
  bool ok = false;
  KruskalFactors k;
};

Matrix anchor_rows(const Matrix& m, Index shared) { return shared > 0 ? Matrix(m.topRows(shared)) : m; }

void normalize_anchors(KruskalFactors& k, Index shared) {
  for (int m = 0; m < 3; ++m)
    for (Index f = 0; f < k.rank(); ++f) {
      const double n = shared > 0 ? k.factors[m].col(f).head(shared).norm() : k.factors[m].col(f).norm();
      if (n > 0) {
        k.factors[m].col(f) /= n;
        k.lambda(f) *= n;
      }
    }
}

Matrix abs_cosines(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  for (Index f = 0; f < a.cols(); ++f)
    for (Index g = 0; g < b.cols(); ++g) {
      const double d = a.col(f).norm() * b.col(g).norm();
      c(f, g) = d > 0 ? std::abs(a.col(f).dot(b.col(g))) / d : 0.0;
    }
  return c;
}

double sign_of(double x) { return x < 0 ? -1.0 : 1.0; }

// Recovers ambient factors from the summaries; C covers all slices so far.
KruskalFactors recover(OctenState& st, Index rank) {
  const CompressionSet& c = st.comp;
  const Index p = c.p, S = c.shared;
  std::vector<Replica> reps(p);
  parallel_for(static_cast<int>(p), [&](int i) {
    AlsOptions als = st.opts.als;
    als.seed = derive_seed(st.opts.als.seed, static_cast<std::uint64_t>(i));
    try {
      reps[i].k = cp_als(st.summaries[i], rank, als);
      normalize_anchors(reps[i].k, S);
      reps[i].ok = reps[i].k.lambda.allFinite();
    } catch (const NumericalError&) {
      reps[i].ok = false;
    }
  });
  std::vector<Index> alive;
  for (Index i = 0; i < p; ++i)
    if (reps[i].ok) alive.push_back(i);
  if (alive.empty()) throw NumericalError("octen: every replica failed");
  const Shape dims{c.U[0].rows(), c.V[0].rows(), st.slices};
  if (static_cast<Index>(alive.size()) < p) {
    st.warnings.push_back("some replicas failed and were dropped");
    if (static_cast<Index>(alive.size()) < min_replicas(dims, c.Q, S))
      throw NumericalError("octen: surviving replicas violate the identifiability budget");
  }

  const KruskalFactors& ref = reps[alive[0]].k;
  std::vector<Matrix> stacked(3, Matrix(static_cast<Index>(alive.size()) * c.Q, rank));
  std::vector<Matrix> proj{Matrix(alive.size() * c.Q, dims[0]), Matrix(alive.size() * c.Q, dims[1]),
                           Matrix(alive.size() * c.Q, dims[2])};
  Vector lambda = Vector::Zero(rank);
  for (std::size_t a = 0; a < alive.size(); ++a) {
    const Index i = alive[a];
    KruskalFactors k = reps[i].k;
    if (a > 0) {
      Matrix score = Matrix::Ones(rank, rank);
      for (int m = 0; m < 3; ++m)
        score = score.cwiseProduct(abs_cosines(anchor_rows(ref.factors[m], S), anchor_rows(k.factors[m], S)));
      k = permute(k, greedy_assignment(score));
      for (Index f = 0; f < rank; ++f) {
        const double sa = sign_of(anchor_rows(ref.factors[0], S).col(f).dot(anchor_rows(k.factors[0], S).col(f)));
        const double sb = sign_of(anchor_rows(ref.factors[1], S).col(f).dot(anchor_rows(k.factors[1], S).col(f)));
        k.factors[0].col(f) *= sa;
        k.factors[1].col(f) *= sb;
        k.factors[2].col(f) *= sa * sb;
      }
    }
    lambda += k.lambda;
    const Index row = static_cast<Index>(a) * c.Q;
    for (int m = 0; m < 3; ++m) stacked[m].middleRows(row, c.Q) = k.factors[m];
    proj[0].middleRows(row, c.Q) = c.U[i].transpose();
    proj[1].middleRows(row, c.Q) = c.V[i].transpose();
    proj[2].middleRows(row, c.Q) = c.w_rows(i, 0, st.slices).transpose();
  }
  KruskalFactors out;
  out.lambda = lambda / static_cast<double>(alive.size());
  for (int m = 0; m < 3; ++m) out.factors.push_back(pinv(proj[m]) * stacked[m]);
  if (!out.factors[0].allFinite() || !out.factors[1].allFinite() || !out.factors[2].allFinite())
    throw NumericalError("octen: non-finite recovered factors");
  Index kr = 0;
  for (int m = 0; m < 3; ++m) kr += std::min(c.Q, numerical_rank(out.factors[m]));
  st.kruskal_ok = kr >= 2 * rank + 2;
  normalize(out);
  return out;
}

void check_batch(const OctenState& st, const DenseTensor& x) {
  if (x.order() != 3 || x.dim(0) != st.comp.U[0].rows() || x.dim(1) != st.comp.V[0].rows())
    throw InvalidArgument("octen_update: batch shape does not match the fixed modes");
  if (x.dim(2) == 0) throw InvalidArgument("octen_update: empty batch");
  if (!all_finite(x)) throw DataError("octen_update: non-finite values in batch");
}

void absorb(OctenState& st, const DenseTensor& x) {
  const Index k0 = st.slices, k1 = k0 + x.dim(2);
  std::vector<DenseTensor> z(st.comp.p);
  parallel_for(static_cast<int>(st.comp.p), [&](int i) {
    z[i] = compress(x, st.comp.U[i], st.comp.V[i], st.comp.w_rows(i, k0, k1));
  });
  for (Index i = 0; i < st.comp.p; ++i) st.summaries[i] = st.summaries[i] + z[i];
  st.slices = k1;
}

}  // namespace

OctenState octen_init(const DenseTensor& x_old, Index rank, CompressionSet comp, const OctenOptions& opts) {
  if (x_old.order() != 3) throw InvalidArgument("octen: needs a 3-way tensor");
  if (rank < 1) throw InvalidArgument("octen: rank must be positive");
  if (comp.p < 1 || static_cast<Index>(comp.U.size()) != comp.p || static_cast<Index>(comp.V.size()) != comp.p)
    throw InvalidArgument("octen: malformed compression set");
  if (rank > comp.Q) throw InvalidArgument("octen: rank exceeds Q");
  OctenState st;
  st.comp = std::move(comp);
  st.opts = opts;
  st.summaries.assign(st.comp.p, DenseTensor({st.comp.Q, st.comp.Q, st.comp.Q}));
  check_batch(st, x_old);
  absorb(st, x_old);
  st.factors = recover(st, rank);
  return st;
}

OctenState octen_init(const DenseTensor& x_old, Index rank, const OctenOptions& opts) {
  if (x_old.order() != 3) throw InvalidArgument("octen: needs a 3-way tensor");
  std::vector<std::string> warnings;
  const Index k = opts.expected_slices > 0 ? opts.expected_slices : x_old.dim(2);
  CompressionSet c = make_compression({x_old.dim(0), x_old.dim(1), k}, opts.Q, opts.p, opts.shared, opts.seed,
                                      opts.strict, &warnings);
  OctenState st = octen_init(x_old, rank, std::move(c), opts);
  st.warnings.insert(st.warnings.begin(), warnings.begin(), warnings.end());
  return st;
}

void octen_update(OctenState& st, const DenseTensor& x_new) {
  check_batch(st, x_new);
  const Index k_old = st.slices;
  const Index need = min_replicas({st.comp.U[0].rows(), st.comp.V[0].rows(), k_old + x_new.dim(2)}, st.comp.Q,
                                  st.comp.shared);
  if (st.comp.p < need) {
    const std::string msg = "compression budget violated after growth: p = " + std::to_string(st.comp.p) + " < " +
                            std::to_string(need);
    if (st.opts.strict) throw InvalidArgument(msg);
    st.warnings.push_back(msg);
  }
  absorb(st, x_new);
  const KruskalFactors& old = st.factors;
  KruskalFactors k = recover(st, old.rank());

  // Keep the column order and signs of the previous model.
  Matrix score = abs_cosines(old.factors[0], k.factors[0]).cwiseProduct(abs_cosines(old.factors[1], k.factors[1]));
  k = permute(k, greedy_assignment(score));
  for (Index f = 0; f < k.rank(); ++f) {
    const double sa = sign_of(old.factors[0].col(f).dot(k.factors[0].col(f)));
    const double sb = sign_of(old.factors[1].col(f).dot(k.factors[1].col(f)));
    k.factors[0].col(f) *= sa;
    k.factors[1].col(f) *= sb;
    k.factors[2].col(f) *= sa * sb;
  }
  // C = [C_old ; C_new], with C_old rescaled per column onto the recovered
  // old rows.
  Matrix c = k.factors[2];
  for (Index f = 0; f < k.rank(); ++f) {
    const auto prev = old.factors[2].col(f);
    const double d = prev.squaredNorm();
    const double alpha = d > 0 ? prev.dot(k.factors[2].col(f).head(k_old)) / d : 0.0;
    c.col(f).head(k_old) = alpha * prev;
  }
  k.factors[2] = std::move(c);
  normalize(k);
  st.factors = std::move(k);
}

}  // namespace tenstream
