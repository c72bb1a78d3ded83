#include "tenstream/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tenstream/errors.hpp"

namespace tenstream {

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw InvalidArgument("tensor shape must have at least one mode");
  for (Index d : shape)
    if (d <= 0) throw InvalidArgument("tensor dimensions must be positive");
}

void check_mode(int mode, int order) {
  if (mode < 0 || mode >= order)
    throw InvalidArgument("mode " + std::to_string(mode) + " out of range for order " +
                          std::to_string(order));
}

// Sizes of the modes before and after `mode`.
std::pair<Index, Index> split_sizes(const Shape& shape, int mode) {
  Index left = 1, right = 1;
  for (int m = 0; m < mode; ++m) left *= shape[m];
  for (int m = mode + 1; m < static_cast<int>(shape.size()); ++m) right *= shape[m];
  return {left, right};
}

}  // namespace

Index shape_product(const Shape& shape) {
  Index p = 1;
  for (Index d : shape) p *= d;
  return p;
}

// ---------------------------------------------------------------------------
// DenseTensor

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(static_cast<std::size_t>(shape_product(shape_)), 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  check_shape(shape_);
  if (static_cast<Index>(data_.size()) != shape_product(shape_))
    throw InvalidArgument("value count does not match shape");
  for (double v : data_)
    if (!std::isfinite(v)) throw DataError("tensor values must be finite");
}

Index DenseTensor::linear_index(const std::vector<Index>& idx) const {
  if (idx.size() != shape_.size()) throw InvalidArgument("index arity mismatch");
  Index lin = 0;
  for (int m = order() - 1; m >= 0; --m) {
    if (idx[m] < 0 || idx[m] >= shape_[m]) throw InvalidArgument("index out of range");
    lin = lin * shape_[m] + idx[m];
  }
  return lin;
}

double& DenseTensor::at(const std::vector<Index>& idx) { return data_[linear_index(idx)]; }
double DenseTensor::at(const std::vector<Index>& idx) const { return data_[linear_index(idx)]; }

Eigen::Map<Matrix> DenseTensor::slice(Index k) {
  return Eigen::Map<Matrix>(data_.data() + k * shape_[0] * shape_[1], shape_[0], shape_[1]);
}

Eigen::Map<const Matrix> DenseTensor::slice(Index k) const {
  return Eigen::Map<const Matrix>(data_.data() + k * shape_[0] * shape_[1], shape_[0], shape_[1]);
}

DenseTensor DenseTensor::slices(Index begin, Index end) const {
  if (order() != 3 || begin < 0 || end > shape_[2] || begin >= end)
    throw InvalidArgument("invalid slice range");
  const Index stride = shape_[0] * shape_[1];
  std::vector<double> v(data_.begin() + begin * stride, data_.begin() + end * stride);
  return DenseTensor({shape_[0], shape_[1], end - begin}, std::move(v));
}

void DenseTensor::append_slices(const DenseTensor& other) {
  if (other.order() != 3) throw InvalidArgument("append_slices needs a 3-way tensor");
  if (shape_.empty()) {
    *this = other;
    return;
  }
  if (order() != 3 || other.dim(0) != shape_[0] || other.dim(1) != shape_[1])
    throw InvalidArgument("append_slices: fixed-mode sizes differ");
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
  shape_[2] += other.dim(2);
}

// ---------------------------------------------------------------------------
// SparseTensor

SparseTensor::SparseTensor(Shape shape) : shape_(std::move(shape)) { check_shape(shape_); }

SparseTensor::SparseTensor(Shape shape, std::vector<Index> indices, std::vector<double> values)
    : shape_(std::move(shape)) {
  check_shape(shape_);
  const int n = order();
  if (indices.size() != values.size() * static_cast<std::size_t>(n))
    throw InvalidArgument("index count does not match value count");
  const Index nnz = static_cast<Index>(values.size());
  std::vector<Index> lin(nnz);
  for (Index e = 0; e < nnz; ++e) {
    if (!std::isfinite(values[e]) || values[e] == 0.0)
      throw DataError("sparse values must be nonzero and finite");
    Index l = 0;
    for (int m = n - 1; m >= 0; --m) {
      Index i = indices[e * n + m];
      if (i < 0 || i >= shape_[m]) throw DataError("sparse index out of range");
      l = l * shape_[m] + i;
    }
    lin[e] = l;
  }
  std::vector<Index> order_idx(nnz);
  std::iota(order_idx.begin(), order_idx.end(), Index{0});
  std::sort(order_idx.begin(), order_idx.end(), [&](Index a, Index b) { return lin[a] < lin[b]; });
  indices_.resize(indices.size());
  values_.resize(nnz);
  for (Index e = 0; e < nnz; ++e) {
    Index src = order_idx[e];
    if (e > 0 && lin[src] == lin[order_idx[e - 1]]) throw DataError("duplicate sparse index");
    values_[e] = values[src];
    for (int m = 0; m < n; ++m) indices_[e * n + m] = indices[src * n + m];
  }
}

SparseTensor SparseTensor::from_dense(const DenseTensor& t) {
  const int n = t.order();
  std::vector<Index> idx;
  std::vector<double> vals;
  std::vector<Index> cur(n, 0);
  for (Index lin = 0; lin < t.size(); ++lin) {
    double v = t.values()[lin];
    if (v != 0.0) {
      idx.insert(idx.end(), cur.begin(), cur.end());
      vals.push_back(v);
    }
    for (int m = 0; m < n; ++m) {
      if (++cur[m] < t.dim(m)) break;
      cur[m] = 0;
    }
  }
  SparseTensor s(t.shape());
  s.indices_ = std::move(idx);
  s.values_ = std::move(vals);
  return s;
}

DenseTensor SparseTensor::to_dense() const {
  DenseTensor t(shape_);
  const int n = order();
  std::vector<Index> idx(n);
  for (Index e = 0; e < nnz(); ++e) {
    for (int m = 0; m < n; ++m) idx[m] = index(e, m);
    t.at(idx) = values_[e];
  }
  return t;
}

// ---------------------------------------------------------------------------
// Unfoldings

Matrix matricize(const DenseTensor& t, int mode) {
  check_mode(mode, t.order());
  auto [left, right] = split_sizes(t.shape(), mode);
  const Index in = t.dim(mode);
  Matrix m(in, left * right);
  const double* d = t.data();
  for (Index r = 0; r < right; ++r)
    for (Index i = 0; i < in; ++i)
      for (Index l = 0; l < left; ++l) m(i, l + left * r) = d[l + left * (i + in * r)];
  return m;
}

Matrix matricize(const SparseTensor& t, int mode) {
  check_mode(mode, t.order());
  const int n = t.order();
  Index cols = shape_product(t.shape()) / t.dim(mode);
  Matrix m = Matrix::Zero(t.dim(mode), cols);
  for (Index e = 0; e < t.nnz(); ++e) {
    Index c = 0;
    for (int q = n - 1; q >= 0; --q) {
      if (q == mode) continue;
      c = c * t.dim(q) + t.index(e, q);
    }
    m(t.index(e, mode), c) = t.value(e);
  }
  return m;
}

DenseTensor subtensor(const DenseTensor& t, const std::vector<Index>& i, const std::vector<Index>& j,
                      const std::vector<Index>& k) {
  if (t.order() != 3) throw InvalidArgument("subtensor: needs a 3-way tensor");
  const std::vector<Index>* idx[3] = {&i, &j, &k};
  for (int m = 0; m < 3; ++m)
    for (Index v : *idx[m])
      if (v < 0 || v >= t.dim(m)) throw InvalidArgument("subtensor: index out of range");
  DenseTensor out({static_cast<Index>(i.size()), static_cast<Index>(j.size()), static_cast<Index>(k.size())});
  for (std::size_t c = 0; c < k.size(); ++c)
    for (std::size_t b = 0; b < j.size(); ++b)
      for (std::size_t a = 0; a < i.size(); ++a) out(a, b, c) = t(i[a], j[b], k[c]);
  return out;
}

DenseTensor fold(const Matrix& m, const Shape& shape, int mode) {
  check_mode(mode, static_cast<int>(shape.size()));
  auto [left, right] = split_sizes(shape, mode);
  const Index in = shape[mode];
  if (m.rows() != in || m.cols() != left * right) throw InvalidArgument("fold: matrix size does not match shape");
  DenseTensor t(shape);
  double* d = t.data();
  for (Index r = 0; r < right; ++r)
    for (Index i = 0; i < in; ++i)
      for (Index l = 0; l < left; ++l) d[l + left * (i + in * r)] = m(i, l + left * r);
  return t;
}

// ---------------------------------------------------------------------------
// Products

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("khatri_rao: column counts differ");
  Matrix k(a.rows() * b.rows(), a.cols());
  for (Index f = 0; f < a.cols(); ++f)
    for (Index i = 0; i < a.rows(); ++i) k.col(f).segment(i * b.rows(), b.rows()) = a(i, f) * b.col(f);
  return k;
}

Matrix khatri_rao(const std::vector<Matrix>& mats) {
  if (mats.empty()) throw InvalidArgument("khatri_rao: empty chain");
  Matrix k = mats[0];
  for (std::size_t i = 1; i < mats.size(); ++i) k = khatri_rao(k, mats[i]);
  return k;
}

Matrix kron_partitioned(const Matrix& a, const std::vector<Index>& a_widths, const Matrix& b,
                        const std::vector<Index>& b_widths) {
  if (a_widths.size() != b_widths.size() || a_widths.empty())
    throw InvalidArgument("kron_partitioned: block counts differ");
  Index sa = 0, sb = 0, out_cols = 0;
  for (std::size_t r = 0; r < a_widths.size(); ++r) {
    if (a_widths[r] <= 0 || b_widths[r] <= 0) throw InvalidArgument("kron_partitioned: nonpositive width");
    sa += a_widths[r];
    sb += b_widths[r];
    out_cols += a_widths[r] * b_widths[r];
  }
  if (sa != a.cols() || sb != b.cols()) throw InvalidArgument("kron_partitioned: widths do not match columns");
  Matrix out(a.rows() * b.rows(), out_cols);
  Index oa = 0, ob = 0, oc = 0;
  for (std::size_t r = 0; r < a_widths.size(); ++r) {
    Index w = a_widths[r] * b_widths[r];
    out.middleCols(oc, w) = kron(a.middleCols(oa, a_widths[r]), b.middleCols(ob, b_widths[r]));
    oa += a_widths[r];
    ob += b_widths[r];
    oc += w;
  }
  return out;
}

namespace {

Index check_factors(const Shape& shape, const std::vector<Matrix>& factors, int mode) {
  const int n = static_cast<int>(shape.size());
  check_mode(mode, n);
  if (static_cast<int>(factors.size()) != n) throw InvalidArgument("mttkrp: need one factor slot per mode");
  Index f = -1;
  for (int m = 0; m < n; ++m) {
    if (m == mode) continue;
    if (factors[m].rows() != shape[m]) throw InvalidArgument("mttkrp: factor rows do not match tensor");
    if (f < 0) f = factors[m].cols();
    if (factors[m].cols() != f) throw InvalidArgument("mttkrp: factor column counts differ");
  }
  return std::max<Index>(f, 0);
}

}  // namespace

Matrix mttkrp(const DenseTensor& t, const std::vector<Matrix>& factors, int mode) {
  const Index f = check_factors(t.shape(), factors, mode);
  if (t.order() == 3) {
    const Matrix& A = factors[0];
    const Matrix& B = factors[1];
    const Matrix& C = factors[2];
    const Index K = t.dim(2);
    Matrix m = Matrix::Zero(t.dim(mode), f);
    for (Index k = 0; k < K; ++k) {
      auto xk = t.slice(k);
      if (mode == 0) {
        m.noalias() += (xk * B) * C.row(k).asDiagonal();
      } else if (mode == 1) {
        m.noalias() += (xk.transpose() * A) * C.row(k).asDiagonal();
      } else {
        m.row(k) = A.cwiseProduct(xk * B).colwise().sum();
      }
    }
    return m;
  }
  std::vector<Matrix> chain;
  for (int q = t.order() - 1; q >= 0; --q)
    if (q != mode) chain.push_back(factors[q]);
  return matricize(t, mode) * khatri_rao(chain);
}

Matrix mttkrp(const SparseTensor& t, const std::vector<Matrix>& factors, int mode) {
  const Index f = check_factors(t.shape(), factors, mode);
  const int n = t.order();
  Matrix m = Matrix::Zero(t.dim(mode), f);
  Eigen::RowVectorXd row(f);
  for (Index e = 0; e < t.nnz(); ++e) {
    row.setConstant(t.value(e));
    for (int q = 0; q < n; ++q)
      if (q != mode) row.array() *= factors[q].row(t.index(e, q)).array();
    m.row(t.index(e, mode)) += row;
  }
  return m;
}

DenseTensor n_mode_product(const DenseTensor& t, const Matrix& m, int mode) {
  check_mode(mode, t.order());
  if (m.cols() != t.dim(mode)) throw InvalidArgument("n_mode_product: matrix columns do not match mode size");
  auto [left, right] = split_sizes(t.shape(), mode);
  Shape out_shape = t.shape();
  out_shape[mode] = m.rows();
  DenseTensor out(out_shape);
  const Index in = t.dim(mode), p = m.rows();
  for (Index r = 0; r < right; ++r) {
    Eigen::Map<const Matrix> x(t.data() + r * left * in, left, in);
    Eigen::Map<Matrix> y(out.data() + r * left * p, left, p);
    y.noalias() = x * m.transpose();
  }
  return out;
}

DenseTensor multi_mode_product(const DenseTensor& t, const std::vector<Matrix>& mats) {
  if (static_cast<int>(mats.size()) != t.order()) throw InvalidArgument("multi_mode_product: need one slot per mode");
  // Apply the most shrinking products first.
  std::vector<int> order;
  for (int n = 0; n < t.order(); ++n)
    if (mats[n].size() > 0) order.push_back(n);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    double ra = static_cast<double>(mats[a].rows()) / static_cast<double>(mats[a].cols());
    double rb = static_cast<double>(mats[b].rows()) / static_cast<double>(mats[b].cols());
    return ra < rb;
  });
  DenseTensor out = t;
  for (int n : order) out = n_mode_product(out, mats[n], n);
  return out;
}

// ---------------------------------------------------------------------------
// HOSVD

void fix_signs(Matrix& m) {
  for (Index c = 0; c < m.cols(); ++c) {
    Index best = 0;
    m.col(c).cwiseAbs().maxCoeff(&best);
    if (m(best, c) < 0) m.col(c) = -m.col(c);
  }
}

HosvdResult hosvd(const DenseTensor& t) {
  if (frobenius_norm(t) == 0.0) throw NumericalError("hosvd: all-zero tensor");
  HosvdResult res;
  std::vector<Matrix> proj(t.order());
  for (int n = 0; n < t.order(); ++n) {
    Matrix xn = matricize(t, n);
    Eigen::BDCSVD<Matrix> svd(xn, Eigen::ComputeThinU);
    Matrix u = svd.matrixU();
    fix_signs(u);
    res.singular_values.push_back(svd.singularValues());
    proj[n] = u.transpose();
    res.mode_factors.push_back(std::move(u));
  }
  res.core = multi_mode_product(t, proj);
  return res;
}

// ---------------------------------------------------------------------------
// Norms and elementwise ops

double frobenius_norm(const DenseTensor& t) {
  return Eigen::Map<const Vector>(t.data(), t.size()).norm();
}

double frobenius_norm(const SparseTensor& t) {
  return Eigen::Map<const Vector>(t.values().data(), t.nnz()).norm();
}

double inner(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) throw InvalidArgument("inner: shape mismatch");
  return Eigen::Map<const Vector>(a.data(), a.size()).dot(Eigen::Map<const Vector>(b.data(), b.size()));
}

double inner(const SparseTensor& a, const SparseTensor& b) {
  if (a.shape() != b.shape()) throw InvalidArgument("inner: shape mismatch");
  // Both are sorted by linear index, so a merge suffices.
  const int n = a.order();
  auto lin = [&](const SparseTensor& s, Index e) {
    Index l = 0;
    for (int m = n - 1; m >= 0; --m) l = l * s.dim(m) + s.index(e, m);
    return l;
  };
  double acc = 0.0;
  Index i = 0, j = 0;
  while (i < a.nnz() && j < b.nnz()) {
    Index li = lin(a, i), lj = lin(b, j);
    if (li == lj) acc += a.value(i++) * b.value(j++);
    else if (li < lj) ++i;
    else ++j;
  }
  return acc;
}

double inner(const SparseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) throw InvalidArgument("inner: shape mismatch");
  const int n = a.order();
  std::vector<Index> idx(n);
  double acc = 0.0;
  for (Index e = 0; e < a.nnz(); ++e) {
    for (int m = 0; m < n; ++m) idx[m] = a.index(e, m);
    acc += a.value(e) * b.at(idx);
  }
  return acc;
}

DenseTensor operator+(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) throw InvalidArgument("tensor sum: shape mismatch");
  DenseTensor out = a;
  for (Index i = 0; i < a.size(); ++i) out.values()[i] += b.values()[i];
  return out;
}

DenseTensor operator-(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) throw InvalidArgument("tensor difference: shape mismatch");
  DenseTensor out = a;
  for (Index i = 0; i < a.size(); ++i) out.values()[i] -= b.values()[i];
  return out;
}

DenseTensor operator*(double s, const DenseTensor& a) {
  DenseTensor out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

// ---------------------------------------------------------------------------
// Pseudo-inverses

Matrix pinv(const Matrix& m) {
  if (m.size() == 0) return Matrix(m.cols(), m.rows());
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  const double cutoff =
      static_cast<double>(std::max(m.rows(), m.cols())) * std::numeric_limits<double>::epsilon() * smax;
  Vector inv(s.size());
  for (Index i = 0; i < s.size(); ++i) inv(i) = s(i) > cutoff ? 1.0 / s(i) : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix pinv_sym(const Matrix& m) {
  if (m.rows() != m.cols()) throw InvalidArgument("pinv_sym: matrix not square");
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const Vector& ev = es.eigenvalues();
  const double emax = ev.cwiseAbs().maxCoeff();
  const double cutoff = static_cast<double>(m.rows()) * std::numeric_limits<double>::epsilon() * emax;
  Vector inv(ev.size());
  for (Index i = 0; i < ev.size(); ++i) inv(i) = std::abs(ev(i)) > cutoff ? 1.0 / ev(i) : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

double rcond_sym(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  Vector ev = es.eigenvalues().cwiseAbs();
  double mx = ev.maxCoeff();
  return mx > 0 ? ev.minCoeff() / mx : 0.0;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

bool all_finite(const DenseTensor& t) {
  return Eigen::Map<const Vector>(t.data(), t.size()).allFinite();
}

}  // namespace tenstream
