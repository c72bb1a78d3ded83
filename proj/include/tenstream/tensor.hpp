#pragma once

// Dense and sparse tensors plus the multilinear kernels used by every
// decomposition in the library.
//
// Conventions (used everywhere, including the file formats):
//  * modes are 0-based in the C++ API;
//  * DenseTensor values are stored first-mode-fastest, i.e. entry
//    (i0, i1, ..., iN-1) lives at i0 + I0*(i1 + I1*(i2 + ...));
//  * the mode-n unfolding has I_n rows and its columns enumerate the
//    remaining modes in increasing order, again first-fastest;
//  * kron(a, b) has row index ia*rows(b) + ib, so the Khatri-Rao chain that
//    matches the mode-n unfolding lists the remaining factors in decreasing
//    mode order: X_(0) = A0 * (A2 (.) A1)^T for a 3-way Kruskal tensor.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace tenstream {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Shape = std::vector<Index>;

class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  Index dim(int mode) const { return shape_.at(mode); }
  int order() const { return static_cast<int>(shape_.size()); }
  Index size() const { return static_cast<Index>(data_.size()); }

  double& operator()(Index i, Index j, Index k) { return data_[i + shape_[0] * (j + shape_[1] * k)]; }
  double operator()(Index i, Index j, Index k) const { return data_[i + shape_[0] * (j + shape_[1] * k)]; }
  double& at(const std::vector<Index>& idx);
  double at(const std::vector<Index>& idx) const;
  Index linear_index(const std::vector<Index>& idx) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  // Frontal slice k of a 3-way tensor as an I0 x I1 column-major view.
  Eigen::Map<Matrix> slice(Index k);
  Eigen::Map<const Matrix> slice(Index k) const;

  // Sub-tensor of a 3-way tensor with mode-2 indices [begin, end).
  DenseTensor slices(Index begin, Index end) const;
  // Appends the frontal slices of `other` (same first two dims).
  void append_slices(const DenseTensor& other);

  bool operator==(const DenseTensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

class SparseTensor {
 public:
  SparseTensor() = default;
  explicit SparseTensor(Shape shape);
  // `indices` holds nnz * order entries, one index tuple after another.
  // Entries are sorted by linear index; duplicates, zeros and out-of-range
  // indices are rejected.
  SparseTensor(Shape shape, std::vector<Index> indices, std::vector<double> values);

  static SparseTensor from_dense(const DenseTensor& t);
  DenseTensor to_dense() const;

  const Shape& shape() const { return shape_; }
  Index dim(int mode) const { return shape_.at(mode); }
  int order() const { return static_cast<int>(shape_.size()); }
  Index nnz() const { return static_cast<Index>(values_.size()); }
  Index index(Index entry, int mode) const { return indices_[entry * order() + mode]; }
  double value(Index entry) const { return values_[entry]; }
  const std::vector<Index>& indices() const { return indices_; }
  const std::vector<double>& values() const { return values_; }

 private:
  Shape shape_;
  std::vector<Index> indices_;
  std::vector<double> values_;
};

Index shape_product(const Shape& shape);

Matrix matricize(const DenseTensor& t, int mode);
Matrix matricize(const SparseTensor& t, int mode);
DenseTensor fold(const Matrix& m, const Shape& shape, int mode);

// Entries at the cross product of per-mode index lists of a 3-way tensor.
DenseTensor subtensor(const DenseTensor& t, const std::vector<Index>& i, const std::vector<Index>& j,
                      const std::vector<Index>& k);

Matrix kron(const Matrix& a, const Matrix& b);
Matrix khatri_rao(const Matrix& a, const Matrix& b);
// mats[0] (.) mats[1] (.) ... ; the last matrix varies fastest.
Matrix khatri_rao(const std::vector<Matrix>& mats);
// Horizontal concatenation of a_r (x) b_r over blocks of the given widths.
Matrix kron_partitioned(const Matrix& a, const std::vector<Index>& a_widths, const Matrix& b,
                        const std::vector<Index>& b_widths);

// Matricized tensor times Khatri-Rao product for `mode`; factors[mode] is
// ignored (may be empty) but every other entry needs F columns.
Matrix mttkrp(const DenseTensor& t, const std::vector<Matrix>& factors, int mode);
Matrix mttkrp(const SparseTensor& t, const std::vector<Matrix>& factors, int mode);

// t x_mode m : contracts mode `mode` (size m.cols()) into m.rows().
DenseTensor n_mode_product(const DenseTensor& t, const Matrix& m, int mode);
// Applies mats[n] along every mode n whose matrix is non-empty.
DenseTensor multi_mode_product(const DenseTensor& t, const std::vector<Matrix>& mats);

struct HosvdResult {
  DenseTensor core;
  std::vector<Matrix> mode_factors;
  std::vector<Vector> singular_values;
};

HosvdResult hosvd(const DenseTensor& t);

double frobenius_norm(const DenseTensor& t);
double frobenius_norm(const SparseTensor& t);
double inner(const DenseTensor& a, const DenseTensor& b);
double inner(const SparseTensor& a, const SparseTensor& b);
double inner(const SparseTensor& a, const DenseTensor& b);

DenseTensor operator+(const DenseTensor& a, const DenseTensor& b);
DenseTensor operator-(const DenseTensor& a, const DenseTensor& b);
DenseTensor operator*(double s, const DenseTensor& a);

// SVD pseudo-inverse with cutoff max(rows, cols) * eps * sigma_max.
Matrix pinv(const Matrix& m);
// Same cutoff for a symmetric positive semidefinite matrix, via eigenvalues.
Matrix pinv_sym(const Matrix& m);
// Reciprocal 2-norm condition number estimate of a symmetric matrix.
double rcond_sym(const Matrix& m);

// Flips the sign of each column so that its largest-magnitude entry is
// positive.
void fix_signs(Matrix& m);

bool all_finite(const Matrix& m);
bool all_finite(const DenseTensor& t);

}  // namespace tenstream
