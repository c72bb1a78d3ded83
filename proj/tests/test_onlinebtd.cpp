#include "doctest.h"

#include <cmath>

#include "tenstream/errors.hpp"
#include "tenstream/harness.hpp"
#include "tenstream/onlinebtd.hpp"
#include "tenstream/random.hpp"

using namespace tenstream;

namespace {

double lu_residual(const Matrix& a, const LuResult& lu) { return (lu.P * a - lu.L * lu.U).cwiseAbs().maxCoeff(); }

bool is_permutation(const Matrix& p) {
  for (Index i = 0; i < p.rows(); ++i)
    if (std::abs(p.row(i).sum() - 1.0) > 0 || std::abs(p.col(i).sum() - 1.0) > 0 || p.row(i).maxCoeff() != 1.0)
      return false;
  return true;
}

BtdFactors truth_prefix(const BtdFactors& f, Index k) {
  BtdFactors g = f;
  g.C = f.C.topRows(k);
  return g;
}

}  // namespace

TEST_CASE("modified_lu") {
  SUBCASE("identity") {
    LuResult lu = modified_lu(Matrix::Identity(4, 4));
    CHECK(lu.L == Matrix::Identity(4, 4));
    CHECK(lu.U == Matrix::Identity(4, 4));
    CHECK(lu.P == Matrix::Identity(4, 4));
  }
  SUBCASE("diagonally dominant") {
    Rng rng(1);
    Matrix a = random_normal(4, 4, rng);
    a.diagonal().array() += 10.0;
    LuResult lu = modified_lu(a);
    CHECK(lu_residual(a, lu) <= 1e-10);
    CHECK(lu.L.isLowerTriangular());
    CHECK(lu.U.isUpperTriangular());
    CHECK(is_permutation(lu.P));
  }
  SUBCASE("forced pivot") {
    Matrix a(2, 2);
    a << 0, 1, 1, 0;
    LuResult lu = modified_lu(a);
    CHECK(lu.P(0, 1) == 1.0);
    CHECK(lu.P(1, 0) == 1.0);
    CHECK(lu_residual(a, lu) == 0.0);
  }
  SUBCASE("symmetric positive definite gives U = L^T") {
    Rng rng(2);
    Matrix b = random_normal(6, 6, rng);
    Matrix a = b * b.transpose() + 6.0 * Matrix::Identity(6, 6);
    LuResult lu = modified_lu(a);
    if (lu.P == Matrix::Identity(6, 6)) CHECK((lu.U - lu.L.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(lu_residual(a, lu) <= 1e-10 * a.cwiseAbs().maxCoeff());
  }
  SUBCASE("random matrices") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      const Index n = 1 + trial % 12;
      Matrix a = random_normal(n, n, rng);
      LuResult lu = modified_lu(a);
      CHECK(lu_residual(a, lu) <= 1e-8 * a.cwiseAbs().maxCoeff());
    }
  }
  SUBCASE("singular and non-square") {
    Matrix a(2, 2);
    a << 1, 2, 2, 4;
    CHECK_THROWS_AS(modified_lu(a), NumericalError);
    CHECK_THROWS_AS(modified_lu(Matrix::Zero(3, 3)), NumericalError);
    CHECK_THROWS_AS(modified_lu(Matrix::Ones(2, 3)), InvalidArgument);
  }
}

TEST_CASE("lu_solve matches the pseudo-inverse on a nonsingular system") {
  Rng rng(4);
  Matrix a = random_normal(7, 7, rng);
  Vector b = random_normal(7, 1, rng);
  Vector x = lu_solve(a, b);
  Vector ref = pinv(a) * b;
  CHECK((x - ref).norm() <= 1e-8 * ref.norm());
}

TEST_CASE("onlinebtd_update on an exact stream") {
  GenSpec s;
  s.model = ModelKind::Btd;
  s.dims = {15, 14, 40};
  s.btd_ranks = BtdRanks::uniform(2, 2, 3, 2);
  s.seed = 8;
  BtdInstance inst = gen_btd(s);
  OnlineBtdState st = onlinebtd_init(truth_prefix(inst.truth, 10));
  CHECK(st.slices == 10);
  for (Index k = 10; k < 40; k += 10) {
    DenseTensor batch = inst.tensor.slices(k, k + 10);
    onlinebtd_update(st, batch);
    CHECK(st.factors.C.rows() == k + 10);
    CHECK(st.slices == k + 10);
    BtdFactors tail = st.factors;
    tail.C = st.factors.C.bottomRows(10);
    CHECK(btd_relative_error(batch, tail) <= 1e-6);
    // Appended rows lie in the span of the true temporal blocks.
    for (Index r = 0; r < 2; ++r) {
      Matrix truth_rows = inst.truth.block(2, r).middleRows(k, 10);
      Matrix got = tail.block(2, r);
      Matrix coef = pinv(truth_rows) * got;
      CHECK((truth_rows * coef - got).norm() <= 1e-6 * got.norm());
    }
  }
  CHECK(btd_relative_error(inst.tensor, st.factors) <= 1e-6);
  CHECK(st.warnings.empty());
}

TEST_CASE("onlinebtd_update batch handling") {
  GenSpec s;
  s.model = ModelKind::Btd;
  s.dims = {8, 7, 12};
  s.btd_ranks = BtdRanks::uniform(2, 2, 2, 2);
  s.seed = 9;
  BtdInstance inst = gen_btd(s);
  OnlineBtdState st = onlinebtd_init(truth_prefix(inst.truth, 6));
  SUBCASE("empty batch is rejected by default") {
    CHECK_THROWS_AS(onlinebtd_update(st, DenseTensor({8, 7, 0})), InvalidArgument);
    CHECK_THROWS_AS(onlinebtd_update(st, DenseTensor({8, 7, 3})), InvalidArgument);
  }
  SUBCASE("empty batch with opt-in appends zero rows") {
    st.opts.allow_empty_batch = true;
    onlinebtd_update(st, DenseTensor({8, 7, 3}));
    CHECK(st.factors.C.rows() == 9);
    CHECK(st.factors.C.bottomRows(3).norm() == 0.0);
  }
  SUBCASE("shape mismatch") { CHECK_THROWS_AS(onlinebtd_update(st, DenseTensor({7, 7, 2})), InvalidArgument); }
  SUBCASE("initialization by BTD-ALS") {
    AlsOptions o;
    o.tol = 1e-12;
    o.max_iters = 2000;
    OnlineBtdState fresh = onlinebtd_init(inst.tensor.slices(0, 6), s.btd_ranks, o);
    CHECK(fresh.slices == 6);
    onlinebtd_update(fresh, inst.tensor.slices(6, 12));
    CHECK(fresh.factors.C.rows() == 12);
  }
}
