#include "doctest.h"

#include <cmath>

#include "tenstream/errors.hpp"
#include "tenstream/harness.hpp"
#include "tenstream/parafac2.hpp"

using namespace tenstream;

namespace {

Parafac2Instance exact_instance(Index i_max, Index j, Index k, Index rank, std::uint64_t seed) {
  GenSpec s;
  s.model = ModelKind::Parafac2;
  s.dims = {i_max, j, k};
  s.rank = rank;
  s.seed = seed;
  return gen_parafac2(s);
}

double slice_oracle(const IrregularTensor& t, const Parafac2Factors& f) {
  double loss = 0.0;
  for (Index k = 0; k < t.num_slices(); ++k) {
    const Matrix& x = t.slices[k];
    for (Index i = 0; i < x.rows(); ++i)
      for (Index j = 0; j < x.cols(); ++j) {
        double m = 0.0;
        for (Index r = 0; r < f.rank(); ++r) {
          double u = 0.0;
          for (Index s = 0; s < f.rank(); ++s) u += f.Q[k](i, s) * f.H(s, r);
          m += u * f.W(k, r) * f.V(j, r);
        }
        loss += (x(i, j) - m) * (x(i, j) - m);
      }
  }
  return loss;
}

}  // namespace

TEST_CASE("pf2_loss") {
  Parafac2Instance inst = exact_instance(6, 5, 4, 2, 1);
  SUBCASE("zero factors") {
    Parafac2Factors z = inst.truth;
    z.H.setZero();
    CHECK(std::abs(pf2_loss(inst.tensor, z) - inst.tensor.squared_norm()) <= 1e-12 * inst.tensor.squared_norm());
  }
  SUBCASE("exact factors") { CHECK(pf2_loss(inst.tensor, inst.truth) <= 1e-12 * inst.tensor.squared_norm()); }
  SUBCASE("random factors match the per-slice oracle") {
    Rng rng(2);
    Parafac2Factors f = inst.truth;
    f.H = random_normal(2, 2, rng);
    f.V = random_normal(5, 2, rng);
    f.W = random_normal(4, 2, rng);
    const double oracle = slice_oracle(inst.tensor, f);
    CHECK(std::abs(pf2_loss(inst.tensor, f) - oracle) <= 1e-10 * oracle);
  }
  SUBCASE("shape mismatch") {
    Parafac2Factors f = inst.truth;
    f.W = Matrix::Ones(3, 2);
    CHECK_THROWS_AS(pf2_loss(inst.tensor, f), InvalidArgument);
  }
}

TEST_CASE("generated truth") {
  Parafac2Instance inst = exact_instance(9, 7, 6, 3, 3);
  for (const auto& q : inst.truth.Q)
    CHECK((q.transpose() * q - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(pf2_loss(inst.tensor, inst.truth) <= 1e-12 * inst.tensor.squared_norm());
}

TEST_CASE("single slice rank one is the truncated SVD") {
  Rng rng(4);
  IrregularTensor t{{random_normal(7, 5, rng)}};
  Parafac2Options o;
  o.tol = 1e-14;
  o.max_iters = 2000;
  Parafac2Factors f = parafac2_als(t, 1, o);
  Eigen::JacobiSVD<Matrix> svd(t.slices[0]);
  const Vector s = svd.singularValues();
  const double best = s.squaredNorm() - s(0) * s(0);
  CHECK(std::abs(pf2_loss(t, f) - best) <= 1e-8 * t.squared_norm());
}

TEST_CASE("parafac2_als recovers exact data with invariants") {
  Parafac2Instance inst = exact_instance(12, 10, 8, 3, 5);
  Parafac2Options o;
  o.tol = 1e-14;
  o.max_iters = 5000;
  o.seed = 9;
  Parafac2Trace trace;
  Parafac2Factors f = parafac2_als(inst.tensor, 3, o, &trace);
  const double n2 = inst.tensor.squared_norm();
  CHECK(pf2_loss(inst.tensor, f) <= 1e-8 * n2);
  for (std::size_t i = 1; i < trace.loss.size(); ++i) CHECK(trace.loss[i] <= trace.loss[i - 1] * (1 + 1e-10) + 1e-20 * n2);
  for (const auto& q : f.Q) CHECK((q.transpose() * q - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-10);
  const Matrix g0 = f.U(0).transpose() * f.U(0);
  for (Index k = 1; k < inst.tensor.num_slices(); ++k)
    CHECK((f.U(k).transpose() * f.U(k) - g0).norm() / g0.norm() <= 1e-6);
}

TEST_CASE("parafac2_als svd init and errors") {
  Parafac2Instance inst = exact_instance(8, 6, 5, 2, 6);
  Parafac2Options o;
  o.init = InitMethod::Hosvd;
  o.tol = 1e-12;
  o.max_iters = 3000;
  CHECK(pf2_loss(inst.tensor, parafac2_als(inst.tensor, 2, o)) <= 1e-8 * inst.tensor.squared_norm());
  CHECK_THROWS_AS(parafac2_als(inst.tensor, 0), InvalidArgument);
  CHECK_THROWS_AS(parafac2_als(inst.tensor, 7), InvalidArgument);
  IrregularTensor bad{{Matrix::Ones(2, 3), Matrix::Ones(2, 4)}};
  CHECK_THROWS_AS(parafac2_als(bad, 1), InvalidArgument);
}

TEST_CASE("degenerate slice keeps its previous Q") {
  Parafac2Instance inst = exact_instance(6, 5, 4, 2, 7);
  inst.tensor.slices[1].setZero();
  Parafac2Trace trace;
  Parafac2Options o;
  o.max_iters = 5;
  Parafac2Factors f = parafac2_als(inst.tensor, 2, o, &trace);
  CHECK(!trace.warnings.empty());
  CHECK((f.Q[1].transpose() * f.Q[1] - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}
