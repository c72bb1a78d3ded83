#include "doctest.h"

#include <cmath>

#include "tenstream/cp.hpp"
#include "tenstream/errors.hpp"
#include "tenstream/harness.hpp"
#include "tenstream/match.hpp"

using namespace tenstream;

namespace {

DenseTensor triple_loop(const KruskalFactors& k) {
  const Matrix &a = k.factors[0], &b = k.factors[1], &c = k.factors[2];
  DenseTensor t({a.rows(), b.rows(), c.rows()});
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j)
      for (Index l = 0; l < c.rows(); ++l)
        for (Index r = 0; r < k.rank(); ++r) t(i, j, l) += k.lambda(r) * a(i, r) * b(j, r) * c(l, r);
  return t;
}

GenSpec cp_spec(Shape dims, Index rank, std::uint64_t seed) {
  GenSpec s;
  s.dims = std::move(dims);
  s.rank = rank;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("reconstruct") {
  SUBCASE("zero weights") {
    KruskalFactors k{{Matrix::Ones(2, 1), Matrix::Ones(3, 1), Matrix::Ones(4, 1)}, Vector::Zero(1)};
    CHECK(frobenius_norm(reconstruct(k)) == 0.0);
  }
  SUBCASE("selector") {
    KruskalFactors k{{Matrix::Identity(2, 1), Matrix::Identity(3, 1), Matrix::Identity(2, 1)}, Vector::Ones(1)};
    DenseTensor t = reconstruct(k);
    CHECK(t(0, 0, 0) == 1.0);
    CHECK(frobenius_norm(t) == 1.0);
  }
  SUBCASE("triple loop") {
    Rng rng(1);
    KruskalFactors k{{random_normal(3, 2, rng), random_normal(4, 2, rng), random_normal(5, 2, rng)},
                     random_uniform(2, 1, rng)};
    CHECK(frobenius_norm(reconstruct(k) - triple_loop(k)) < 1e-12);
  }
  SUBCASE("column permutation invariance") {
    Rng rng(2);
    KruskalFactors k{{random_normal(3, 3, rng), random_normal(4, 3, rng), random_normal(5, 3, rng)},
                     random_uniform(3, 1, rng)};
    CHECK(frobenius_norm(reconstruct(k) - reconstruct(permute(k, {2, 0, 1}))) < 1e-12);
  }
}

TEST_CASE("cp_als exact rank one") {
  CpInstance inst = gen_cp(cp_spec({6, 7, 8}, 1, 3));
  AlsOptions o;
  o.tol = 1e-14;
  o.max_iters = 200;
  KruskalFactors k = cp_als(inst.tensor, 1, o);
  CHECK(relative_error(inst.tensor, reconstruct(k)) <= 1e-10);
}

TEST_CASE("cp_als recovers noiseless rank three") {
  CpInstance inst = gen_cp(cp_spec({20, 20, 20}, 3, 4));
  AlsOptions o;
  o.tol = 1e-12;
  o.seed = 11;
  KruskalFactors k = cp_als(inst.tensor, 3, o);
  CHECK(fms(k, inst.truth) >= 0.99);
}

TEST_CASE("cp_als invariants") {
  GenSpec s = cp_spec({8, 9, 10}, 3, 5);
  s.noise_snr_db = 10.0;
  CpInstance inst = gen_cp(s);
  CpTrace trace;
  AlsOptions o;
  o.tol = 1e-10;
  o.max_iters = 300;
  KruskalFactors k = cp_als(inst.tensor, 3, o, &trace);
  REQUIRE(trace.objective.size() >= 2);
  for (std::size_t i = 1; i < trace.objective.size(); ++i)
    CHECK(trace.objective[i] <= trace.objective[i - 1] * (1 + 1e-12) + 1e-12 * frobenius_norm(inst.tensor));
  for (const auto& f : k.factors)
    for (Index c = 0; c < f.cols(); ++c) CHECK(std::abs(f.col(c).norm() - 1.0) < 1e-12);
  for (Index c = 0; c < k.rank(); ++c) CHECK(k.lambda(c) >= 0.0);
  // The fast objective agrees with an explicit residual.
  double explicit_obj = std::pow(frobenius_norm(inst.tensor - reconstruct(k)), 2);
  CHECK(std::abs(explicit_obj - trace.objective.back()) <= 1e-8 * inner(inst.tensor, inst.tensor));
}

TEST_CASE("cp_als sparse and dense paths agree") {
  GenSpec s = cp_spec({6, 5, 7}, 2, 6);
  s.density = 0.5;
  CpInstance inst = gen_cp(s);
  AlsOptions o;
  o.max_iters = 20;
  KruskalFactors kd = cp_als(inst.tensor, 2, o);
  KruskalFactors ks = cp_als(SparseTensor::from_dense(inst.tensor), 2, o);
  for (int m = 0; m < 3; ++m) CHECK((kd.factors[m] - ks.factors[m]).norm() < 1e-8);
}

TEST_CASE("cp_als hosvd init") {
  CpInstance inst = gen_cp(cp_spec({10, 10, 10}, 2, 7));
  AlsOptions o;
  o.init = InitMethod::Hosvd;
  o.tol = 1e-12;
  CHECK(relative_error(inst.tensor, reconstruct(cp_als(inst.tensor, 2, o))) < 1e-6);
}

TEST_CASE("cp_als errors") {
  DenseTensor t({2, 2, 2}, std::vector<double>(8, 1.0));
  CHECK_THROWS_AS(cp_als(t, 0), InvalidArgument);
  CHECK_THROWS_AS(cp_als(t, 5), InvalidArgument);
  AlsOptions bad;
  bad.tol = 0;
  CHECK_THROWS_AS(cp_als(t, 1, bad), InvalidArgument);
}

TEST_CASE("corcondia") {
  AlsOptions o;
  o.tol = 1e-13;
  o.max_iters = 3000;
  SUBCASE("exact rank fit scores near 100") {
    CpInstance inst = gen_cp(cp_spec({8, 9, 10}, 3, 8));
    KruskalFactors k = cp_als(inst.tensor, 3, o);
    CHECK(corcondia(inst.tensor, k) >= 99.0);
    CHECK(std::abs(corcondia(SparseTensor::from_dense(inst.tensor), k) - corcondia(inst.tensor, k)) < 1e-8);
  }
  SUBCASE("rank one fit scores 100") {
    GenSpec s = cp_spec({6, 6, 6}, 3, 9);
    s.noise_snr_db = 5.0;
    CpInstance inst = gen_cp(s);
    KruskalFactors k = cp_als(inst.tensor, 1, o);
    CHECK(std::abs(corcondia(inst.tensor, k) - 100.0) < 1e-6);
  }
  SUBCASE("overfactored scores low") {
    CpInstance inst = gen_cp(cp_spec({8, 9, 10}, 2, 10));
    o.max_iters = 500;
    KruskalFactors k = cp_als(inst.tensor, 3, o);
    CHECK(corcondia(inst.tensor, k) < 50.0);
  }
  SUBCASE("least-squares core oracle") {
    // Scaling lambda into mode 0 and taking pseudo-inverses of each factor
    // is the least-squares Tucker core; check against the vectorized solve.
    Rng rng(12);
    DenseTensor t({4, 3, 5});
    Matrix v = random_normal(60, 1, rng);
    std::copy(v.data(), v.data() + 60, t.data());
    KruskalFactors k{{random_normal(4, 2, rng), random_normal(3, 2, rng), random_normal(5, 2, rng)},
                     random_uniform(2, 1, rng).array() + 0.5};
    Matrix a = k.factors[0] * k.lambda.asDiagonal();
    Matrix design = kron(k.factors[2], kron(k.factors[1], a));
    Vector g = pinv(design) * Eigen::Map<const Vector>(t.data(), 60);
    double ss = 0;
    for (Index x = 0; x < 2; ++x)
      for (Index y = 0; y < 2; ++y)
        for (Index z = 0; z < 2; ++z) {
          double d = g(x + 2 * (y + 2 * z)) - ((x == y && y == z) ? 1.0 : 0.0);
          ss += d * d;
        }
    CHECK(std::abs(corcondia(t, k) - 100.0 * (1 - ss / 2)) < 1e-9);
  }
}

TEST_CASE("get_rank") {
  GetRankOptions o;
  o.als.tol = 1e-10;
  o.als.max_iters = 500;
  SUBCASE("single candidate") {
    CpInstance inst = gen_cp(cp_spec({5, 5, 5}, 2, 13));
    CHECK(get_rank(inst.tensor, 1, 2, o) == 1);
  }
  SUBCASE("noiseless rank two") {
    CpInstance inst = gen_cp(cp_spec({10, 10, 10}, 2, 14));
    GetRankReport rep;
    CHECK(get_rank(inst.tensor, 4, 3, o, &rep) == 2);
    CHECK(rep.mean_scores.size() == 4);
  }
  SUBCASE("noiseless rank three") {
    CpInstance inst = gen_cp(cp_spec({10, 10, 10}, 3, 15));
    CHECK(get_rank(inst.tensor, 5, 3, o) == 3);
  }
  CHECK_THROWS_AS(get_rank(DenseTensor({2, 2, 2}), 0, 1), InvalidArgument);
}

TEST_CASE("get_rank on noisy rank three, majority of seeds") {
  GetRankOptions o;
  o.als.tol = 1e-8;
  o.als.max_iters = 500;
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GenSpec s = cp_spec({30, 30, 30}, 3, 100 + seed);
    s.noise_snr_db = 10.0;
    CpInstance inst = gen_cp(s);
    o.als.seed = seed;
    if (get_rank(inst.tensor, 6, 3, o) == 3) ++hits;
  }
  CHECK(hits >= 6);
}

TEST_CASE("match_columns") {
  Rng rng(16);
  Matrix ref = random_normal(6, 3, rng);
  for (Index c = 0; c < 3; ++c) ref.col(c).normalize();
  SUBCASE("identity") {
    ColumnMatch m = match_columns(ref, ref);
    for (Index f = 0; f < 3; ++f) {
      CHECK(m.assignment[f] == f);
      CHECK(std::abs(m.scores[f] - 1.0) < 1e-12);
    }
  }
  SUBCASE("swapped and rescaled") {
    Matrix cand(6, 3);
    cand.col(0) = 2.0 * ref.col(1);
    cand.col(1) = 0.5 * ref.col(0);
    cand.col(2) = 3.0 * ref.col(2);
    for (auto method : {MatchMethod::Greedy, MatchMethod::Hungarian}) {
      ColumnMatch m = match_columns(ref, cand, method);
      CHECK(m.assignment[0] == 1);
      CHECK(m.assignment[1] == 0);
      CHECK(m.assignment[2] == 2);
      for (double s : m.scores) CHECK(std::abs(s - 1.0) < 1e-10);
    }
  }
  SUBCASE("orthogonal extra column scores below one") {
    Matrix r = Matrix::Identity(4, 2);
    Matrix cand = Matrix::Zero(4, 2);
    cand(0, 0) = 1;
    cand(2, 1) = 1;
    ColumnMatch m = match_columns(r, cand);
    CHECK(m.scores[1] < 1.0);
  }
  CHECK_THROWS_AS(match_columns(Matrix(0, 2), Matrix(0, 2)), InvalidArgument);
}

TEST_CASE("hungarian is optimal where greedy is not") {
  Matrix s(2, 2);
  s << 0.9, 0.8, 0.85, 0.1;
  auto g = greedy_assignment(s);
  auto h = hungarian_assignment(s);
  CHECK(g[0] == 0);
  CHECK(h[0] == 1);
  CHECK(h[1] == 0);
}
