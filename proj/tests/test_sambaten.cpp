#include "doctest.h"

#include <cmath>

#include "tenstream/errors.hpp"
#include "tenstream/harness.hpp"
#include "tenstream/parallel.hpp"
#include "tenstream/sambaten.hpp"

using namespace tenstream;

namespace {

GenSpec cp_spec(Shape dims, Index rank, std::uint64_t seed) {
  GenSpec s;
  s.dims = std::move(dims);
  s.rank = rank;
  s.seed = seed;
  return s;
}

KruskalFactors prefix(const KruskalFactors& k, Index rows) {
  KruskalFactors out = k;
  out.factors[2] = k.factors[2].topRows(rows);
  return out;
}

SambatenOptions exact_opts() {
  SambatenOptions o;
  o.als.tol = 1e-12;
  o.als.max_iters = 2000;
  o.als.init = InitMethod::Hosvd;
  return o;
}

KruskalFactors prefix_tail(const KruskalFactors& k, Index rows) {
  KruskalFactors out = k;
  out.factors[2] = k.factors[2].bottomRows(rows);
  return out;
}

// Mean |cosine| between matching columns of two row blocks.
double column_agreement(const Matrix& a, const Matrix& b, const std::vector<Index>& cols) {
  double s = 0;
  for (Index c : cols) s += std::abs(a.col(c).dot(b.col(c))) / (a.col(c).norm() * b.col(c).norm());
  return s / cols.size();
}

}  // namespace

TEST_CASE("moi_weights") {
  SUBCASE("uniform") {
    DenseTensor t({2, 2, 2}, std::vector<double>(8, 1.0));
    Vector w = moi_weights(t, 0);
    CHECK(w(0) == 4.0);
    CHECK(w(1) == 4.0);
  }
  SUBCASE("single entry") {
    DenseTensor t({2, 2, 2});
    t(1, 0, 0) = 3.0;
    Vector w = moi_weights(t, 0);
    CHECK(w(0) == 0.0);
    CHECK(w(1) == 9.0);
  }
  SUBCASE("double-sum oracle") {
    Rng rng(1);
    Matrix v = random_normal(64, 1, rng);
    DenseTensor t({4, 4, 4}, std::vector<double>(v.data(), v.data() + 64));
    for (int m = 0; m < 3; ++m) {
      Vector w = moi_weights(t, m);
      for (Index i = 0; i < 4; ++i) {
        double s = 0;
        for (Index a = 0; a < 4; ++a)
          for (Index b = 0; b < 4; ++b) {
            double x = m == 0 ? t(i, a, b) : m == 1 ? t(a, i, b) : t(a, b, i);
            s += x * x;
          }
        CHECK(std::abs(w(i) - s) <= 1e-12 * s);
      }
    }
  }
  CHECK_THROWS_AS(moi_weights(DenseTensor({2, 2, 2}), 3), InvalidArgument);
}

TEST_CASE("sample_indices") {
  SUBCASE("forced") {
    Vector w(3);
    w << 1, 0, 0;
    CHECK(sample_indices(w, 1, 5) == std::vector<Index>{0});
  }
  SUBCASE("exhaustive") {
    Vector w = Vector::Ones(5);
    CHECK(sample_indices(w, 5, 6) == std::vector<Index>{0, 1, 2, 3, 4});
  }
  SUBCASE("distinct and deterministic") {
    Vector w = Vector::LinSpaced(20, 1, 20);
    std::vector<Index> a = sample_indices(w, 8, 7);
    CHECK(a == sample_indices(w, 8, 7));
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i] > a[i - 1]);
  }
  SUBCASE("first-draw frequencies follow the weights") {
    Vector w(3);
    w << 1, 2, 3;
    std::vector<double> freq(3, 0.0);
    const int n = 100000;
    for (int seed = 0; seed < n; ++seed) freq[sample_indices_ordered(w, 2, seed)[0]] += 1.0 / n;
    for (int i = 0; i < 3; ++i) CHECK(std::abs(freq[i] - (i + 1) / 6.0) <= 0.02 * (i + 1) / 6.0);
  }
  SUBCASE("count too large") {
    Vector w(3);
    w << 1, 0, 2;
    CHECK_THROWS_AS(sample_indices(w, 3, 1), InvalidArgument);
  }
}

TEST_CASE("sambaten_update on an exact stream") {
  CpInstance inst = gen_cp(cp_spec({30, 30, 40}, 3, 2));
  SambatenState st = sambaten_init(inst.tensor.slices(0, 10), prefix(inst.truth, 10), exact_opts());
  for (Index k = 10; k < 40; k += 10) {
    sambaten_update(st, inst.tensor.slices(k, k + 10));
    CHECK(st.factors.factors[2].rows() == k + 10);
  }
  CHECK(fms(st.factors, inst.truth) >= 0.99);
  CHECK(relative_error(inst.tensor, reconstruct(st.factors)) <= 1e-6);
  CHECK(st.batches == 3);
}

TEST_CASE("single repetition over the full tensor equals batch cp_als") {
  CpInstance inst = gen_cp(cp_spec({12, 11, 20}, 2, 3));
  SambatenOptions o = exact_opts();
  o.s = 1;
  o.r = 1;
  SambatenState st = sambaten_init(inst.tensor.slices(0, 8), 2, o);
  sambaten_update(st, inst.tensor.slices(8, 20));
  KruskalFactors batch = cp_als(inst.tensor, 2, o.als);
  CHECK(fms(st.factors, batch) >= 0.99);
}

TEST_CASE("sambaten_update is deterministic and repetition order does not matter") {
  GenSpec s = cp_spec({15, 15, 30}, 3, 4);
  s.noise_snr_db = 15.0;
  CpInstance inst = gen_cp(s);
  SambatenOptions o = exact_opts();
  o.als.tol = 1e-6;
  o.seed = 11;
  SambatenState a = sambaten_init(inst.tensor.slices(0, 10), 3, o);
  SambatenState b = a;
  sambaten_update(a, inst.tensor.slices(10, 30));
  const int limit = thread_limit();
  set_thread_limit(1);
  sambaten_update(b, inst.tensor.slices(10, 30));
  set_thread_limit(limit);
  for (int m = 0; m < 3; ++m) CHECK(a.factors.factors[m] == b.factors.factors[m]);
  CHECK(a.factors.lambda == b.factors.lambda);
}

TEST_CASE("sambaten batch handling") {
  CpInstance inst = gen_cp(cp_spec({8, 9, 12}, 2, 5));
  SambatenState st = sambaten_init(inst.tensor.slices(0, 6), prefix(inst.truth, 6));
  SUBCASE("all-zero batch appends zero rows with a warning") {
    sambaten_update(st, DenseTensor({8, 9, 2}));
    CHECK(st.factors.factors[2].rows() == 8);
    CHECK(!st.warnings.empty());
  }
  SUBCASE("empty and mismatched batches") {
    CHECK_THROWS_AS(sambaten_update(st, DenseTensor({8, 9, 0})), InvalidArgument);
    CHECK_THROWS_AS(sambaten_update(st, DenseTensor({8, 8, 2})), InvalidArgument);
  }
  SUBCASE("bad options") {
    SambatenOptions o;
    o.r = 0;
    CHECK_THROWS_AS(sambaten_init(inst.tensor, 2, o), InvalidArgument);
  }
}

TEST_CASE("quality control on a rank-deficient batch") {
  CpInstance inst = gen_cp(cp_spec({25, 25, 30}, 4, 6));
  KruskalFactors half = inst.truth;
  half.factors[2] = inst.truth.factors[2].bottomRows(10);
  half.factors[2].col(2).setZero();
  half.factors[2].col(3).setZero();
  DenseTensor x_new = reconstruct(half);
  SambatenOptions o = exact_opts();
  o.qc.als.tol = 1e-10;
  o.qc.als.max_iters = 1000;
  SambatenState st = sambaten_init(inst.tensor.slices(0, 20), prefix(inst.truth, 20), o);
  sambaten_update_qc(st, x_new);
  CHECK(st.last_rank == 2);
  Matrix c_new = st.factors.factors[2].bottomRows(10);
  CHECK(c_new.col(0).norm() > 0);
  CHECK(c_new.col(1).norm() > 0);
  CHECK(c_new.col(2).norm() == 0.0);
  CHECK(c_new.col(3).norm() == 0.0);
  CHECK(column_agreement(c_new, half.factors[2], {0, 1}) >= 0.99);
}

TEST_CASE("quality control on a full-rank batch matches the plain update") {
  CpInstance inst = gen_cp(cp_spec({20, 20, 30}, 2, 7));
  SambatenOptions o = exact_opts();
  o.qc.als.tol = 1e-10;
  SambatenState a = sambaten_init(inst.tensor.slices(0, 10), prefix(inst.truth, 10), o);
  SambatenState b = a;
  sambaten_update(a, inst.tensor.slices(10, 30));
  sambaten_update_qc(b, inst.tensor.slices(10, 30));
  CHECK(b.last_rank == 2);
  for (int m = 0; m < 3; ++m) CHECK(a.factors.factors[m] == b.factors.factors[m]);
}

TEST_CASE("quality control helps on noisy rank-deficient batches") {
  double with_qc = 0, without = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CpInstance inst = gen_cp(cp_spec({25, 25, 30}, 4, 40 + seed));
    KruskalFactors half = inst.truth;
    half.factors[2] = inst.truth.factors[2].bottomRows(10);
    half.factors[2].col(2).setZero();
    half.factors[2].col(3).setZero();
    const DenseTensor clean = reconstruct(half);
    DenseTensor x_new = clean;
    Rng rng(seed);
    add_noise(x_new, 15.0, rng);
    SambatenOptions o = exact_opts();
    o.als.tol = 1e-8;
    o.seed = seed;
    SambatenState a = sambaten_init(inst.tensor.slices(0, 20), prefix(inst.truth, 20), o);
    SambatenState b = a;
    sambaten_update(a, x_new);
    sambaten_update_qc(b, x_new);
    without += relative_error(clean, reconstruct(prefix_tail(a.factors, 10)));
    with_qc += relative_error(clean, reconstruct(prefix_tail(b.factors, 10)));
  }
  MESSAGE("new-slice error without qc " << without / 10 << ", with qc " << with_qc / 10);
  CHECK(with_qc <= without);
}
