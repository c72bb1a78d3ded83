#include "tenstream/sambaten.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

#include "tenstream/errors.hpp"
#include "tenstream/parallel.hpp"
#include "tenstream/random.hpp"

namespace tenstream {

Vector moi_weights(const DenseTensor& t, int mode) {
  if (mode < 0 || mode >= t.order()) throw InvalidArgument("moi_weights: invalid mode");
  return matricize(t, mode).rowwise().squaredNorm();
}

std::vector<Index> sample_indices_ordered(const Vector& weights, Index count, std::uint64_t seed) {
  if (count < 0) throw InvalidArgument("sample_indices: negative count");
  std::vector<std::pair<double, Index>> keys;
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Index i = 0; i < weights.size(); ++i) {
    if (!(weights(i) >= 0.0) || !std::isfinite(weights(i))) throw InvalidArgument("sample_indices: bad weight");
    double u = unif(rng);
    while (u == 0.0) u = unif(rng);
    if (weights(i) > 0.0) keys.emplace_back(std::log(u) / weights(i), i);
  }
  if (count > static_cast<Index>(keys.size()))
    throw InvalidArgument("sample_indices: count exceeds the number of positive weights");
  std::partial_sort(keys.begin(), keys.begin() + count, keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  std::vector<Index> out;
  for (Index c = 0; c < count; ++c) out.push_back(keys[c].second);
  return out;
}

std::vector<Index> sample_indices(const Vector& weights, Index count, std::uint64_t seed) {
  std::vector<Index> out = sample_indices_ordered(weights, count, seed);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

Index positive_count(const Vector& w) { return (w.array() > 0.0).count(); }

std::vector<Index> draw(const Vector& w, Index full, Index s, std::uint64_t seed) {
  const Index want = std::max<Index>(1, full / s);
  return sample_indices(w, std::min(want, positive_count(w)), seed);
}

Matrix rows_of(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

// Signed cosine between reference column f and candidate column g.
Matrix cosines(const Matrix& ref, const Matrix& cand) {
  Matrix c = ref.transpose() * cand;
  for (Index f = 0; f < ref.cols(); ++f) {
    const double nf = ref.col(f).norm();
    for (Index g = 0; g < cand.cols(); ++g) {
      const double d = nf * cand.col(g).norm();
      c(f, g) = d > 0 ? c(f, g) / d : 0.0;
    }
  }
  return c;
}

struct RepResult {
  bool ok = false;
  Matrix c_new;                  // K_new x R
  std::vector<Index> rows[2];    // sampled rows of A and B
  Matrix fill[2];                // candidate values at sampled rows, in the old scale
};

struct Sample {
  std::vector<Index> I, J, K;
};

Sample draw_sample(const SambatenState& st, Index k_old, std::uint64_t seed) {
  const DenseTensor& x = st.data;
  Sample s;
  s.I = draw(moi_weights(x, 0), x.dim(0), st.opts.s, derive_seed(seed, 0));
  s.J = draw(moi_weights(x, 1), x.dim(1), st.opts.s, derive_seed(seed, 1));
  Vector wc = moi_weights(x, 2).head(k_old);
  if (positive_count(wc) > 0) s.K = draw(wc, k_old, st.opts.s, derive_seed(seed, 2));
  return s;
}

// Fits the sample at `rank` and maps the components onto the state's
// columns. With anchor_c false only A and B anchors are used and the
// candidate covers the new slices only.
RepResult run_rep(const SambatenState& st, const Sample& s, Index k_old, Index k_new, Index rank, bool anchor_c,
                  std::uint64_t seed) {
  RepResult res;
  const KruskalFactors& f = st.factors;
  const Index R = f.rank();
  std::vector<Index> kall = anchor_c ? s.K : std::vector<Index>{};
  for (Index k = 0; k < k_new; ++k) kall.push_back(k_old + k);
  DenseTensor xs = subtensor(st.data, s.I, s.J, kall);
  if (frobenius_norm(xs) == 0.0) return res;
  AlsOptions als = st.opts.als;
  als.seed = seed;
  KruskalFactors c;
  try {
    c = cp_als(xs, rank, als);
  } catch (const NumericalError&) {
    return res;
  }
  normalize(c);

  Matrix ra = rows_of(f.factors[0], s.I), rb = rows_of(f.factors[1], s.J);
  Matrix cos_a = cosines(ra, c.factors[0]), cos_b = cosines(rb, c.factors[1]);
  Matrix score = cos_a.cwiseAbs().cwiseProduct(cos_b.cwiseAbs());
  Matrix cos_c;
  const Index ks = static_cast<Index>(s.K.size());
  if (anchor_c && ks > 0) {
    cos_c = cosines(rows_of(f.factors[2], s.K), c.factors[2].topRows(ks));
    score = score.cwiseProduct(cos_c.cwiseAbs());
  }
  std::vector<Index> assign =
      st.opts.match == MatchMethod::Hungarian ? hungarian_assignment(score) : greedy_assignment(score);

  res.c_new = Matrix::Zero(k_new, R);
  for (int m = 0; m < 2; ++m) res.fill[m] = Matrix::Zero(m == 0 ? s.I.size() : s.J.size(), R);
  res.rows[0] = s.I;
  res.rows[1] = s.J;
  const Index off = anchor_c ? ks : 0;
  for (Index q = 0; q < R; ++q) {
    const Index g = assign[q];
    if (g < 0) continue;
    const double sa = cos_a(q, g) < 0 ? -1.0 : 1.0, sb = cos_b(q, g) < 0 ? -1.0 : 1.0;
    const double na = ra.col(q).norm(), nb = rb.col(q).norm();
    const double denom = f.lambda(q) * na * nb;
    if (denom > 0)
      res.c_new.col(q) = (sa * sb * c.lambda(g) / denom) * c.factors[2].col(g).segment(off, k_new);
    res.fill[0].col(q) = sa * na * c.factors[0].col(g);
    res.fill[1].col(q) = sb * nb * c.factors[1].col(g);
  }
  res.ok = true;
  return res;
}

void merge(SambatenState& st, const std::vector<RepResult>& reps, Index k_new) {
  KruskalFactors& f = st.factors;
  const Index R = f.rank();
  Matrix c_sum = Matrix::Zero(k_new, R);
  int used = 0;
  for (int m = 0; m < 2; ++m) {
    Matrix sum = Matrix::Zero(f.factors[m].rows(), R);
    Matrix cnt = Matrix::Zero(f.factors[m].rows(), R);
    for (const auto& r : reps) {
      if (!r.ok) continue;
      for (std::size_t i = 0; i < r.rows[m].size(); ++i)
        for (Index q = 0; q < R; ++q)
          if (f.factors[m](r.rows[m][i], q) == 0.0 && r.fill[m](i, q) != 0.0) {
            sum(r.rows[m][i], q) += r.fill[m](i, q);
            cnt(r.rows[m][i], q) += 1.0;
          }
    }
    for (Index i = 0; i < sum.rows(); ++i)
      for (Index q = 0; q < R; ++q)
        if (cnt(i, q) > 0) f.factors[m](i, q) = sum(i, q) / cnt(i, q);
  }
  for (const auto& r : reps)
    if (r.ok) {
      c_sum += r.c_new;
      ++used;
    }
  if (used == 0) throw NumericalError("sambaten_update: every repetition failed");
  if (used < static_cast<int>(reps.size())) st.warnings.push_back("some repetitions failed and were dropped");
  Matrix c(f.factors[2].rows() + k_new, R);
  c << f.factors[2], c_sum / used;
  f.factors[2] = std::move(c);
  for (Index q = 0; q < R; ++q) {
    const double n = f.factors[2].col(q).norm();
    if (n > 0) {
      f.factors[2].col(q) /= n;
      f.lambda(q) *= n;
    }
  }
}

bool accept_batch(SambatenState& st, const DenseTensor& x_new) {
  if (x_new.order() != 3 || x_new.dim(0) != st.data.dim(0) || x_new.dim(1) != st.data.dim(1))
    throw InvalidArgument("sambaten_update: batch shape does not match the fixed modes");
  if (x_new.dim(2) == 0) throw InvalidArgument("sambaten_update: empty batch");
  if (!all_finite(x_new)) throw DataError("sambaten_update: non-finite values in batch");
  st.data.append_slices(x_new);
  if (frobenius_norm(x_new) == 0.0) {
    st.warnings.push_back("all-zero batch; appended zero rows");
    Matrix c(st.factors.factors[2].rows() + x_new.dim(2), st.factors.rank());
    c << st.factors.factors[2], Matrix::Zero(x_new.dim(2), st.factors.rank());
    st.factors.factors[2] = std::move(c);
    ++st.batches;
    return false;
  }
  return true;
}

void update(SambatenState& st, const DenseTensor& x_new, bool qc) {
  const Index k_old = st.data.dim(2), k_new = x_new.dim(2);
  if (!accept_batch(st, x_new)) return;
  const Index R = st.factors.rank();
  const std::uint64_t base = derive_seed(st.opts.seed, static_cast<std::uint64_t>(st.batches));
  const int reps = st.opts.r;
  std::vector<Sample> samples(reps);
  for (int j = 0; j < reps; ++j) samples[j] = draw_sample(st, k_old, derive_seed(base, 2 * j));

  Index rank = R;
  if (qc) {
    DenseTensor xn = subtensor(st.data, samples[0].I, samples[0].J, [&] {
      std::vector<Index> k(k_new);
      std::iota(k.begin(), k.end(), k_old);
      return k;
    }());
    GetRankOptions g = st.opts.qc;
    g.als.seed = derive_seed(base, 1u << 20);
    rank = get_rank(xn, R, st.opts.qc_trials, g);
  }
  st.last_rank = rank;
  const bool full = rank >= R;
  std::vector<RepResult> results(reps);
  parallel_for(reps, [&](int j) {
    results[j] = run_rep(st, samples[j], k_old, k_new, full ? R : rank, full, derive_seed(base, 2 * j + 1));
  });
  merge(st, results, k_new);
  ++st.batches;
}

void check_options(const SambatenOptions& o) {
  if (o.s < 1 || o.r < 1) throw InvalidArgument("sambaten: need s >= 1 and r >= 1");
}

}  // namespace

SambatenState sambaten_init(const DenseTensor& x_old, KruskalFactors factors, const SambatenOptions& opts) {
  check_options(opts);
  if (x_old.order() != 3 || factors.order() != 3) throw InvalidArgument("sambaten: needs 3-way data");
  for (int m = 0; m < 3; ++m)
    if (factors.factors[m].rows() != x_old.dim(m) || factors.factors[m].cols() != factors.rank())
      throw InvalidArgument("sambaten: factor shapes do not match data");
  SambatenState st;
  normalize(factors);
  st.factors = std::move(factors);
  st.data = x_old;
  st.opts = opts;
  st.last_rank = st.factors.rank();
  return st;
}

SambatenState sambaten_init(const DenseTensor& x_old, Index rank, const SambatenOptions& opts) {
  check_options(opts);
  return sambaten_init(x_old, cp_als(x_old, rank, opts.als), opts);
}

void sambaten_update(SambatenState& state, const DenseTensor& x_new) { update(state, x_new, false); }

void sambaten_update_qc(SambatenState& state, const DenseTensor& x_new) { update(state, x_new, true); }

}  // namespace tenstream
