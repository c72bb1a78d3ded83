#include "tenstream/harness.hpp"

#include <algorithm>
#include <cmath>

#include "tenstream/errors.hpp"
#include "tenstream/match.hpp"

namespace tenstream {

namespace {

void check_density(double d) {
  if (!(d > 0.0 && d <= 1.0)) throw InvalidArgument("density must lie in (0, 1]");
}

void check_dims(const Shape& dims) {
  if (dims.size() != 3) throw InvalidArgument("generator needs three dimensions");
  for (Index d : dims)
    if (d < 1) throw InvalidArgument("dimensions must be positive");
}

double noise_scale(double signal_norm, double noise_norm, double snr_db) {
  if (noise_norm == 0.0) return 0.0;
  return signal_norm / (noise_norm * std::pow(10.0, snr_db / 20.0));
}

}  // namespace

void add_noise(Matrix& x, double snr_db, Rng& rng) {
  Matrix n = random_normal(x.rows(), x.cols(), rng);
  x += noise_scale(x.norm(), n.norm(), snr_db) * n;
}

void add_noise(DenseTensor& t, double snr_db, Rng& rng) {
  Eigen::Map<Vector> x(t.data(), t.size());
  Vector n = random_normal(t.size(), 1, rng);
  x += noise_scale(x.norm(), n.norm(), snr_db) * n;
}

void add_noise(IrregularTensor& t, double snr_db, Rng& rng) {
  std::vector<Matrix> noise;
  double nn = 0.0;
  for (const auto& s : t.slices) {
    noise.push_back(random_normal(s.rows(), s.cols(), rng));
    nn += noise.back().squaredNorm();
  }
  const double scale = noise_scale(std::sqrt(t.squared_norm()), std::sqrt(nn), snr_db);
  for (std::size_t k = 0; k < t.slices.size(); ++k) t.slices[k] += scale * noise[k];
}

void sparsify(DenseTensor& t, double density, Rng& rng) {
  check_density(density);
  if (density == 1.0) return;
  std::bernoulli_distribution keep(density);
  for (double& v : t.values())
    if (!keep(rng)) v = 0.0;
}

void sparsify(IrregularTensor& t, double density, Rng& rng) {
  check_density(density);
  if (density == 1.0) return;
  std::bernoulli_distribution keep(density);
  for (auto& s : t.slices)
    for (Index j = 0; j < s.cols(); ++j)
      for (Index i = 0; i < s.rows(); ++i)
        if (!keep(rng)) s(i, j) = 0.0;
}

CpInstance gen_cp(const GenSpec& spec) {
  check_dims(spec.dims);
  check_density(spec.density);
  if (spec.rank < 1) throw InvalidArgument("gen_cp: rank must be positive");
  Rng rng(spec.seed);
  CpInstance inst;
  inst.truth.lambda = Vector::Ones(spec.rank);
  for (int m = 0; m < 3; ++m) inst.truth.factors.push_back(random_normal(spec.dims[m], spec.rank, rng));
  normalize(inst.truth);
  inst.tensor = reconstruct(inst.truth);
  if (spec.noise_snr_db) add_noise(inst.tensor, *spec.noise_snr_db, rng);
  sparsify(inst.tensor, spec.density, rng);
  return inst;
}

Parafac2Instance gen_parafac2(const GenSpec& spec) {
  check_dims(spec.dims);
  check_density(spec.density);
  const Index R = spec.rank, i_max = spec.dims[0], J = spec.dims[1], K = spec.dims[2];
  const Index i_min = spec.i_min > 0 ? spec.i_min : std::max(R, i_max / 2);
  if (R < 1 || R > J || i_min < R || i_min > i_max) throw InvalidArgument("gen_parafac2: infeasible spec");
  Rng rng(spec.seed);
  std::uniform_int_distribution<Index> height(i_min, i_max);
  Parafac2Instance inst;
  Parafac2Factors& f = inst.truth;
  f.H = random_orthonormal(R, R, rng);
  f.V = random_normal(J, R, rng);
  f.W = random_normal(K, R, rng);
  for (Index k = 0; k < K; ++k) f.Q.push_back(random_orthonormal(height(rng), R, rng));
  for (Index k = 0; k < K; ++k) inst.tensor.slices.push_back(f.slice_model(k));
  if (spec.noise_snr_db) add_noise(inst.tensor, *spec.noise_snr_db, rng);
  sparsify(inst.tensor, spec.density, rng);
  return inst;
}

BtdInstance gen_btd(const GenSpec& spec) {
  check_dims(spec.dims);
  check_density(spec.density);
  spec.btd_ranks.validate();
  Rng rng(spec.seed);
  BtdInstance inst;
  BtdFactors& f = inst.truth;
  f.ranks = spec.btd_ranks;
  for (int m = 0; m < 3; ++m) {
    if (spec.btd_ranks.total(m) > spec.dims[m] * spec.btd_ranks.count())
      throw InvalidArgument("gen_btd: block widths exceed dimensions");
    f.factor(m) = random_normal(spec.dims[m], spec.btd_ranks.total(m), rng);
  }
  for (const auto& b : spec.btd_ranks.blocks) {
    Matrix g = random_normal(b.L * b.M * b.N, 1, rng);
    f.cores.emplace_back(Shape{b.L, b.M, b.N}, std::vector<double>(g.data(), g.data() + g.size()));
  }
  btd_normalize(f);
  if (spec.noise_snr_db && spec.noise_on_factors) {
    BtdFactors noisy = f;
    for (int m = 0; m < 3; ++m) add_noise(noisy.factor(m), *spec.noise_snr_db, rng);
    inst.tensor = btd_reconstruct(noisy);
  } else {
    inst.tensor = btd_reconstruct(f);
    if (spec.noise_snr_db) add_noise(inst.tensor, *spec.noise_snr_db, rng);
  }
  sparsify(inst.tensor, spec.density, rng);
  return inst;
}

double relative_error(const DenseTensor& t, const DenseTensor& t_hat) {
  const double nt = frobenius_norm(t);
  if (nt == 0.0) throw InvalidArgument("relative error of a zero tensor");
  return frobenius_norm(t - t_hat) / nt;
}

double fitness(const DenseTensor& t, const DenseTensor& t_hat) {
  const double e = relative_error(t, t_hat);
  return 100.0 * (1.0 - e * e);
}

double relative_error(const IrregularTensor& t, const Parafac2Factors& f) {
  const double n2 = t.squared_norm();
  if (n2 == 0.0) throw InvalidArgument("relative error of a zero tensor");
  return std::sqrt(pf2_loss(t, f) / n2);
}

double fms(const KruskalFactors& f1, const KruskalFactors& f2) {
  if (f1.order() != f2.order()) throw InvalidArgument("fms: order mismatch");
  const Index r1 = f1.rank(), r2 = f2.rank();
  if (r1 == 0 || r2 == 0) return 0.0;
  Matrix score = Matrix::Ones(r1, r2);
  for (int m = 0; m < f1.order(); ++m) {
    if (f1.factors[m].rows() != f2.factors[m].rows()) throw InvalidArgument("fms: factor rows differ");
    Matrix a = f1.factors[m], b = f2.factors[m];
    for (Index c = 0; c < r1; ++c)
      if (a.col(c).norm() > 0) a.col(c).normalize();
    for (Index c = 0; c < r2; ++c)
      if (b.col(c).norm() > 0) b.col(c).normalize();
    score = score.cwiseProduct((a.transpose() * b).cwiseAbs());
  }
  auto assign = greedy_assignment(score);
  double total = 0.0;
  for (Index f = 0; f < r1; ++f)
    if (assign[f] >= 0) total += score(f, assign[f]);
  return total / static_cast<double>(std::max(r1, r2));
}

}  // namespace tenstream
