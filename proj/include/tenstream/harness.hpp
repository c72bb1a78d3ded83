#pragma once

#include <cstdint>
#include <optional>

#include "tenstream/btd.hpp"
#include "tenstream/cp.hpp"
#include "tenstream/parafac2.hpp"
#include "tenstream/random.hpp"

namespace tenstream {

enum class ModelKind { Cp, Parafac2, Btd };

struct GenSpec {
  ModelKind model = ModelKind::Cp;
  // cp / btd: {I, J, K}. parafac2: {I_max, J, K}.
  Shape dims;
  // parafac2: smallest slice height; 0 picks max(rank, I_max / 2).
  Index i_min = 0;
  Index rank = 1;
  BtdRanks btd_ranks;
  std::optional<double> noise_snr_db;
  // btd: perturb the factor matrices A, B, C at the given SNR instead of the
  // tensor.
  bool noise_on_factors = false;
  double density = 1.0;
  std::uint64_t seed = 0;
};

struct CpInstance {
  DenseTensor tensor;
  KruskalFactors truth;
};

struct Parafac2Instance {
  IrregularTensor tensor;
  Parafac2Factors truth;
};

struct BtdInstance {
  DenseTensor tensor;
  BtdFactors truth;
};

CpInstance gen_cp(const GenSpec& spec);
Parafac2Instance gen_parafac2(const GenSpec& spec);
BtdInstance gen_btd(const GenSpec& spec);

// Adds Gaussian noise scaled so that 10 log10(||x||^2 / ||noise||^2) = snr_db.
void add_noise(Matrix& x, double snr_db, Rng& rng);
void add_noise(DenseTensor& t, double snr_db, Rng& rng);
void add_noise(IrregularTensor& t, double snr_db, Rng& rng);
// Zeroes entries independently so that a fraction `density` survives.
void sparsify(DenseTensor& t, double density, Rng& rng);
void sparsify(IrregularTensor& t, double density, Rng& rng);

double relative_error(const DenseTensor& t, const DenseTensor& t_hat);
double fitness(const DenseTensor& t, const DenseTensor& t_hat);
double relative_error(const IrregularTensor& t, const Parafac2Factors& f);

// Factor match score in [0, 1]: columns are paired greedily on the product
// of per-mode |cosines|, then the products are averaged over
// max(rank1, rank2) components.
double fms(const KruskalFactors& f1, const KruskalFactors& f2);

}  // namespace tenstream
