#pragma once

#include <cstdint>
#include <random>

#include "tenstream/tensor.hpp"

namespace tenstream {

using Rng = std::mt19937_64;

// Child seed for stream `stream` of `seed` (splitmix64 mixing), so that
// repetitions, replicas and trials get independent reproducible generators.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

Matrix random_uniform(Index rows, Index cols, Rng& rng);
Matrix random_normal(Index rows, Index cols, Rng& rng);
// rows x cols with orthonormal columns (rows >= cols), from QR of a Gaussian.
Matrix random_orthonormal(Index rows, Index cols, Rng& rng);

}  // namespace tenstream
