#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tenstream/parafac2.hpp"

namespace tenstream {

// Points of the truncation L-curve. After pareto_truncation they are sorted
// by x with strictly decreasing y.
struct LcurvePoints {
  std::vector<double> x;
  std::vector<double> y;
  // 1-based truncation ranks (r, j, k) of each point.
  std::vector<std::array<Index, 3>> d;

  std::size_t size() const { return x.size(); }
};

struct RankEstimate {
  Index estimated_rank = 0;
  std::vector<Index> per_experiment;
  std::vector<std::array<Index, 3>> per_mode;
  std::vector<std::string> warnings;
};

struct ApteraOptions {
  Parafac2Options pf2{};
  std::uint64_t seed = 0;
  // Upper bound on the default r_max = max(J, K).
  Index r_max_cap = 20;
};

// Kruskal tensor [[H, V, W]] of size R x J x K.
DenseTensor build_cp_from_pf2(const Parafac2Factors& f);

// Full truncation grid filtered to its Pareto front.
LcurvePoints pareto_truncation(const std::vector<Vector>& sigma, const Shape& dims);

// Keeps the non-dominated points (no other point is <= in both coordinates
// and < in one), one per distinct (x, y), sorted by x.
LcurvePoints pareto_filter(const LcurvePoints& pts);

// Triangle corner: index of the interior point with the smallest angle below
// 7 pi / 8 whose triangle with the endpoints has negative signed area.
std::optional<std::size_t> lcurve_corner(const LcurvePoints& pts);

// r_max = 0 picks min(max(J, K), J, r_max_cap).
RankEstimate aptera(const IrregularTensor& t, Index r_max, int n_experiments, const ApteraOptions& opts = {});

}  // namespace tenstream
