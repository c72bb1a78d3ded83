#include "tenstream/aptera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "tenstream/errors.hpp"
#include "tenstream/random.hpp"

namespace tenstream {

DenseTensor build_cp_from_pf2(const Parafac2Factors& f) {
  const Index r = f.rank();
  if (r < 1 || f.H.rows() != r || f.V.cols() != r || f.W.cols() != r)
    throw InvalidArgument("build_cp_from_pf2: H must be R x R and V, W must have R columns");
  KruskalFactors k{{f.H, f.V, f.W}, Vector::Ones(r)};
  return reconstruct(k);
}

LcurvePoints pareto_filter(const LcurvePoints& pts) {
  const std::size_t n = pts.size();
  if (pts.y.size() != n || pts.d.size() != n) throw InvalidArgument("pareto_filter: ragged points");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pts.x[a] != pts.x[b]) return pts.x[a] < pts.x[b];
    return pts.y[a] < pts.y[b];
  });
  LcurvePoints out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i : order) {
    if (!(pts.y[i] < best)) continue;
    best = pts.y[i];
    out.x.push_back(pts.x[i]);
    out.y.push_back(pts.y[i]);
    out.d.push_back(pts.d[i]);
  }
  return out;
}

LcurvePoints pareto_truncation(const std::vector<Vector>& sigma, const Shape& dims) {
  if (sigma.size() != 3 || dims.size() != 3) throw InvalidArgument("pareto_truncation: three modes required");
  std::array<Vector, 3> tail;
  for (int m = 0; m < 3; ++m) {
    const Vector& s = sigma[m];
    if (s.size() == 0) throw InvalidArgument("pareto_truncation: empty singular values");
    if (s.size() > dims[m]) throw InvalidArgument("pareto_truncation: more singular values than the dimension");
    if (!s.allFinite() || (s.array() < 0).any()) throw DataError("pareto_truncation: bad singular values");
    for (Index i = 1; i < s.size(); ++i)
      if (s(i) > s(i - 1)) throw InvalidArgument("pareto_truncation: singular values must be nonincreasing");
    // tail[m](n - 1) = sum of squares past the first n values; missing values
    // count as zero.
    tail[m] = Vector::Zero(dims[m]);
    double acc = 0.0;
    for (Index i = s.size() - 1; i >= 1; --i) {
      acc += s(i) * s(i);
      tail[m](i - 1) = acc;
    }
  }
  const double norm = sigma[0].norm();
  if (!(norm > 0)) throw NumericalError("pareto_truncation: zero singular values");

  const Index R = dims[0], J = dims[1], K = dims[2];
  const double total = static_cast<double>(R) * J * K;
  LcurvePoints all;
  const std::size_t n = static_cast<std::size_t>(R * J * K);
  all.x.reserve(n);
  all.y.reserve(n);
  all.d.reserve(n);
  for (Index k = 1; k <= K; ++k)
    for (Index j = 1; j <= J; ++j)
      for (Index r = 1; r <= R; ++r) {
        all.x.push_back((static_cast<double>(R) * r + static_cast<double>(J) * j + static_cast<double>(K) * k +
                         static_cast<double>(r) * j * k) /
                        total);
        all.y.push_back(std::sqrt(tail[0](r - 1) + tail[1](j - 1) + tail[2](k - 1)) / norm);
        all.d.push_back({r, j, k});
      }
  return pareto_filter(all);
}

std::optional<std::size_t> lcurve_corner(const LcurvePoints& pts) {
  const std::size_t n = pts.size();
  if (n < 3) throw InvalidArgument("lcurve_corner: need at least 3 points");
  const double bx = pts.x.front(), by = pts.y.front();
  const double cx = pts.x.back(), cy = pts.y.back();
  const double limit = 7.0 * M_PI / 8.0;
  std::optional<std::size_t> best;
  double best_angle = limit;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double ax = pts.x[i], ay = pts.y[i];
    const double abx = bx - ax, aby = by - ay, acx = cx - ax, acy = cy - ay;
    const double nab = std::hypot(abx, aby), nac = std::hypot(acx, acy);
    if (nab == 0 || nac == 0) continue;
    const double area = 0.5 * ((cx - bx) * (ay - by) - (cy - by) * (ax - bx));
    if (!(area < 0)) continue;
    const double angle = std::acos(std::clamp((abx * acx + aby * acy) / (nab * nac), -1.0, 1.0));
    if (angle < best_angle) {
      best_angle = angle;
      best = i;
    }
  }
  return best;
}

RankEstimate aptera(const IrregularTensor& t, Index r_max, int n_experiments, const ApteraOptions& opts) {
  t.validate();
  const Index J = t.cols(), K = t.num_slices();
  if (n_experiments < 1) throw InvalidArgument("aptera: need at least one experiment");
  if (r_max == 0) r_max = std::min({std::max(J, K), J, opts.r_max_cap});
  if (r_max < 2) throw InvalidArgument("aptera: r_max must be at least 2");
  if (r_max > J) throw InvalidArgument("aptera: r_max cannot exceed J");

  RankEstimate est;
  for (int e = 0; e < n_experiments; ++e) {
    Parafac2Options po = opts.pf2;
    po.seed = derive_seed(opts.seed, static_cast<std::uint64_t>(e));
    const std::string tag = "experiment " + std::to_string(e) + ": ";
    try {
      Parafac2Factors f = parafac2_als(t, r_max, po);
      DenseTensor y = build_cp_from_pf2(f);
      HosvdResult h = hosvd(y);
      LcurvePoints pts = pareto_truncation(h.singular_values, y.shape());
      std::optional<std::size_t> c = pts.size() >= 3 ? lcurve_corner(pts) : std::nullopt;
      if (!c) {
        est.warnings.push_back(tag + "no corner");
        continue;
      }
      const auto& d = pts.d[*c];
      est.per_mode.push_back(d);
      est.per_experiment.push_back(*std::min_element(d.begin(), d.end()));
    } catch (const NumericalError& err) {
      est.warnings.push_back(tag + err.what());
    }
  }
  if (est.per_experiment.empty()) throw NumericalError("aptera: every experiment failed");
  std::map<Index, int> counts;
  for (Index r : est.per_experiment) ++counts[r];
  int top = 0;
  for (const auto& [r, c] : counts)
    if (c > top) {
      top = c;
      est.estimated_rank = r;
    }
  return est;
}

}  // namespace tenstream
