#include "tenstream/match.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <tuple>

#include "tenstream/errors.hpp"

namespace tenstream {

std::vector<Index> greedy_assignment(const Matrix& score) {
  const Index n = score.rows(), m = score.cols();
  std::vector<std::tuple<double, Index, Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(n * m));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) pairs.emplace_back(score(i, j), i, j);
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
  std::vector<Index> assign(n, -1);
  std::vector<bool> used(m, false);
  Index left = std::min(n, m);
  for (const auto& [s, i, j] : pairs) {
    if (left == 0) break;
    if (assign[i] >= 0 || used[j]) continue;
    assign[i] = j;
    used[j] = true;
    --left;
  }
  return assign;
}

std::vector<Index> hungarian_assignment(const Matrix& score) {
  const Index n0 = score.rows(), m0 = score.cols();
  const Index n = std::max(n0, m0);
  // Square cost matrix; padding rows/columns cost nothing.
  Matrix cost = Matrix::Zero(n, n);
  cost.topLeftCorner(n0, m0) = -score;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      Index i0 = p[j0], j1 = 0;
      double delta = inf;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assign(n0, -1);
  for (Index j = 1; j <= n; ++j)
    if (p[j] >= 1 && p[j] <= n0 && j <= m0) assign[p[j] - 1] = j - 1;
  return assign;
}

ColumnMatch match_columns(const Matrix& reference, const Matrix& candidate, MatchMethod method) {
  if (reference.rows() == 0) throw InvalidArgument("match_columns: empty anchor set");
  if (reference.rows() != candidate.rows()) throw InvalidArgument("match_columns: row counts differ");
  auto unit = [](const Matrix& m) {
    Matrix out = m;
    for (Index c = 0; c < out.cols(); ++c) {
      double nrm = out.col(c).norm();
      if (nrm > 0) out.col(c) /= nrm;
    }
    return out;
  };
  const Matrix cos = unit(reference).transpose() * unit(candidate);
  const Matrix mag = cos.cwiseAbs();
  ColumnMatch out;
  out.assignment = method == MatchMethod::Greedy ? greedy_assignment(mag) : hungarian_assignment(mag);
  out.scores.assign(out.assignment.size(), 0.0);
  for (std::size_t f = 0; f < out.assignment.size(); ++f)
    if (out.assignment[f] >= 0) out.scores[f] = cos(static_cast<Index>(f), out.assignment[f]);
  return out;
}

}  // namespace tenstream
