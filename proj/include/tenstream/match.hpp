#pragma once

#include <vector>

#include "tenstream/tensor.hpp"

namespace tenstream {

enum class MatchMethod { Greedy, Hungarian };

// assignment[f] is the candidate column matched to reference column f, or -1
// when the candidate has fewer columns. scores[f] is the signed cosine of the
// pair (0 when unmatched).
struct ColumnMatch {
  std::vector<Index> assignment;
  std::vector<double> scores;
};

// Matches candidate columns to reference columns by |cosine| over the given
// rows. Greedy takes pairs in descending score order, each column once.
ColumnMatch match_columns(const Matrix& reference, const Matrix& candidate,
                          MatchMethod method = MatchMethod::Greedy);

// Assignment maximizing the given similarity (rows = reference columns).
std::vector<Index> greedy_assignment(const Matrix& score);
std::vector<Index> hungarian_assignment(const Matrix& score);

}  // namespace tenstream
