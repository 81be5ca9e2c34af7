#include "lidarpost/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lidarpost {

namespace {

// Shortest augmenting path Hungarian with row/column potentials on a square
// matrix. Returns row -> column and leaves the optimal duals in u, v.
std::vector<std::size_t> solve_square(const CostMatrix& a, std::vector<double>& u,
                                      std::vector<double>& v) {
  const std::size_t n = a.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based with column 0 as the virtual source.
  u.assign(n + 1, 0.0);
  v.assign(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

// Any complete matching on tight edges (zero reduced cost under optimal
// duals) is optimal, so the tie-break only has to find the lexicographically
// smallest perfect matching of the tight-edge graph.
class TightGraph {
 public:
  TightGraph(const CostMatrix& a, const std::vector<double>& u, const std::vector<double>& v,
             double eps)
      : n_(a.size()), tight_(n_, std::vector<bool>(n_, false)) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        tight_[i][j] = std::abs(a[i][j] - u[i + 1] - v[j + 1]) <= eps;
      }
    }
  }

  void lex_smallest(std::vector<std::size_t>& row_to_col) const {
    std::vector<std::size_t> col_to_row(n_);
    for (std::size_t i = 0; i < n_; ++i) col_to_row[row_to_col[i]] = i;

    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        if (!tight_[i][j]) continue;
        if (j == row_to_col[i]) break;
        const std::size_t r = col_to_row[j];
        if (r < i) continue;  // column already fixed by an earlier row
        auto trial_r2c = row_to_col;
        auto trial_c2r = col_to_row;
        const std::size_t freed = trial_r2c[i];
        trial_r2c[i] = j;
        trial_c2r[j] = i;
        trial_c2r[freed] = n_;  // free
        std::vector<bool> seen(n_, false);
        seen[j] = true;
        if (augment(r, i, trial_r2c, trial_c2r, seen)) {
          row_to_col = std::move(trial_r2c);
          col_to_row = std::move(trial_c2r);
          break;
        }
      }
    }
  }

 private:
  // Re-seats `row` through an alternating path that only disturbs rows
  // after `locked`, ending at the single free column.
  bool augment(std::size_t row, std::size_t locked, std::vector<std::size_t>& r2c,
               std::vector<std::size_t>& c2r, std::vector<bool>& seen) const {
    for (std::size_t c = 0; c < n_; ++c) {
      if (!tight_[row][c] || seen[c]) continue;
      seen[c] = true;
      const std::size_t owner = c2r[c];
      if (owner != n_ && owner <= locked) continue;
      if (owner == n_ || augment(owner, locked, r2c, c2r, seen)) {
        r2c[row] = c;
        c2r[c] = row;
        return true;
      }
    }
    return false;
  }

  std::size_t n_;
  std::vector<std::vector<bool>> tight_;
};

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
  Assignment result;
  const std::size_t rows = cost.size();
  if (rows == 0) return result;
  const std::size_t cols = cost.front().size();
  double largest = 0.0;
  for (const auto& row : cost) {
    if (row.size() != cols) throw std::invalid_argument("hungarian: ragged cost matrix");
    for (double c : row) {
      if (!std::isfinite(c)) throw std::invalid_argument("hungarian: non-finite cost");
      largest = std::max(largest, std::abs(c));
    }
  }
  if (cols == 0) return result;

  // Padding shifts every complete matching by the same constant, so its
  // value only has to be finite; the largest entry keeps the scale stable.
  const std::size_t n = std::max(rows, cols);
  CostMatrix square(n, std::vector<double>(n, largest));
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy(cost[i].begin(), cost[i].end(), square[i].begin());
  }

  std::vector<double> u, v;
  std::vector<std::size_t> row_to_col = solve_square(square, u, v);
  TightGraph(square, u, v, 1e-9 * std::max(1.0, largest)).lex_smallest(row_to_col);

  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t j = row_to_col[i];
    if (j >= cols) continue;
    result.pairs.emplace_back(i, j);
    result.total_cost += cost[i][j];
  }
  return result;
}

}  // namespace lidarpost
