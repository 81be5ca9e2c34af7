#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace lidarpost {

/// Row-major cost matrix; every row must have the same length.
using CostMatrix = std::vector<std::vector<double>>;

struct Assignment {
  /// (row, col) pairs sorted by row; min(rows, cols) of them.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
};

/// Minimum-cost matching of min(rows, cols) pairs. Rectangular input is
/// padded to square with a constant, which shifts every complete matching
/// by the same amount. Among optimal matchings the lexicographically
/// smallest padded row-to-column vector is returned. Throws
/// std::invalid_argument for ragged or non-finite input.
Assignment hungarian(const CostMatrix& cost);

}  // namespace lidarpost
