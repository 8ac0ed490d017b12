#pragma once

#include <cstddef>
#include <vector>

#include "detobs/types.hpp"

namespace detobs {

/// Static, weighted, undirected communication graph.
///
/// The adjacency matrix must be square, symmetric, nonnegative and have a zero
/// diagonal; the constructor throws ConfigError otherwise. Agents are indexed
/// from 0 inside the library. Config files and traces use 1-based indices and
/// convert at the boundary.
class CommGraph {
 public:
  explicit CommGraph(Mat adjacency);

  std::size_t size() const { return static_cast<std::size_t>(adjacency_.rows()); }
  const Mat& adjacency() const { return adjacency_; }
  double weight(std::size_t i, std::size_t j) const { return adjacency_(i, j); }

 private:
  Mat adjacency_;
};

/// L = Δ − A. Row sums are exactly zero.
Mat laplacian(const CommGraph& g);

/// Single connected component over edges with nonzero weight (BFS).
bool is_connected(const CommGraph& g);

/// Neighbors j of agent i with a_ij > 0, ascending. Throws std::out_of_range
/// for an invalid index.
std::vector<std::size_t> neighbor_set(const CommGraph& g, std::size_t i);

}  // namespace detobs
