#include "detobs/graph.hpp"

#include <deque>
#include <stdexcept>
#include <string>

namespace detobs {

CommGraph::CommGraph(Mat adjacency) : adjacency_(std::move(adjacency)) {
  if (adjacency_.rows() != adjacency_.cols() || adjacency_.rows() == 0) {
    throw ConfigError("adjacency must be a nonempty square matrix");
  }
  const auto n = adjacency_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (adjacency_(i, i) != 0.0) {
      throw ConfigError("adjacency diagonal must be zero (agent " + std::to_string(i + 1) + ")");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!(adjacency_(i, j) >= 0.0)) {
        throw ConfigError("adjacency entries must be nonnegative");
      }
      if (adjacency_(i, j) != adjacency_(j, i)) {
        throw ConfigError("adjacency must be symmetric");
      }
    }
  }
}

Mat laplacian(const CommGraph& g) {
  const Mat& a = g.adjacency();
  Mat l = -a;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double degree = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) degree += a(i, j);
    l(i, i) = degree;
  }
  return l;
}

bool is_connected(const CommGraph& g) {
  const std::size_t n = g.size();
  std::vector<bool> seen(n, false);
  std::deque<std::size_t> queue{0};
  seen[0] = true;
  std::size_t visited = 1;
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (std::size_t j = 0; j < n; ++j) {
      if (!seen[j] && g.weight(i, j) > 0.0) {
        seen[j] = true;
        ++visited;
        queue.push_back(j);
      }
    }
  }
  return visited == n;
}

std::vector<std::size_t> neighbor_set(const CommGraph& g, std::size_t i) {
  if (i >= g.size()) {
    throw std::out_of_range("agent index " + std::to_string(i) + " out of range");
  }
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (g.weight(i, j) > 0.0) out.push_back(j);
  }
  return out;
}

}  // namespace detobs
