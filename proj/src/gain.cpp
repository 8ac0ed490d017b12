#include "detobs/gain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace detobs {

Mat lmi_matrix(const Mat& laplacian, const Mat& c_stacked, const Mat& K1) {
  const Eigen::Index agents = laplacian.rows();
  const Eigen::Index n = K1.rows();
  if (laplacian.cols() != agents || K1.cols() != n) {
    throw ConfigError("lmi_matrix: L and K1 must be square");
  }
  if (c_stacked.cols() != agents * n) {
    throw ConfigError("lmi_matrix: stacked C has " + std::to_string(c_stacked.cols()) +
                      " columns, expected nN = " + std::to_string(agents * n));
  }
  const Mat ctc = c_stacked.transpose() * c_stacked;
  const Mat block_k = kron(Mat::Identity(agents, agents), K1);
  const Mat a = block_k * ctc;
  Mat m = 0.5 * (a + a.transpose()) + kron(laplacian, K1);
  // L ⊗ K1 is symmetric for symmetric inputs; enforce it bitwise.
  return 0.5 * (m + m.transpose());
}

double min_eig_symmetric(const Mat& M) {
  if (M.rows() != M.cols() || M.rows() == 0) {
    throw std::invalid_argument("min_eig_symmetric: matrix must be square and nonempty");
  }
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("min_eig_symmetric: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> solver(M, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

Mat symmetrize(const Mat& K, double* asymmetry) {
  if (asymmetry) *asymmetry = (K - K.transpose()).cwiseAbs().maxCoeff();
  return 0.5 * (K + K.transpose());
}

GainCertificate verify_gain(const Mat& laplacian, const Mat& c_stacked, const Mat& K1, double k1) {
  GainCertificate cert;
  cert.K1 = symmetrize(K1);
  cert.k1 = k1;
  cert.lmi_min_eig = min_eig_symmetric(lmi_matrix(laplacian, c_stacked, cert.K1));
  cert.feasible = cert.lmi_min_eig >= k1 - kFeasibilityTol;
  return cert;
}

GainCertificate synthesize_gain(const Mat& laplacian, const Mat& c_stacked, double k1,
                                const SynthesisOptions& opts) {
  const Eigen::Index agents = laplacian.rows();
  if (agents == 0 || c_stacked.cols() % agents != 0) {
    throw ConfigError("synthesize_gain: stacked C width is not a multiple of N");
  }
  const Eigen::Index n = c_stacked.cols() / agents;

  // M is linear in the diagonal entries: M(K) = Σ_j K_jj · basis[j].
  std::vector<Mat> basis;
  basis.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    Mat e = Mat::Zero(n, n);
    e(j, j) = 1.0;
    basis.push_back(lmi_matrix(laplacian, c_stacked, e));
  }
  auto assemble = [&](const Vec& diag) {
    Mat m = Mat::Zero(agents * n, agents * n);
    for (Eigen::Index j = 0; j < n; ++j) m += diag(j) * basis[static_cast<std::size_t>(j)];
    return m;
  };

  Vec diag = Vec::Constant(n, std::clamp(opts.initial_entry, 0.0, opts.k_cap));
  Vec best = diag;
  double best_eig = -std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    Eigen::SelfAdjointEigenSolver<Mat> solver(assemble(diag));
    const double lambda = solver.eigenvalues()(0);
    if (lambda > best_eig) {
      best_eig = lambda;
      best = diag;
    }
    if (lambda >= k1 + opts.margin) break;
    const Vec v = solver.eigenvectors().col(0);
    Vec grad(n);
    for (Eigen::Index j = 0; j < n; ++j) grad(j) = v.dot(basis[static_cast<std::size_t>(j)] * v);
    const double norm = grad.norm();
    if (norm == 0.0) break;
    const double eta = opts.step * opts.k_cap / std::sqrt(static_cast<double>(iter) + 1.0);
    diag = (diag + eta * grad / norm).cwiseMax(0.0).cwiseMin(opts.k_cap);
  }

  GainCertificate cert = verify_gain(laplacian, c_stacked, Mat(best.asDiagonal()), k1);
  cert.iterations = iter;
  return cert;
}

}  // namespace detobs
