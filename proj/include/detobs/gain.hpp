#pragma once

#include "detobs/types.hpp"

namespace detobs {

/// Result of checking ½(I⊗K1)CᵀC + ½CᵀC(I⊗K1) + L⊗K1 ≥ k1·I.
struct GainCertificate {
  Mat K1;
  double k1 = 0.0;
  double lmi_min_eig = 0.0;
  bool feasible = false;
  int iterations = 0;  // synthesis only
};

inline constexpr double kFeasibilityTol = 1e-8;

/// nN x nN observability matrix. `c_stacked` is blkdiag(C_1..C_N).
Mat lmi_matrix(const Mat& laplacian, const Mat& c_stacked, const Mat& K1);

/// Smallest eigenvalue of a symmetric matrix. Throws std::invalid_argument
/// when M is asymmetric beyond 1e-10 (relative to its largest entry).
double min_eig_symmetric(const Mat& M);

GainCertificate verify_gain(const Mat& laplacian, const Mat& c_stacked, const Mat& K1, double k1);

/// Returns ½(K + Kᵀ); sets *asymmetry to max |K − Kᵀ| when non-null.
Mat symmetrize(const Mat& K, double* asymmetry = nullptr);

struct SynthesisOptions {
  double k_cap = 1000.0;   // upper bound on each diagonal entry
  double margin = 1e-3;    // stop once min eig ≥ k1 + margin
  int max_iterations = 500;
  double initial_entry = 1.0;
  double step = 0.1;       // initial step as a fraction of k_cap, decays as 1/sqrt(iter)
};

/// Diagonal K1 by projected subgradient ascent on λ_min(lmi_matrix(K1)).
/// The subgradient for entry j is vᵀ (∂M/∂K1_jj) v at the unit minimal
/// eigenvector v. Returns the best iterate; `feasible` is false if the
/// target was not reached within the iteration cap.
GainCertificate synthesize_gain(const Mat& laplacian, const Mat& c_stacked, double k1,
                                const SynthesisOptions& opts = {});

}  // namespace detobs
