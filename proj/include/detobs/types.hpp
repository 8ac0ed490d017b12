#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace detobs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Invalid or inconsistent configuration (bad parameters, wrong dimensions in a config file).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network/model shape errors raised while evaluating a DeepNet.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Communication protocol violations between observers (e.g. a missing neighbor sample).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state became non-finite during integration.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest singular value.
double spectral_norm(const Mat& m);

/// Kronecker product a ⊗ b.
Mat kron(const Mat& a, const Mat& b);

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace detobs
