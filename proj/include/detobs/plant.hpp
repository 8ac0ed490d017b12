#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "detobs/integrator.hpp"
#include "detobs/types.hpp"

namespace detobs {

using DriftFn = std::function<Vec(const Vec&)>;
using DisturbanceFn = std::function<Vec(double)>;

/// x0' = drift(x0) + disturbance(t).
struct PlantModel {
  std::size_t dim = 0;
  DriftFn drift;
  DisturbanceFn disturbance;
  double disturbance_bound = 0.0;

  Vec rate(double t, const Vec& x0) const { return drift(x0) + disturbance(t); }
};

struct PlantState {
  Vec x0;
  double t = 0.0;
};

/// Three-state Van der Pol variant: [mu(x - x^3/3 - y), x/mu, -mu z].
Vec vanderpol_drift(const Vec& x, double mu);

/// [0.5 sin 3t, 0.75 cos t, cos 3.75t].
Vec reference_disturbance(double t);

/// Componentwise amplitude bound of reference_disturbance: sqrt(0.25 + 0.5625 + 1).
inline constexpr double kReferenceDisturbanceBound = 1.3462912017836259;

PlantModel vanderpol_model(double mu, bool with_disturbance);

/// Advance by one fixed step. Throws DivergenceError on a non-finite result.
PlantState integrate_step(const PlantModel& model, const PlantState& s, double dt,
                          Integrator scheme = Integrator::rk4);

/// Per-agent output matrices C_i (m x n each, all agents share m and n).
class OutputMap {
 public:
  explicit OutputMap(std::vector<Mat> blocks);

  std::size_t agents() const { return blocks_.size(); }
  std::size_t state_dim() const { return static_cast<std::size_t>(blocks_.front().cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(blocks_.front().rows()); }
  const Mat& block(std::size_t i) const { return blocks_.at(i); }

  /// blkdiag(C_1, ..., C_N), of size mN x nN.
  Mat stacked() const;

 private:
  std::vector<Mat> blocks_;
};

/// y_i = C_i x0.
Vec measure(const OutputMap& map, std::size_t i, const Vec& x0);

}  // namespace detobs
