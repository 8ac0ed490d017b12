#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "detobs/dnn.hpp"
#include "detobs/types.hpp"

namespace detobs {

/// Paired samples (input x̂_i, target ẋ̂_i) plus train/validation/test fractions.
struct TrainingDataset {
  std::vector<Vec> inputs;
  std::vector<Vec> targets;
  double train_fraction = 0.70;
  double validation_fraction = 0.15;
  double test_fraction = 0.15;

  std::size_t size() const { return inputs.size(); }
  void validate() const;
};

/// Index sets of a deterministic seeded split.
struct DataSplit {
  std::vector<std::size_t> train, validation, test;
};

DataSplit split_dataset(const TrainingDataset& data, std::uint64_t seed);

struct LMConfig {
  double damping_init = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;
  double damping_max = 1e10;
  double damping_min = 1e-3;
  int max_epochs = 25;
  double mse_stop = 1e-2;
  std::uint64_t seed = 1;
  // Map each input coordinate to [-1, 1] on the training split while
  // training; the map is folded back into layer 1 afterwards.
  bool normalize_inputs = false;

  void validate() const;
};

struct LMStepRecord {
  int epoch = 0;
  double damping = 0.0;
  double mse_before = 0.0;
  double mse_after = 0.0;
  bool accepted = false;
};

struct TrainingReport {
  std::vector<double> train_mse;       // [0] is the pre-training value
  std::vector<double> validation_mse;  // same indexing; not used for stopping
  double test_mse = 0.0;
  std::vector<LMStepRecord> steps;
  int epochs = 0;
  std::string stop_reason;  // "mse_stop", "max_epochs" or "damping_ceiling"
  std::size_t train_size = 0, validation_size = 0, test_size = 0;

  bool converged() const { return stop_reason == "mse_stop"; }
};

/// Residuals and their Jacobian at a parameter vector. `jacobian` may be
/// empty, in which case only residuals are required.
using ResidualFn = std::function<void(const Vec& params, Vec& residuals, Mat* jacobian)>;

struct LMResult {
  Vec params;
  TrainingReport report;
};

/// Batch Levenberg–Marquardt on mean squared residual. Each epoch forms
/// JᵀJ once and retries (JᵀJ + λI)δ = −Jᵀr with growing λ until the MSE
/// strictly drops; a rejected trial never mutates the parameters. If λ
/// exceeds damping_max the run stops with stop_reason "damping_ceiling".
/// `on_epoch` (optional) is called with the accepted parameters after every
/// epoch and after the initial evaluation.
LMResult levenberg_marquardt(const ResidualFn& residual_fn, Vec params, const LMConfig& cfg,
                             const std::function<void(const Vec&)>& on_epoch = {});

struct TrainingResult {
  DeepNet net;
  TrainingReport report;
};

/// Fit the masked inner layers so that forward(net, outer, x) ≈ target over
/// the training split. `outer` is held fixed.
TrainingResult lm_train(const DeepNet& net, const OuterWeights& outer, const TrainingDataset& data,
                        const LMConfig& cfg);
TrainingResult lm_train(const DeepNet& net, const OuterWeights& outer, const TrainingDataset& data,
                        const LMConfig& cfg, const TrainableMask& mask);

}  // namespace detobs
