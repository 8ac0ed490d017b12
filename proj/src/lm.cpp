#include "detobs/lm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace detobs {

void TrainingDataset::validate() const {
  if (inputs.empty()) throw ConfigError("training dataset is empty");
  if (inputs.size() != targets.size()) {
    throw ConfigError("training dataset inputs and targets differ in length");
  }
  const double total = train_fraction + validation_fraction + test_fraction;
  if (std::abs(total - 1.0) > 1e-9 || train_fraction <= 0.0 || validation_fraction < 0.0 ||
      test_fraction < 0.0) {
    throw ConfigError("split fractions must be nonnegative, train > 0, and sum to 1");
  }
}

DataSplit split_dataset(const TrainingDataset& data, std::uint64_t seed) {
  data.validate();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher–Yates with an explicit engine draw so the permutation does not
  // depend on the standard library's shuffle/distribution implementation.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  const auto n = data.size();
  auto n_train = static_cast<std::size_t>(std::llround(data.train_fraction * static_cast<double>(n)));
  auto n_val = static_cast<std::size_t>(std::llround(data.validation_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n);
  n_val = std::min(n_val, n - n_train);
  DataSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return split;
}

void LMConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("LM max_epochs must be at least 1");
  if (!(mse_stop > 0.0)) throw ConfigError("LM mse_stop must be positive");
  if (!(damping_init > 0.0) || !(damping_up > 1.0) || !(damping_down > 0.0 && damping_down < 1.0)) {
    throw ConfigError("LM damping schedule invalid");
  }
  if (!(damping_min > 0.0) || damping_max < damping_init) {
    throw ConfigError("LM damping bounds invalid");
  }
}

LMResult levenberg_marquardt(const ResidualFn& residual_fn, Vec params, const LMConfig& cfg,
                             const std::function<void(const Vec&)>& on_epoch) {
  cfg.validate();
  LMResult result;
  TrainingReport& report = result.report;

  Vec r;
  Mat jac;
  residual_fn(params, r, nullptr);
  auto mse_of = [](const Vec& res) { return res.size() ? res.squaredNorm() / static_cast<double>(res.size()) : 0.0; };
  double mse = mse_of(r);
  report.train_mse.push_back(mse);
  if (on_epoch) on_epoch(params);

  double damping = std::max(cfg.damping_init, cfg.damping_min);
  report.stop_reason = "max_epochs";
  if (mse < cfg.mse_stop) {
    report.stop_reason = "mse_stop";
    result.params = std::move(params);
    return result;
  }

  const Eigen::Index p = params.size();
  Vec trial_r;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    residual_fn(params, r, &jac);
    Mat normal = Mat::Zero(p, p);
    normal.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
    normal = normal.selfadjointView<Eigen::Lower>();
    const Vec gradient = jac.transpose() * r;

    bool accepted = false;
    while (!accepted) {
      Mat damped = normal;
      damped.diagonal().array() += damping;
      Eigen::LDLT<Mat> ldlt(damped);
      Vec delta;
      double trial_mse = std::numeric_limits<double>::infinity();
      if (ldlt.info() == Eigen::Success) {
        delta = ldlt.solve(-gradient);
        if (delta.allFinite()) {
          residual_fn(params + delta, trial_r, nullptr);
          trial_mse = mse_of(trial_r);
          if (!std::isfinite(trial_mse)) trial_mse = std::numeric_limits<double>::infinity();
        }
      }
      LMStepRecord step{epoch, damping, mse, trial_mse, trial_mse < mse};
      report.steps.push_back(step);
      if (step.accepted) {
        params += delta;
        mse = trial_mse;
        damping = std::max(damping * cfg.damping_down, cfg.damping_min);
        accepted = true;
      } else {
        damping *= cfg.damping_up;
        if (damping > cfg.damping_max) {
          report.stop_reason = "damping_ceiling";
          report.epochs = epoch;
          result.params = std::move(params);
          return result;
        }
      }
    }
    report.epochs = epoch;
    report.train_mse.push_back(mse);
    if (on_epoch) on_epoch(params);
    if (mse < cfg.mse_stop) {
      report.stop_reason = "mse_stop";
      break;
    }
  }
  result.params = std::move(params);
  return result;
}

namespace {

struct InputScaling {
  Vec scale;   // x' = scale ⊙ x + offset
  Vec offset;
};

InputScaling fit_scaling(const TrainingDataset& data, const std::vector<std::size_t>& idx) {
  const Eigen::Index n = data.inputs.front().size();
  Vec lo = Vec::Constant(n, std::numeric_limits<double>::infinity());
  Vec hi = Vec::Constant(n, -std::numeric_limits<double>::infinity());
  for (std::size_t k : idx) {
    lo = lo.cwiseMin(data.inputs[k]);
    hi = hi.cwiseMax(data.inputs[k]);
  }
  InputScaling s{Vec::Ones(n), Vec::Zero(n)};
  for (Eigen::Index d = 0; d < n; ++d) {
    const double range = hi(d) - lo(d);
    if (range > 0.0) {
      s.scale(d) = 2.0 / range;
      s.offset(d) = -1.0 - s.scale(d) * lo(d);
    }
  }
  return s;
}

// Re-express layer 1 so that it consumes scaled inputs (to_scaled = true) or
// undo that (to_scaled = false). Exact: the composed map is unchanged.
void fold_scaling(Layer& first, const InputScaling& s, bool to_scaled) {
  if (!first.has_bias()) throw ConfigError("input normalization requires a bias on layer 1");
  if (to_scaled) {
    first.weights = s.scale.cwiseInverse().asDiagonal() * first.weights;
    first.bias -= first.weights.transpose() * s.offset;
  } else {
    first.bias += first.weights.transpose() * s.offset;
    first.weights = s.scale.asDiagonal() * first.weights;
  }
}

double dataset_mse(const DeepNet& net, const OuterWeights& outer, const TrainingDataset& data,
                   const std::vector<std::size_t>& idx, const InputScaling* scaling) {
  if (idx.empty()) return 0.0;
  double sum = 0.0;
  Eigen::Index count = 0;
  for (std::size_t k : idx) {
    Vec x = data.inputs[k];
    if (scaling) x = scaling->scale.cwiseProduct(x) + scaling->offset;
    const Vec r = forward(net, outer, x) - data.targets[k];
    sum += r.squaredNorm();
    count += r.size();
  }
  return sum / static_cast<double>(count);
}

}  // namespace

TrainingResult lm_train(const DeepNet& net, const OuterWeights& outer, const TrainingDataset& data,
                        const LMConfig& cfg) {
  return lm_train(net, outer, data, cfg, TrainableMask::inner_only(net));
}

TrainingResult lm_train(const DeepNet& net, const OuterWeights& outer, const TrainingDataset& data,
                        const LMConfig& cfg, const TrainableMask& mask) {
  data.validate();
  cfg.validate();
  if (mask.outer) throw ConfigError("lm_train holds the outer weights fixed; mask must exclude them");
  const std::size_t out_dim = static_cast<std::size_t>(outer.w_hat.cols());
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (static_cast<std::size_t>(data.inputs[k].size()) != net.input_dim() ||
        static_cast<std::size_t>(data.targets[k].size()) != out_dim) {
      throw ConfigError("training sample " + std::to_string(k) + " has the wrong dimension");
    }
  }

  const DataSplit split = split_dataset(data, cfg.seed);
  DeepNet work = net;
  OuterWeights frozen = outer;

  InputScaling scaling;
  const InputScaling* active_scaling = nullptr;
  if (cfg.normalize_inputs) {
    scaling = fit_scaling(data, split.train);
    fold_scaling(work.layer(0), scaling, true);
    active_scaling = &scaling;
  }

  std::vector<Vec> train_inputs;
  train_inputs.reserve(split.train.size());
  for (std::size_t k : split.train) {
    Vec x = data.inputs[k];
    if (active_scaling) x = scaling.scale.cwiseProduct(x) + scaling.offset;
    train_inputs.push_back(std::move(x));
  }

  const auto rows = static_cast<Eigen::Index>(split.train.size() * out_dim);
  const auto n_out = static_cast<Eigen::Index>(out_dim);
  const ResidualFn residual_fn = [&](const Vec& params, Vec& residuals, Mat* jacobian) {
    DeepNet candidate = work;
    OuterWeights o = frozen;
    assign_params(candidate, o, mask, params);
    residuals.resize(rows);
    if (jacobian) jacobian->resize(rows, params.size());
    for (std::size_t s = 0; s < split.train.size(); ++s) {
      const auto row = static_cast<Eigen::Index>(s) * n_out;
      const Vec& x = train_inputs[s];
      residuals.segment(row, n_out) = forward(candidate, o, x) - data.targets[split.train[s]];
      if (jacobian) jacobian->middleRows(row, n_out) = param_jacobian(candidate, o, x, mask);
    }
  };

  TrainingReport validation_log;
  const auto on_epoch = [&](const Vec& params) {
    DeepNet candidate = work;
    OuterWeights o = frozen;
    assign_params(candidate, o, mask, params);
    validation_log.validation_mse.push_back(
        dataset_mse(candidate, o, data, split.validation, active_scaling));
  };

  LMResult fit = levenberg_marquardt(residual_fn, flatten_params(work, frozen, mask), cfg, on_epoch);
  assign_params(work, frozen, mask, fit.params);

  TrainingResult result{work, std::move(fit.report)};
  result.report.validation_mse = std::move(validation_log.validation_mse);
  result.report.test_mse = dataset_mse(work, frozen, data, split.test, active_scaling);
  result.report.train_size = split.train.size();
  result.report.validation_size = split.validation.size();
  result.report.test_size = split.test.size();
  if (active_scaling) fold_scaling(result.net.layer(0), scaling, false);
  return result;
}

}  // namespace detobs
