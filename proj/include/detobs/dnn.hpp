#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detobs/types.hpp"

namespace detobs {

enum class Activation { tanh, linear };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// One affine layer: out = act(weightsᵀ · in + bias).
///
/// `weights` is fan_in x fan_out, matching the W_q ∈ R^{L_q x n_{q+1}} layout
/// where the layer is applied as a transpose. `bias` is empty for bias-free
/// layers.
struct Layer {
  Mat weights;
  Vec bias;
  Activation activation = Activation::tanh;

  std::size_t fan_in() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t fan_out() const { return static_cast<std::size_t>(weights.cols()); }
  bool has_bias() const { return bias.size() > 0; }
  std::size_t param_count() const { return weights.size() + bias.size(); }
};

/// Inner network Φ̂: R^n -> R^p, a chain of affine layers. The outer
/// activation σ (tanh) and outer weights Ŵ live outside this type.
class DeepNet {
 public:
  DeepNet() = default;
  explicit DeepNet(std::vector<Layer> layers);

  std::size_t input_dim() const { return layers_.front().fan_in(); }
  std::size_t feature_dim() const { return layers_.back().fan_out(); }
  std::size_t depth() const { return layers_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(std::size_t q) const { return layers_.at(q); }
  Layer& layer(std::size_t q) { return layers_.at(q); }
  bool empty() const { return layers_.empty(); }

 private:
  std::vector<Layer> layers_;
};

/// Inner net with tanh hidden layers and a linear final layer (σ supplies the
/// last nonlinearity). Every weight and bias is set to `init`.
/// widths = {12, 12, 12, 5} with input_dim = 3 gives the built-in architecture.
DeepNet make_inner_net(std::size_t input_dim, std::span<const std::size_t> widths, double init);

/// Outer layer Ŵ (L x n, no bias), confined to the Frobenius ball of radius `bound`.
struct OuterWeights {
  Mat w_hat;
  double bound = 50.0;
};

/// Outer activation vector: componentwise tanh, every entry in (-1, 1).
Vec sigma(const Vec& inner_output);

Vec forward_inner(const DeepNet& net, const Vec& x);

/// Ŵᵀ σ(Φ̂(x)).
Vec forward(const DeepNet& net, const OuterWeights& outer, const Vec& x);

/// Which parameter groups are differentiated. inner[q] selects layer q of
/// the DeepNet; `outer` selects Ŵ.
struct TrainableMask {
  std::vector<bool> inner;
  bool outer = false;

  static TrainableMask inner_only(const DeepNet& net);
  static TrainableMask all(const DeepNet& net);
};

/// Parameter flattening order: for each selected inner layer, weights
/// row-major (fan_in x fan_out) then bias; then Ŵ row-major if selected.
std::size_t param_count(const DeepNet& net, const OuterWeights& outer, const TrainableMask& mask);
Vec flatten_params(const DeepNet& net, const OuterWeights& outer, const TrainableMask& mask);
void assign_params(DeepNet& net, OuterWeights& outer, const TrainableMask& mask, const Vec& params);

/// d forward(net, outer, x) / d params, shape n x param_count. Exact reverse mode.
Mat param_jacobian(const DeepNet& net, const OuterWeights& outer, const Vec& x,
                   const TrainableMask& mask);

/// Projected outer-weight rate.
///
/// The raw direction is −Γ σ e3ᵀ C_i (L x n). With r = bound·(1 − band_fraction):
/// inside ‖Ŵ‖_F ≤ r, or when ⟨Ŵ, raw⟩ ≤ 0, the raw direction is returned
/// unchanged. Otherwise the radial component is attenuated by
/// c = (‖Ŵ‖² − r²)/(bound² − r²), which reaches 1 (radial part removed) on
/// the boundary and exceeds 1 outside it, pulling Ŵ back in.
/// Throws ConfigError if gamma is not symmetric positive definite.
Mat outer_update_direction(const Mat& gamma, const Vec& sigma_val, const Vec& e3, const Mat& c_i,
                           const OuterWeights& outer, double band_fraction = 0.05);

/// Projection applied to an arbitrary raw direction (same rule as above).
Mat project_direction(const Mat& raw, const Mat& w_hat, double bound, double band_fraction);

/// Structured text (JSON) serialization for inspection and replay.
std::string net_to_json(const DeepNet& net, int indent = 2);
DeepNet net_from_json(std::string_view text);

}  // namespace detobs
