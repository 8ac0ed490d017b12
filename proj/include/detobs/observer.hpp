#pragma once

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "detobs/dnn.hpp"
#include "detobs/graph.hpp"
#include "detobs/types.hpp"

namespace detobs {

/// Observer/trigger tuning. k1 and alpha are derived; phi1/phi2 are filled
/// by make_trigger_params from the graph and gain.
struct TriggerParams {
  double k2 = 10.0;
  double kappa = 1.0;
  double rho = 2.0;
  double delta = 0.3;
  double epsilon = 3000.0;
  double phi1 = 0.0;
  double phi2 = 0.0;

  double k1() const { return k2 + rho * rho / delta; }
  double alpha() const { return k2 - 1.0 / kappa; }
  double delta_bar() const { return delta + epsilon; }

  /// Throws ConfigError listing the first violated constraint.
  void validate() const;
};

struct TriggerConstants {
  double phi1 = 0.0;
  double phi2 = 0.0;
};

/// phi1 = k2/2 + (kappa/2)‖L⊗K1‖², phi2 = k2 / (4‖L⊗I_n‖²), spectral norms.
/// Throws ConfigError when k2 ≤ 1/kappa or ‖L‖ = 0.
TriggerConstants trigger_constants(double k2, double kappa, const Mat& laplacian, const Mat& K1);

TriggerParams make_trigger_params(double k2, double kappa, double rho, double delta, double epsilon,
                                  const Mat& laplacian, const Mat& K1);

/// (1/e2_max)·sqrt(epsilon / (N·phi1)). All arguments must be positive.
double zeno_lower_bound(double e2_max, double epsilon, std::size_t agents, double phi1);

struct BroadcastMessage {
  std::size_t sender = 0;
  Vec x_tilde;
  double t = 0.0;
};

/// Both sides of the trigger inequality φ1‖e2‖² ≥ φ2‖z‖² + ε/N.
struct TriggerCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool fire() const { return lhs >= rhs; }
};

/// One agent's distributed observer with zero-order-hold sampling.
///
/// Neighbor samples arrive via receive(); compute_z uses only broadcast
/// values. Between swap instants the inner network is constant.
class AgentObserver {
 public:
  AgentObserver(std::size_t id, const CommGraph& graph, Mat c_i, DeepNet inner, OuterWeights outer,
                Mat gamma, Vec x_hat0, double band_fraction = 0.05);

  std::size_t id() const { return id_; }
  const Vec& x_hat() const { return x_hat_; }
  const Vec& x_tilde_self() const { return x_tilde_self_; }
  const std::map<std::size_t, Vec>& neighbor_samples() const { return neighbor_samples_; }
  const std::vector<std::pair<std::size_t, double>>& neighbors() const { return neighbors_; }
  const OuterWeights& outer() const { return outer_; }
  const DeepNet& inner() const { return inner_; }
  const Mat& c_i() const { return c_i_; }
  const Mat& gamma() const { return gamma_; }
  const std::vector<double>& event_log() const { return event_log_; }
  const std::vector<double>& swap_log() const { return swap_log_; }

  /// z_i = Σ_j a_ij (x̃_j − x̃_i). Throws ProtocolError if a neighbor sample is missing.
  Vec compute_z() const;
  /// e2_i = x̃_i − x̂_i.
  Vec e2() const { return x_tilde_self_ - x_hat_; }
  /// e3_i = C_i x̂_i − y_i.
  Vec e3(const Vec& y) const { return c_i_ * x_hat_ - y; }

  /// Ŵᵀσ(Φ̂(x̂)) + K1 (z − C_iᵀ e3) at the current state.
  Vec rhs(const Vec& y, const Mat& K1) const;
  /// Same, at an arbitrary (x̂, Ŵ) with the held samples (used by integrator stages).
  Vec rhs_at(const Vec& x_hat, const Mat& w_hat, const Vec& y, const Mat& K1) const;
  /// Projected outer-weight rate at (x̂, Ŵ).
  Mat weight_rate_at(const Vec& x_hat, const Mat& w_hat, const Vec& y) const;

  struct Rates {
    Vec x_hat_dot;
    Mat w_hat_dot;
  };
  /// Both rates with a single network evaluation.
  Rates rates_at(const Vec& x_hat, const Mat& w_hat, const Vec& y, const Mat& K1) const;

  TriggerCheck trigger_check(const TriggerParams& params, std::size_t agents) const;
  bool should_trigger(const TriggerParams& params, std::size_t agents) const {
    return trigger_check(params, agents).fire();
  }

  /// ‖Ŵ‖‖σ‖ + ‖K1‖‖z‖ + ‖K1 C_iᵀ‖‖e3‖ (bounds ‖ẋ̂_i‖; spectral norms).
  double e2_rate_bound(const Vec& y, const Mat& K1) const;

  /// Sample x̂ into x̃, log the event, and return the message for neighbors.
  BroadcastMessage fire_event(double t);
  /// Store a neighbor's broadcast. Throws ProtocolError for non-neighbors.
  void receive(const BroadcastMessage& msg);

  void set_state(Vec x_hat, Mat w_hat);
  /// Replace the inner network (atomic with respect to subsequent evaluations).
  void swap_inner(DeepNet inner, double t);

 private:
  std::size_t id_;
  std::vector<std::pair<std::size_t, double>> neighbors_;
  Mat c_i_;
  DeepNet inner_;
  OuterWeights outer_;
  Mat gamma_;
  double band_fraction_;
  Vec x_hat_;
  Vec x_tilde_self_;
  std::map<std::size_t, Vec> neighbor_samples_;
  std::vector<double> event_log_;
  std::vector<double> swap_log_;
};

}  // namespace detobs
