#include "detobs/observer.hpp"

#include <cmath>
#include <string>

namespace detobs {

void TriggerParams::validate() const {
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  if (!(k2 > 1.0 / kappa)) throw ConfigError("k2 must exceed 1/kappa (alpha nonpositive)");
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  if (!(rho >= 0.0)) throw ConfigError("rho must be nonnegative");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

TriggerConstants trigger_constants(double k2, double kappa, const Mat& laplacian, const Mat& K1) {
  if (!(kappa > 0.0) || !(k2 > 1.0 / kappa)) {
    throw ConfigError("k2 must exceed 1/kappa (alpha nonpositive)");
  }
  const double l_norm = spectral_norm(laplacian);
  if (!(l_norm > 0.0)) throw ConfigError("phi2 undefined: Laplacian norm is zero (edgeless graph)");
  const double lk_norm = l_norm * spectral_norm(K1);
  return {k2 / 2.0 + 0.5 * kappa * lk_norm * lk_norm, k2 / (4.0 * l_norm * l_norm)};
}

TriggerParams make_trigger_params(double k2, double kappa, double rho, double delta, double epsilon,
                                  const Mat& laplacian, const Mat& K1) {
  TriggerParams p{k2, kappa, rho, delta, epsilon};
  p.validate();
  const TriggerConstants c = trigger_constants(k2, kappa, laplacian, K1);
  p.phi1 = c.phi1;
  p.phi2 = c.phi2;
  return p;
}

double zeno_lower_bound(double e2_max, double epsilon, std::size_t agents, double phi1) {
  if (!(e2_max > 0.0) || !(epsilon > 0.0) || agents == 0 || !(phi1 > 0.0)) {
    throw std::invalid_argument("zeno_lower_bound: arguments must be positive");
  }
  return std::sqrt(epsilon / (static_cast<double>(agents) * phi1)) / e2_max;
}

AgentObserver::AgentObserver(std::size_t id, const CommGraph& graph, Mat c_i, DeepNet inner,
                             OuterWeights outer, Mat gamma, Vec x_hat0, double band_fraction)
    : id_(id),
      c_i_(std::move(c_i)),
      inner_(std::move(inner)),
      outer_(std::move(outer)),
      gamma_(std::move(gamma)),
      band_fraction_(band_fraction),
      x_hat_(std::move(x_hat0)) {
  for (std::size_t j : neighbor_set(graph, id_)) neighbors_.emplace_back(j, graph.weight(id_, j));
  if (c_i_.cols() != x_hat_.size()) {
    throw ConfigError("agent " + std::to_string(id_ + 1) + ": C_i columns do not match state size");
  }
  if (inner_.input_dim() != static_cast<std::size_t>(x_hat_.size()) ||
      outer_.w_hat.rows() != static_cast<Eigen::Index>(inner_.feature_dim()) ||
      outer_.w_hat.cols() != x_hat_.size()) {
    throw ConfigError("agent " + std::to_string(id_ + 1) + ": network dimensions do not chain");
  }
  if (gamma_.rows() != outer_.w_hat.rows() || gamma_.cols() != outer_.w_hat.rows()) {
    throw ConfigError("agent " + std::to_string(id_ + 1) + ": gamma must be L x L");
  }
  if (gamma_.llt().info() != Eigen::Success) {
    throw ConfigError("agent " + std::to_string(id_ + 1) + ": gamma must be positive definite");
  }
  x_tilde_self_ = x_hat_;
}

Vec AgentObserver::compute_z() const {
  Vec z = Vec::Zero(x_hat_.size());
  for (const auto& [j, a] : neighbors_) {
    const auto it = neighbor_samples_.find(j);
    if (it == neighbor_samples_.end()) {
      throw ProtocolError("agent " + std::to_string(id_ + 1) + " has no sample from agent " +
                          std::to_string(j + 1));
    }
    z += a * (it->second - x_tilde_self_);
  }
  return z;
}

Vec AgentObserver::rhs(const Vec& y, const Mat& K1) const { return rhs_at(x_hat_, outer_.w_hat, y, K1); }

Vec AgentObserver::rhs_at(const Vec& x_hat, const Mat& w_hat, const Vec& y, const Mat& K1) const {
  const Vec e3 = c_i_ * x_hat - y;
  const Vec s = sigma(forward_inner(inner_, x_hat));
  return w_hat.transpose() * s + K1 * (compute_z() - c_i_.transpose() * e3);
}

Mat AgentObserver::weight_rate_at(const Vec& x_hat, const Mat& w_hat, const Vec& y) const {
  const Vec e3 = c_i_ * x_hat - y;
  const Vec s = sigma(forward_inner(inner_, x_hat));
  const Mat raw = -(gamma_ * s) * (e3.transpose() * c_i_);
  return project_direction(raw, w_hat, outer_.bound, band_fraction_);
}

AgentObserver::Rates AgentObserver::rates_at(const Vec& x_hat, const Mat& w_hat, const Vec& y,
                                             const Mat& K1) const {
  const Vec e3 = c_i_ * x_hat - y;
  const Vec s = sigma(forward_inner(inner_, x_hat));
  const Mat raw = -(gamma_ * s) * (e3.transpose() * c_i_);
  return {w_hat.transpose() * s + K1 * (compute_z() - c_i_.transpose() * e3),
          project_direction(raw, w_hat, outer_.bound, band_fraction_)};
}

TriggerCheck AgentObserver::trigger_check(const TriggerParams& params, std::size_t agents) const {
  return {params.phi1 * e2().squaredNorm(),
          params.phi2 * compute_z().squaredNorm() + params.epsilon / static_cast<double>(agents)};
}

double AgentObserver::e2_rate_bound(const Vec& y, const Mat& K1) const {
  const Vec s = sigma(forward_inner(inner_, x_hat_));
  return spectral_norm(outer_.w_hat) * s.norm() + spectral_norm(K1) * compute_z().norm() +
         spectral_norm(K1 * c_i_.transpose()) * e3(y).norm();
}

BroadcastMessage AgentObserver::fire_event(double t) {
  x_tilde_self_ = x_hat_;
  event_log_.push_back(t);
  return {id_, x_tilde_self_, t};
}

void AgentObserver::receive(const BroadcastMessage& msg) {
  for (const auto& [j, a] : neighbors_) {
    if (j == msg.sender) {
      neighbor_samples_[j] = msg.x_tilde;
      return;
    }
  }
  throw ProtocolError("agent " + std::to_string(id_ + 1) + " received a message from non-neighbor " +
                      std::to_string(msg.sender + 1));
}

void AgentObserver::set_state(Vec x_hat, Mat w_hat) {
  x_hat_ = std::move(x_hat);
  outer_.w_hat = std::move(w_hat);
}

void AgentObserver::swap_inner(DeepNet inner, double t) {
  if (inner.input_dim() != inner_.input_dim() || inner.feature_dim() != inner_.feature_dim()) {
    throw ModelError("swapped network has different input/feature dimensions");
  }
  inner_ = std::move(inner);
  swap_log_.push_back(t);
}

}  // namespace detobs
