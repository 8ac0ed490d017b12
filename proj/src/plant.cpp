#include "detobs/plant.hpp"

#include <cmath>
#include <string>

namespace detobs {

Integrator parse_integrator(std::string_view name) {
  if (name == "rk4") return Integrator::rk4;
  if (name == "euler") return Integrator::euler;
  throw ConfigError("unknown integrator '" + std::string(name) + "' (expected rk4 or euler)");
}

std::string_view to_string(Integrator scheme) {
  return scheme == Integrator::rk4 ? "rk4" : "euler";
}

Vec vanderpol_drift(const Vec& x, double mu) {
  if (mu == 0.0) throw ConfigError("vanderpol: mu must be nonzero");
  if (x.size() != 3) throw ConfigError("vanderpol: state must have 3 components");
  Vec out(3);
  out << mu * (x(0) - x(0) * x(0) * x(0) / 3.0 - x(1)), x(0) / mu, -mu * x(2);
  return out;
}

Vec reference_disturbance(double t) {
  Vec d(3);
  d << 0.5 * std::sin(3.0 * t), 0.75 * std::cos(t), std::cos(3.75 * t);
  return d;
}

PlantModel vanderpol_model(double mu, bool with_disturbance) {
  if (mu == 0.0) throw ConfigError("vanderpol: mu must be nonzero");
  PlantModel m;
  m.dim = 3;
  m.drift = [mu](const Vec& x) { return vanderpol_drift(x, mu); };
  if (with_disturbance) {
    m.disturbance = reference_disturbance;
    m.disturbance_bound = kReferenceDisturbanceBound;
  } else {
    m.disturbance = [](double) { return Vec::Zero(3).eval(); };
    m.disturbance_bound = 0.0;
  }
  return m;
}

PlantState integrate_step(const PlantModel& model, const PlantState& s, double dt,
                          Integrator scheme) {
  if (!(dt > 0.0)) throw ConfigError("integrate_step: dt must be positive");
  auto rhs = [&model](double t, const Vec& x) { return model.rate(t, x); };
  PlantState next{fixed_step(scheme, rhs, s.t, s.x0, dt), s.t + dt};
  if (!next.x0.allFinite()) {
    throw DivergenceError("plant state diverged at t=" + std::to_string(next.t));
  }
  return next;
}

OutputMap::OutputMap(std::vector<Mat> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw ConfigError("output map needs at least one agent");
  const auto m = blocks_.front().rows();
  const auto n = blocks_.front().cols();
  if (m == 0 || n == 0) throw ConfigError("output matrices must be nonempty");
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].rows() != m || blocks_[i].cols() != n) {
      throw ConfigError("C_" + std::to_string(i + 1) + " has shape " +
                        std::to_string(blocks_[i].rows()) + "x" +
                        std::to_string(blocks_[i].cols()) + ", expected " + std::to_string(m) +
                        "x" + std::to_string(n));
    }
  }
}

Mat OutputMap::stacked() const {
  const auto m = static_cast<Eigen::Index>(output_dim());
  const auto n = static_cast<Eigen::Index>(state_dim());
  const auto count = static_cast<Eigen::Index>(agents());
  Mat c = Mat::Zero(m * count, n * count);
  for (Eigen::Index i = 0; i < count; ++i) {
    c.block(i * m, i * n, m, n) = blocks_[static_cast<std::size_t>(i)];
  }
  return c;
}

Vec measure(const OutputMap& map, std::size_t i, const Vec& x0) {
  const Mat& c = map.block(i);
  if (c.cols() != x0.size()) {
    throw ConfigError("measure: C_" + std::to_string(i + 1) + " expects a state of size " +
                      std::to_string(c.cols()));
  }
  return c * x0;
}

}  // namespace detobs
