#include "detobs/dnn.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace detobs {

std::string_view to_string(Activation a) { return a == Activation::tanh ? "tanh" : "linear"; }

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "linear") return Activation::linear;
  throw ModelError("unknown activation '" + std::string(name) + "'");
}

DeepNet::DeepNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ModelError("DeepNet needs at least one layer");
  for (std::size_t q = 0; q < layers_.size(); ++q) {
    const Layer& l = layers_[q];
    if (l.weights.size() == 0) throw ModelError("layer " + std::to_string(q + 1) + " is empty");
    if (l.has_bias() && l.bias.size() != l.weights.cols()) {
      throw ModelError("layer " + std::to_string(q + 1) + " bias length mismatch");
    }
    if (q > 0 && l.fan_in() != layers_[q - 1].fan_out()) {
      throw ModelError("layer " + std::to_string(q + 1) + " fan-in " + std::to_string(l.fan_in()) +
                       " does not match previous fan-out " +
                       std::to_string(layers_[q - 1].fan_out()));
    }
  }
}

DeepNet make_inner_net(std::size_t input_dim, std::span<const std::size_t> widths, double init) {
  if (widths.empty()) throw ModelError("inner net needs at least one layer width");
  std::vector<Layer> layers;
  std::size_t fan_in = input_dim;
  for (std::size_t q = 0; q < widths.size(); ++q) {
    const auto rows = static_cast<Eigen::Index>(fan_in);
    const auto cols = static_cast<Eigen::Index>(widths[q]);
    Layer l;
    l.weights = Mat::Constant(rows, cols, init);
    l.bias = Vec::Constant(cols, init);
    l.activation = q + 1 == widths.size() ? Activation::linear : Activation::tanh;
    layers.push_back(std::move(l));
    fan_in = widths[q];
  }
  return DeepNet(std::move(layers));
}

Vec sigma(const Vec& inner_output) { return inner_output.array().tanh().matrix(); }

namespace {

Vec apply(const Layer& l, const Vec& in) {
  Vec h = l.weights.transpose() * in;
  if (l.has_bias()) h += l.bias;
  if (l.activation == Activation::tanh) h = h.array().tanh().matrix();
  return h;
}

void check_input(const DeepNet& net, const Vec& x) {
  if (net.empty()) throw ModelError("empty network");
  if (static_cast<std::size_t>(x.size()) != net.input_dim()) {
    throw ModelError("input has size " + std::to_string(x.size()) + ", network expects " +
                     std::to_string(net.input_dim()));
  }
}

void check_outer(const DeepNet& net, const OuterWeights& outer) {
  if (static_cast<std::size_t>(outer.w_hat.rows()) != net.feature_dim()) {
    throw ModelError("outer weights have " + std::to_string(outer.w_hat.rows()) +
                     " rows, network feature dimension is " + std::to_string(net.feature_dim()));
  }
}

}  // namespace

Vec forward_inner(const DeepNet& net, const Vec& x) {
  check_input(net, x);
  Vec a = x;
  for (const Layer& l : net.layers()) a = apply(l, a);
  return a;
}

Vec forward(const DeepNet& net, const OuterWeights& outer, const Vec& x) {
  check_outer(net, outer);
  return outer.w_hat.transpose() * sigma(forward_inner(net, x));
}

TrainableMask TrainableMask::inner_only(const DeepNet& net) {
  return TrainableMask{std::vector<bool>(net.depth(), true), false};
}

TrainableMask TrainableMask::all(const DeepNet& net) {
  return TrainableMask{std::vector<bool>(net.depth(), true), true};
}

namespace {

bool selected(const TrainableMask& mask, std::size_t q) {
  return q < mask.inner.size() && mask.inner[q];
}

}  // namespace

std::size_t param_count(const DeepNet& net, const OuterWeights& outer, const TrainableMask& mask) {
  std::size_t count = 0;
  for (std::size_t q = 0; q < net.depth(); ++q) {
    if (selected(mask, q)) count += net.layer(q).param_count();
  }
  if (mask.outer) count += static_cast<std::size_t>(outer.w_hat.size());
  return count;
}

Vec flatten_params(const DeepNet& net, const OuterWeights& outer, const TrainableMask& mask) {
  Vec p(static_cast<Eigen::Index>(param_count(net, outer, mask)));
  Eigen::Index k = 0;
  auto push_matrix = [&](const Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) p(k++) = m(r, c);
  };
  for (std::size_t q = 0; q < net.depth(); ++q) {
    if (!selected(mask, q)) continue;
    const Layer& l = net.layer(q);
    push_matrix(l.weights);
    for (Eigen::Index c = 0; c < l.bias.size(); ++c) p(k++) = l.bias(c);
  }
  if (mask.outer) push_matrix(outer.w_hat);
  return p;
}

void assign_params(DeepNet& net, OuterWeights& outer, const TrainableMask& mask, const Vec& params) {
  if (static_cast<std::size_t>(params.size()) != param_count(net, outer, mask)) {
    throw ModelError("parameter vector length mismatch");
  }
  Eigen::Index k = 0;
  auto pull_matrix = [&](Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = params(k++);
  };
  for (std::size_t q = 0; q < net.depth(); ++q) {
    if (!selected(mask, q)) continue;
    Layer& l = net.layer(q);
    pull_matrix(l.weights);
    for (Eigen::Index c = 0; c < l.bias.size(); ++c) l.bias(c) = params(k++);
  }
  if (mask.outer) pull_matrix(outer.w_hat);
}

Mat param_jacobian(const DeepNet& net, const OuterWeights& outer, const Vec& x,
                   const TrainableMask& mask) {
  check_input(net, x);
  check_outer(net, outer);
  const std::size_t depth = net.depth();

  // activations[0] = x, activations[q + 1] = output of layer q.
  std::vector<Vec> activations;
  activations.reserve(depth + 1);
  activations.push_back(x);
  for (const Layer& l : net.layers()) activations.push_back(apply(l, activations.back()));
  const Vec s = sigma(activations.back());
  const Vec ds = (1.0 - s.array().square()).matrix();

  const Eigen::Index outputs = outer.w_hat.cols();
  const auto total = static_cast<Eigen::Index>(param_count(net, outer, mask));
  Mat jac = Mat::Zero(outputs, total);

  // Column offset of each selected inner layer and of the outer block.
  std::vector<Eigen::Index> offset(depth, -1);
  Eigen::Index next = 0;
  for (std::size_t q = 0; q < depth; ++q) {
    if (selected(mask, q)) {
      offset[q] = next;
      next += static_cast<Eigen::Index>(net.layer(q).param_count());
    }
  }
  const Eigen::Index outer_offset = next;

  std::size_t lowest_selected = depth;
  for (std::size_t q = 0; q < depth; ++q) {
    if (selected(mask, q)) {
      lowest_selected = q;
      break;
    }
  }

  for (Eigen::Index o = 0; o < outputs; ++o) {
    if (mask.outer) {
      // y_o = Σ_l W[l, o] s_l
      for (Eigen::Index l = 0; l < outer.w_hat.rows(); ++l) {
        jac(o, outer_offset + l * outputs + o) = s(l);
      }
    }
    if (lowest_selected == depth) continue;

    // Gradient of y_o w.r.t. the output of the last inner layer.
    Vec grad = (outer.w_hat.col(o).array() * ds.array()).matrix();
    for (std::size_t qq = depth; qq-- > lowest_selected;) {
      const Layer& l = net.layer(qq);
      const Vec& out = activations[qq + 1];
      const Vec& in = activations[qq];
      Vec gh = grad;  // gradient w.r.t. pre-activation
      if (l.activation == Activation::tanh) gh.array() *= (1.0 - out.array().square());
      if (offset[qq] >= 0) {
        const Eigen::Index base = offset[qq];
        const Eigen::Index cols = l.weights.cols();
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
          jac.row(o).segment(base + r * cols, cols) = in(r) * gh.transpose();
        }
        if (l.has_bias()) jac.row(o).segment(base + l.weights.size(), cols) = gh.transpose();
      }
      if (qq > lowest_selected) grad = l.weights * gh;
    }
  }
  return jac;
}

Mat project_direction(const Mat& raw, const Mat& w_hat, double bound, double band_fraction) {
  const double inner_radius = bound * (1.0 - band_fraction);
  const double norm_sq = w_hat.squaredNorm();
  if (norm_sq <= inner_radius * inner_radius) return raw;
  const double radial = (w_hat.array() * raw.array()).sum();
  if (radial <= 0.0) return raw;
  const double c = (norm_sq - inner_radius * inner_radius) / (bound * bound - inner_radius * inner_radius);
  return raw - c * (radial / norm_sq) * w_hat;
}

Mat outer_update_direction(const Mat& gamma, const Vec& sigma_val, const Vec& e3, const Mat& c_i,
                           const OuterWeights& outer, double band_fraction) {
  if (gamma.rows() != gamma.cols() || gamma.rows() != sigma_val.size()) {
    throw ConfigError("gamma must be L x L with L = " + std::to_string(sigma_val.size()));
  }
  if (!gamma.isApprox(gamma.transpose(), 1e-12) || gamma.llt().info() != Eigen::Success) {
    throw ConfigError("gamma must be symmetric positive definite");
  }
  const Mat raw = -(gamma * sigma_val) * (e3.transpose() * c_i);
  return project_direction(raw, outer.w_hat, outer.bound, band_fraction);
}

std::string net_to_json(const DeepNet& net, int indent) {
  nlohmann::json j;
  j["format"] = "detobs-deepnet-v1";
  j["input_dim"] = net.input_dim();
  j["feature_dim"] = net.feature_dim();
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const Layer& l : net.layers()) {
    nlohmann::json lj;
    lj["fan_in"] = l.fan_in();
    lj["fan_out"] = l.fan_out();
    lj["activation"] = std::string(to_string(l.activation));
    std::vector<double> w;
    w.reserve(l.weights.size());
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    lj["weights"] = w;
    if (l.has_bias()) {
      lj["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    } else {
      lj["bias"] = nullptr;
    }
    layers.push_back(std::move(lj));
  }
  return j.dump(indent);
}

DeepNet net_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  std::vector<Layer> layers;
  for (const auto& lj : j.at("layers")) {
    const auto fan_in = lj.at("fan_in").get<Eigen::Index>();
    const auto fan_out = lj.at("fan_out").get<Eigen::Index>();
    const auto w = lj.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != fan_in * fan_out) {
      throw ModelError("serialized layer weight count mismatch");
    }
    Layer l;
    l.weights.resize(fan_in, fan_out);
    for (Eigen::Index r = 0; r < fan_in; ++r)
      for (Eigen::Index c = 0; c < fan_out; ++c) l.weights(r, c) = w[static_cast<std::size_t>(r * fan_out + c)];
    if (!lj.at("bias").is_null()) {
      const auto b = lj.at("bias").get<std::vector<double>>();
      l.bias = Eigen::Map<const Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
    }
    l.activation = parse_activation(lj.at("activation").get<std::string>());
    layers.push_back(std::move(l));
  }
  return DeepNet(std::move(layers));
}

}  // namespace detobs
