#include "detobs/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "detobs/graph.hpp"

namespace detobs {

using nlohmann::json;

namespace {

Mat reference_outer_init() {
  Mat w(5, 3);
  w << 2.51, 4.59, 3.40,
      -2.44, 0.47, -2.45,
       0.05, -3.61, 3.14,
       1.99, -3.50, -2.56,
       3.90, -2.42, 4.29;
  return w;
}

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Reads optional keys from a JSON tree, recording type errors and which
// keys fell back to defaults instead of throwing on the first problem.
class Reader {
 public:
  Reader(const json& root, std::vector<std::string>& errors, std::vector<std::string>& defaulted)
      : root_(root), errors_(errors), defaulted_(defaulted) {}

  const json* find(const std::string& dotted) const {
    const json* node = &root_;
    std::size_t start = 0;
    while (start <= dotted.size()) {
      const auto dot = dotted.find('.', start);
      const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(key)) return nullptr;
      node = &(*node)[key];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    return node;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    const json* node = find(key);
    if (!node) {
      defaulted_.push_back(key);
      return;
    }
    try {
      out = node->get<T>();
    } catch (const json::exception&) {
      errors_.push_back(key + ": wrong type");
    }
  }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  std::optional<Vec> vector(const std::string& key) {
    const json* node = find(key);
    if (!node) return std::nullopt;
    try {
      const auto v = node->get<std::vector<double>>();
      return Vec(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
    } catch (const json::exception&) {
      errors_.push_back(key + ": expected an array of numbers");
      return std::nullopt;
    }
  }

  std::optional<Mat> matrix(const json& node, const std::string& key) {
    try {
      const auto rows = node.get<std::vector<std::vector<double>>>();
      if (rows.empty()) {
        errors_.push_back(key + ": empty matrix");
        return std::nullopt;
      }
      Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size()) {
          errors_.push_back(key + ": ragged rows");
          return std::nullopt;
        }
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
          m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
      }
      return m;
    } catch (const json::exception&) {
      errors_.push_back(key + ": expected a nested array of numbers");
      return std::nullopt;
    }
  }

  std::optional<Mat> matrix(const std::string& key) {
    const json* node = find(key);
    if (!node) return std::nullopt;
    return matrix(*node, key);
  }

  std::vector<std::string>& errors() { return errors_; }

 private:
  const json& root_;
  std::vector<std::string>& errors_;
  std::vector<std::string>& defaulted_;
};

PhaseSchedule read_schedule(const json& node, const std::string& key, std::vector<std::string>& errors,
                            const PhaseSchedule& fallback) {
  PhaseSchedule s = fallback;
  try {
    if (node.contains("collect_start")) s.collect_start = node.at("collect_start").get<double>();
    if (node.contains("collect_end")) s.collect_end = node.at("collect_end").get<double>();
    if (node.contains("train_end")) s.train_end = node.at("train_end").get<double>();
  } catch (const json::exception&) {
    errors.push_back(key + ": schedule times must be numbers");
  }
  return s;
}

}  // namespace

SimConfig reference_config() {
  SimConfig cfg;
  cfg.plant.x0 = Vec(3);
  cfg.plant.x0 << 5.0, 7.0, 8.0;
  cfg.network.adjacency = Mat(3, 3);
  cfg.network.adjacency << 0, 1, 1, 1, 0, 0, 1, 0, 0;
  for (int i = 0; i < 3; ++i) {
    Mat c = Mat::Zero(1, 3);
    c(0, i) = 1.0;
    cfg.network.c.push_back(c);
    cfg.network.x_hat0.push_back(Vec::Zero(3));
  }
  cfg.observer.K1 = Mat(Vec((Vec(3) << 134.86, 263.23, 263.23).finished()).asDiagonal());
  cfg.observer.gamma = 3.0 * Mat::Identity(5, 5);
  cfg.dnn.outer_init = reference_outer_init();
  return cfg;
}

void SimConfig::validate() const {
  std::vector<std::string> errors;
  const auto n = plant.x0.size();

  if (plant.model != "vanderpol") errors.push_back("plant.model: only \"vanderpol\" is built in");
  if (plant.mu == 0.0 || !std::isfinite(plant.mu)) errors.push_back("plant.mu must be finite and nonzero");
  if (plant.model == "vanderpol" && n != 3) errors.push_back("plant.x0 must have 3 components for vanderpol");
  if (!plant.x0.allFinite()) errors.push_back("plant.x0 must be finite");
  if (!(plant.dt > 0.0)) errors.push_back("plant.dt must be positive");
  if (!(plant.t_final > plant.dt)) errors.push_back("plant.t_final must exceed plant.dt");
  if (plant.disturbance != "sinusoidal" && plant.disturbance != "none") {
    errors.push_back("plant.disturbance must be \"sinusoidal\" or \"none\"");
  }

  const std::size_t agents_count = network.c.size();
  if (agents_count == 0) errors.push_back("network.C must list one output matrix per agent");
  if (network.adjacency.rows() != static_cast<Eigen::Index>(agents_count) ||
      network.adjacency.cols() != static_cast<Eigen::Index>(agents_count)) {
    errors.push_back("network.adjacency must be N x N with N = number of C matrices (" +
                     std::to_string(agents_count) + ")");
  } else {
    try {
      CommGraph g(network.adjacency);
      if (!is_connected(g)) errors.push_back("network.adjacency: graph is not connected");
    } catch (const ConfigError& e) {
      errors.push_back(std::string("network.adjacency: ") + e.what());
    }
  }
  for (std::size_t i = 0; i < agents_count; ++i) {
    if (network.c[i].cols() != n) {
      errors.push_back("network.C[" + std::to_string(i + 1) + "] must have " + std::to_string(n) + " columns");
    }
    if (network.c[i].rows() != network.c.front().rows()) {
      errors.push_back("network.C[" + std::to_string(i + 1) + "] row count differs from C[1]");
    }
  }
  if (network.x_hat0.size() != agents_count) {
    errors.push_back("network.x_hat0 must have one entry per agent");
  }
  for (std::size_t i = 0; i < network.x_hat0.size(); ++i) {
    if (network.x_hat0[i].size() != n) {
      errors.push_back("network.x_hat0[" + std::to_string(i + 1) + "] must have " + std::to_string(n) + " entries");
    }
  }

  if (!(observer.kappa > 0.0)) errors.push_back("observer.kappa must be positive");
  if (!(observer.k2 > 1.0 / observer.kappa)) errors.push_back("observer: k2 must exceed 1/kappa (alpha nonpositive)");
  if (!(observer.delta > 0.0)) errors.push_back("observer.delta must be positive");
  if (!(observer.rho >= 0.0)) errors.push_back("observer.rho must be nonnegative");
  if (!(observer.epsilon > 0.0)) errors.push_back("observer.epsilon must be positive");
  if (observer.K1 && (observer.K1->rows() != n || observer.K1->cols() != n)) {
    errors.push_back("observer.K1 must be n x n");
  }
  if (!(observer.omega_bar > 0.0)) errors.push_back("observer.omega_bar must be positive");
  if (!(observer.band_fraction > 0.0 && observer.band_fraction < 1.0)) {
    errors.push_back("observer.band_fraction must lie in (0, 1)");
  }

  const auto width_out = dnn.widths.empty() ? 0 : static_cast<Eigen::Index>(dnn.widths.back());
  if (dnn.widths.empty()) errors.push_back("dnn.widths must list at least one inner layer");
  for (std::size_t w : dnn.widths) {
    if (w == 0) errors.push_back("dnn.widths entries must be positive");
  }
  if (dnn.outer_init.rows() != width_out || dnn.outer_init.cols() != n) {
    errors.push_back("dnn.outer_init must be L x n with L = last inner width (" + std::to_string(width_out) + ")");
  } else if (dnn.outer_init.norm() > observer.omega_bar) {
    errors.push_back("dnn.outer_init norm exceeds observer.omega_bar (observer would start infeasible)");
  }
  if (observer.gamma.rows() != width_out || observer.gamma.cols() != width_out) {
    errors.push_back("observer.gamma must be L x L");
  } else if (!observer.gamma.isApprox(observer.gamma.transpose()) ||
             observer.gamma.llt().info() != Eigen::Success) {
    errors.push_back("observer.gamma must be symmetric positive definite");
  }
  try {
    dnn.lm.validate();
  } catch (const ConfigError& e) {
    errors.push_back(std::string("dnn.lm: ") + e.what());
  }

  if (training.target != "rhs" && training.target != "finite_difference") {
    errors.push_back("training.target must be \"rhs\" or \"finite_difference\"");
  }
  const double split = training.train_fraction + training.validation_fraction + training.test_fraction;
  if (std::abs(split - 1.0) > 1e-9 || training.train_fraction <= 0.0 ||
      training.validation_fraction < 0.0 || training.test_fraction < 0.0) {
    errors.push_back("training split fractions must be nonnegative and sum to 1");
  }

  auto check_schedule = [&](const PhaseSchedule& s, const std::string& key) {
    if (!(s.collect_start >= 0.0 && s.collect_start < s.collect_end && s.collect_end <= s.train_end &&
          s.train_end <= plant.t_final)) {
      errors.push_back(key + ": need 0 <= collect_start < collect_end <= train_end <= t_final");
    }
  };
  // The schedule only matters when learning is on.
  if (learning) check_schedule(schedule, "schedule");
  if (learning && !agent_schedules.empty()) {
    if (agent_schedules.size() != agents_count) {
      errors.push_back("schedule.agents must have one entry per agent");
    }
    for (std::size_t i = 0; i < agent_schedules.size(); ++i) {
      check_schedule(agent_schedules[i], "schedule.agents[" + std::to_string(i + 1) + "]");
    }
  }
  if (!(metric_window[0] >= 0.0 && metric_window[0] < metric_window[1] && metric_window[1] <= plant.t_final)) {
    errors.push_back("metrics.window must satisfy 0 <= a < b <= t_final");
  }
  if (output.trace_stride == 0) errors.push_back("output.trace_stride must be at least 1");

  if (!errors.empty()) throw ConfigError("invalid configuration:\n  " + join(errors, "\n  "));
}

SimConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");

  SimConfig cfg = reference_config();
  std::vector<std::string> errors;
  Reader rd(root, errors, cfg.defaulted);

  rd.get("plant.model", cfg.plant.model);
  rd.get("plant.mu", cfg.plant.mu);
  if (auto x0 = rd.vector("plant.x0")) cfg.plant.x0 = *x0;
  else if (!rd.has("plant.x0")) cfg.defaulted.push_back("plant.x0");
  rd.get("plant.dt", cfg.plant.dt);
  rd.get("plant.t_final", cfg.plant.t_final);
  rd.get("plant.disturbance", cfg.plant.disturbance);
  std::string integrator(to_string(cfg.plant.integrator));
  rd.get("plant.integrator", integrator);
  try {
    cfg.plant.integrator = parse_integrator(integrator);
  } catch (const ConfigError& e) {
    errors.push_back(std::string("plant.integrator: ") + e.what());
  }

  if (auto a = rd.matrix("network.adjacency")) cfg.network.adjacency = *a;
  else if (!rd.has("network.adjacency")) cfg.defaulted.push_back("network.adjacency");
  if (const json* cs = rd.find("network.C")) {
    cfg.network.c.clear();
    if (!cs->is_array()) {
      errors.push_back("network.C: expected a list of matrices");
    } else {
      for (std::size_t i = 0; i < cs->size(); ++i) {
        if (auto c = rd.matrix((*cs)[i], "network.C[" + std::to_string(i + 1) + "]")) cfg.network.c.push_back(*c);
      }
    }
  } else {
    cfg.defaulted.push_back("network.C");
  }
  if (const json* xs = rd.find("network.x_hat0")) {
    cfg.network.x_hat0.clear();
    if (auto m = rd.matrix(*xs, "network.x_hat0")) {
      for (Eigen::Index i = 0; i < m->rows(); ++i) cfg.network.x_hat0.push_back(m->row(i).transpose());
    }
  } else {
    cfg.defaulted.push_back("network.x_hat0");
    cfg.network.x_hat0.assign(cfg.network.c.size(), Vec::Zero(cfg.plant.x0.size()));
  }

  rd.get("observer.k2", cfg.observer.k2);
  rd.get("observer.kappa", cfg.observer.kappa);
  rd.get("observer.rho", cfg.observer.rho);
  rd.get("observer.delta", cfg.observer.delta);
  rd.get("observer.epsilon", cfg.observer.epsilon);
  if (const json* k = rd.find("observer.K1")) {
    if (k->is_string()) {
      if (k->get<std::string>() == "synthesize") cfg.observer.K1.reset();
      else errors.push_back("observer.K1: expected a matrix or \"synthesize\"");
    } else if (auto m = rd.matrix(*k, "observer.K1")) {
      cfg.observer.K1 = *m;
    }
  } else {
    cfg.defaulted.push_back("observer.K1");
  }
  rd.get("dnn.widths", cfg.dnn.widths);
  const auto width_out = cfg.dnn.widths.empty() ? Eigen::Index{0} : static_cast<Eigen::Index>(cfg.dnn.widths.back());
  if (const json* g = rd.find("observer.gamma")) {
    if (g->is_number()) {
      cfg.observer.gamma = g->get<double>() * Mat::Identity(width_out, width_out);
    } else if (auto m = rd.matrix(*g, "observer.gamma")) {
      cfg.observer.gamma = *m;
    }
  } else {
    cfg.defaulted.push_back("observer.gamma");
    cfg.observer.gamma = 3.0 * Mat::Identity(width_out, width_out);
  }
  rd.get("observer.omega_bar", cfg.observer.omega_bar);
  rd.get("observer.band_fraction", cfg.observer.band_fraction);
  rd.get("observer.synthesis.k_cap", cfg.observer.synthesis.k_cap);
  rd.get("observer.synthesis.margin", cfg.observer.synthesis.margin);
  rd.get("observer.synthesis.max_iterations", cfg.observer.synthesis.max_iterations);
  rd.get("observer.synthesis.initial_entry", cfg.observer.synthesis.initial_entry);
  rd.get("observer.synthesis.step", cfg.observer.synthesis.step);

  rd.get("dnn.init", cfg.dnn.init);
  if (auto w = rd.matrix("dnn.outer_init")) cfg.dnn.outer_init = *w;
  else if (!rd.has("dnn.outer_init")) cfg.defaulted.push_back("dnn.outer_init");
  rd.get("dnn.warm_start", cfg.dnn.warm_start);
  rd.get("dnn.seed", cfg.seed);
  rd.get("dnn.lm.damping_init", cfg.dnn.lm.damping_init);
  rd.get("dnn.lm.damping_up", cfg.dnn.lm.damping_up);
  rd.get("dnn.lm.damping_down", cfg.dnn.lm.damping_down);
  rd.get("dnn.lm.damping_max", cfg.dnn.lm.damping_max);
  rd.get("dnn.lm.damping_min", cfg.dnn.lm.damping_min);
  rd.get("dnn.lm.max_epochs", cfg.dnn.lm.max_epochs);
  rd.get("dnn.lm.mse_stop", cfg.dnn.lm.mse_stop);
  rd.get("dnn.lm.normalize_inputs", cfg.dnn.lm.normalize_inputs);

  rd.get("training.target", cfg.training.target);
  rd.get("training.train_fraction", cfg.training.train_fraction);
  rd.get("training.validation_fraction", cfg.training.validation_fraction);
  rd.get("training.test_fraction", cfg.training.test_fraction);

  if (const json* s = rd.find("schedule")) {
    cfg.schedule = read_schedule(*s, "schedule", errors, cfg.schedule);
    if (s->contains("agents")) {
      for (std::size_t i = 0; i < s->at("agents").size(); ++i) {
        cfg.agent_schedules.push_back(read_schedule(s->at("agents")[i],
                                                    "schedule.agents[" + std::to_string(i + 1) + "]",
                                                    errors, cfg.schedule));
      }
    }
  } else {
    cfg.defaulted.push_back("schedule");
  }

  rd.get("learning", cfg.learning);
  if (rd.has("seed")) rd.get("seed", cfg.seed);
  if (auto w = rd.vector("metrics.window")) {
    if (w->size() == 2) cfg.metric_window = {(*w)(0), (*w)(1)};
    else errors.push_back("metrics.window must have two entries");
  } else if (!rd.has("metrics.window")) {
    cfg.defaulted.push_back("metrics.window");
  }
  rd.get("output.dir", cfg.output.dir);
  rd.get("output.trace_stride", cfg.output.trace_stride);
  rd.get("output.allow_infeasible", cfg.output.allow_infeasible);

  if (!errors.empty()) throw ConfigError("invalid configuration:\n  " + join(errors, "\n  "));
  cfg.validate();
  return cfg;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string echo_config(const SimConfig& cfg, int indent) {
  json j;
  j["plant"] = {{"model", cfg.plant.model},
                {"mu", cfg.plant.mu},
                {"x0", vector_to_json(cfg.plant.x0)},
                {"dt", cfg.plant.dt},
                {"t_final", cfg.plant.t_final},
                {"disturbance", cfg.plant.disturbance},
                {"integrator", std::string(to_string(cfg.plant.integrator))}};
  json cs = json::array();
  for (const Mat& c : cfg.network.c) cs.push_back(matrix_to_json(c));
  json xs = json::array();
  for (const Vec& x : cfg.network.x_hat0) xs.push_back(vector_to_json(x));
  j["network"] = {{"adjacency", matrix_to_json(cfg.network.adjacency)}, {"C", cs}, {"x_hat0", xs}};
  j["observer"] = {{"k2", cfg.observer.k2},
                   {"kappa", cfg.observer.kappa},
                   {"rho", cfg.observer.rho},
                   {"delta", cfg.observer.delta},
                   {"epsilon", cfg.observer.epsilon},
                   {"K1", cfg.observer.K1 ? matrix_to_json(*cfg.observer.K1) : json("synthesize")},
                   {"gamma", matrix_to_json(cfg.observer.gamma)},
                   {"omega_bar", cfg.observer.omega_bar},
                   {"band_fraction", cfg.observer.band_fraction},
                   {"synthesis",
                    {{"k_cap", cfg.observer.synthesis.k_cap},
                     {"margin", cfg.observer.synthesis.margin},
                     {"max_iterations", cfg.observer.synthesis.max_iterations},
                     {"initial_entry", cfg.observer.synthesis.initial_entry},
                     {"step", cfg.observer.synthesis.step}}},
                   {"derived", {{"k1", cfg.observer.k2 + cfg.observer.rho * cfg.observer.rho / cfg.observer.delta},
                                {"alpha", cfg.observer.k2 - 1.0 / cfg.observer.kappa}}}};
  j["dnn"] = {{"widths", cfg.dnn.widths},
              {"init", cfg.dnn.init},
              {"outer_init", matrix_to_json(cfg.dnn.outer_init)},
              {"warm_start", cfg.dnn.warm_start},
              {"seed", cfg.seed},
              {"lm",
               {{"damping_init", cfg.dnn.lm.damping_init},
                {"damping_up", cfg.dnn.lm.damping_up},
                {"damping_down", cfg.dnn.lm.damping_down},
                {"damping_max", cfg.dnn.lm.damping_max},
                {"damping_min", cfg.dnn.lm.damping_min},
                {"max_epochs", cfg.dnn.lm.max_epochs},
                {"mse_stop", cfg.dnn.lm.mse_stop},
                {"normalize_inputs", cfg.dnn.lm.normalize_inputs}}}};
  j["training"] = {{"target", cfg.training.target},
                   {"train_fraction", cfg.training.train_fraction},
                   {"validation_fraction", cfg.training.validation_fraction},
                   {"test_fraction", cfg.training.test_fraction}};
  auto sched = [](const PhaseSchedule& s) {
    return json{{"collect_start", s.collect_start}, {"collect_end", s.collect_end}, {"train_end", s.train_end}};
  };
  j["schedule"] = sched(cfg.schedule);
  if (!cfg.agent_schedules.empty()) {
    for (const auto& s : cfg.agent_schedules) j["schedule"]["agents"].push_back(sched(s));
  }
  j["learning"] = cfg.learning;
  j["seed"] = cfg.seed;
  j["metrics"] = {{"window", {cfg.metric_window[0], cfg.metric_window[1]}}};
  j["output"] = {{"dir", cfg.output.dir},
                 {"trace_stride", cfg.output.trace_stride},
                 {"allow_infeasible", cfg.output.allow_infeasible}};
  j["defaulted"] = cfg.defaulted;
  return j.dump(indent);
}

}  // namespace detobs
