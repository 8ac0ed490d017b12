#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "detobs/gain.hpp"
#include "detobs/integrator.hpp"
#include "detobs/lm.hpp"
#include "detobs/types.hpp"

namespace detobs {

struct PlantConfig {
  std::string model = "vanderpol";
  double mu = 0.3;
  Vec x0;
  double dt = 1e-3;
  double t_final = 40.0;
  std::string disturbance = "sinusoidal";  // "sinusoidal" | "none"
  Integrator integrator = Integrator::rk4;
};

struct NetworkConfig {
  Mat adjacency;
  std::vector<Mat> c;
  std::vector<Vec> x_hat0;  // per agent; zeros when omitted
};

struct ObserverConfig {
  double k2 = 10.0;
  double kappa = 1.0;
  double rho = 2.0;
  double delta = 0.3;
  double epsilon = 3000.0;
  std::optional<Mat> K1;  // nullopt: synthesize
  Mat gamma;              // L x L
  double omega_bar = 50.0;
  double band_fraction = 0.05;
  SynthesisOptions synthesis;
};

struct DnnConfig {
  std::vector<std::size_t> widths{12, 12, 12, 5};
  double init = 0.1;
  Mat outer_init;  // L x n
  LMConfig lm;
  bool warm_start = true;  // false: reset layers 1..4 to `init` before training
};

struct TrainingConfig {
  std::string target = "rhs";  // "rhs" | "finite_difference"
  double train_fraction = 0.70;
  double validation_fraction = 0.15;
  double test_fraction = 0.15;
};

/// collect_start ≤ t < collect_end gathers samples; training runs on that
/// snapshot and the new inner net is swapped in at train_end.
struct PhaseSchedule {
  double collect_start = 10.0;
  double collect_end = 16.0;
  double train_end = 20.0;
};

struct OutputConfig {
  std::string dir = "out";
  std::size_t trace_stride = 1;
  bool allow_infeasible = false;
};

struct SimConfig {
  PlantConfig plant;
  NetworkConfig network;
  ObserverConfig observer;
  DnnConfig dnn;
  TrainingConfig training;
  PhaseSchedule schedule;
  std::vector<PhaseSchedule> agent_schedules;  // empty: every agent uses `schedule`
  bool learning = true;
  std::uint64_t seed = 1;
  std::array<double, 2> metric_window{20.0, 40.0};
  OutputConfig output;
  std::vector<std::string> defaulted;  // dotted keys filled from defaults

  std::size_t agents() const { return network.c.size(); }
  std::size_t state_dim() const { return static_cast<std::size_t>(plant.x0.size()); }
  const PhaseSchedule& schedule_for(std::size_t agent) const {
    return agent_schedules.empty() ? schedule : agent_schedules.at(agent);
  }

  /// Checks every constraint and throws one ConfigError listing all violations.
  void validate() const;
};

/// Built-in experiment: Van der Pol plant, 3-agent star graph, reference gains and initial weights.
SimConfig reference_config();

SimConfig parse_config(const std::string& json_text);
SimConfig load_config(const std::string& path);

/// Every effective parameter (supplied and defaulted) as JSON text.
std::string echo_config(const SimConfig& cfg, int indent = 2);

}  // namespace detobs
