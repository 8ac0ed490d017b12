#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detobs/config.hpp"
#include "detobs/dnn.hpp"
#include "detobs/gain.hpp"
#include "detobs/lm.hpp"
#include "detobs/observer.hpp"
#include "detobs/types.hpp"

namespace detobs {

/// Phase column values.
enum class Phase : int { baseline = 0, collect = 1, train = 2, deployed = 3 };

/// Per-step record of the run. Series are indexed [agent][row] and share the
/// time grid `t`. x_tilde and trigger data are kept in memory only; the CSV
/// carries the documented columns.
struct SimulationTrace {
  std::size_t agents = 0;
  std::size_t state_dim = 0;
  double dt = 0.0;
  std::vector<double> t;
  std::vector<Vec> x0;
  std::vector<std::vector<Vec>> x_hat;
  std::vector<std::vector<Vec>> x_tilde;
  std::vector<std::vector<double>> e1_norm;
  std::vector<std::vector<double>> w_norm;
  std::vector<std::vector<std::uint8_t>> event;
  std::vector<int> phase;

  std::size_t rows() const { return t.size(); }
};

/// Trigger inequality evaluated at each decision instant, per agent.
struct TriggerLog {
  std::vector<std::vector<TriggerCheck>> checks;  // [agent][step], step k decides at t = (k+1)·dt
};

struct EventStats {
  std::size_t count = 0;
  std::optional<double> mean_gap;
  std::optional<double> min_gap;
};

struct AgentReport {
  double rmse = 0.0;
  EventStats events;
  double e2_max = 0.0;       // run max of the ‖ẋ̂_i‖ bounding expression
  double zeno_bound = 0.0;   // zeno_lower_bound(e2_max, ε, N, φ1)
  bool zeno_ok = false;      // min gap ≥ zeno_bound − dt
  double max_w_norm = 0.0;   // max ‖Ŵ_i‖_F over the run
  std::size_t dataset_size = 0;
  std::optional<TrainingReport> training;
};

struct RunReport {
  bool learning = false;
  std::uint64_t seed = 0;
  std::array<double, 2> window{20.0, 40.0};
  double dt = 0.0;
  std::vector<AgentReport> agents;
  GainCertificate gain;
  TriggerParams trigger;
  double wall_seconds = 0.0;
};

struct RunResult {
  SimulationTrace trace;
  RunReport report;
  TriggerLog trigger_log;
  std::vector<std::vector<double>> event_times;  // [agent]
  std::vector<DeepNet> final_nets;
  std::vector<TrainingDataset> datasets;         // empty when learning is off
};

/// Full experiment. Throws ConfigError for an infeasible gain (unless
/// output.allow_infeasible) and DivergenceError if any state becomes
/// non-finite; the message carries a snapshot of the offending step.
RunResult run(const SimConfig& cfg);

/// Gain certificate for the config (given K1 or synthesized), as used by run().
GainCertificate resolve_gain(const SimConfig& cfg);

/// sqrt(mean ‖e1_i‖²) over grid points with t in [t_a, t_b]. Throws
/// std::invalid_argument on an empty window.
double rmse(const SimulationTrace& trace, std::size_t agent, double t_a, double t_b);

/// Count plus mean/min gap between consecutive event times (gaps need ≥ 2 events).
EventStats event_stats(std::span<const double> event_times);

/// Event times of one agent read from the trace's event flags.
std::vector<double> event_times_from_trace(const SimulationTrace& trace, std::size_t agent);

/// Per-agent 100·(b − a)/a on RMSE. Throws ConfigError if the runs are not comparable.
std::vector<double> compare_runs(const RunReport& a, const RunReport& b);

// ---- persistence -------------------------------------------------------

/// Columns: t, x0_1..x0_n, xhat_<i>_<k>, e1norm_<i>, event_<i>, phase (1-based indices).
void write_trace_csv(const SimulationTrace& trace, const std::string& path);
std::string trace_csv_header(std::size_t agents, std::size_t state_dim);
SimulationTrace read_trace_csv(const std::string& path);

std::string report_to_json(const RunReport& report, int indent = 2);
RunReport report_from_json(const std::string& text);

/// Columns: agent, event_index, time.
void write_event_log_csv(const std::vector<std::vector<double>>& event_times, const std::string& path);

}  // namespace detobs
