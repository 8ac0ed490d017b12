#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "detobs/config.hpp"
#include "detobs/gain.hpp"
#include "detobs/graph.hpp"
#include "detobs/plant.hpp"
#include "detobs/sim.hpp"

namespace fs = std::filesystem;
using namespace detobs;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string learning;  // "", "on", "off"
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> trace_stride;
  bool allow_infeasible = false;
};

bool was_defaulted(const SimConfig& cfg, const std::string& key) {
  return std::find(cfg.defaulted.begin(), cfg.defaulted.end(), key) != cfg.defaulted.end();
}

// Precedence: command-line flag > config file > DET_OBSERVER_OUT > built-in default.
SimConfig build_config(const CommonOptions& o) {
  SimConfig cfg = o.config_path.empty() ? reference_config() : load_config(o.config_path);
  if (o.learning == "on") cfg.learning = true;
  if (o.learning == "off") cfg.learning = false;
  if (o.seed) cfg.seed = *o.seed;
  if (o.trace_stride) cfg.output.trace_stride = *o.trace_stride;
  if (o.allow_infeasible) cfg.output.allow_infeasible = true;
  if (!o.out.empty()) {
    cfg.output.dir = o.out;
  } else if (o.config_path.empty() || was_defaulted(cfg, "output.dir")) {
    if (const char* env = std::getenv("DET_OBSERVER_OUT"); env && *env) cfg.output.dir = env;
  }
  cfg.validate();
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_certificate(const GainCertificate& g) {
  std::printf("K1 =\n");
  for (Eigen::Index r = 0; r < g.K1.rows(); ++r) {
    std::printf("  [");
    for (Eigen::Index c = 0; c < g.K1.cols(); ++c) std::printf("%s%.6f", c ? ", " : "", g.K1(r, c));
    std::printf("]\n");
  }
  std::printf("k1 = %.6f\nlmi_min_eig = %.6f\nmargin = %.6f\nfeasible = %s\n", g.k1, g.lmi_min_eig,
              g.lmi_min_eig - g.k1, g.feasible ? "true" : "false");
  if (g.iterations > 0) std::printf("iterations = %d\n", g.iterations);
}

std::string run_tag(bool learning) { return learning ? "learning" : "baseline"; }

int cmd_run(const CommonOptions& o) {
  const SimConfig cfg = build_config(o);
  std::printf("# effective configuration\n%s\n", echo_config(cfg).c_str());
  std::fflush(stdout);

  fs::create_directories(cfg.output.dir);
  const std::string tag = run_tag(cfg.learning);
  const fs::path dir(cfg.output.dir);
  {
    std::ofstream echo(dir / ("config_" + tag + ".json"));
    echo << echo_config(cfg) << '\n';
  }

  const RunResult res = run(cfg);
  write_trace_csv(res.trace, (dir / ("trace_" + tag + ".csv")).string());
  write_event_log_csv(res.event_times, (dir / ("events_" + tag + ".csv")).string());
  {
    std::ofstream rep(dir / ("report_" + tag + ".json"));
    rep << report_to_json(res.report) << '\n';
  }

  std::printf("\nrun: learning=%s seed=%llu wall=%.2fs\n", cfg.learning ? "on" : "off",
              static_cast<unsigned long long>(cfg.seed), res.report.wall_seconds);
  std::printf("%-6s %-12s %-8s %-10s %-10s %-10s %-6s\n", "agent", "rmse", "events", "mean_gap", "min_gap",
              "zeno_lb", "zeno");
  for (std::size_t i = 0; i < res.report.agents.size(); ++i) {
    const AgentReport& a = res.report.agents[i];
    std::printf("%-6zu %-12.6f %-8zu %-10.5f %-10.5f %-10.6f %-6s\n", i + 1, a.rmse, a.events.count,
                a.events.mean_gap.value_or(0.0), a.events.min_gap.value_or(0.0), a.zeno_bound,
                a.zeno_ok ? "ok" : "FAIL");
    if (a.training) {
      std::printf("       training: %zu samples, %d epochs, mse %.4g -> %.4g (%s)\n", a.dataset_size,
                  a.training->epochs, a.training->train_mse.front(), a.training->train_mse.back(),
                  a.training->stop_reason.c_str());
    }
  }
  std::printf("outputs written to %s\n", cfg.output.dir.c_str());
  return 0;
}

int cmd_verify(const CommonOptions& o) {
  const SimConfig cfg = build_config(o);
  if (!cfg.observer.K1) throw ConfigError("verify-gain needs an explicit observer.K1 in the config");
  const GainCertificate g = resolve_gain(cfg);
  print_certificate(g);
  return g.feasible ? 0 : 2;
}

int cmd_synthesize(const CommonOptions& o) {
  const SimConfig cfg = build_config(o);
  const CommGraph graph(cfg.network.adjacency);
  const double k1 = cfg.observer.k2 + cfg.observer.rho * cfg.observer.rho / cfg.observer.delta;
  const GainCertificate g =
      synthesize_gain(laplacian(graph), OutputMap(cfg.network.c).stacked(), k1, cfg.observer.synthesis);
  print_certificate(g);
  return g.feasible ? 0 : 2;
}

int cmd_report(const std::string& trace_path, const std::vector<double>& window) {
  const SimulationTrace trace = read_trace_csv(trace_path);
  std::printf("trace: %s (%zu rows, %zu agents)\nwindow: [%g, %g]\n", trace_path.c_str(), trace.rows(),
              trace.agents, window[0], window[1]);
  std::printf("%-6s %-22s %-8s %-10s %-10s\n", "agent", "rmse", "events", "mean_gap", "min_gap");
  for (std::size_t i = 0; i < trace.agents; ++i) {
    const auto times = event_times_from_trace(trace, i);
    const EventStats s = event_stats(times);
    std::printf("%-6zu %-22.17g %-8zu %-10.5f %-10.5f\n", i + 1, rmse(trace, i, window[0], window[1]), s.count,
                s.mean_gap.value_or(0.0), s.min_gap.value_or(0.0));
  }
  return 0;
}

int cmd_compare(const std::string& baseline_path, const std::string& learning_path) {
  const RunReport a = report_from_json(read_file(baseline_path));
  const RunReport b = report_from_json(read_file(learning_path));
  const auto change = compare_runs(a, b);
  std::printf("RMSE over [%g, %g]\n", a.window[0], a.window[1]);
  std::printf("%-6s %-12s %-12s %-10s\n", "agent", "baseline", "learning", "change");
  for (std::size_t i = 0; i < change.size(); ++i) {
    std::printf("%-6zu %-12.4f %-12.4f %+.2f%%\n", i + 1, a.agents[i].rmse, b.agents[i].rmse, change[i]);
  }
  return 0;
}

void add_common(CLI::App* sub, CommonOptions& o, bool run_flags) {
  sub->add_option("--config", o.config_path, "Config file (JSON); built-in experiment when omitted")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "Seed for data splits");
  sub->add_flag("--allow-infeasible", o.allow_infeasible, "Run even when the gain certificate fails");
  if (run_flags) {
    sub->add_option("--learning", o.learning, "Enable DNN learning (on|off)")
        ->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--out", o.out, "Output directory; overrides config, $DET_OBSERVER_OUT applies when the config sets none");
    sub->add_option("--trace-stride", o.trace_stride, "Keep every k-th step in the trace")
        ->check(CLI::PositiveNumber);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed event-triggered DNN observer"};
  app.require_subcommand(1);

  CommonOptions run_opts, verify_opts, synth_opts;
  auto* run_cmd = app.add_subcommand("run", "Simulate plant and observers, write trace and report");
  add_common(run_cmd, run_opts, true);
  auto* verify_cmd = app.add_subcommand("verify-gain", "Check the configured K1 against the LMI");
  add_common(verify_cmd, verify_opts, false);
  auto* synth_cmd = app.add_subcommand("synthesize-gain", "Search for a feasible diagonal K1");
  add_common(synth_cmd, synth_opts, false);

  std::string trace_path;
  std::vector<double> window{20.0, 40.0};
  auto* report_cmd = app.add_subcommand("report", "Recompute metrics from a stored trace");
  report_cmd->add_option("--trace", trace_path, "Trace CSV")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--window", window, "Metric window start and end")->expected(2);

  std::string baseline_path, learning_path;
  auto* compare_cmd = app.add_subcommand("compare", "Percent RMSE change between two run reports");
  compare_cmd->add_option("baseline", baseline_path, "Baseline report JSON")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("learning", learning_path, "Learning report JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run_opts);
    if (*verify_cmd) return cmd_verify(verify_opts);
    if (*synth_cmd) return cmd_synthesize(synth_opts);
    if (*report_cmd) return cmd_report(trace_path, window);
    if (*compare_cmd) return cmd_compare(baseline_path, learning_path);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
