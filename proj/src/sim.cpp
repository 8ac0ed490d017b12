#include "detobs/sim.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "detobs/graph.hpp"
#include "detobs/integrator.hpp"
#include "detobs/plant.hpp"

namespace detobs {

namespace {

long long step_index(double time, double dt) { return std::llround(time / dt); }

struct StepWindow {
  long long collect_start = 0;
  long long collect_end = 0;
  long long train_end = 0;
};

StepWindow to_steps(const PhaseSchedule& s, double dt) {
  return {step_index(s.collect_start, dt), step_index(s.collect_end, dt), step_index(s.train_end, dt)};
}

Phase phase_at(long long k, const StepWindow& w, bool learning) {
  if (!learning || k < w.collect_start) return Phase::baseline;
  if (k < w.collect_end) return Phase::collect;
  if (k < w.train_end) return Phase::train;
  return Phase::deployed;
}

std::string format_vec(const Vec& v) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
  os << ']';
  return os.str();
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

GainCertificate resolve_gain(const SimConfig& cfg) {
  const CommGraph graph(cfg.network.adjacency);
  const Mat lap = laplacian(graph);
  const Mat c = OutputMap(cfg.network.c).stacked();
  const double k1 = cfg.observer.k2 + cfg.observer.rho * cfg.observer.rho / cfg.observer.delta;
  if (cfg.observer.K1) return verify_gain(lap, c, *cfg.observer.K1, k1);
  return synthesize_gain(lap, c, k1, cfg.observer.synthesis);
}

RunResult run(const SimConfig& cfg) {
  cfg.validate();
  const auto wall_start = std::chrono::steady_clock::now();

  const std::size_t agents = cfg.agents();
  const auto n = static_cast<Eigen::Index>(cfg.state_dim());
  const double dt = cfg.plant.dt;
  const long long steps = step_index(cfg.plant.t_final, dt);

  const CommGraph graph(cfg.network.adjacency);
  const Mat lap = laplacian(graph);
  const OutputMap outputs(cfg.network.c);
  const PlantModel plant = vanderpol_model(cfg.plant.mu, cfg.plant.disturbance == "sinusoidal");

  RunResult result;
  RunReport& report = result.report;
  report.learning = cfg.learning;
  report.seed = cfg.seed;
  report.window = cfg.metric_window;
  report.dt = dt;
  report.gain = resolve_gain(cfg);
  if (!report.gain.feasible && !cfg.output.allow_infeasible) {
    throw ConfigError("gain K1 is infeasible for k1 = " + std::to_string(report.gain.k1) +
                      " (min eigenvalue " + std::to_string(report.gain.lmi_min_eig) +
                      "); pass --allow-infeasible to run anyway");
  }
  const Mat K1 = report.gain.K1;
  report.trigger = make_trigger_params(cfg.observer.k2, cfg.observer.kappa, cfg.observer.rho,
                                       cfg.observer.delta, cfg.observer.epsilon, lap, K1);
  const TriggerParams& trig = report.trigger;

  const DeepNet initial_net = make_inner_net(cfg.state_dim(), cfg.dnn.widths, cfg.dnn.init);
  std::vector<AgentObserver> observers;
  observers.reserve(agents);
  for (std::size_t i = 0; i < agents; ++i) {
    observers.emplace_back(i, graph, cfg.network.c[i], initial_net,
                           OuterWeights{cfg.dnn.outer_init, cfg.observer.omega_bar}, cfg.observer.gamma,
                           cfg.network.x_hat0[i], cfg.observer.band_fraction);
  }
  const auto L = cfg.dnn.outer_init.rows();
  const Eigen::Index block = n + L * n;

  std::vector<StepWindow> windows;
  for (std::size_t i = 0; i < agents; ++i) windows.push_back(to_steps(cfg.schedule_for(i), dt));
  const StepWindow global_window = to_steps(cfg.schedule, dt);

  std::vector<TrainingDataset> datasets(agents);
  for (auto& d : datasets) {
    d.train_fraction = cfg.training.train_fraction;
    d.validation_fraction = cfg.training.validation_fraction;
    d.test_fraction = cfg.training.test_fraction;
  }
  std::vector<std::optional<DeepNet>> pending(agents);
  report.agents.resize(agents);
  const bool finite_difference = cfg.training.target == "finite_difference";

  // Trace storage.
  SimulationTrace& trace = result.trace;
  trace.agents = agents;
  trace.state_dim = cfg.state_dim();
  trace.dt = dt * static_cast<double>(cfg.output.trace_stride);
  trace.x_hat.resize(agents);
  trace.x_tilde.resize(agents);
  trace.e1_norm.resize(agents);
  trace.w_norm.resize(agents);
  trace.event.resize(agents);
  result.trigger_log.checks.assign(agents, {});
  for (auto& c : result.trigger_log.checks) c.reserve(static_cast<std::size_t>(steps));

  Vec x0 = cfg.plant.x0;
  std::vector<std::uint8_t> fired(agents, 0);

  auto record = [&](long long k) {
    if (k % static_cast<long long>(cfg.output.trace_stride) != 0) return;
    trace.t.push_back(static_cast<double>(k) * dt);
    trace.x0.push_back(x0);
    for (std::size_t i = 0; i < agents; ++i) {
      const AgentObserver& o = observers[i];
      trace.x_hat[i].push_back(o.x_hat());
      trace.x_tilde[i].push_back(o.x_tilde_self());
      trace.e1_norm[i].push_back((o.x_hat() - x0).norm());
      trace.w_norm[i].push_back(o.outer().w_hat.norm());
      trace.event[i].push_back(fired[i]);
    }
    trace.phase.push_back(static_cast<int>(phase_at(k, global_window, cfg.learning)));
  };

  auto broadcast_all = [&](const std::vector<std::size_t>& senders, double t) {
    std::vector<BroadcastMessage> messages;
    for (std::size_t i : senders) messages.push_back(observers[i].fire_event(t));
    for (const BroadcastMessage& msg : messages) {
      for (const auto& [j, a] : observers[msg.sender].neighbors()) observers[j].receive(msg);
    }
  };

  // Every agent broadcasts at t = 0 so all neighbor tables are populated.
  {
    std::vector<std::size_t> everyone(agents);
    for (std::size_t i = 0; i < agents; ++i) everyone[i] = i;
    broadcast_all(everyone, 0.0);
    std::fill(fired.begin(), fired.end(), 1);
    record(0);
  }

  auto pack = [&]() {
    Vec y(n + static_cast<Eigen::Index>(agents) * block);
    y.head(n) = x0;
    for (std::size_t i = 0; i < agents; ++i) {
      const auto base = n + static_cast<Eigen::Index>(i) * block;
      y.segment(base, n) = observers[i].x_hat();
      y.segment(base + n, L * n) = observers[i].outer().w_hat.reshaped();
    }
    return y;
  };

  const auto joint_rhs = [&](double t, const Vec& y) {
    Vec dy(y.size());
    const Vec plant_state = y.head(n);
    dy.head(n) = plant.rate(t, plant_state);
    for (std::size_t i = 0; i < agents; ++i) {
      const auto base = n + static_cast<Eigen::Index>(i) * block;
      const Vec xh = y.segment(base, n);
      const Mat wh = y.segment(base + n, L * n).reshaped(L, n);
      const auto rates = observers[i].rates_at(xh, wh, outputs.block(i) * plant_state, K1);
      dy.segment(base, n) = rates.x_hat_dot;
      dy.segment(base + n, L * n) = rates.w_hat_dot.reshaped();
    }
    return dy;
  };

  std::vector<double> e2_max(agents, 0.0);

  for (long long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;

    if (cfg.learning) {
      for (std::size_t i = 0; i < agents; ++i) {
        if (k >= windows[i].collect_start && k < windows[i].collect_end) {
          datasets[i].inputs.push_back(observers[i].x_hat());
          if (!finite_difference) {
            datasets[i].targets.push_back(observers[i].rhs(outputs.block(i) * x0, K1));
          }
        }
      }
    }

    const Vec next = fixed_step(cfg.plant.integrator, joint_rhs, t, pack(), dt);
    const double t_next = static_cast<double>(k + 1) * dt;
    if (!next.allFinite()) {
      std::ostringstream os;
      os << "state diverged at t=" << t_next << "; last finite x0=" << format_vec(x0);
      for (std::size_t i = 0; i < agents; ++i) {
        os << "; agent " << i + 1 << " x_hat=" << format_vec(observers[i].x_hat())
           << " |W|=" << observers[i].outer().w_hat.norm();
      }
      throw DivergenceError(os.str());
    }
    const Vec prev_x0 = x0;
    x0 = next.head(n);
    for (std::size_t i = 0; i < agents; ++i) {
      const auto base = n + static_cast<Eigen::Index>(i) * block;
      const Vec prev_xhat = observers[i].x_hat();
      observers[i].set_state(next.segment(base, n), next.segment(base + n, L * n).reshaped(L, n));
      if (cfg.learning && finite_difference && k >= windows[i].collect_start && k < windows[i].collect_end) {
        datasets[i].targets.push_back((observers[i].x_hat() - prev_xhat) / dt);
      }
    }

    // Offline training on the frozen snapshot, then the swap at train_end.
    if (cfg.learning) {
      for (std::size_t i = 0; i < agents; ++i) {
        if (k + 1 == windows[i].collect_end) {
          LMConfig lm = cfg.dnn.lm;
          lm.seed = cfg.seed + i;
          const DeepNet start = cfg.dnn.warm_start ? observers[i].inner() : initial_net;
          TrainingResult trained = lm_train(start, observers[i].outer(), datasets[i], lm);
          report.agents[i].training = std::move(trained.report);
          report.agents[i].dataset_size = datasets[i].size();
          pending[i] = std::move(trained.net);
        }
        if (k + 1 == windows[i].train_end && pending[i]) {
          observers[i].swap_inner(std::move(*pending[i]), t_next);
          pending[i].reset();
        }
      }
    }

    // Decide on pre-broadcast samples, then deliver all fires together.
    std::vector<std::size_t> senders;
    for (std::size_t i = 0; i < agents; ++i) {
      const Vec y = outputs.block(i) * x0;
      const AgentObserver& o = observers[i];
      const double bound = o.e2_rate_bound(y, K1);
      e2_max[i] = std::max(e2_max[i], bound);
      const TriggerCheck check = o.trigger_check(trig, agents);
      result.trigger_log.checks[i].push_back(check);
      fired[i] = check.fire() ? 1 : 0;
      if (fired[i]) senders.push_back(i);
    }
    broadcast_all(senders, t_next);
    record(k + 1);
  }

  for (std::size_t i = 0; i < agents; ++i) {
    AgentReport& ar = report.agents[i];
    ar.rmse = rmse(trace, i, cfg.metric_window[0], cfg.metric_window[1]);
    ar.events = event_stats(observers[i].event_log());
    ar.e2_max = e2_max[i];
    // An estimate that never moves has no finite dwell bound.
    ar.zeno_bound = e2_max[i] > 0.0 ? zeno_lower_bound(e2_max[i], trig.epsilon, agents, trig.phi1)
                                    : std::numeric_limits<double>::infinity();
    ar.zeno_ok = !ar.events.min_gap || *ar.events.min_gap >= ar.zeno_bound - dt;
    ar.max_w_norm = *std::max_element(trace.w_norm[i].begin(), trace.w_norm[i].end());
    if (!cfg.learning) ar.dataset_size = 0;
    result.event_times.push_back(observers[i].event_log());
    result.final_nets.push_back(observers[i].inner());
  }
  if (cfg.learning) result.datasets = std::move(datasets);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return result;
}

double rmse(const SimulationTrace& trace, std::size_t agent, double t_a, double t_b) {
  if (agent >= trace.agents) throw std::out_of_range("rmse: agent index out of range");
  const double tol = 1e-9;
  double sum = 0.0;
  std::size_t count = 0;
  const auto& e = trace.e1_norm[agent];
  for (std::size_t r = 0; r < trace.rows(); ++r) {
    if (trace.t[r] >= t_a - tol && trace.t[r] <= t_b + tol) {
      sum += e[r] * e[r];
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("rmse: window contains no grid points");
  return std::sqrt(sum / static_cast<double>(count));
}

EventStats event_stats(std::span<const double> event_times) {
  EventStats s;
  s.count = event_times.size();
  if (s.count < 2) return s;
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < event_times.size(); ++k) {
    min_gap = std::min(min_gap, event_times[k] - event_times[k - 1]);
  }
  s.mean_gap = (event_times.back() - event_times.front()) / static_cast<double>(s.count - 1);
  s.min_gap = min_gap;
  return s;
}

std::vector<double> event_times_from_trace(const SimulationTrace& trace, std::size_t agent) {
  std::vector<double> out;
  for (std::size_t r = 0; r < trace.rows(); ++r) {
    if (trace.event.at(agent)[r]) out.push_back(trace.t[r]);
  }
  return out;
}

std::vector<double> compare_runs(const RunReport& a, const RunReport& b) {
  if (a.agents.size() != b.agents.size()) throw ConfigError("compare: runs have different agent counts");
  if (a.window != b.window) throw ConfigError("compare: runs use different metric windows");
  std::vector<double> out;
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    out.push_back(100.0 * (b.agents[i].rmse - a.agents[i].rmse) / a.agents[i].rmse);
  }
  return out;
}

std::string trace_csv_header(std::size_t agents, std::size_t state_dim) {
  std::string h = "t";
  for (std::size_t k = 0; k < state_dim; ++k) h += ",x0_" + std::to_string(k + 1);
  for (std::size_t i = 0; i < agents; ++i)
    for (std::size_t k = 0; k < state_dim; ++k) h += ",xhat_" + std::to_string(i + 1) + "_" + std::to_string(k + 1);
  for (std::size_t i = 0; i < agents; ++i) h += ",e1norm_" + std::to_string(i + 1);
  for (std::size_t i = 0; i < agents; ++i) h += ",event_" + std::to_string(i + 1);
  h += ",phase";
  return h;
}

void write_trace_csv(const SimulationTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file '" + path + "'");
  out << trace_csv_header(trace.agents, trace.state_dim) << '\n';
  std::string line;
  for (std::size_t r = 0; r < trace.rows(); ++r) {
    line.clear();
    append_double(line, trace.t[r]);
    for (Eigen::Index k = 0; k < trace.x0[r].size(); ++k) {
      line += ',';
      append_double(line, trace.x0[r](k));
    }
    for (std::size_t i = 0; i < trace.agents; ++i) {
      for (Eigen::Index k = 0; k < trace.x_hat[i][r].size(); ++k) {
        line += ',';
        append_double(line, trace.x_hat[i][r](k));
      }
    }
    for (std::size_t i = 0; i < trace.agents; ++i) {
      line += ',';
      append_double(line, trace.e1_norm[i][r]);
    }
    for (std::size_t i = 0; i < trace.agents; ++i) line += trace.event[i][r] ? ",1" : ",0";
    line += ',';
    line += std::to_string(trace.phase[r]);
    out << line << '\n';
  }
}

SimulationTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read trace file '" + path + "'");
  std::string header;
  std::getline(in, header);
  std::vector<std::string> columns;
  {
    std::stringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ',')) columns.push_back(col);
  }
  std::size_t state_dim = 0, agents = 0;
  for (const auto& c : columns) {
    if (c.rfind("x0_", 0) == 0) ++state_dim;
    if (c.rfind("e1norm_", 0) == 0) ++agents;
  }
  if (state_dim == 0 || agents == 0 || columns.size() != 1 + state_dim + agents * state_dim + 2 * agents + 1 ||
      columns.front() != "t" || columns.back() != "phase" || header != trace_csv_header(agents, state_dim)) {
    throw std::runtime_error("trace file '" + path + "' does not match the trace column contract");
  }

  SimulationTrace trace;
  trace.agents = agents;
  trace.state_dim = state_dim;
  trace.x_hat.resize(agents);
  trace.e1_norm.resize(agents);
  trace.event.resize(agents);
  std::string line;
  std::vector<double> values(columns.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto res = std::from_chars(p, end, values[c]);
      if (res.ec != std::errc()) {
        throw std::runtime_error("trace parse error at line " + std::to_string(line_no));
      }
      p = res.ptr;
      if (c + 1 < columns.size()) {
        if (p == end || *p != ',') throw std::runtime_error("trace parse error at line " + std::to_string(line_no));
        ++p;
      }
    }
    std::size_t c = 0;
    trace.t.push_back(values[c++]);
    Vec x0(static_cast<Eigen::Index>(state_dim));
    for (std::size_t k = 0; k < state_dim; ++k) x0(static_cast<Eigen::Index>(k)) = values[c++];
    trace.x0.push_back(x0);
    for (std::size_t i = 0; i < agents; ++i) {
      Vec xh(static_cast<Eigen::Index>(state_dim));
      for (std::size_t k = 0; k < state_dim; ++k) xh(static_cast<Eigen::Index>(k)) = values[c++];
      trace.x_hat[i].push_back(xh);
    }
    for (std::size_t i = 0; i < agents; ++i) trace.e1_norm[i].push_back(values[c++]);
    for (std::size_t i = 0; i < agents; ++i) trace.event[i].push_back(values[c++] != 0.0 ? 1 : 0);
    trace.phase.push_back(static_cast<int>(values[c++]));
  }
  if (trace.rows() >= 2) trace.dt = trace.t[1] - trace.t[0];
  return trace;
}

namespace {

nlohmann::json training_to_json(const TrainingReport& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps) {
    steps.push_back({{"epoch", s.epoch},
                     {"damping", s.damping},
                     {"mse_before", s.mse_before},
                     {"mse_after", std::isfinite(s.mse_after) ? nlohmann::json(s.mse_after) : nlohmann::json(nullptr)},
                     {"accepted", s.accepted}});
  }
  return {{"epochs", t.epochs},
          {"stop_reason", t.stop_reason},
          {"train_mse", t.train_mse},
          {"validation_mse", t.validation_mse},
          {"test_mse", t.test_mse},
          {"train_size", t.train_size},
          {"validation_size", t.validation_size},
          {"test_size", t.test_size},
          {"steps", steps}};
}

TrainingReport training_from_json(const nlohmann::json& j) {
  TrainingReport t;
  t.epochs = j.at("epochs").get<int>();
  t.stop_reason = j.at("stop_reason").get<std::string>();
  t.train_mse = j.at("train_mse").get<std::vector<double>>();
  t.validation_mse = j.at("validation_mse").get<std::vector<double>>();
  t.test_mse = j.at("test_mse").get<double>();
  t.train_size = j.at("train_size").get<std::size_t>();
  t.validation_size = j.at("validation_size").get<std::size_t>();
  t.test_size = j.at("test_size").get<std::size_t>();
  for (const auto& s : j.at("steps")) {
    LMStepRecord r;
    r.epoch = s.at("epoch").get<int>();
    r.damping = s.at("damping").get<double>();
    r.mse_before = s.at("mse_before").get<double>();
    r.mse_after = s.at("mse_after").is_null() ? std::numeric_limits<double>::infinity() : s.at("mse_after").get<double>();
    r.accepted = s.at("accepted").get<bool>();
    t.steps.push_back(r);
  }
  return t;
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string report_to_json(const RunReport& report, int indent) {
  nlohmann::json j;
  j["format"] = "detobs-report-v1";
  j["learning"] = report.learning;
  j["seed"] = report.seed;
  j["window"] = {report.window[0], report.window[1]};
  j["dt"] = report.dt;
  j["wall_seconds"] = report.wall_seconds;
  nlohmann::json k1_rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < report.gain.K1.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < report.gain.K1.cols(); ++c) row.push_back(report.gain.K1(r, c));
    k1_rows.push_back(row);
  }
  j["gain"] = {{"K1", k1_rows},
               {"k1", report.gain.k1},
               {"lmi_min_eig", report.gain.lmi_min_eig},
               {"feasible", report.gain.feasible}};
  const TriggerParams& tp = report.trigger;
  j["trigger"] = {{"k2", tp.k2},       {"kappa", tp.kappa}, {"rho", tp.rho},     {"delta", tp.delta},
                  {"epsilon", tp.epsilon}, {"k1", tp.k1()}, {"alpha", tp.alpha()}, {"phi1", tp.phi1},
                  {"phi2", tp.phi2}};
  nlohmann::json agents = nlohmann::json::array();
  for (std::size_t i = 0; i < report.agents.size(); ++i) {
    const AgentReport& a = report.agents[i];
    nlohmann::json aj = {{"agent", i + 1},
                         {"rmse", a.rmse},
                         {"events",
                          {{"count", a.events.count},
                           {"mean_gap", optional_json(a.events.mean_gap)},
                           {"min_gap", optional_json(a.events.min_gap)}}},
                         {"e2_max", a.e2_max},
                         {"zeno_bound", finite_or_null(a.zeno_bound)},
                         {"zeno_ok", a.zeno_ok},
                         {"max_w_norm", a.max_w_norm},
                         {"dataset_size", a.dataset_size}};
    aj["training"] = a.training ? training_to_json(*a.training) : nlohmann::json(nullptr);
    agents.push_back(std::move(aj));
  }
  j["agents"] = agents;
  return j.dump(indent);
}

RunReport report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RunReport r;
  r.learning = j.at("learning").get<bool>();
  r.seed = j.at("seed").get<std::uint64_t>();
  const auto w = j.at("window").get<std::vector<double>>();
  if (w.size() != 2) throw ConfigError("report window must have two entries");
  r.window = {w[0], w[1]};
  r.dt = j.at("dt").get<double>();
  r.wall_seconds = j.value("wall_seconds", 0.0);
  const auto& g = j.at("gain");
  const auto rows = g.at("K1").get<std::vector<std::vector<double>>>();
  r.gain.K1 = Mat::Zero(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < rows[a].size(); ++b) r.gain.K1(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = rows[a][b];
  r.gain.k1 = g.at("k1").get<double>();
  r.gain.lmi_min_eig = g.at("lmi_min_eig").get<double>();
  r.gain.feasible = g.at("feasible").get<bool>();
  const auto& tp = j.at("trigger");
  r.trigger = TriggerParams{tp.at("k2").get<double>(), tp.at("kappa").get<double>(), tp.at("rho").get<double>(),
                            tp.at("delta").get<double>(), tp.at("epsilon").get<double>(), tp.at("phi1").get<double>(),
                            tp.at("phi2").get<double>()};
  for (const auto& aj : j.at("agents")) {
    AgentReport a;
    a.rmse = aj.at("rmse").get<double>();
    a.events.count = aj.at("events").at("count").get<std::size_t>();
    a.events.mean_gap = optional_from(aj.at("events").at("mean_gap"));
    a.events.min_gap = optional_from(aj.at("events").at("min_gap"));
    a.e2_max = aj.at("e2_max").get<double>();
    a.zeno_bound = aj.at("zeno_bound").is_null() ? std::numeric_limits<double>::infinity()
                                                 : aj.at("zeno_bound").get<double>();
    a.zeno_ok = aj.at("zeno_ok").get<bool>();
    a.max_w_norm = aj.at("max_w_norm").get<double>();
    a.dataset_size = aj.at("dataset_size").get<std::size_t>();
    if (!aj.at("training").is_null()) a.training = training_from_json(aj.at("training"));
    r.agents.push_back(std::move(a));
  }
  return r;
}

void write_event_log_csv(const std::vector<std::vector<double>>& event_times, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write event log '" + path + "'");
  out << "agent,event_index,time\n";
  std::string line;
  for (std::size_t i = 0; i < event_times.size(); ++i) {
    for (std::size_t k = 0; k < event_times[i].size(); ++k) {
      line = std::to_string(i + 1) + ',' + std::to_string(k) + ',';
      append_double(line, event_times[i][k]);
      out << line << '\n';
    }
  }
}

}  // namespace detobs
