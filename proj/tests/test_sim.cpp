#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "detobs/graph.hpp"
#include "detobs/sim.hpp"

using namespace detobs;
namespace fs = std::filesystem;

namespace {

SimConfig short_config(bool learning) {
  SimConfig cfg = reference_config();
  cfg.plant.t_final = 4.0;
  cfg.schedule = {1.0, 2.0, 2.5};
  cfg.metric_window = {2.5, 4.0};
  cfg.learning = learning;
  cfg.dnn.lm.max_epochs = 5;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "detobs_test_sim";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("rmse of a constant error is that constant") {
  SimulationTrace tr;
  tr.agents = 1;
  tr.e1_norm.resize(1);
  for (int k = 0; k <= 100; ++k) {
    tr.t.push_back(0.01 * k);
    tr.e1_norm[0].push_back(0.25);
  }
  CHECK(rmse(tr, 0, 0.2, 0.8) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(rmse(tr, 0, 5.0, 6.0), std::invalid_argument);
  CHECK_THROWS_AS(rmse(tr, 1, 0.0, 1.0), std::out_of_range);
}

TEST_CASE("event statistics") {
  std::vector<double> periodic;
  for (int k = 0; k < 200; ++k) periodic.push_back(10 * k * 1e-3);
  const EventStats s = event_stats(periodic);
  CHECK(s.count == 200);
  CHECK(*s.mean_gap == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(*s.min_gap == doctest::Approx(0.01).epsilon(1e-9));

  const std::vector<double> single{3.0};
  const EventStats one = event_stats(single);
  CHECK(one.count == 1);
  CHECK_FALSE(one.mean_gap.has_value());
  CHECK_FALSE(one.min_gap.has_value());
}

TEST_CASE("percent change between runs") {
  RunReport a, b;
  a.agents.resize(3);
  b.agents.resize(3);
  const double base[3] = {0.1827, 0.1775, 0.2070};
  const double learned[3] = {0.0777, 0.0634, 0.0876};
  for (int i = 0; i < 3; ++i) {
    a.agents[i].rmse = base[i];
    b.agents[i].rmse = learned[i];
  }
  const auto c = compare_runs(a, b);
  CHECK(c[0] == doctest::Approx(-57.47).epsilon(1e-4));
  CHECK(c[1] == doctest::Approx(-64.28).epsilon(1e-4));
  CHECK(c[2] == doctest::Approx(-57.68).epsilon(1e-4));
  for (double v : compare_runs(a, a)) CHECK(v == 0.0);

  RunReport other = b;
  other.window = {0.0, 1.0};
  CHECK_THROWS_AS(compare_runs(a, other), ConfigError);
  other = b;
  other.agents.pop_back();
  CHECK_THROWS_AS(compare_runs(a, other), ConfigError);
}

TEST_CASE("exact estimate at an equilibrium stays exact") {
  SimConfig cfg = short_config(false);
  cfg.plant.disturbance = "none";
  cfg.plant.x0 = Vec::Zero(3);
  cfg.dnn.outer_init = Mat::Zero(5, 3);
  const RunResult r = run(cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    for (double e : r.trace.e1_norm[i]) CHECK(e < 1e-12);
    CHECK(r.report.agents[i].events.count == 1);
  }
}

TEST_CASE("trace self-consistency, ZOH and trigger quiescence") {
  const SimConfig cfg = short_config(false);
  const RunResult r = run(cfg);
  const TriggerParams& p = r.report.trigger;
  const CommGraph g(cfg.network.adjacency);
  const Mat big_l = kron(laplacian(g), Mat::Identity(3, 3));
  const std::size_t rows = r.trace.rows();
  REQUIRE(rows == 4001);

  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.trace.event[i][0] == 1);
    Vec held = r.trace.x_hat[i][0];
    for (std::size_t k = 0; k < rows; ++k) {
      CHECK(std::abs(r.trace.e1_norm[i][k] - (r.trace.x_hat[i][k] - r.trace.x0[k]).norm()) <= 1e-12);
      if (r.trace.event[i][k]) held = r.trace.x_hat[i][k];
      if (!(r.trace.x_tilde[i][k] == held)) {
        FAIL("x_tilde changed between events for agent " << i + 1 << " at row " << k);
      }
    }
    // The decision log: fired exactly when lhs ≥ rhs, and lhs reproduces
    // φ1‖x̃ − x̂‖² from the trace on quiet steps.
    const auto& log = r.trigger_log.checks[i];
    REQUIRE(log.size() == rows - 1);
    for (std::size_t k = 0; k + 1 < rows; ++k) {
      CHECK((r.trace.event[i][k + 1] != 0) == log[k].fire());
      if (!r.trace.event[i][k + 1]) {
        CHECK(log[k].lhs < log[k].rhs);
        const double lhs = p.phi1 * (r.trace.x_tilde[i][k + 1] - r.trace.x_hat[i][k + 1]).squaredNorm();
        CHECK(lhs == log[k].lhs);
      }
    }
  }

  // z from the broadcast samples equals −(L⊗I)(e1 + e2) at every row.
  for (std::size_t k = 0; k < rows; k += 97) {
    Vec e12(9), z(9);
    for (std::size_t i = 0; i < 3; ++i) {
      e12.segment(static_cast<Eigen::Index>(3 * i), 3) = r.trace.x_tilde[i][k] - r.trace.x0[k];
      Vec zi = Vec::Zero(3);
      for (std::size_t j : neighbor_set(g, i)) zi += g.weight(i, j) * (r.trace.x_tilde[j][k] - r.trace.x_tilde[i][k]);
      z.segment(static_cast<Eigen::Index>(3 * i), 3) = zi;
    }
    CHECK((z + big_l * e12).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("learning run phases, dataset window and swap") {
  const SimConfig cfg = short_config(true);
  const RunResult r = run(cfg);
  CHECK(r.datasets.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.datasets[i].size() == 1000);
    CHECK(r.report.agents[i].dataset_size == 1000);
    REQUIRE(r.report.agents[i].training.has_value());
    CHECK(r.report.agents[i].training->train_size == 700);
    CHECK(r.report.agents[i].max_w_norm <= 50.0 * (1.0 + 1e-3));
    // The first collected input is the estimate at t = collect_start.
    CHECK(r.datasets[i].inputs.front() == r.trace.x_hat[i][1000]);
    CHECK(r.datasets[i].inputs.back() == r.trace.x_hat[i][1999]);
  }
  CHECK(r.trace.phase[999] == 0);
  CHECK(r.trace.phase[1000] == 1);
  CHECK(r.trace.phase[2000] == 2);
  CHECK(r.trace.phase[2500] == 3);

  // Before the swap the learning run matches the baseline exactly.
  const RunResult base = run(short_config(false));
  for (std::size_t k = 0; k <= 2500; ++k) {
    if (!(base.trace.x_hat[0][k] == r.trace.x_hat[0][k])) {
      FAIL("runs diverge before the swap at row " << k);
    }
  }
  CHECK_FALSE(base.trace.x_hat[0][2600] == r.trace.x_hat[0][2600]);
}

TEST_CASE("finite-difference targets line up with the estimate increments") {
  SimConfig cfg = short_config(true);
  cfg.training.target = "finite_difference";
  const RunResult r = run(cfg);
  const auto& d = r.datasets[2];
  REQUIRE(d.size() == 1000);
  CHECK(d.targets[10] == (r.trace.x_hat[2][1011] - r.trace.x_hat[2][1010]) / cfg.plant.dt);
}

TEST_CASE("runs are deterministic and the trace round-trips") {
  SimConfig cfg = short_config(true);
  const RunResult a = run(cfg);
  const RunResult b = run(cfg);
  const fs::path pa = scratch("a.csv"), pb = scratch("b.csv");
  write_trace_csv(a.trace, pa.string());
  write_trace_csv(b.trace, pb.string());
  CHECK(slurp(pa) == slurp(pb));

  const SimulationTrace back = read_trace_csv(pa.string());
  CHECK(back.rows() == a.trace.rows());
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rmse(back, i, cfg.metric_window[0], cfg.metric_window[1]) == a.report.agents[i].rmse);
    CHECK(event_times_from_trace(back, i) == a.event_times[i]);
  }
  CHECK(slurp(pa).substr(0, trace_csv_header(3, 3).size()) == trace_csv_header(3, 3));
}

TEST_CASE("trace stride keeps every k-th row") {
  SimConfig cfg = short_config(false);
  cfg.output.trace_stride = 10;
  const RunResult r = run(cfg);
  CHECK(r.trace.rows() == 401);
  CHECK(r.trace.t[1] == doctest::Approx(0.01));
}

TEST_CASE("report json round-trip") {
  const RunResult r = run(short_config(true));
  const RunReport back = report_from_json(report_to_json(r.report));
  CHECK(back.learning);
  CHECK(back.gain.K1 == r.report.gain.K1);
  CHECK(back.trigger.phi1 == r.report.trigger.phi1);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.agents[i].rmse == r.report.agents[i].rmse);
    CHECK(back.agents[i].events.mean_gap == r.report.agents[i].events.mean_gap);
    CHECK(back.agents[i].training->train_mse == r.report.agents[i].training->train_mse);
  }
}

TEST_CASE("trace reader rejects a foreign header") {
  const fs::path p = scratch("bad.csv");
  std::ofstream(p) << "t,x,y\n0,1,2\n";
  CHECK_THROWS(read_trace_csv(p.string()));
}

TEST_CASE("infeasible gain is refused unless overridden") {
  SimConfig cfg = short_config(false);
  cfg.plant.t_final = 0.01;
  cfg.metric_window = {0.0, 0.01};
  cfg.observer.K1 = Mat(Mat::Identity(3, 3));
  CHECK_THROWS_AS(run(cfg), ConfigError);
  cfg.output.allow_infeasible = true;
  CHECK_NOTHROW(run(cfg));
}

TEST_CASE("divergence raises with a snapshot") {
  SimConfig cfg = short_config(false);
  cfg.plant.x0 = Vec::Constant(3, 1e6);
  cfg.plant.dt = 0.5;
  cfg.plant.t_final = 50.0;
  cfg.metric_window = {0.0, 50.0};
  try {
    run(cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("x_hat") != std::string::npos);
  }
}
