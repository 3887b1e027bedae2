#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tvc/bandwidth.hpp"
#include "tvc/baselines.hpp"
#include "tvc/kernel.hpp"
#include "tvc/panel.hpp"

namespace tvc {

// Monte Carlo design: a time-varying coefficient target driven by two real
// forecasts (plus J redundant ones when J > 0), with a burn-in of twice the
// sample so the recursion stabilizes. The [0, 1] time-fraction clock spans
// the whole post-burn-in stretch (T + n_oos pairs) and is clamped at zero
// through the burn-in.
struct DgpConfig {
  int T = 200;
  int burn_in = 0;  // 0 means 2 * T
  int n_oos = 50;
  int J = 0;        // redundant forecasts appended after f1, f2
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  bool zero_noise = false;

  void validate() const;
};

struct SimulatedPanel {
  ForecastPanel panel;           // T + n_oos pairs
  Eigen::MatrixXd true_weights;  // (T + n_oos) x 3: intercept, f1, f2 paths
  std::vector<int> relevant;     // forecast indices carrying signal: {1, 2}
};

// Low-dimensional design: y[t+1] = w0(tau) + w1(tau) f1[t] + w2(tau) f2[t] +
// u with w0 = exp(-3 + 2.5 tau), w1 = 0.5 (1.5 tau - 0.8)^3 + 0.5,
// w2 = 0.2 sin(4 tau) + 0.4, f1 = 0.5 + 0.8 y[t] + e1 and
// f2 = 0.5 + 0.3 sin(2 tau + 0.25) y[t] + e2, all shocks standard normal.
SimulatedPanel simulate_lowdim(const DgpConfig& config);

// The coefficient path (w0, w1, w2) at a given time fraction.
Eigen::Vector3d lowdim_weights_at(double tau);

// Same target plus J zero-weight forecasts drawn each period from a joint
// normal with cov(r_j, r_j') = 2 exp(-|j - j'|), independent over time.
SimulatedPanel simulate_highdim(const DgpConfig& config);

// True-process plug-in quantities of the low-dimensional design at unit
// noise (so the error-weighted moments equal the design moments), derived
// from its locally stationary AR(1) representation.
PluginInputs lowdim_plugin_inputs(const Kernel& kernel);

// One replication of the nine-method comparison: pairs [0, T_insample) are
// the estimation sample (bandwidth CV runs once there), later pairs are
// expanding-window forecast origins. Static regressions fit once on the
// estimation sample; adaptive methods refit at every origin using only fully
// observed pairs.
OosForecasts lowdim_oos_forecasts(const ForecastPanel& panel, int T_insample,
                                  const Kernel& kernel, double c1 = 0.5, double c2 = 3.0,
                                  int n_grid = 20);

// One replication of the penalized high-dimensional exercise: refits the
// two-stage pipeline at every origin; exact/included report whether the
// active forecast set equals / covers the relevant set at every origin.
struct HighdimRep {
  Eigen::VectorXd yhat;
  Eigen::VectorXd actuals;
  bool exact = false;
  bool included = false;
};
HighdimRep highdim_oos(const ForecastPanel& panel, int T_insample, const Kernel& kernel);

struct Table1Config {
  int reps = 500;
  std::vector<int> T_list = {200, 300, 500};
  int n_oos = 50;
  std::uint64_t seed = 1;
  double c1 = 0.5;
  double c2 = 3.0;
  int n_grid = 20;
  int threads = 0;
};

struct Table1Result {
  std::vector<int> T_list;
  std::vector<std::string> methods;
  Eigen::MatrixXd mean;  // T_list.size() x methods.size()
  Eigen::MatrixXd sd;
  std::vector<std::string> best;
  int reps = 0;
  int redraws = 0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
};

// Replications run concurrently on counter-based substreams (128 per rep to
// leave room for redraws), so results are identical for any thread count.
// A failed replication is redrawn on its next substream; if more than 1% of
// replications fail the run aborts rather than risk selection bias.
Table1Result run_table1(const Table1Config& config);

struct Table2Config {
  int reps = 200;
  std::vector<int> T_list = {50, 100, 150};
  std::vector<int> J_list = {10, 50, 100};
  int n_oos = 10;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct Table2Result {
  std::vector<int> T_list;
  std::vector<int> J_list;
  Eigen::MatrixXd ascfe_mean;  // T_list.size() x J_list.size()
  Eigen::MatrixXd ascfe_sd;
  Eigen::MatrixXd exact_share;
  Eigen::MatrixXd included_share;
  int reps = 0;
  int redraws = 0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
};

Table2Result run_table2(const Table2Config& config);

// Long-format CSVs: (T, method, ascfe_mean, ascfe_sd) and
// (T, J, ascfe_mean, ascfe_sd, exact_share, included_share).
std::string table1_csv(const Table1Result& result);
std::string table2_csv(const Table2Result& result);

// JSON run manifests: configuration, seed, failure count, wall time.
std::string table1_manifest_json(const Table1Config& config, const Table1Result& result);
std::string table2_manifest_json(const Table2Config& config, const Table2Result& result);

}  // namespace tvc
