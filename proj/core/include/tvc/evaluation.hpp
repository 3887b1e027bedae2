#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace tvc {

// Mean squared forecast error over the out-of-sample window.
double ascfe(const Eigen::VectorXd& actuals, const Eigen::VectorXd& forecasts);

// Per-point squared errors, the loss series the tests below consume.
Eigen::VectorXd squared_losses(const Eigen::VectorXd& actuals, const Eigen::VectorXd& forecasts);

enum class TailDirection { less, greater };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string alternative;
  std::string test;
  int lag = 0;          // DM: Bartlett truncation
  int bootstrap = 0;    // RC: replicate count
  double block_q = 0.0; // RC: restart probability
  std::uint64_t seed = 0;
};

std::string test_result_json(const TestResult& result);

// Diebold-Mariano comparison of two aligned loss series. The statistic is
// mean(loss_a - loss_b) standardized by a Bartlett long-run variance with
// truncation floor(n^(1/3)); the p-value is one-sided normal, rejecting for
// evidence of the requested direction (default: a beats b). An identically
// zero differential returns statistic 0, p 0.5; a nonzero-mean differential
// with zero long-run variance has no distribution to test against and throws.
TestResult dm_test(const Eigen::VectorXd& loss_a, const Eigen::VectorXd& loss_b,
                   TailDirection direction = TailDirection::less);

// White's Reality Check: V = max_k sqrt(n) mean(benchmark - candidate_k),
// with the null distribution built from a stationary bootstrap (geometric
// blocks, restart probability q) of the recentered differentials. p is the
// share of bootstrap statistics at or above V, so a degenerate all-zero
// differential yields p = 1. Deterministic for a given seed regardless of
// thread count.
TestResult rc_test(const Eigen::VectorXd& benchmark_loss,
                   const std::vector<Eigen::VectorXd>& candidate_losses,
                   int B = 1000, double q = 0.1, std::uint64_t seed = 0, int threads = 0);

// CSV with columns method, ascfe, sd.
std::string ascfe_table_csv(const std::vector<std::string>& methods,
                            const Eigen::VectorXd& mean_ascfe, const Eigen::VectorXd& sd_ascfe);

}  // namespace tvc
