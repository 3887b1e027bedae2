#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tvc/kernel.hpp"
#include "tvc/panel.hpp"

namespace tvc {

// Derivative of the SCAD penalty: lambda on [0, lambda], linearly decaying to
// zero on (lambda, a*lambda], zero beyond. Negative x throws.
double scad_derivative(double x, double lambda, double a = 3.7);

// Tuning bundle for the two-stage estimator. lambda2 tracks lambda1 and
// lambda4 tracks lambda3 with unit proportionality; the slope penalty carries
// its explicit h factor inside the solvers.
struct PenaltyConfig {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  double lambda4 = 0.0;
  double a = 3.7;
  double h = 0.0;
  double tolerance = 1e-3;
  int max_sweeps = 1000;
  bool check_objective = false;

  void validate() const;
};

// Per-time Lasso-penalized local linear paths over t = first_index .. T-1
// (the index-0 window is empty, so the path starts at 1). Rows are on the
// scale of the panel they were fit on.
struct Stage1Paths {
  int first_index = 1;
  Eigen::MatrixXd levels;  // (T - first_index) x (p+1)
  Eigen::MatrixXd slopes;

  int rows() const { return static_cast<int>(levels.rows()); }
};

// Solves, for each t, the kernel-weighted Lasso over the synthesized window
// with every coordinate of (alpha0, h*alpha1) except the intercept level
// penalized at lambda1, by cyclic soft-threshold coordinate descent
// warm-started along t. Stops when the sweep's max coefficient change or the
// duality gap drops below tol. Non-convergence throws with t and lambda1.
Stage1Paths stage1_lasso(const ForecastPanel& panel, double h, const Kernel& kernel,
                         double lambda1, double tol = 1e-7, int max_sweeps = 10000);

// Per-column centered l2 norm over time: zero exactly for columns constant
// in t, so it grades how much a coefficient path actually moves.
Eigen::VectorXd smoothness_measure(const Eigen::MatrixXd& stage1_levels);

// Stacked representation of the stage-2 system: one block per time point
// holding that window's response, kernel weights (1/T folded in), regressor
// levels and scaled time offsets, plus per-group diagonal Grams. The group
// design blocks are orthonormal under the kernel inner product after scaling
// each time entry by the inverse square root of its Gram entry.
struct GcdWorkspace {
  int T = 0;
  int p1 = 0;          // forecast columns + intercept
  int first_index = 1; // 0-based time of the first block
  int floor_th = 0;
  double h = 0.0;
  KernelKind kernel = KernelKind::epanechnikov;
  std::vector<int> offsets;  // n_blocks()+1 row offsets into the stacked arrays
  Eigen::VectorXd ybar;      // stacked response
  Eigen::VectorXd kw;        // stacked kernel weights k_st / T
  Eigen::VectorXd u;         // stacked scaled offsets (s-t)/(T h)
  Eigen::MatrixXd X;         // stacked regressor levels, rows() x p1
  Eigen::MatrixXd g0, g1;    // n_blocks() x p1 group Gram diagonals
  Eigen::MatrixXd isg0, isg1;

  int n_blocks() const { return static_cast<int>(g0.rows()); }
  int rows() const { return static_cast<int>(ybar.size()); }
};

// Builds the stacked system and the per-group scalings. A group whose Gram
// diagonal vanishes at some time (regressor identically zero on that window)
// cannot be orthogonalized and throws degenerate-group with (column, t).
GcdWorkspace orthogonalize_groups(const ForecastPanel& panel, double h, const Kernel& kernel);

// Two-stage output. All paths share first_index; stage-2 columns outside
// active_set are exactly zero. stage1_norm and smoothness are recorded on the
// scale of the fitting problem (standardized inside fit_two_stage), since
// they are the SCAD weight inputs.
struct StagedPaths {
  int first_index = 1;
  double h = 0.0;
  double lambda1 = 0.0;
  double lambda3 = 0.0;
  Eigen::MatrixXd stage1;
  Eigen::MatrixXd stage1_slope;
  Eigen::VectorXd stage1_norm;
  Eigen::VectorXd smoothness;
  Eigen::MatrixXd stage2;
  Eigen::MatrixXd stage2_slope;
  std::vector<int> active_set;  // 0 = intercept, j >= 1 = forecast column j
  Eigen::VectorXd lambda3_grid;
  Eigen::VectorXd bic_curve;
  int sweeps = 0;
  bool exact_fit = false;

  int rows() const { return static_cast<int>(stage2.rows()); }
};

// Group coordinate descent over whole coefficient paths: level groups take
// threshold scad_derivative(||stage1 level column||, lambda3), slope groups
// h * scad_derivative(smoothness, lambda4), both fixed at the stage-1
// estimates. Updates are exact groupwise minimizers in the orthogonalized
// coordinates, so the penalized objective never increases (checked each sweep
// when config.check_objective). Initialized from stage 1; stops when the max
// coefficient change over a sweep drops below config.tolerance; hitting
// max_sweeps throws with the last max change. Output stays on the scale of
// the workspace panel.
StagedPaths stage2_gscad(const GcdWorkspace& workspace, const Stage1Paths& stage1,
                         const PenaltyConfig& config);

// log(SSR) + log(p_T) * active_count * log(floor_th) / floor_th. An exact fit
// (SSR = 0) returns -infinity so it wins any comparison; callers flag it.
double bic_score(double ssr, double active_count, double p_T, double floor_th);

// Mean squared in-sample one-step error of a level path: the t-th row
// predicts y[t+1] from (1, F.row(t)). Rows with t < from_t are excluded
// (unless that empties the set); rows whose window is left-truncated have
// too few distinct sources to pin their coefficients.
double bic_ssr(const ForecastPanel& panel, const Eigen::MatrixXd& levels, int first_index,
               int from_t = 0);

// Stage-1 penalty selection by K-fold CV with contiguous blocks of time
// points: each held-out t is refit without any window row whose source pair
// falls in the held-out block, and scored on its own squared one-step error.
// The grid runs n_grid log-spaced points down from the smallest lambda that
// zeroes every coordinate at every t; ties pick the larger (sparser) lambda.
struct Lambda1Cv {
  Eigen::VectorXd grid;    // descending
  Eigen::VectorXd scores;
  double lambda1 = 0.0;
};
Lambda1Cv select_lambda1(const ForecastPanel& panel, double h, const Kernel& kernel,
                         int n_folds = 10, int n_grid = 8);

// Full pipeline: standardize; pick lambda1 by K-fold CV; stage 1; group
// workspace; solve stage 2 from the stage-1 estimates at each point of a
// descending lambda3 grid (default: 20 log-spaced points starting just below
// the largest group death threshold), scoring each by BIC with the active
// forecast count; destandardize the winner back to the original scale.
// Bandwidth is min(C * (log(p+1)/T)^(1/5), (T-1)/T).
StagedPaths fit_two_stage(const ForecastPanel& panel,
                          const Eigen::VectorXd& lambda3_grid = Eigen::VectorXd(),
                          double C_bandwidth = 1.0,
                          const Kernel& kernel = Kernel::epanechnikov());

// Combined forecast from the last stage-2 row: levels(0) + levels(1..) . f_new.
double staged_forecast(const StagedPaths& paths, const Eigen::VectorXd& f_new);

// CSV rows t, beta_0.., slope_0.. of the stage-2 paths (1-based t).
std::string staged_paths_csv(const StagedPaths& paths);
// JSON with h, penalties, active set, BIC curve and both stages' paths.
std::string staged_paths_json(const StagedPaths& paths);

}  // namespace tvc
