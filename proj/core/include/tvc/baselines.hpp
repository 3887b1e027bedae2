#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tvc/panel.hpp"

namespace tvc {

// Closed set of competing combination schemes. The TV-prefixed tags are the
// adaptive (expanding-window) versions of the corresponding static
// regressions.
enum class CombinerKind {
  BG,
  GRregconst,
  GRreg,
  GRregconstr,
  TVGRregconst,
  TVGRreg,
  TVGRregconstr,
  EQ,
  HistAvg,
  ARMA11,
};

const char* combiner_name(CombinerKind kind);
CombinerKind combiner_from_name(const std::string& name);

// Aligned out-of-sample record: one row per forecast origin, one yhat column
// per method.
struct OosForecasts {
  std::vector<int> horizon_index;       // 1-based target time of each row
  std::vector<std::string> methods;
  Eigen::MatrixXd yhat;                 // n_oos x methods
  Eigen::VectorXd actuals;              // n_oos
};

// CSV with columns t, actual, then one column per method.
std::string oos_forecasts_csv(const OosForecasts& oos);

// Inverse-MSE weights from the first t pairs: w_i proportional to
// 1 / mean((y[l+1] - f_i[l])^2, l < t). A perfect forecaster (zero error)
// takes the whole weight, split equally if several are perfect. Weights are
// nonnegative and sum to one; no intercept.
Eigen::VectorXd bg_weights(const ForecastPanel& panel, int t);

enum class GrVariant { with_const, no_const, constrained };

// Least-squares combination weights over all pairs of the given panel,
// returned as a (p+1)-vector with the intercept in slot 0 (zero for the
// variants without one). The constrained variant imposes a unit sum on the
// forecast weights by substituting out the last one and regressing the
// residual target on forecast differences. Rank-deficient designs throw.
Eigen::VectorXd gr_weights(const ForecastPanel& panel, GrVariant variant);

// w(0) + w(1..p) . f_new for a weight vector in the gr_weights layout.
double combine_forecast(const Eigen::VectorXd& weights, const Eigen::VectorXd& f_new);

// Arithmetic mean of the candidate forecasts.
double equal_weights_forecast(const Eigen::VectorXd& f_new);

// Mean of the first t-1 observed targets (t is 1-based and must be >= 2).
double historical_average(const Eigen::VectorXd& y, int t);

struct Arma11Fit {
  double c = 0.0;
  double phi = 0.0;
  double theta = 0.0;
  double forecast = 0.0;
  double css = 0.0;
  int iterations = 0;
};

// Conditional-sum-of-squares fit of y[t] = c + phi y[t-1] + theta e[t-1] +
// e[t] with e[0] = 0, minimized by a Nelder-Mead simplex over a smooth
// reparameterization keeping |phi|, |theta| < 0.999. Needs at least 10
// observations; failure to converge throws.
Arma11Fit arma11_fit(const Eigen::VectorXd& y);

// One-step forecast c + phi y[n-1] + theta e[n-1] from a fresh fit.
double arma11_forecast(const Eigen::VectorXd& y);

}  // namespace tvc
