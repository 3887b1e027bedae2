#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tvc {

// Aligned forecast-combination panel: y holds T+1 target observations, F holds
// T rows of candidate forecasts, and row t of F (0-based) predicts y[t+1].
struct ForecastPanel {
  Eigen::VectorXd y;               // length T+1
  Eigen::MatrixXd F;               // T x p
  std::vector<std::string> names;  // p forecast column names

  int T() const { return static_cast<int>(F.rows()); }
  int p() const { return static_cast<int>(F.cols()); }

  // Throws on shape mismatch, non-finite entries, p < 1 or T < 2.
  void validate() const;

  // Panel restricted to the first n_pairs forecast/target pairs.
  ForecastPanel prefix(int n_pairs) const;
};

ForecastPanel make_panel(Eigen::VectorXd y, Eigen::MatrixXd F,
                         std::vector<std::string> names = {});

// Reads a numeric CSV and builds the panel: `target` names the y column, every
// other column is a forecast. Row t pairs f_t with y_{t+1}; the final row's
// forecasts have no observed target and are dropped from F.
ForecastPanel load_csv(const std::string& path, const std::string& target);

// As load_csv, but also returns the dropped final forecast row (the natural
// input to a one-step-ahead forecast of the next unobserved target).
struct LoadedPanel {
  ForecastPanel panel;
  Eigen::VectorXd next_forecasts;  // forecasts from the file's last row
};
LoadedPanel load_csv_with_tail(const std::string& path, const std::string& target);

// Column means and standard deviations (1/(N-1) divisor) for y over all T+1
// observations and each forecast column over its T rows.
struct Standardizer {
  double y_mean = 0.0;
  double y_sd = 1.0;
  Eigen::VectorXd f_mean;  // p
  Eigen::VectorXd f_sd;    // p
};

Standardizer fit_standardizer(const ForecastPanel& panel);
ForecastPanel standardize(const ForecastPanel& panel, const Standardizer& s);
ForecastPanel destandardize(const ForecastPanel& panel, const Standardizer& s);

// Maps combination weights fitted on standardized data back to the original
// scale so that predictions are invariant. Rows are time points; column 0 is
// the intercept, column j >= 1 multiplies forecast j.
Eigen::MatrixXd destandardize_levels(const Eigen::MatrixXd& levels, const Standardizer& s);
// Same map for the per-time derivative (slope) paths; no mean shift enters the
// non-intercept columns and the intercept slope picks up only the -sum of the
// mapped slopes times forecast means.
Eigen::MatrixXd destandardize_slopes(const Eigen::MatrixXd& slopes, const Standardizer& s);

std::string panel_to_json(const ForecastPanel& panel);
ForecastPanel panel_from_json(const std::string& text);

}  // namespace tvc
