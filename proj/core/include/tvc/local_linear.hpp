#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tvc/kernel.hpp"
#include "tvc/panel.hpp"

namespace tvc {

// One window position: pseudo time index s (may exceed the last pair index at
// the sample edge) and the real pair it draws its data from. All indices are
// 0-based; the pair at f_src predicts y[y_src] with y_src = f_src + 1.
struct WindowEntry {
  int s;
  int y_src;
  int f_src;
};

// Local window around t used by the one-step-ahead estimator. Positions
// s < t carry real pairs; positions s > t carry pseudo pairs mirrored around t
// (source 2t - s), which supplies the future side that a predictive design
// never observes. Only positions whose mirrored source exists are emitted, so
// the window is the min(floor_th, t) available pairs, each appearing once per
// side; s = t itself is always excluded (its target is the value being
// forecast). floor_th < 1 or t outside [0, T) throws.
std::vector<WindowEntry> synthesized_window(int t, int T, int floor_th);

struct LocalFit {
  Eigen::VectorXd gamma;  // 2(p+1): levels then slopes
  int t = 0;
  double h = 0.0;
  double cond_estimate = 0.0;

  Eigen::VectorXd levels() const { return gamma.head(gamma.size() / 2); }
  Eigen::VectorXd slopes() const { return gamma.tail(gamma.size() / 2); }
};

// Kernel-weighted least squares of the window targets on (X_s, X_s (s-t)/T)
// with X_s = (1, f_s'), weights k((s-t)/(T h))/h. Gram condition estimates
// above 1e12 (or non-positive pivots) throw singular-design rather than
// falling back to ridge. Windows with fewer than p+1 distinct pairs cannot
// identify the 2(p+1) coefficients and throw as well.
LocalFit local_linear_fit(const ForecastPanel& panel, int t, double h, const Kernel& kernel);

// Non-throwing variant for bandwidth search: returns false on undersized or
// numerically singular windows instead of throwing.
bool try_local_linear_fit(const ForecastPanel& panel, int t, double h, const Kernel& kernel,
                          LocalFit& out);

// Combination-weight paths for t = first_index .. T-1. Rows before
// first_index = p+1 are structurally unidentified at any bandwidth (the
// truncated boundary window holds fewer than p+1 distinct pairs) and are not
// emitted.
struct WeightPath {
  int first_index = 0;       // 0-based t of the first row
  Eigen::MatrixXd beta;      // (T - first_index) x (p+1)
  Eigen::MatrixXd slope;     // same shape, d beta / d tau estimates
  Eigen::VectorXd cond;      // per-row Gram condition estimates
  double h = 0.0;
  KernelKind kernel = KernelKind::epanechnikov;

  int rows() const { return static_cast<int>(beta.rows()); }
  int t_of_row(int r) const { return first_index + r; }
};

WeightPath fit_path(const ForecastPanel& panel, double h, const Kernel& kernel, int threads = 0);

// One-step-ahead combined forecast (1, f_new') beta_hat at the panel's last
// index; by construction the fit never reads the final target y[T], so the
// value is available in real time.
double forecast_next(const ForecastPanel& panel, double h, const Kernel& kernel,
                     const Eigen::VectorXd& f_new);

// CSV with 1-based time column: t, beta_0..beta_p, slope_0..slope_p.
std::string weight_path_csv(const WeightPath& path);
std::string weight_path_json(const WeightPath& path);

}  // namespace tvc
