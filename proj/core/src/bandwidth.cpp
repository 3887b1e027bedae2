#include "tvc/bandwidth.hpp"

#include <cmath>
#include <limits>

#include "tvc/csv.hpp"
#include "tvc/errors.hpp"
#include "tvc/parallel.hpp"

namespace tvc {

double cv_score(const ForecastPanel& panel, double h, const Kernel& kernel,
                std::vector<std::string>* warnings) {
  panel.validate();
  if (!(h > 0.0)) throw Error(ErrorKind::config, "bandwidth must be positive");
  const int T = panel.T();
  const int first = panel.p() + 1;
  if (T - first < 1) {
    throw Error(ErrorKind::insufficient_data, "panel too short for any estimable index");
  }

  const double inf = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  int count = 0;
  LocalFit fit;
  for (int s = first; s < T; ++s) {
    if (!try_local_linear_fit(panel, s, h, kernel, fit)) {
      if (warnings) {
        warnings->push_back("h=" + format_double(h) + " disqualified: window at t=" +
                            std::to_string(s + 1) + " is undersized or singular");
      }
      return inf;
    }
    const Eigen::VectorXd beta = fit.levels();
    const double pred = beta(0) + beta.tail(beta.size() - 1).dot(panel.F.row(s));
    const double err = panel.y(s + 1) - pred;
    sum += err * err;
    ++count;
  }
  return sum / static_cast<double>(count);
}

CvCurve select_bandwidth(const ForecastPanel& panel, const Kernel& kernel, double c1,
                         double c2, int n_grid, int threads) {
  panel.validate();
  if (!(c1 > 0.0) || !(c2 >= c1)) {
    throw Error(ErrorKind::config, "bandwidth bracket requires 0 < c1 <= c2");
  }
  if (n_grid < 1) throw Error(ErrorKind::config, "bandwidth grid needs at least one point");
  if (n_grid > 1 && !(c2 > c1)) {
    throw Error(ErrorKind::config, "bandwidth bracket requires c1 < c2 for multi-point grids");
  }

  const double scale = std::pow(static_cast<double>(panel.T()), -0.2);
  CvCurve curve;
  curve.grid.resize(n_grid);
  if (n_grid == 1) {
    curve.grid(0) = c1 * scale;
  } else {
    const double lo = std::log(c1 * scale);
    const double hi = std::log(c2 * scale);
    for (int i = 0; i < n_grid; ++i) {
      curve.grid(i) = std::exp(lo + (hi - lo) * static_cast<double>(i) /
                                        static_cast<double>(n_grid - 1));
    }
  }

  curve.scores.resize(n_grid);
  std::vector<std::vector<std::string>> notes(static_cast<std::size_t>(n_grid));
  parallel_for(static_cast<std::size_t>(n_grid), [&](std::size_t i) {
    curve.scores(static_cast<Eigen::Index>(i)) =
        cv_score(panel, curve.grid(static_cast<Eigen::Index>(i)), kernel, &notes[i]);
  }, threads);
  for (const auto& per_candidate : notes) {
    curve.warnings.insert(curve.warnings.end(), per_candidate.begin(), per_candidate.end());
  }

  int best = -1;
  for (int i = 0; i < n_grid; ++i) {
    if (!std::isfinite(curve.scores(i))) continue;
    if (best < 0 || curve.scores(i) < curve.scores(best)) best = i;
  }
  if (best < 0) {
    throw Error(ErrorKind::no_admissible_bandwidth,
                "every bandwidth candidate in [" + format_double(curve.grid(0)) + ", " +
                    format_double(curve.grid(n_grid - 1)) + "] was disqualified");
  }
  curve.h_star = curve.grid(best);
  return curve;
}

std::string cv_curve_csv(const CvCurve& curve) {
  Eigen::MatrixXd values(curve.grid.size(), 2);
  values.col(0) = curve.grid;
  values.col(1) = curve.scores;
  return csv_to_string({"h", "score"}, values);
}

double plugin_h_opt(const PluginInputs& inputs, int T) {
  if (T < 2) throw Error(ErrorKind::config, "plug-in bandwidth needs T >= 2");
  if (!inputs.M || !inputs.V || !inputs.beta_dd) {
    throw Error(ErrorKind::config, "plug-in inputs must provide M, V and curvature maps");
  }
  if (!(inputs.mu2 > 0.0) || !(inputs.nu0 > 0.0)) {
    throw Error(ErrorKind::config, "kernel moments must be positive");
  }

  const int n = 201;
  double num = 0.0;
  double den = 0.0;
  for (int i = 0; i < n; ++i) {
    const double tau = static_cast<double>(i) / static_cast<double>(n - 1);
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    const Eigen::MatrixXd M = inputs.M(tau);
    const Eigen::MatrixXd V = inputs.V(tau);
    const Eigen::VectorXd bdd = inputs.beta_dd(tau);
    if (M.rows() != M.cols() || V.rows() != M.rows() || V.cols() != M.cols() ||
        bdd.size() != M.rows()) {
      throw Error(ErrorKind::dimension, "plug-in maps disagree on dimension at tau=" +
                                            format_double(tau));
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
      throw Error(ErrorKind::singular_design,
                  "design second-moment matrix not positive definite at tau=" +
                      format_double(tau));
    }
    num += w * (ldlt.solve(V)).trace();
    den += w * bdd.dot(M * bdd);
  }
  const double dx = 1.0 / static_cast<double>(n - 1);
  num *= dx;
  den *= dx;
  if (!(den > 0.0)) {
    throw Error(ErrorKind::domain,
                "zero coefficient curvature leaves the optimal bandwidth undefined");
  }
  const double ratio = 2.0 * inputs.nu0 * num / (inputs.mu2 * inputs.mu2 * den);
  return std::pow(static_cast<double>(T), -0.2) * std::pow(ratio, 0.2);
}

}  // namespace tvc
