#include "tvc/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tvc/csv.hpp"
#include "tvc/errors.hpp"

namespace tvc {

const char* combiner_name(CombinerKind kind) {
  switch (kind) {
    case CombinerKind::BG: return "BG";
    case CombinerKind::GRregconst: return "GRregconst";
    case CombinerKind::GRreg: return "GRreg";
    case CombinerKind::GRregconstr: return "GRregconstr";
    case CombinerKind::TVGRregconst: return "TVGRregconst";
    case CombinerKind::TVGRreg: return "TVGRreg";
    case CombinerKind::TVGRregconstr: return "TVGRregconstr";
    case CombinerKind::EQ: return "EQ";
    case CombinerKind::HistAvg: return "HistAvg";
    case CombinerKind::ARMA11: return "ARMA11";
  }
  throw Error(ErrorKind::domain, "unknown combiner tag");
}

CombinerKind combiner_from_name(const std::string& name) {
  static const std::pair<const char*, CombinerKind> table[] = {
      {"BG", CombinerKind::BG},
      {"GRregconst", CombinerKind::GRregconst},
      {"GRreg", CombinerKind::GRreg},
      {"GRregconstr", CombinerKind::GRregconstr},
      {"TVGRregconst", CombinerKind::TVGRregconst},
      {"TVGRreg", CombinerKind::TVGRreg},
      {"TVGRregconstr", CombinerKind::TVGRregconstr},
      {"EQ", CombinerKind::EQ},
      {"HistAvg", CombinerKind::HistAvg},
      {"ARMA11", CombinerKind::ARMA11},
  };
  for (const auto& [tag, kind] : table) {
    if (name == tag) return kind;
  }
  throw Error(ErrorKind::config, "unknown combination method: " + name);
}

std::string oos_forecasts_csv(const OosForecasts& oos) {
  const Eigen::Index n = oos.actuals.size();
  if (oos.yhat.rows() != n || static_cast<Eigen::Index>(oos.horizon_index.size()) != n ||
      oos.yhat.cols() != static_cast<Eigen::Index>(oos.methods.size())) {
    throw Error(ErrorKind::dimension, "misaligned out-of-sample record");
  }
  std::vector<std::string> header = {"t", "actual"};
  header.insert(header.end(), oos.methods.begin(), oos.methods.end());
  Eigen::MatrixXd values(n, 2 + oos.yhat.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    values(r, 0) = static_cast<double>(oos.horizon_index[static_cast<std::size_t>(r)]);
    values(r, 1) = oos.actuals(r);
    values.row(r).tail(oos.yhat.cols()) = oos.yhat.row(r);
  }
  return csv_to_string(header, values);
}

Eigen::VectorXd bg_weights(const ForecastPanel& panel, int t) {
  panel.validate();
  if (t < 1 || t > panel.T()) {
    throw Error(ErrorKind::domain, "inverse-MSE weights need 1 <= t <= T, got t=" +
                                       std::to_string(t));
  }
  const int p = panel.p();
  Eigen::VectorXd mse = Eigen::VectorXd::Zero(p);
  for (int l = 0; l < t; ++l) {
    for (int i = 0; i < p; ++i) {
      const double err = panel.y(l + 1) - panel.F(l, i);
      mse(i) += err * err;
    }
  }
  mse /= static_cast<double>(t);

  const int perfect = static_cast<int>((mse.array() == 0.0).count());
  Eigen::VectorXd w(p);
  if (perfect > 0) {
    for (int i = 0; i < p; ++i) w(i) = mse(i) == 0.0 ? 1.0 / perfect : 0.0;
    return w;
  }
  w = mse.cwiseInverse();
  return w / w.sum();
}

namespace {

Eigen::VectorXd solve_full_rank(const Eigen::MatrixXd& X, const Eigen::VectorXd& z,
                                const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) {
    throw Error(ErrorKind::singular_design,
                std::string(what) + ": rank-deficient combination design");
  }
  return qr.solve(z);
}

}  // namespace

Eigen::VectorXd gr_weights(const ForecastPanel& panel, GrVariant variant) {
  panel.validate();
  const int T = panel.T();
  const int p = panel.p();
  const Eigen::VectorXd z = panel.y.segment(1, T);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p + 1);

  switch (variant) {
    case GrVariant::with_const: {
      Eigen::MatrixXd X(T, p + 1);
      X.col(0).setOnes();
      X.rightCols(p) = panel.F;
      w = solve_full_rank(X, z, "regression with intercept");
      return w;
    }
    case GrVariant::no_const: {
      w.tail(p) = solve_full_rank(panel.F, z, "regression without intercept");
      return w;
    }
    case GrVariant::constrained: {
      if (p == 1) {
        w(1) = 1.0;
        return w;
      }
      // Substitute the unit-sum constraint: regress y - f_p on the
      // differences f_i - f_p, then back out the last weight.
      Eigen::MatrixXd D = panel.F.leftCols(p - 1);
      D.colwise() -= panel.F.col(p - 1);
      Eigen::VectorXd head =
          solve_full_rank(D, z - panel.F.col(p - 1), "unit-sum regression");
      w.segment(1, p - 1) = head;
      w(p) = 1.0 - head.sum();
      return w;
    }
  }
  throw Error(ErrorKind::domain, "unknown regression variant");
}

double combine_forecast(const Eigen::VectorXd& weights, const Eigen::VectorXd& f_new) {
  if (weights.size() != f_new.size() + 1) {
    throw Error(ErrorKind::dimension, "weight vector does not match forecast count");
  }
  return weights(0) + weights.tail(f_new.size()).dot(f_new);
}

double equal_weights_forecast(const Eigen::VectorXd& f_new) {
  if (f_new.size() < 1) throw Error(ErrorKind::dimension, "no forecasts to combine");
  return f_new.mean();
}

double historical_average(const Eigen::VectorXd& y, int t) {
  if (t < 2) throw Error(ErrorKind::domain, "running mean needs t >= 2");
  if (t - 1 > y.size()) {
    throw Error(ErrorKind::insufficient_data, "series shorter than requested window");
  }
  return y.head(t - 1).mean();
}

namespace {

struct CssResult {
  double css = 0.0;
  double last_innovation = 0.0;
};

CssResult arma11_css(const Eigen::VectorXd& y, double c, double phi, double theta) {
  CssResult r;
  double e_prev = 0.0;
  for (Eigen::Index i = 1; i < y.size(); ++i) {
    const double e = y(i) - c - phi * y(i - 1) - theta * e_prev;
    r.css += e * e;
    e_prev = e;
  }
  r.last_innovation = e_prev;
  return r;
}

constexpr double kArBound = 0.999;

double squash(double z) { return kArBound * std::tanh(z); }

}  // namespace

Arma11Fit arma11_fit(const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  if (n < 10) {
    throw Error(ErrorKind::insufficient_data,
                "ARMA(1,1) needs at least 10 observations, got " + std::to_string(n));
  }

  const double mean = y.mean();
  double acv0 = 0.0, acv1 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = y(i) - mean;
    acv0 += d * d;
    if (i > 0) acv1 += d * (y(i - 1) - mean);
  }
  double phi0 = acv0 > 0.0 ? std::clamp(acv1 / acv0, -0.9, 0.9) : 0.0;

  // Optimize over (c, z_phi, z_theta) with phi = 0.999 tanh(z_phi) etc., so
  // the stationarity box never clips the search.
  auto objective = [&](const Eigen::Vector3d& x) {
    return arma11_css(y, x(0), squash(x(1)), squash(x(2))).css;
  };

  const double z0 = std::atanh(phi0 / kArBound);
  std::array<Eigen::Vector3d, 4> simplex;
  simplex[0] = Eigen::Vector3d(mean * (1.0 - phi0), z0, 0.0);
  const Eigen::Vector3d steps(0.25 * std::max(1.0, std::abs(mean)), 0.25, 0.25);
  for (int i = 1; i < 4; ++i) {
    simplex[i] = simplex[0];
    simplex[i](i - 1) += steps(i - 1);
  }
  std::array<double, 4> fx;
  for (int i = 0; i < 4; ++i) fx[i] = objective(simplex[i]);

  const int max_iter = 2000;
  int iter = 0;
  bool converged = false;
  std::array<int, 4> order = {0, 1, 2, 3};
  for (; iter < max_iter; ++iter) {
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    const int best = order[0], second = order[2], worst = order[3];

    double x_spread = 0.0;
    for (int i = 1; i < 4; ++i) {
      x_spread = std::max(x_spread, (simplex[order[i]] - simplex[best]).cwiseAbs().maxCoeff());
    }
    if (fx[worst] - fx[best] <= 1e-12 * (1.0 + std::abs(fx[best])) || x_spread <= 1e-9) {
      converged = true;
      break;
    }

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (int i = 0; i < 3; ++i) centroid += simplex[order[i]];
    centroid /= 3.0;

    const Eigen::Vector3d reflected = centroid + (centroid - simplex[worst]);
    const double fr = objective(reflected);
    if (fr < fx[best]) {
      const Eigen::Vector3d expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = objective(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        fx[worst] = fe;
      } else {
        simplex[worst] = reflected;
        fx[worst] = fr;
      }
      continue;
    }
    if (fr < fx[second]) {
      simplex[worst] = reflected;
      fx[worst] = fr;
      continue;
    }
    const Eigen::Vector3d contracted = centroid + 0.5 * (simplex[worst] - centroid);
    const double fc = objective(contracted);
    if (fc < fx[worst]) {
      simplex[worst] = contracted;
      fx[worst] = fc;
      continue;
    }
    for (int i = 1; i < 4; ++i) {
      const int idx = order[i];
      simplex[idx] = simplex[order[0]] + 0.5 * (simplex[idx] - simplex[order[0]]);
      fx[idx] = objective(simplex[idx]);
    }
  }
  if (!converged) {
    throw Error(ErrorKind::convergence, "ARMA(1,1) simplex search failed to converge");
  }

  std::sort(order.begin(), order.end(), [&](int a, int b) { return fx[a] < fx[b]; });
  const Eigen::Vector3d& xb = simplex[order[0]];
  Arma11Fit fit;
  fit.c = xb(0);
  fit.phi = squash(xb(1));
  fit.theta = squash(xb(2));
  fit.iterations = iter;
  const CssResult r = arma11_css(y, fit.c, fit.phi, fit.theta);
  fit.css = r.css;
  fit.forecast = fit.c + fit.phi * y(n - 1) + fit.theta * r.last_innovation;
  return fit;
}

double arma11_forecast(const Eigen::VectorXd& y) { return arma11_fit(y).forecast; }

}  // namespace tvc
