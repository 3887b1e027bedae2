#include "tvc/local_linear.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tvc/csv.hpp"
#include "tvc/errors.hpp"
#include "tvc/parallel.hpp"

namespace tvc {

std::vector<WindowEntry> synthesized_window(int t, int T, int floor_th) {
  if (T < 1) throw Error(ErrorKind::domain, "empty panel");
  if (t < 0 || t >= T) {
    throw Error(ErrorKind::domain, "window center out of range: t=" + std::to_string(t),
                "t=" + std::to_string(t));
  }
  if (floor_th < 1) {
    throw Error(ErrorKind::window_too_small,
                "floor(T h) = " + std::to_string(floor_th) + " leaves an empty window");
  }
  const int m = std::min(floor_th, t);
  std::vector<WindowEntry> win;
  win.reserve(2 * static_cast<std::size_t>(m));
  for (int j = m; j >= 1; --j) {
    win.push_back({t - j, t - j + 1, t - j});
  }
  for (int j = 1; j <= m; ++j) {
    win.push_back({t + j, t - j + 1, t - j});
  }
  return win;
}

namespace {

// Shared worker: returns false with a reason instead of throwing so the CV
// search can disqualify candidates cheaply.
bool fit_at(const ForecastPanel& panel, int t, double h, const Kernel& kernel,
            LocalFit& out, ErrorKind& kind, std::string& msg) {
  const int T = panel.T();
  const int p1 = panel.p() + 1;
  const int w = static_cast<int>(std::floor(static_cast<double>(T) * h));
  if (w < 1) {
    kind = ErrorKind::window_too_small;
    msg = "bandwidth " + format_double(h) + " gives floor(T h) < 1";
    return false;
  }
  const int m = std::min(w, t);
  if (m < p1) {
    kind = ErrorKind::singular_design;
    msg = "window at t=" + std::to_string(t + 1) + " holds " + std::to_string(m) +
          " distinct pairs, fewer than p+1=" + std::to_string(p1);
    return false;
  }

  // The window holds each available pair once per side with opposite time
  // offsets and equal kernel weight, so the cross moments (level x slope
  // blocks and the slope response) cancel exactly; accumulate the surviving
  // blocks with the pairwise-folded weights.
  Eigen::MatrixXd S0 = Eigen::MatrixXd::Zero(p1, p1);
  Eigen::MatrixXd S2 = Eigen::MatrixXd::Zero(p1, p1);
  Eigen::VectorXd r0 = Eigen::VectorXd::Zero(p1);
  Eigen::VectorXd x(p1);
  x(0) = 1.0;

  const double th = static_cast<double>(T) * h;
  for (int j = 1; j <= m; ++j) {
    const double k = kernel(static_cast<double>(j) / th) / h;
    if (k <= 0.0) continue;
    const double u = static_cast<double>(j) / static_cast<double>(T);
    x.tail(p1 - 1) = panel.F.row(t - j);
    const double yv = panel.y(t - j + 1);
    const double w0 = k + k;
    const double w2 = w0 * u * u;
    const double wy = w0 * yv;
    for (int a = 0; a < p1; ++a) {
      const double xa = x(a);
      for (int b = 0; b <= a; ++b) {
        const double prod = xa * x(b);
        S0(a, b) += w0 * prod;
        S2(a, b) += w2 * prod;
      }
      r0(a) += wy * xa;
    }
  }

  const int d = 2 * p1;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
  G.topLeftCorner(p1, p1) = S0.selfadjointView<Eigen::Lower>();
  G.bottomRightCorner(p1, p1) = S2.selfadjointView<Eigen::Lower>();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  rhs.head(p1) = r0;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  Eigen::VectorXd D = ldlt.vectorD();
  double dmin = D.minCoeff();
  double dmax = D.maxCoeff();
  if (!(dmin > 0.0) || ldlt.info() != Eigen::Success) {
    kind = ErrorKind::singular_design;
    msg = "singular weighted Gram at t=" + std::to_string(t + 1);
    return false;
  }
  double cond = dmax / dmin;
  if (cond > 1e12) {
    kind = ErrorKind::singular_design;
    msg = "near-singular weighted Gram at t=" + std::to_string(t + 1) +
          " (condition estimate " + format_double(cond) + ")";
    return false;
  }

  out.gamma = ldlt.solve(rhs);
  out.t = t;
  out.h = h;
  out.cond_estimate = cond;
  return true;
}

}  // namespace

LocalFit local_linear_fit(const ForecastPanel& panel, int t, double h, const Kernel& kernel) {
  panel.validate();
  if (!(h > 0.0)) throw Error(ErrorKind::config, "bandwidth must be positive");
  LocalFit fit;
  ErrorKind kind = ErrorKind::domain;
  std::string msg;
  if (!fit_at(panel, t, h, kernel, fit, kind, msg)) {
    throw Error(kind, msg, "t=" + std::to_string(t + 1));
  }
  return fit;
}

bool try_local_linear_fit(const ForecastPanel& panel, int t, double h, const Kernel& kernel,
                          LocalFit& out) {
  if (!(h > 0.0) || t < 0 || t >= panel.T()) return false;
  ErrorKind kind = ErrorKind::domain;
  std::string msg;
  return fit_at(panel, t, h, kernel, out, kind, msg);
}

WeightPath fit_path(const ForecastPanel& panel, double h, const Kernel& kernel, int threads) {
  panel.validate();
  if (!(h > 0.0)) throw Error(ErrorKind::config, "bandwidth must be positive");
  const int T = panel.T();
  const int p1 = panel.p() + 1;
  const int w = static_cast<int>(std::floor(static_cast<double>(T) * h));
  if (w < p1) {
    throw Error(ErrorKind::window_too_small,
                "floor(T h) = " + std::to_string(w) + " cannot identify " + std::to_string(p1) +
                    " coefficients at any index");
  }

  WeightPath path;
  path.first_index = p1;
  path.h = h;
  path.kernel = kernel.kind;
  const int n = T - path.first_index;
  if (n < 1) {
    throw Error(ErrorKind::insufficient_data, "panel too short for any estimable index");
  }
  path.beta.resize(n, p1);
  path.slope.resize(n, p1);
  path.cond.resize(n);

  std::vector<ErrorKind> kinds(static_cast<std::size_t>(n), ErrorKind::domain);
  std::vector<std::string> msgs(static_cast<std::size_t>(n));
  std::vector<char> ok(static_cast<std::size_t>(n), 0);

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    LocalFit fit;
    if (fit_at(panel, path.first_index + static_cast<int>(i), h, kernel, fit,
               kinds[i], msgs[i])) {
      path.beta.row(static_cast<Eigen::Index>(i)) = fit.levels();
      path.slope.row(static_cast<Eigen::Index>(i)) = fit.slopes();
      path.cond(static_cast<Eigen::Index>(i)) = fit.cond_estimate;
      ok[i] = 1;
    }
  }, threads);

  for (std::size_t i = 0; i < ok.size(); ++i) {
    if (!ok[i]) {
      throw Error(kinds[i], msgs[i], "t=" + std::to_string(path.first_index + static_cast<int>(i) + 1));
    }
  }
  return path;
}

double forecast_next(const ForecastPanel& panel, double h, const Kernel& kernel,
                     const Eigen::VectorXd& f_new) {
  if (f_new.size() != panel.p()) {
    throw Error(ErrorKind::dimension, "forecast vector length does not match panel columns");
  }
  LocalFit fit = local_linear_fit(panel, panel.T() - 1, h, kernel);
  Eigen::VectorXd levels = fit.levels();
  return levels(0) + levels.tail(levels.size() - 1).dot(f_new);
}

std::string weight_path_csv(const WeightPath& path) {
  const int p1 = static_cast<int>(path.beta.cols());
  std::vector<std::string> header;
  header.push_back("t");
  for (int j = 0; j < p1; ++j) header.push_back("beta_" + std::to_string(j));
  for (int j = 0; j < p1; ++j) header.push_back("slope_" + std::to_string(j));
  Eigen::MatrixXd values(path.beta.rows(), 1 + 2 * p1);
  for (Eigen::Index r = 0; r < path.beta.rows(); ++r) {
    values(r, 0) = static_cast<double>(path.first_index + r + 1);
    values.row(r).segment(1, p1) = path.beta.row(r);
    values.row(r).segment(1 + p1, p1) = path.slope.row(r);
  }
  return csv_to_string(header, values);
}

std::string weight_path_json(const WeightPath& path) {
  nlohmann::json j;
  j["h"] = path.h;
  j["kernel"] = Kernel{path.kernel}.name();
  j["first_t"] = path.first_index + 1;
  std::vector<int> ts;
  std::vector<std::vector<double>> beta, slope;
  for (Eigen::Index r = 0; r < path.beta.rows(); ++r) {
    ts.push_back(path.first_index + static_cast<int>(r) + 1);
    beta.emplace_back(path.beta.row(r).begin(), path.beta.row(r).end());
    slope.emplace_back(path.slope.row(r).begin(), path.slope.row(r).end());
  }
  j["t"] = ts;
  j["beta"] = beta;
  j["slope"] = slope;
  return j.dump(2);
}

}  // namespace tvc
