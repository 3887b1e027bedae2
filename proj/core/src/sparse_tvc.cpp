#include "tvc/sparse_tvc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include <nlohmann/json.hpp>

#include "tvc/csv.hpp"
#include "tvc/errors.hpp"
#include "tvc/local_linear.hpp"

namespace tvc {

double scad_derivative(double x, double lambda, double a) {
  if (x < 0.0) throw Error(ErrorKind::domain, "SCAD derivative argument must be nonnegative");
  if (lambda < 0.0) throw Error(ErrorKind::config, "penalty must be nonnegative");
  if (!(a > 2.0)) throw Error(ErrorKind::config, "SCAD shape must exceed 2");
  if (x <= lambda) return lambda;
  return std::max(a * lambda - x, 0.0) / (a - 1.0);
}

void PenaltyConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0 || lambda4 < 0.0) {
    throw Error(ErrorKind::config, "penalties must be nonnegative");
  }
  if (!(a > 2.0)) throw Error(ErrorKind::config, "SCAD shape must exceed 2");
  if (!(tolerance > 0.0)) throw Error(ErrorKind::config, "tolerance must be positive");
  if (max_sweeps < 1) throw Error(ErrorKind::config, "sweep cap must be positive");
}

namespace {

// One time point's synthesized window, materialized for the stacked solvers.
struct Block {
  Eigen::VectorXd y;
  Eigen::VectorXd kw;  // k_st / T
  Eigen::VectorXd u;   // (s - t) / (T h)
  Eigen::MatrixXd X;   // rows x (p+1), intercept first
  std::vector<int> src;
};

Block build_block(const ForecastPanel& panel, int t, int w, const Kernel& kernel, double h) {
  const int T = panel.T();
  const int p1 = panel.p() + 1;
  const std::vector<WindowEntry> win = synthesized_window(t, T, w);
  const int n = static_cast<int>(win.size());
  Block b;
  b.y.resize(n);
  b.kw.resize(n);
  b.u.resize(n);
  b.X.resize(n, p1);
  b.src.resize(static_cast<std::size_t>(n));
  const double th = static_cast<double>(T) * h;
  for (int i = 0; i < n; ++i) {
    const WindowEntry& e = win[static_cast<std::size_t>(i)];
    const double z = static_cast<double>(e.s - t) / th;
    b.u(i) = z;
    b.kw(i) = kernel(z) / h / static_cast<double>(T);
    b.y(i) = panel.y(e.y_src);
    b.X(i, 0) = 1.0;
    b.X.row(i).tail(p1 - 1) = panel.F.row(e.f_src);
    b.src[static_cast<std::size_t>(i)] = e.f_src;
  }
  return b;
}

double soft_threshold(double x, double k) {
  if (x > k) return x - k;
  if (x < -k) return x + k;
  return 0.0;
}

// Cyclic coordinate descent for the weighted Lasso over [X, X.*u]. The
// intercept level (coordinate 0) is left unpenalized so it absorbs the local
// weighted mean; shrinking it would let the whole fit collapse toward zero on
// centered data. Every other coordinate, including the intercept's slope,
// carries the penalty. Returns sweeps used, or -1 when the cap is hit.
int solve_lasso(const Block& b, double lambda, Eigen::VectorXd& theta, double tol,
                int max_sweeps) {
  const int n = static_cast<int>(b.y.size());
  const int p1 = static_cast<int>(b.X.cols());
  const int d = 2 * p1;
  if (theta.size() != d) {
    theta = Eigen::VectorXd::Zero(d);
  }

  Eigen::MatrixXd Z(n, d);
  Z.leftCols(p1) = b.X;
  Z.rightCols(p1) = b.X.array().colwise() * b.u.array();

  Eigen::VectorXd a(d);
  for (int j = 0; j < d; ++j) {
    a(j) = (b.kw.array() * Z.col(j).array().square()).sum();
  }
  Eigen::VectorXd r = b.y - Z * theta;

  // Certified objective suboptimality of the current iterate: the dual point
  // is the residual, intercept-balanced (the unpenalized coordinate imposes an
  // equality constraint) and scaled into the correlation box. Near-collinear
  // columns can keep the iterates drifting long after the objective has
  // converged, so the gap is the stop that terminates degenerate windows.
  const auto duality_gap = [&]() {
    const double half_lambda = 0.5 * lambda;
    Eigen::VectorXd rp = r;
    if (a(0) > 0.0) rp.array() -= b.kw.dot(r) / a(0);
    double maxc = 0.0;
    for (int j = 1; j < d; ++j) {
      maxc = std::max(maxc, std::abs((b.kw.array() * Z.col(j).array() * rp.array()).sum()));
    }
    const double s = maxc > half_lambda ? half_lambda / maxc : 1.0;
    const double rnorm2 = (b.kw.array() * r.array().square()).sum();
    const double dev2 = (b.kw.array() * (b.y - s * rp).array().square()).sum();
    const double ynorm2 = (b.kw.array() * b.y.array().square()).sum();
    const double l1 = theta.tail(d - 1).lpNorm<1>();
    return rnorm2 + lambda * l1 - ynorm2 + dev2;
  };

  const double half_lambda = 0.5 * lambda;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double change = 0.0;
    for (int j = 0; j < d; ++j) {
      const double old = theta(j);
      if (!(a(j) > 0.0)) {
        if (old != 0.0) {
          r += Z.col(j) * old;
          theta(j) = 0.0;
          change = std::max(change, std::abs(old));
        }
        continue;
      }
      const double rho = (b.kw.array() * Z.col(j).array() * r.array()).sum() + a(j) * old;
      const double next = soft_threshold(rho, j == 0 ? 0.0 : half_lambda) / a(j);
      if (next != old) {
        r -= Z.col(j) * (next - old);
        theta(j) = next;
        change = std::max(change, std::abs(next - old));
      }
    }
    if (change < tol) return sweep;
    if (lambda > 0.0 && sweep % 4 == 0 && duality_gap() <= tol) return sweep;
  }
  return -1;
}

}  // namespace

Stage1Paths stage1_lasso(const ForecastPanel& panel, double h, const Kernel& kernel,
                         double lambda1, double tol, int max_sweeps) {
  panel.validate();
  if (!(h > 0.0)) throw Error(ErrorKind::config, "bandwidth must be positive");
  if (lambda1 < 0.0) throw Error(ErrorKind::config, "penalty must be nonnegative");
  if (!(tol > 0.0)) throw Error(ErrorKind::config, "tolerance must be positive");
  const int T = panel.T();
  const int p1 = panel.p() + 1;
  const int w = static_cast<int>(std::floor(static_cast<double>(T) * h));
  if (w < 1) {
    throw Error(ErrorKind::window_too_small,
                "floor(T h) = " + std::to_string(w) + " leaves empty windows");
  }
  if (T < 2) throw Error(ErrorKind::insufficient_data, "need at least two pairs");

  Stage1Paths out;
  out.first_index = 1;
  out.levels.resize(T - 1, p1);
  out.slopes.resize(T - 1, p1);

  // Coefficient paths are smooth in t, so chaining the previous solution as
  // the warm start cuts sweeps substantially; the loop stays sequential.
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(2 * p1);
  for (int t = 1; t < T; ++t) {
    const Block b = build_block(panel, t, w, kernel, h);
    const int sweeps = solve_lasso(b, lambda1, theta, tol, max_sweeps);
    if (sweeps < 0) {
      throw Error(ErrorKind::convergence,
                  "stage-1 lasso did not converge at t=" + std::to_string(t + 1) +
                      " with lambda1=" + format_double(lambda1),
                  "t=" + std::to_string(t + 1));
    }
    out.levels.row(t - 1) = theta.head(p1);
    out.slopes.row(t - 1) = theta.tail(p1) / h;
  }
  return out;
}

Eigen::VectorXd smoothness_measure(const Eigen::MatrixXd& stage1_levels) {
  const Eigen::Index n = stage1_levels.rows();
  Eigen::VectorXd d(stage1_levels.cols());
  if (n == 0) {
    d.setZero();
    return d;
  }
  for (Eigen::Index j = 0; j < stage1_levels.cols(); ++j) {
    const double mean = stage1_levels.col(j).mean();
    d(j) = (stage1_levels.col(j).array() - mean).matrix().norm();
  }
  return d;
}

GcdWorkspace orthogonalize_groups(const ForecastPanel& panel, double h, const Kernel& kernel) {
  panel.validate();
  if (!(h > 0.0)) throw Error(ErrorKind::config, "bandwidth must be positive");
  const int T = panel.T();
  const int p1 = panel.p() + 1;
  const int w = static_cast<int>(std::floor(static_cast<double>(T) * h));
  if (w < 1) {
    throw Error(ErrorKind::window_too_small,
                "floor(T h) = " + std::to_string(w) + " leaves empty windows");
  }
  if (T < 2) throw Error(ErrorKind::insufficient_data, "need at least two pairs");

  GcdWorkspace ws;
  ws.T = T;
  ws.p1 = p1;
  ws.first_index = 1;
  ws.floor_th = w;
  ws.h = h;
  ws.kernel = kernel.kind;

  const int nb = T - 1;
  ws.offsets.resize(static_cast<std::size_t>(nb) + 1);
  ws.offsets[0] = 0;
  for (int b = 0; b < nb; ++b) {
    const int t = 1 + b;
    ws.offsets[static_cast<std::size_t>(b) + 1] =
        ws.offsets[static_cast<std::size_t>(b)] + 2 * std::min(w, t);
  }
  const int N = ws.offsets.back();
  ws.ybar.resize(N);
  ws.kw.resize(N);
  ws.u.resize(N);
  ws.X.resize(N, p1);
  ws.g0.setZero(nb, p1);
  ws.g1.setZero(nb, p1);

  for (int b = 0; b < nb; ++b) {
    const Block blk = build_block(panel, 1 + b, w, kernel, h);
    const int lo = ws.offsets[static_cast<std::size_t>(b)];
    const int rows = static_cast<int>(blk.y.size());
    ws.ybar.segment(lo, rows) = blk.y;
    ws.kw.segment(lo, rows) = blk.kw;
    ws.u.segment(lo, rows) = blk.u;
    ws.X.middleRows(lo, rows) = blk.X;
    for (int i = 0; i < p1; ++i) {
      const auto xi = blk.X.col(i).array();
      ws.g0(b, i) = (blk.kw.array() * xi.square()).sum();
      ws.g1(b, i) = (blk.kw.array() * xi.square() * blk.u.array().square()).sum();
    }
  }

  for (int b = 0; b < nb; ++b) {
    for (int i = 0; i < p1; ++i) {
      if (!(ws.g0(b, i) > 0.0) || !(ws.g1(b, i) > 0.0)) {
        throw Error(ErrorKind::degenerate_group,
                    "group " + std::to_string(i) + " has a vanishing Gram entry at t=" +
                        std::to_string(2 + b),
                    "t=" + std::to_string(2 + b));
      }
    }
  }
  ws.isg0 = ws.g0.cwiseSqrt().cwiseInverse();
  ws.isg1 = ws.g1.cwiseSqrt().cwiseInverse();
  return ws;
}

namespace {

Eigen::VectorXd residual_from(const GcdWorkspace& ws, const Eigen::MatrixXd& c0,
                              const Eigen::MatrixXd& c1) {
  Eigen::VectorXd r = ws.ybar;
  const int nb = ws.n_blocks();
  for (int b = 0; b < nb; ++b) {
    const int lo = ws.offsets[static_cast<std::size_t>(b)];
    const int rows = ws.offsets[static_cast<std::size_t>(b) + 1] - lo;
    const Eigen::VectorXd th0 =
        (c0.row(b).array() * ws.isg0.row(b).array()).matrix().transpose();
    const Eigen::VectorXd th1 =
        (c1.row(b).array() * ws.isg1.row(b).array()).matrix().transpose();
    const auto Xb = ws.X.middleRows(lo, rows);
    r.segment(lo, rows) -= Xb * th0;
    r.segment(lo, rows).array() -= (Xb * th1).array() * ws.u.segment(lo, rows).array();
  }
  return r;
}

double gcd_objective(const GcdWorkspace& ws, const Eigen::VectorXd& tau0,
                     const Eigen::VectorXd& tau1, const Eigen::MatrixXd& c0,
                     const Eigen::MatrixXd& c1, const Eigen::VectorXd& r) {
  double J = 0.5 * (ws.kw.array() * r.array().square()).sum();
  for (int i = 0; i < ws.p1; ++i) {
    J += tau0(i) * c0.col(i).norm();
    J += tau1(i) * c1.col(i).norm();
  }
  return J;
}

// One group update in the orthogonalized coordinates; returns the max
// coefficient change. slope=false uses the level regressor X_i, slope=true
// X_i * u. Inactive results are exact zeros.
double update_group(const GcdWorkspace& ws, int i, bool slope, double tau,
                    Eigen::MatrixXd& c, Eigen::VectorXd& r, Eigen::VectorXd& s_buf) {
  const int nb = ws.n_blocks();
  const double* xi = ws.X.col(i).data();
  const double* kwp = ws.kw.data();
  const double* up = ws.u.data();
  double* rp = r.data();
  const Eigen::MatrixXd& isg = slope ? ws.isg1 : ws.isg0;

  for (int b = 0; b < nb; ++b) {
    const int lo = ws.offsets[static_cast<std::size_t>(b)];
    const int hi = ws.offsets[static_cast<std::size_t>(b) + 1];
    double acc = 0.0;
    if (slope) {
      for (int row = lo; row < hi; ++row) acc += kwp[row] * xi[row] * up[row] * rp[row];
    } else {
      for (int row = lo; row < hi; ++row) acc += kwp[row] * xi[row] * rp[row];
    }
    s_buf(b) = acc * isg(b, i) + c(b, i);
  }

  const double norm = s_buf.norm();
  double max_change = 0.0;
  if (norm <= tau) {
    for (int b = 0; b < nb; ++b) {
      const double old = c(b, i);
      if (old == 0.0) continue;
      max_change = std::max(max_change, std::abs(old));
      const double dth = -old * isg(b, i);
      const int lo = ws.offsets[static_cast<std::size_t>(b)];
      const int hi = ws.offsets[static_cast<std::size_t>(b) + 1];
      if (slope) {
        for (int row = lo; row < hi; ++row) rp[row] -= xi[row] * up[row] * dth;
      } else {
        for (int row = lo; row < hi; ++row) rp[row] -= xi[row] * dth;
      }
      c(b, i) = 0.0;
    }
    return max_change;
  }

  const double shrink = 1.0 - tau / norm;
  for (int b = 0; b < nb; ++b) {
    const double next = shrink * s_buf(b);
    const double old = c(b, i);
    if (next == old) continue;
    max_change = std::max(max_change, std::abs(next - old));
    const double dth = (next - old) * isg(b, i);
    const int lo = ws.offsets[static_cast<std::size_t>(b)];
    const int hi = ws.offsets[static_cast<std::size_t>(b) + 1];
    if (slope) {
      for (int row = lo; row < hi; ++row) rp[row] -= xi[row] * up[row] * dth;
    } else {
      for (int row = lo; row < hi; ++row) rp[row] -= xi[row] * dth;
    }
    c(b, i) = next;
  }
  return max_change;
}

// Runs sweeps until the max coefficient change drops below tolerance.
// Returns sweeps used, or -1 with *last_change set when the cap is hit.
int run_gcd(const GcdWorkspace& ws, const Eigen::VectorXd& tau0, const Eigen::VectorXd& tau1,
            Eigen::MatrixXd& c0, Eigen::MatrixXd& c1, Eigen::VectorXd& r,
            const PenaltyConfig& config, double* last_change) {
  Eigen::VectorXd s_buf(ws.n_blocks());
  double J_prev = config.check_objective ? gcd_objective(ws, tau0, tau1, c0, c1, r) : 0.0;
  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    double change = 0.0;
    for (int i = 0; i < ws.p1; ++i) {
      change = std::max(change, update_group(ws, i, false, tau0(i), c0, r, s_buf));
    }
    for (int i = 0; i < ws.p1; ++i) {
      change = std::max(change, update_group(ws, i, true, tau1(i), c1, r, s_buf));
    }
    if (config.check_objective) {
      const double J = gcd_objective(ws, tau0, tau1, c0, c1, r);
      if (J > J_prev + 1e-9 * (1.0 + std::abs(J_prev))) {
        throw Error(ErrorKind::convergence,
                    "penalized objective increased during a sweep (" + format_double(J_prev) +
                        " -> " + format_double(J) + ")");
      }
      J_prev = J;
    }
    if (change < config.tolerance) return sweep;
    if (last_change) *last_change = change;
  }
  return -1;
}

struct GroupThresholds {
  Eigen::VectorXd tau0;
  Eigen::VectorXd tau1;
};

GroupThresholds group_thresholds(const Eigen::VectorXd& level_norms,
                                 const Eigen::VectorXd& smoothness, double lambda3,
                                 double lambda4, double a, double h) {
  GroupThresholds gt;
  const Eigen::Index p1 = level_norms.size();
  gt.tau0.resize(p1);
  gt.tau1.resize(p1);
  for (Eigen::Index i = 0; i < p1; ++i) {
    gt.tau0(i) = scad_derivative(level_norms(i), lambda3, a);
    gt.tau1(i) = h * scad_derivative(smoothness(i), lambda4, a);
  }
  return gt;
}

std::vector<int> active_columns(const Eigen::MatrixXd& levels) {
  std::vector<int> active;
  for (Eigen::Index j = 0; j < levels.cols(); ++j) {
    if ((levels.col(j).array() != 0.0).any()) active.push_back(static_cast<int>(j));
  }
  return active;
}

}  // namespace

StagedPaths stage2_gscad(const GcdWorkspace& ws, const Stage1Paths& stage1,
                         const PenaltyConfig& config) {
  config.validate();
  if (stage1.levels.rows() != ws.n_blocks() || stage1.levels.cols() != ws.p1 ||
      stage1.slopes.rows() != stage1.levels.rows() ||
      stage1.slopes.cols() != stage1.levels.cols() || stage1.first_index != ws.first_index) {
    throw Error(ErrorKind::dimension, "stage-1 paths do not match the workspace layout");
  }

  StagedPaths out;
  out.first_index = ws.first_index;
  out.h = ws.h;
  out.lambda1 = config.lambda1;
  out.lambda3 = config.lambda3;
  out.stage1 = stage1.levels;
  out.stage1_slope = stage1.slopes;
  out.stage1_norm.resize(ws.p1);
  for (int i = 0; i < ws.p1; ++i) out.stage1_norm(i) = stage1.levels.col(i).norm();
  out.smoothness = smoothness_measure(stage1.levels);

  const GroupThresholds gt = group_thresholds(out.stage1_norm, out.smoothness, config.lambda3,
                                              config.lambda4, config.a, ws.h);

  Eigen::MatrixXd c0 = stage1.levels.cwiseProduct(ws.g0.cwiseSqrt());
  Eigen::MatrixXd c1 = (ws.h * stage1.slopes).cwiseProduct(ws.g1.cwiseSqrt());
  Eigen::VectorXd r = residual_from(ws, c0, c1);

  double last_change = 0.0;
  const int sweeps = run_gcd(ws, gt.tau0, gt.tau1, c0, c1, r, config, &last_change);
  if (sweeps < 0) {
    throw Error(ErrorKind::convergence,
                "group coordinate descent did not converge in " +
                    std::to_string(config.max_sweeps) + " sweeps (last max change " +
                    format_double(last_change) + ")");
  }
  out.sweeps = sweeps;

  out.stage2 = c0.cwiseProduct(ws.isg0);
  out.stage2_slope = c1.cwiseProduct(ws.isg1) / ws.h;
  out.active_set = active_columns(out.stage2);
  return out;
}

double bic_score(double ssr, double active_count, double p_T, double floor_th) {
  if (ssr < 0.0) throw Error(ErrorKind::domain, "sum of squared residuals cannot be negative");
  if (!(p_T >= 1.0) || !(floor_th > 0.0)) {
    throw Error(ErrorKind::config, "BIC needs p_T >= 1 and a positive window size");
  }
  if (ssr == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(ssr) + std::log(p_T) * active_count * std::log(floor_th) / floor_th;
}

double bic_ssr(const ForecastPanel& panel, const Eigen::MatrixXd& levels, int first_index,
               int from_t) {
  const int n = static_cast<int>(levels.rows());
  if (n < 1) throw Error(ErrorKind::insufficient_data, "empty coefficient path");
  if (levels.cols() != panel.p() + 1 || first_index < 0 || first_index + n > panel.T()) {
    throw Error(ErrorKind::dimension, "coefficient path does not fit the panel");
  }
  // A row whose window is left-truncated sees only t distinct sources (the
  // mirror duplicates them), so coefficients there can be unidentified and
  // the one-step error arbitrarily large. Scoring starts at from_t; if that
  // leaves nothing, every row counts.
  int start = std::max(from_t - first_index, 0);
  if (start >= n) start = 0;
  double sum = 0.0;
  for (int row = start; row < n; ++row) {
    const int t = first_index + row;
    const double pred =
        levels(row, 0) + levels.row(row).tail(panel.p()).dot(panel.F.row(t));
    const double e = panel.y(t + 1) - pred;
    sum += e * e;
  }
  return sum / static_cast<double>(n - start);
}

Lambda1Cv select_lambda1(const ForecastPanel& panel, double h, const Kernel& kernel,
                         int n_folds, int n_grid) {
  panel.validate();
  if (!(h > 0.0)) throw Error(ErrorKind::config, "bandwidth must be positive");
  if (n_folds < 2) throw Error(ErrorKind::config, "cross-validation needs at least 2 folds");
  if (n_grid < 1) throw Error(ErrorKind::config, "penalty grid needs at least one point");
  const int T = panel.T();
  const int p1 = panel.p() + 1;
  const int w = static_cast<int>(std::floor(static_cast<double>(T) * h));
  if (w < 1) {
    throw Error(ErrorKind::window_too_small,
                "floor(T h) = " + std::to_string(w) + " leaves empty windows");
  }
  const int n_t = T - 1;  // scored time points t = 1 .. T-1
  if (n_t < n_folds) {
    throw Error(ErrorKind::insufficient_data,
                "fewer scorable time points than folds: " + std::to_string(n_t));
  }

  std::vector<Block> blocks;
  blocks.reserve(static_cast<std::size_t>(n_t));
  for (int t = 1; t < T; ++t) blocks.push_back(build_block(panel, t, w, kernel, h));

  // Smallest penalty that zeroes every penalized coordinate at every t. The
  // unpenalized intercept settles at the window's weighted mean, so the
  // correlations are taken against the mean-removed response.
  double lam_max = 0.0;
  for (const Block& b : blocks) {
    const double wsum = b.kw.sum();
    const double wmean = wsum > 0.0 ? b.kw.dot(b.y) / wsum : 0.0;
    const Eigen::VectorXd wy = b.kw.cwiseProduct((b.y.array() - wmean).matrix());
    const int p1b = static_cast<int>(b.X.cols());
    for (int j = 0; j < p1b; ++j) {
      if (j > 0) lam_max = std::max(lam_max, 2.0 * std::abs(b.X.col(j).dot(wy)));
      lam_max = std::max(lam_max, 2.0 * std::abs((b.X.col(j).array() * b.u.array()).matrix().dot(wy)));
    }
  }
  if (!(lam_max > 0.0)) lam_max = 1.0;

  Lambda1Cv cv;
  cv.grid.resize(n_grid);
  if (n_grid == 1) {
    cv.grid(0) = lam_max;
  } else {
    const double hi = std::log(lam_max);
    const double lo = std::log(1e-3 * lam_max);
    for (int i = 0; i < n_grid; ++i) {
      cv.grid(i) = std::exp(hi + (lo - hi) * static_cast<double>(i) /
                                     static_cast<double>(n_grid - 1));
    }
  }
  cv.scores.setZero(n_grid);
  int scored = 0;

  for (int f = 0; f < n_folds; ++f) {
    // Contiguous block of held-out time points (0-based pair indices).
    const int lo_t = 1 + (n_t * f) / n_folds;
    const int hi_t = 1 + (n_t * (f + 1)) / n_folds;
    for (int t = lo_t; t < hi_t; ++t) {
      const Block& full = blocks[static_cast<std::size_t>(t - 1)];
      // Drop every window row sourced from a held-out pair.
      std::vector<int> keep;
      keep.reserve(full.src.size());
      std::vector<int> kept_src;
      for (int i = 0; i < static_cast<int>(full.src.size()); ++i) {
        const int s = full.src[static_cast<std::size_t>(i)];
        if (s < lo_t || s >= hi_t) {
          keep.push_back(i);
          kept_src.push_back(s);
        }
      }
      // A window almost wholly inside its own fold trims down to duplicated
      // sources; the refit is then rank-degenerate and its score carries no
      // information, so the point is skipped for every lambda alike.
      std::sort(kept_src.begin(), kept_src.end());
      kept_src.erase(std::unique(kept_src.begin(), kept_src.end()), kept_src.end());
      if (static_cast<int>(kept_src.size()) < 2) continue;
      Block trimmed;
      const int kn = static_cast<int>(keep.size());
      trimmed.y.resize(kn);
      trimmed.kw.resize(kn);
      trimmed.u.resize(kn);
      trimmed.X.resize(kn, p1);
      for (int i = 0; i < kn; ++i) {
        const int s = keep[static_cast<std::size_t>(i)];
        trimmed.y(i) = full.y(s);
        trimmed.kw(i) = full.kw(s);
        trimmed.u(i) = full.u(s);
        trimmed.X.row(i) = full.X.row(s);
      }

      Eigen::VectorXd theta = Eigen::VectorXd::Zero(2 * p1);
      for (int gi = 0; gi < n_grid; ++gi) {
        // Rank-degenerate windows can shuttle mass between proportional
        // coordinates forever at tiny penalties; the objective is monotone
        // under exact cyclic descent, so a budget-exhausted iterate is an
        // epsilon-minimizer whose held-out prediction is still scorable.
        solve_lasso(trimmed, cv.grid(gi), theta, 1e-7, 100000);
        const double pred =
            theta(0) + theta.segment(1, p1 - 1).dot(panel.F.row(t));
        const double e = panel.y(t + 1) - pred;
        cv.scores(gi) += e * e;
      }
      ++scored;
    }
  }
  if (scored == 0) {
    throw Error(ErrorKind::insufficient_data,
                "every cross-validation point was trimmed away by its own fold");
  }
  cv.scores /= static_cast<double>(scored);

  // Plain argmin; ties on a descending grid keep the larger (sparser) penalty.
  // Sparser-within-noise rules are ruled out here: the top of the grid is the
  // all-zero fit, and an all-zero pilot leaves the second stage nothing to
  // adapt its thresholds to.
  int best = 0;
  for (int i = 1; i < n_grid; ++i) {
    if (cv.scores(i) < cv.scores(best)) best = i;
  }
  cv.lambda1 = cv.grid(best);
  return cv;
}

StagedPaths fit_two_stage(const ForecastPanel& panel, const Eigen::VectorXd& lambda3_grid,
                          double C_bandwidth, const Kernel& kernel) {
  panel.validate();
  const int T = panel.T();
  const int p = panel.p();
  if (p < 1) throw Error(ErrorKind::dimension, "need at least one candidate forecast");
  if (T < 10) throw Error(ErrorKind::insufficient_data, "two-stage fit needs T >= 10");
  if (!(C_bandwidth > 0.0)) {
    throw Error(ErrorKind::config, "bandwidth constant must be positive");
  }

  const double h = std::min(
      C_bandwidth * std::pow(std::log(static_cast<double>(p) + 1.0) / T, 0.2),
      static_cast<double>(T - 1) / static_cast<double>(T));
  const int w = static_cast<int>(std::floor(static_cast<double>(T) * h));

  const Standardizer std_ = fit_standardizer(panel);
  const ForecastPanel spanel = standardize(panel, std_);

  const Lambda1Cv cv1 = select_lambda1(spanel, h, kernel);
  const Stage1Paths s1 = stage1_lasso(spanel, h, kernel, cv1.lambda1, 1e-7, 100000);
  const GcdWorkspace ws = orthogonalize_groups(spanel, h, kernel);

  Eigen::VectorXd level_norms(ws.p1);
  for (int i = 0; i < ws.p1; ++i) level_norms(i) = s1.levels.col(i).norm();
  const Eigen::VectorXd smooth = smoothness_measure(s1.levels);

  Eigen::VectorXd grid;
  if (lambda3_grid.size() > 0) {
    grid = lambda3_grid;
    std::sort(grid.data(), grid.data() + grid.size(), std::greater<double>());
    if (!(grid(grid.size() - 1) >= 0.0)) {
      throw Error(ErrorKind::config, "group penalties must be nonnegative");
    }
  } else {
    // Start the path just below the smallest penalty whose SCAD weights kill
    // every group against the raw stacked response, so the strongest group
    // is already in and the empty fit never competes; the grid's resolution
    // is spent where groups enter one by one. For a group with stage-1 norm
    // x and data norm s, the weight reaches s at lambda = s when x <= s and
    // at ((a-1)s + x)/a otherwise (second branch of the derivative). The
    // floor stays two decades down; far below that every group is active and
    // the fits barely move.
    const double a_shape = 3.7;
    double lam_hi = 0.0;
    Eigen::VectorXd s_buf(ws.n_blocks());
    Eigen::VectorXd s1_buf(ws.n_blocks());
    for (int i = 0; i < ws.p1; ++i) {
      for (int b = 0; b < ws.n_blocks(); ++b) {
        const int lo = ws.offsets[static_cast<std::size_t>(b)];
        const int hi = ws.offsets[static_cast<std::size_t>(b) + 1];
        double a0 = 0.0, a1 = 0.0;
        for (int row = lo; row < hi; ++row) {
          const double kxy = ws.kw(row) * ws.X(row, i) * ws.ybar(row);
          a0 += kxy;
          a1 += kxy * ws.u(row);
        }
        s_buf(b) = a0 * ws.isg0(b, i);
        s1_buf(b) = a1 * ws.isg1(b, i);
      }
      const double sn0 = s_buf.norm();
      const double sn1 = s1_buf.norm() / h;
      const double kill0 =
          level_norms(i) <= sn0 ? sn0 : ((a_shape - 1.0) * sn0 + level_norms(i)) / a_shape;
      const double kill1 =
          smooth(i) <= sn1 ? sn1 : ((a_shape - 1.0) * sn1 + smooth(i)) / a_shape;
      lam_hi = std::max(lam_hi, std::max(kill0, kill1));
    }
    if (!(lam_hi > 0.0)) lam_hi = 1.0;
    lam_hi *= 0.95;
    const int n_grid = 20;
    grid.resize(n_grid);
    const double hi_log = std::log(lam_hi);
    const double lo_log = std::log(1e-2 * lam_hi);
    for (int i = 0; i < n_grid; ++i) {
      grid(i) = std::exp(hi_log + (lo_log - hi_log) * static_cast<double>(i) /
                                      static_cast<double>(n_grid - 1));
    }
  }

  PenaltyConfig config;
  config.lambda1 = cv1.lambda1;
  config.lambda2 = cv1.lambda1;
  config.a = 3.7;
  config.h = h;
  // The pipeline spends a deeper sweep budget than the module default: grid
  // candidates near a group's death point converge slowly and a hard failure
  // there would abort the whole fit.
  config.max_sweeps = 10000;

  const Eigen::MatrixXd init_c0 = s1.levels.cwiseProduct(ws.g0.cwiseSqrt());
  const Eigen::MatrixXd init_c1 = (h * s1.slopes).cwiseProduct(ws.g1.cwiseSqrt());
  const Eigen::VectorXd init_r = residual_from(ws, init_c0, init_c1);

  Eigen::VectorXd bic(grid.size());
  Eigen::MatrixXd best_c0, best_c1;
  int best_index = -1;
  double best_score = std::numeric_limits<double>::infinity();
  double best_ssr = 0.0;
  int total_sweeps = 0;

  for (Eigen::Index gi = 0; gi < grid.size(); ++gi) {
    config.lambda3 = grid(gi);
    config.lambda4 = grid(gi);
    // Every candidate starts from the first-stage fit rather than the previous
    // grid point, so which groups survive depends only on the penalty level,
    // not on the order the grid is walked.
    Eigen::MatrixXd c0 = init_c0;
    Eigen::MatrixXd c1 = init_c1;
    Eigen::VectorXd r = init_r;
    const GroupThresholds gt =
        group_thresholds(level_norms, smooth, config.lambda3, config.lambda4, config.a, h);
    double last_change = 0.0;
    const int sweeps = run_gcd(ws, gt.tau0, gt.tau1, c0, c1, r, config, &last_change);
    if (sweeps < 0) {
      throw Error(ErrorKind::convergence,
                  "group coordinate descent did not converge at lambda3=" +
                      format_double(config.lambda3) + " (last max change " +
                      format_double(last_change) + ")");
    }
    total_sweeps += sweeps;

    const Eigen::MatrixXd levels_std = c0.cwiseProduct(ws.isg0);
    const double ssr = bic_ssr(spanel, levels_std, ws.first_index, w);
    int l = 0;
    for (int j = 1; j < ws.p1; ++j) {
      if ((levels_std.col(j).array() != 0.0).any()) ++l;
    }
    // The effective sample size behind each path point is the full synthesized
    // window, original plus reflected rows.
    bic(gi) = bic_score(ssr, static_cast<double>(l), static_cast<double>(p),
                        static_cast<double>(2 * w));
    if (best_index < 0 || bic(gi) < best_score) {
      best_index = static_cast<int>(gi);
      best_score = bic(gi);
      best_ssr = ssr;
      best_c0 = c0;
      best_c1 = c1;
    }
  }

  StagedPaths out;
  out.first_index = ws.first_index;
  out.h = h;
  out.lambda1 = cv1.lambda1;
  out.lambda3 = grid(best_index);
  out.lambda3_grid = grid;
  out.bic_curve = bic;
  out.sweeps = total_sweeps;
  out.exact_fit = best_ssr == 0.0;
  out.stage1_norm = level_norms;
  out.smoothness = smooth;

  out.stage1 = destandardize_levels(s1.levels, std_);
  out.stage1_slope = destandardize_slopes(s1.slopes, std_);
  out.stage2 = destandardize_levels(best_c0.cwiseProduct(ws.isg0), std_);
  out.stage2_slope = destandardize_slopes(best_c1.cwiseProduct(ws.isg1) / h, std_);
  out.active_set = active_columns(out.stage2);
  return out;
}

double staged_forecast(const StagedPaths& paths, const Eigen::VectorXd& f_new) {
  if (paths.stage2.rows() < 1) {
    throw Error(ErrorKind::insufficient_data, "empty stage-2 path");
  }
  if (f_new.size() != paths.stage2.cols() - 1) {
    throw Error(ErrorKind::dimension, "forecast vector length does not match path columns");
  }
  const Eigen::Index last = paths.stage2.rows() - 1;
  return paths.stage2(last, 0) + paths.stage2.row(last).tail(f_new.size()).dot(f_new);
}

std::string staged_paths_csv(const StagedPaths& paths) {
  const int p1 = static_cast<int>(paths.stage2.cols());
  std::vector<std::string> header;
  header.push_back("t");
  for (int j = 0; j < p1; ++j) header.push_back("beta_" + std::to_string(j));
  for (int j = 0; j < p1; ++j) header.push_back("slope_" + std::to_string(j));
  Eigen::MatrixXd values(paths.stage2.rows(), 1 + 2 * p1);
  for (Eigen::Index r = 0; r < paths.stage2.rows(); ++r) {
    values(r, 0) = static_cast<double>(paths.first_index + r + 1);
    values.row(r).segment(1, p1) = paths.stage2.row(r);
    values.row(r).segment(1 + p1, p1) = paths.stage2_slope.row(r);
  }
  return csv_to_string(header, values);
}

std::string staged_paths_json(const StagedPaths& paths) {
  nlohmann::json j;
  j["h"] = paths.h;
  j["lambda1"] = paths.lambda1;
  j["lambda3"] = paths.lambda3;
  j["first_t"] = paths.first_index + 1;
  j["active_set"] = paths.active_set;
  j["exact_fit"] = paths.exact_fit;
  j["sweeps"] = paths.sweeps;
  std::vector<double> grid(paths.lambda3_grid.begin(), paths.lambda3_grid.end());
  std::vector<double> curve(paths.bic_curve.begin(), paths.bic_curve.end());
  j["bic"] = {{"lambda3", grid}, {"score", curve}};
  auto matrix_json = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      rows.emplace_back(m.row(r).begin(), m.row(r).end());
    }
    return rows;
  };
  j["stage1"] = {{"beta", matrix_json(paths.stage1)}, {"slope", matrix_json(paths.stage1_slope)}};
  j["stage2"] = {{"beta", matrix_json(paths.stage2)}, {"slope", matrix_json(paths.stage2_slope)}};
  return j.dump(2);
}

}  // namespace tvc
