#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "tvc/kernel.hpp"
#include "tvc/local_linear.hpp"
#include "tvc/panel.hpp"

namespace tvc {

// Leave-one-out CV curve over a bandwidth grid. Disqualified candidates carry
// +infinity scores; h_star is the smallest grid point attaining the minimum.
struct CvCurve {
  Eigen::VectorXd grid;
  Eigen::VectorXd scores;
  double h_star = 0.0;
  std::vector<std::string> warnings;
};

// Mean squared one-step combined-forecast error over the estimable indices.
// The local window at s never contains the pair indexed s, so each fitted
// coefficient is leave-one-out with respect to the error it is scored on.
// Undersized or singular windows disqualify the candidate: the score is
// +infinity and a note is appended to *warnings when given.
double cv_score(const ForecastPanel& panel, double h, const Kernel& kernel,
                std::vector<std::string>* warnings = nullptr);

// Log-spaced grid of n_grid points on [c1, c2] * T^(-1/5); candidates are
// scored independently (concurrently when threads allow) and assembled in
// grid order, so repeated calls are bit-identical. Every candidate
// disqualified raises no-admissible-bandwidth.
CvCurve select_bandwidth(const ForecastPanel& panel, const Kernel& kernel,
                         double c1 = 0.5, double c2 = 3.0, int n_grid = 20,
                         int threads = 0);

// CSV with columns h, score.
std::string cv_curve_csv(const CvCurve& curve);

// True-process quantities for the plug-in optimal bandwidth: design second
// moments M, error-weighted second moments V, and coefficient curvature, all
// as functions of the time fraction.
struct PluginInputs {
  std::function<Eigen::MatrixXd(double)> M;
  std::function<Eigen::MatrixXd(double)> V;
  std::function<Eigen::VectorXd(double)> beta_dd;
  double mu2 = 0.0;
  double nu0 = 0.0;
};

// h_opt = T^(-1/5) * (2 nu0 I_V / (mu2^2 I_B))^(1/5) with
// I_V = integral of Tr[V(tau) M(tau)^-1] and I_B = integral of
// beta''(tau)' M(tau) beta''(tau), both by 201-point trapezoid on [0,1].
// Zero curvature (I_B <= 0) leaves the optimum undefined and throws.
double plugin_h_opt(const PluginInputs& inputs, int T);

}  // namespace tvc
