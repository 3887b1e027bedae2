#include "tvc/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <string>

#include "tvc/csv.hpp"
#include "tvc/errors.hpp"
#include "tvc/evaluation.hpp"
#include "tvc/local_linear.hpp"
#include "tvc/parallel.hpp"
#include "tvc/rng.hpp"
#include "tvc/sparse_tvc.hpp"

namespace tvc {

namespace {

double w0_of(double tau) { return std::exp(-3.0 + 2.5 * tau); }

double w1_of(double tau) {
  const double b = 1.5 * tau - 0.8;
  return 0.5 * b * b * b + 0.5;
}

double w2_of(double tau) { return 0.2 * std::sin(4.0 * tau) + 0.4; }

}  // namespace

Eigen::Vector3d lowdim_weights_at(double tau) {
  return Eigen::Vector3d(w0_of(tau), w1_of(tau), w2_of(tau));
}

namespace {

// Fixed draw order per step: e1, e2, the J redundant normals, then u, so the
// low-dimensional design is the J = 0 special case of the high-dimensional
// one on the same (seed, stream).
SimulatedPanel simulate_impl(const DgpConfig& config) {
  config.validate();
  const int T = config.T;
  const int burn = config.burn_in > 0 ? config.burn_in : 2 * T;
  const int n_pairs = T + config.n_oos;
  const int J = config.J;

  Eigen::MatrixXd chol;
  if (J > 0) {
    Eigen::MatrixXd sigma(J, J);
    for (int a = 0; a < J; ++a)
      for (int b = 0; b < J; ++b) sigma(a, b) = 2.0 * std::exp(-std::abs(a - b));
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorKind::singular_design, "redundant-forecast covariance is not positive definite",
                  "simulate");
    chol = llt.matrixL();
  }

  Rng rng(config.seed, config.stream);
  auto draw = [&]() { return config.zero_noise ? 0.0 : rng.normal(); };

  Eigen::VectorXd y(n_pairs + 1);
  Eigen::MatrixXd F(n_pairs, 2 + J);
  Eigen::MatrixXd W(n_pairs, 3);
  Eigen::VectorXd z(J);

  double y_cur = 0.0;
  for (int q = -burn; q < n_pairs; ++q) {
    // The [0, 1] coefficient clock spans the whole post-burn-in stretch
    // (estimation plus out-of-sample) and is clamped to 0 through the
    // burn-in; running it past 1 instead would push the implied AR
    // coefficient toward unity and blow up the out-of-sample scale.
    const double tau = std::max(0.0, static_cast<double>(q + 1) / static_cast<double>(n_pairs));
    const double e1 = draw();
    const double e2 = draw();
    const double f1 = 0.5 + 0.8 * y_cur + e1;
    const double f2 = 0.5 + 0.3 * std::sin(2.0 * tau + 0.25) * y_cur + e2;
    if (J > 0)
      for (int j = 0; j < J; ++j) z(j) = draw();
    const double u = draw();
    const double w0 = w0_of(tau);
    const double w1 = w1_of(tau);
    const double w2 = w2_of(tau);
    const double y_next = w0 + w1 * f1 + w2 * f2 + u;
    if (q >= 0) {
      y(q) = y_cur;
      F(q, 0) = f1;
      F(q, 1) = f2;
      if (J > 0) F.row(q).tail(J) = (chol * z).transpose();
      W(q, 0) = w0;
      W(q, 1) = w1;
      W(q, 2) = w2;
      if (q == n_pairs - 1) y(q + 1) = y_next;
    }
    y_cur = y_next;
  }

  std::vector<std::string> names = {"f1", "f2"};
  names.reserve(2 + J);
  for (int j = 1; j <= J; ++j) names.push_back("r" + std::to_string(j));

  SimulatedPanel out;
  out.panel = make_panel(std::move(y), std::move(F), std::move(names));
  out.true_weights = std::move(W);
  out.relevant = {1, 2};
  return out;
}

const std::vector<std::string>& table1_methods() {
  static const std::vector<std::string> m = {
      "NPRf",  "BG",         "TVGRregconst", "TVGRreg", "TVGRregconstr",
      "GRregconst", "GRreg", "GRregconstr",  "EQ"};
  return m;
}

// Runs one replication per slot with redraws on fresh substreams; aborts the
// whole run if any slot exhausts its redraw budget or more than 1% of the
// replications needed one.
void check_failures(const std::vector<int>& fails, const std::vector<std::string>& messages,
                    int max_attempts, int reps, const std::string& where, int& redraws) {
  int total = 0;
  for (int r = 0; r < reps; ++r) {
    if (fails[r] >= max_attempts)
      throw Error(ErrorKind::convergence,
                  "replication " + std::to_string(r) + " failed " + std::to_string(max_attempts) +
                      " consecutive draws: " + messages[r],
                  where);
    total += fails[r];
  }
  if (static_cast<double>(total) > 0.01 * static_cast<double>(reps))
    throw Error(ErrorKind::convergence,
                "replication failure rate above 1% (" + std::to_string(total) + " redraws in " +
                    std::to_string(reps) + " replications)",
                where);
  redraws += total;
}

}  // namespace

void DgpConfig::validate() const {
  if (T < 2) throw Error(ErrorKind::config, "simulation needs T >= 2", "T");
  if (n_oos < 0) throw Error(ErrorKind::config, "n_oos must be nonnegative", "n_oos");
  if (J < 0) throw Error(ErrorKind::config, "J must be nonnegative", "J");
  if (burn_in < 0) throw Error(ErrorKind::config, "burn_in must be nonnegative", "burn_in");
}

SimulatedPanel simulate_lowdim(const DgpConfig& config) {
  if (config.J != 0)
    throw Error(ErrorKind::config, "low-dimensional design has no redundant forecasts", "J");
  return simulate_impl(config);
}

SimulatedPanel simulate_highdim(const DgpConfig& config) {
  if (config.J < 1)
    throw Error(ErrorKind::config, "high-dimensional design needs J >= 1", "J");
  return simulate_impl(config);
}

PluginInputs lowdim_plugin_inputs(const Kernel& kernel) {
  // The target follows a locally stationary AR(1): y[t+1] = c + a y[t] + xi
  // with a = 0.8 w1 + 0.3 sin(2 tau + 0.25) w2, c = w0 + 0.5 (w1 + w2) and
  // xi ~ N(0, w1^2 + w2^2 + 1); |a| < 1 on [0, 1]. Design moments follow from
  // the implied mean and variance of y; V = M because the combination error u
  // has unit variance independent of the regressors.
  auto moments = [](double tau) {
    const double w0 = w0_of(tau);
    const double w1 = w1_of(tau);
    const double w2 = w2_of(tau);
    const double b = 0.3 * std::sin(2.0 * tau + 0.25);
    const double a = 0.8 * w1 + b * w2;
    const double c = w0 + 0.5 * (w1 + w2);
    const double s2 = w1 * w1 + w2 * w2 + 1.0;
    const double mu_y = c / (1.0 - a);
    const double var_y = s2 / (1.0 - a * a);
    const double m1 = 0.5 + 0.8 * mu_y;
    const double m2 = 0.5 + b * mu_y;
    const double v11 = 0.64 * var_y + 1.0;
    const double v22 = b * b * var_y + 1.0;
    const double v12 = 0.8 * b * var_y;
    Eigen::MatrixXd M(3, 3);
    M << 1.0, m1, m2,
        m1, v11 + m1 * m1, v12 + m1 * m2,
        m2, v12 + m1 * m2, v22 + m2 * m2;
    return M;
  };

  PluginInputs inputs;
  inputs.M = moments;
  inputs.V = moments;
  inputs.beta_dd = [](double tau) {
    Eigen::VectorXd b(3);
    b << 6.25 * std::exp(-3.0 + 2.5 * tau), 6.75 * (1.5 * tau - 0.8), -3.2 * std::sin(4.0 * tau);
    return b;
  };
  inputs.mu2 = kernel.mu2;
  inputs.nu0 = kernel.nu0;
  return inputs;
}

OosForecasts lowdim_oos_forecasts(const ForecastPanel& panel, int T_insample,
                                  const Kernel& kernel, double c1, double c2, int n_grid) {
  panel.validate();
  if (T_insample < 2 || T_insample >= panel.T())
    throw Error(ErrorKind::config, "estimation sample must leave at least one forecast origin",
                "T_insample");
  const int n_oos = panel.T() - T_insample;
  const auto& methods = table1_methods();
  const int m = static_cast<int>(methods.size());

  const ForecastPanel insample = panel.prefix(T_insample);
  const double h_cv = select_bandwidth(insample, kernel, c1, c2, n_grid).h_star;
  const Eigen::VectorXd w_const = gr_weights(insample, GrVariant::with_const);
  const Eigen::VectorXd w_plain = gr_weights(insample, GrVariant::no_const);
  const Eigen::VectorXd w_constr = gr_weights(insample, GrVariant::constrained);

  OosForecasts oos;
  oos.methods = methods;
  oos.horizon_index.resize(n_oos);
  oos.yhat.resize(n_oos, m);
  oos.actuals.resize(n_oos);

  for (int k = 0; k < n_oos; ++k) {
    const int t = T_insample + k;
    const ForecastPanel pre = panel.prefix(t);
    const Eigen::VectorXd f = panel.F.row(t);
    oos.yhat(k, 0) = forecast_next(pre, h_cv, kernel, f);
    oos.yhat(k, 1) = bg_weights(pre, t).dot(f);
    oos.yhat(k, 2) = combine_forecast(gr_weights(pre, GrVariant::with_const), f);
    oos.yhat(k, 3) = combine_forecast(gr_weights(pre, GrVariant::no_const), f);
    oos.yhat(k, 4) = combine_forecast(gr_weights(pre, GrVariant::constrained), f);
    oos.yhat(k, 5) = combine_forecast(w_const, f);
    oos.yhat(k, 6) = combine_forecast(w_plain, f);
    oos.yhat(k, 7) = combine_forecast(w_constr, f);
    oos.yhat(k, 8) = equal_weights_forecast(f);
    oos.actuals(k) = panel.y(t + 1);
    oos.horizon_index[k] = t + 2;
  }
  return oos;
}

HighdimRep highdim_oos(const ForecastPanel& panel, int T_insample, const Kernel& kernel) {
  panel.validate();
  if (T_insample < 2 || T_insample >= panel.T())
    throw Error(ErrorKind::config, "estimation sample must leave at least one forecast origin",
                "T_insample");
  const int n_oos = panel.T() - T_insample;

  HighdimRep rep;
  rep.yhat.resize(n_oos);
  rep.actuals.resize(n_oos);
  rep.exact = true;
  rep.included = true;
  const std::vector<int> relevant = {1, 2};

  for (int k = 0; k < n_oos; ++k) {
    const int t = T_insample + k;
    const StagedPaths paths = fit_two_stage(panel.prefix(t), Eigen::VectorXd(), 1.0, kernel);
    rep.yhat(k) = staged_forecast(paths, panel.F.row(t));
    rep.actuals(k) = panel.y(t + 1);
    std::vector<int> active;
    for (int j : paths.active_set)
      if (j > 0) active.push_back(j);
    rep.exact = rep.exact && active == relevant;
    const bool covers = std::find(active.begin(), active.end(), 1) != active.end() &&
                        std::find(active.begin(), active.end(), 2) != active.end();
    rep.included = rep.included && covers;
  }
  return rep;
}

Table1Result run_table1(const Table1Config& config) {
  if (config.reps < 2) throw Error(ErrorKind::config, "need at least 2 replications", "reps");
  if (config.T_list.empty()) throw Error(ErrorKind::config, "T_list is empty", "T_list");
  if (config.n_oos < 1) throw Error(ErrorKind::config, "need at least one forecast origin", "n_oos");
  const auto start = std::chrono::steady_clock::now();
  const Kernel kernel = Kernel::epanechnikov();
  const int n_T = static_cast<int>(config.T_list.size());
  const int m = static_cast<int>(table1_methods().size());
  constexpr int max_attempts = 8;

  Table1Result res;
  res.T_list = config.T_list;
  res.methods = table1_methods();
  res.mean.setZero(n_T, m);
  res.sd.setZero(n_T, m);
  res.reps = config.reps;
  res.seed = config.seed;

  for (int ti = 0; ti < n_T; ++ti) {
    const int T = config.T_list[ti];
    Eigen::MatrixXd A(config.reps, m);
    std::vector<int> fails(config.reps, 0);
    std::vector<std::string> messages(config.reps);

    parallel_for(
        static_cast<std::size_t>(config.reps),
        [&](std::size_t r) {
          for (int attempt = 0; attempt < max_attempts; ++attempt) {
            DgpConfig d;
            d.T = T;
            d.n_oos = config.n_oos;
            // Per-cell seed offset keeps draws distinct across sample sizes;
            // 128 substreams per replication leave room for redraws.
            d.seed = config.seed + static_cast<std::uint64_t>(T);
            d.stream = static_cast<std::uint64_t>(r) * 128 + static_cast<std::uint64_t>(attempt);
            try {
              const SimulatedPanel sim = simulate_lowdim(d);
              const OosForecasts oos = lowdim_oos_forecasts(sim.panel, T, kernel, config.c1,
                                                            config.c2, config.n_grid);
              for (int j = 0; j < m; ++j)
                A(static_cast<int>(r), j) = ascfe(oos.actuals, oos.yhat.col(j));
              fails[r] = attempt;
              return;
            } catch (const Error& e) {
              messages[r] = e.what();
            }
          }
          fails[r] = max_attempts;
        },
        config.threads);

    check_failures(fails, messages, max_attempts, config.reps,
                   "run_table1/T=" + std::to_string(T), res.redraws);

    for (int j = 0; j < m; ++j) {
      const double mu = A.col(j).mean();
      res.mean(ti, j) = mu;
      res.sd(ti, j) =
          std::sqrt((A.col(j).array() - mu).square().sum() / static_cast<double>(config.reps - 1));
    }
    int best = 0;
    for (int j = 1; j < m; ++j)
      if (res.mean(ti, j) < res.mean(ti, best)) best = j;
    res.best.push_back(res.methods[best]);
  }

  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

Table2Result run_table2(const Table2Config& config) {
  if (config.reps < 2) throw Error(ErrorKind::config, "need at least 2 replications", "reps");
  if (config.T_list.empty()) throw Error(ErrorKind::config, "T_list is empty", "T_list");
  if (config.J_list.empty()) throw Error(ErrorKind::config, "J_list is empty", "J_list");
  if (config.n_oos < 1) throw Error(ErrorKind::config, "need at least one forecast origin", "n_oos");
  const auto start = std::chrono::steady_clock::now();
  const Kernel kernel = Kernel::epanechnikov();
  const int n_T = static_cast<int>(config.T_list.size());
  const int n_J = static_cast<int>(config.J_list.size());
  constexpr int max_attempts = 8;

  Table2Result res;
  res.T_list = config.T_list;
  res.J_list = config.J_list;
  res.ascfe_mean.setZero(n_T, n_J);
  res.ascfe_sd.setZero(n_T, n_J);
  res.exact_share.setZero(n_T, n_J);
  res.included_share.setZero(n_T, n_J);
  res.reps = config.reps;
  res.seed = config.seed;

  for (int ti = 0; ti < n_T; ++ti) {
    for (int ji = 0; ji < n_J; ++ji) {
      const int T = config.T_list[ti];
      const int J = config.J_list[ji];
      Eigen::VectorXd cell_ascfe(config.reps);
      Eigen::VectorXd cell_exact(config.reps);
      Eigen::VectorXd cell_incl(config.reps);
      std::vector<int> fails(config.reps, 0);
      std::vector<std::string> messages(config.reps);

      parallel_for(
          static_cast<std::size_t>(config.reps),
          [&](std::size_t r) {
            for (int attempt = 0; attempt < max_attempts; ++attempt) {
              DgpConfig d;
              d.T = T;
              d.n_oos = config.n_oos;
              d.J = J;
              d.seed = config.seed + 1000 * static_cast<std::uint64_t>(J) +
                       static_cast<std::uint64_t>(T);
              d.stream = static_cast<std::uint64_t>(r) * 128 + static_cast<std::uint64_t>(attempt);
              try {
                const SimulatedPanel sim = simulate_highdim(d);
                const HighdimRep rep = highdim_oos(sim.panel, T, kernel);
                const int idx = static_cast<int>(r);
                cell_ascfe(idx) = ascfe(rep.actuals, rep.yhat);
                cell_exact(idx) = rep.exact ? 1.0 : 0.0;
                cell_incl(idx) = rep.included ? 1.0 : 0.0;
                fails[r] = attempt;
                return;
              } catch (const Error& e) {
                messages[r] = e.what();
              }
            }
            fails[r] = max_attempts;
          },
          config.threads);

      check_failures(fails, messages, max_attempts, config.reps,
                     "run_table2/T=" + std::to_string(T) + ",J=" + std::to_string(J), res.redraws);

      const double mu = cell_ascfe.mean();
      res.ascfe_mean(ti, ji) = mu;
      res.ascfe_sd(ti, ji) = std::sqrt((cell_ascfe.array() - mu).square().sum() /
                                       static_cast<double>(config.reps - 1));
      res.exact_share(ti, ji) = cell_exact.mean();
      res.included_share(ti, ji) = cell_incl.mean();
    }
  }

  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

std::string table1_csv(const Table1Result& result) {
  std::string out = "T,method,ascfe_mean,ascfe_sd\n";
  for (int ti = 0; ti < static_cast<int>(result.T_list.size()); ++ti)
    for (int j = 0; j < static_cast<int>(result.methods.size()); ++j)
      out += std::to_string(result.T_list[ti]) + "," + result.methods[j] + "," +
             format_double(result.mean(ti, j)) + "," + format_double(result.sd(ti, j)) + "\n";
  return out;
}

std::string table2_csv(const Table2Result& result) {
  std::string out = "T,J,ascfe_mean,ascfe_sd,exact_share,included_share\n";
  for (int ti = 0; ti < static_cast<int>(result.T_list.size()); ++ti)
    for (int ji = 0; ji < static_cast<int>(result.J_list.size()); ++ji)
      out += std::to_string(result.T_list[ti]) + "," + std::to_string(result.J_list[ji]) + "," +
             format_double(result.ascfe_mean(ti, ji)) + "," +
             format_double(result.ascfe_sd(ti, ji)) + "," +
             format_double(result.exact_share(ti, ji)) + "," +
             format_double(result.included_share(ti, ji)) + "\n";
  return out;
}

std::string table1_manifest_json(const Table1Config& config, const Table1Result& result) {
  nlohmann::json j;
  j["table"] = 1;
  j["reps"] = config.reps;
  j["T_list"] = config.T_list;
  j["n_oos"] = config.n_oos;
  j["seed"] = config.seed;
  j["kernel"] = "epanechnikov";
  j["cv"] = {{"c1", config.c1}, {"c2", config.c2}, {"n_grid", config.n_grid}};
  j["methods"] = result.methods;
  j["best"] = result.best;
  j["redraws"] = result.redraws;
  j["seconds"] = result.seconds;
  return j.dump(2) + "\n";
}

std::string table2_manifest_json(const Table2Config& config, const Table2Result& result) {
  nlohmann::json j;
  j["table"] = 2;
  j["reps"] = config.reps;
  j["T_list"] = config.T_list;
  j["J_list"] = config.J_list;
  j["n_oos"] = config.n_oos;
  j["seed"] = config.seed;
  j["kernel"] = "epanechnikov";
  j["redraws"] = result.redraws;
  j["seconds"] = result.seconds;
  return j.dump(2) + "\n";
}

}  // namespace tvc
