#include "tvc/evaluation.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "tvc/csv.hpp"
#include "tvc/errors.hpp"
#include "tvc/parallel.hpp"
#include "tvc/rng.hpp"

namespace tvc {

double ascfe(const Eigen::VectorXd& actuals, const Eigen::VectorXd& forecasts) {
  if (actuals.size() != forecasts.size()) {
    throw Error(ErrorKind::dimension, "actuals and forecasts differ in length");
  }
  if (actuals.size() < 1) throw Error(ErrorKind::insufficient_data, "empty loss window");
  return (actuals - forecasts).squaredNorm() / static_cast<double>(actuals.size());
}

Eigen::VectorXd squared_losses(const Eigen::VectorXd& actuals, const Eigen::VectorXd& forecasts) {
  if (actuals.size() != forecasts.size()) {
    throw Error(ErrorKind::dimension, "actuals and forecasts differ in length");
  }
  return (actuals - forecasts).array().square();
}

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

std::string test_result_json(const TestResult& result) {
  nlohmann::json j;
  j["test"] = result.test;
  j["statistic"] = result.statistic;
  j["p_value"] = result.p_value;
  j["alternative"] = result.alternative;
  if (result.test == "dm") j["lag"] = result.lag;
  if (result.test == "rc") {
    j["bootstrap"] = result.bootstrap;
    j["block_q"] = result.block_q;
    j["seed"] = result.seed;
  }
  return j.dump(2);
}

TestResult dm_test(const Eigen::VectorXd& loss_a, const Eigen::VectorXd& loss_b,
                   TailDirection direction) {
  if (loss_a.size() != loss_b.size()) {
    throw Error(ErrorKind::dimension, "loss series differ in length");
  }
  const Eigen::Index n = loss_a.size();
  if (n < 5) throw Error(ErrorKind::insufficient_data, "DM test needs at least 5 points");

  const Eigen::VectorXd d = loss_a - loss_b;
  const int lag = static_cast<int>(std::floor(std::cbrt(static_cast<double>(n))));

  TestResult result;
  result.test = "dm";
  result.lag = lag;
  result.alternative = direction == TailDirection::less ? "a<b" : "a>b";

  const double dbar = d.mean();
  const Eigen::VectorXd dc = d.array() - dbar;
  double lrv = dc.squaredNorm() / static_cast<double>(n);
  for (int j = 1; j <= lag; ++j) {
    const double gamma_j =
        dc.tail(n - j).dot(dc.head(n - j)) / static_cast<double>(n);
    lrv += 2.0 * (1.0 - static_cast<double>(j) / static_cast<double>(lag + 1)) * gamma_j;
  }

  if (!(lrv > 0.0)) {
    if (dbar == 0.0) {
      result.statistic = 0.0;
      result.p_value = 0.5;
      return result;
    }
    throw Error(ErrorKind::degenerate_distribution,
                "constant nonzero loss differential has zero long-run variance");
  }

  result.statistic = dbar / std::sqrt(lrv / static_cast<double>(n));
  result.p_value = direction == TailDirection::less ? normal_cdf(result.statistic)
                                                    : normal_cdf(-result.statistic);
  return result;
}

TestResult rc_test(const Eigen::VectorXd& benchmark_loss,
                   const std::vector<Eigen::VectorXd>& candidate_losses, int B, double q,
                   std::uint64_t seed, int threads) {
  const Eigen::Index n = benchmark_loss.size();
  if (n < 10) throw Error(ErrorKind::insufficient_data, "reality check needs at least 10 points");
  if (candidate_losses.empty()) {
    throw Error(ErrorKind::config, "reality check needs at least one candidate");
  }
  if (B < 100) throw Error(ErrorKind::config, "bootstrap replicate count must be at least 100");
  if (!(q > 0.0) || !(q < 1.0)) {
    throw Error(ErrorKind::config, "block restart probability must lie in (0,1)");
  }

  const int K = static_cast<int>(candidate_losses.size());
  Eigen::MatrixXd f(n, K);
  for (int k = 0; k < K; ++k) {
    if (candidate_losses[static_cast<std::size_t>(k)].size() != n) {
      throw Error(ErrorKind::dimension, "candidate loss series differ in length");
    }
    f.col(k) = benchmark_loss - candidate_losses[static_cast<std::size_t>(k)];
  }
  const Eigen::VectorXd fbar = f.colwise().mean();
  const double root_n = std::sqrt(static_cast<double>(n));
  const double v_stat = root_n * fbar.maxCoeff();

  std::vector<double> boot(static_cast<std::size_t>(B));
  parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
    Rng rng(seed, b);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(K);
    Eigen::Index idx = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    sum += f.row(idx).transpose();
    for (Eigen::Index t = 1; t < n; ++t) {
      if (rng.uniform() < q) {
        idx = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
      } else {
        idx = (idx + 1) % n;
      }
      sum += f.row(idx).transpose();
    }
    boot[b] = root_n * (sum / static_cast<double>(n) - fbar).maxCoeff();
  }, threads);

  int exceed = 0;
  for (double s : boot) {
    if (s >= v_stat) ++exceed;
  }

  TestResult result;
  result.test = "rc";
  result.alternative = "some candidate beats benchmark";
  result.statistic = v_stat;
  result.p_value = static_cast<double>(exceed) / static_cast<double>(B);
  result.bootstrap = B;
  result.block_q = q;
  result.seed = seed;
  return result;
}

std::string ascfe_table_csv(const std::vector<std::string>& methods,
                            const Eigen::VectorXd& mean_ascfe, const Eigen::VectorXd& sd_ascfe) {
  const Eigen::Index m = static_cast<Eigen::Index>(methods.size());
  if (mean_ascfe.size() != m || sd_ascfe.size() != m) {
    throw Error(ErrorKind::dimension, "summary columns differ in length");
  }
  std::string out = "method,ascfe,sd\n";
  for (Eigen::Index i = 0; i < m; ++i) {
    out += methods[static_cast<std::size_t>(i)];
    out += ',';
    out += format_double(mean_ascfe(i));
    out += ',';
    out += format_double(sd_ascfe(i));
    out += '\n';
  }
  return out;
}

}  // namespace tvc
