#include "tvc/panel.hpp"

#include <cmath>
#include <utility>

#include <nlohmann/json.hpp>

#include "tvc/csv.hpp"
#include "tvc/errors.hpp"

namespace tvc {

void ForecastPanel::validate() const {
  if (F.cols() < 1) throw Error(ErrorKind::schema, "panel needs at least one forecast column");
  if (F.rows() < 2) throw Error(ErrorKind::insufficient_data, "panel needs at least two forecast/target pairs");
  if (y.size() != F.rows() + 1) {
    throw Error(ErrorKind::dimension,
                "target length " + std::to_string(y.size()) + " must be one more than forecast rows " +
                    std::to_string(F.rows()));
  }
  if (!y.allFinite()) throw Error(ErrorKind::domain, "non-finite target value");
  if (!F.allFinite()) throw Error(ErrorKind::domain, "non-finite forecast value");
  if (!names.empty() && names.size() != static_cast<std::size_t>(F.cols())) {
    throw Error(ErrorKind::dimension, "forecast name count does not match columns");
  }
}

ForecastPanel ForecastPanel::prefix(int n_pairs) const {
  if (n_pairs < 2 || n_pairs > T()) {
    throw Error(ErrorKind::insufficient_data, "prefix length out of range: " + std::to_string(n_pairs));
  }
  ForecastPanel out;
  out.y = y.head(n_pairs + 1);
  out.F = F.topRows(n_pairs);
  out.names = names;
  return out;
}

ForecastPanel make_panel(Eigen::VectorXd y, Eigen::MatrixXd F, std::vector<std::string> names) {
  ForecastPanel panel;
  panel.y = std::move(y);
  panel.F = std::move(F);
  if (names.empty()) {
    for (int j = 0; j < panel.p(); ++j) names.push_back("f" + std::to_string(j + 1));
  }
  panel.names = std::move(names);
  panel.validate();
  return panel;
}

ForecastPanel load_csv(const std::string& path, const std::string& target) {
  return load_csv_with_tail(path, target).panel;
}

LoadedPanel load_csv_with_tail(const std::string& path, const std::string& target) {
  CsvTable table = read_numeric_csv(path);
  int target_col = -1;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] == target) {
      target_col = static_cast<int>(j);
      break;
    }
  }
  if (target_col < 0) {
    throw Error(ErrorKind::schema, "target column '" + target + "' not found", path);
  }
  if (table.header.size() < 2) {
    throw Error(ErrorKind::schema, "need at least one forecast column besides the target", path);
  }
  Eigen::Index n = table.values.rows();
  if (n < 3) {
    throw Error(ErrorKind::insufficient_data,
                "need at least 3 data rows to form 2 forecast/target pairs", path);
  }

  Eigen::Index p = static_cast<Eigen::Index>(table.header.size()) - 1;
  ForecastPanel panel;
  panel.y = table.values.col(target_col);
  panel.F.resize(n - 1, p);
  Eigen::VectorXd tail(p);
  Eigen::Index jj = 0;
  for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
    if (j == target_col) continue;
    panel.F.col(jj) = table.values.col(j).head(n - 1);
    tail(jj) = table.values(n - 1, j);
    panel.names.push_back(table.header[static_cast<std::size_t>(j)]);
    ++jj;
  }
  panel.validate();
  return {std::move(panel), std::move(tail)};
}

namespace {

void check_scale(double sd, double mean, const std::string& what) {
  double floor = 1e-12 * std::max(1.0, std::abs(mean));
  if (!(sd > floor)) {
    throw Error(ErrorKind::degenerate_scale, "near-constant column: " + what, what);
  }
}

}  // namespace

Standardizer fit_standardizer(const ForecastPanel& panel) {
  panel.validate();
  Standardizer s;
  Eigen::Index ny = panel.y.size();
  s.y_mean = panel.y.mean();
  s.y_sd = std::sqrt((panel.y.array() - s.y_mean).square().sum() / static_cast<double>(ny - 1));
  check_scale(s.y_sd, s.y_mean, "target");

  int p = panel.p();
  s.f_mean.resize(p);
  s.f_sd.resize(p);
  Eigen::Index nf = panel.F.rows();
  for (int j = 0; j < p; ++j) {
    double m = panel.F.col(j).mean();
    double sd = std::sqrt((panel.F.col(j).array() - m).square().sum() / static_cast<double>(nf - 1));
    std::string name = panel.names.empty() ? "f" + std::to_string(j + 1) : panel.names[j];
    check_scale(sd, m, name);
    s.f_mean(j) = m;
    s.f_sd(j) = sd;
  }
  return s;
}

ForecastPanel standardize(const ForecastPanel& panel, const Standardizer& s) {
  ForecastPanel out = panel;
  out.y = (panel.y.array() - s.y_mean) / s.y_sd;
  for (int j = 0; j < panel.p(); ++j) {
    out.F.col(j) = (panel.F.col(j).array() - s.f_mean(j)) / s.f_sd(j);
  }
  return out;
}

ForecastPanel destandardize(const ForecastPanel& panel, const Standardizer& s) {
  ForecastPanel out = panel;
  out.y = panel.y.array() * s.y_sd + s.y_mean;
  for (int j = 0; j < panel.p(); ++j) {
    out.F.col(j) = panel.F.col(j).array() * s.f_sd(j) + s.f_mean(j);
  }
  return out;
}

Eigen::MatrixXd destandardize_levels(const Eigen::MatrixXd& levels, const Standardizer& s) {
  if (levels.cols() != s.f_mean.size() + 1) {
    throw Error(ErrorKind::dimension, "weight matrix must have 1 + p columns");
  }
  Eigen::MatrixXd out(levels.rows(), levels.cols());
  for (Eigen::Index j = 1; j < levels.cols(); ++j) {
    out.col(j) = levels.col(j) * (s.y_sd / s.f_sd(j - 1));
  }
  out.col(0) = Eigen::VectorXd::Constant(levels.rows(), s.y_mean) + s.y_sd * levels.col(0);
  for (Eigen::Index j = 1; j < levels.cols(); ++j) {
    out.col(0) -= out.col(j) * s.f_mean(j - 1);
  }
  return out;
}

Eigen::MatrixXd destandardize_slopes(const Eigen::MatrixXd& slopes, const Standardizer& s) {
  if (slopes.cols() != s.f_mean.size() + 1) {
    throw Error(ErrorKind::dimension, "slope matrix must have 1 + p columns");
  }
  Eigen::MatrixXd out(slopes.rows(), slopes.cols());
  for (Eigen::Index j = 1; j < slopes.cols(); ++j) {
    out.col(j) = slopes.col(j) * (s.y_sd / s.f_sd(j - 1));
  }
  out.col(0) = s.y_sd * slopes.col(0);
  for (Eigen::Index j = 1; j < slopes.cols(); ++j) {
    out.col(0) -= out.col(j) * s.f_mean(j - 1);
  }
  return out;
}

std::string panel_to_json(const ForecastPanel& panel) {
  nlohmann::json j;
  j["target"] = std::vector<double>(panel.y.data(), panel.y.data() + panel.y.size());
  j["names"] = panel.names;
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < panel.F.rows(); ++i) {
    rows.emplace_back(panel.F.row(i).begin(), panel.F.row(i).end());
  }
  j["forecasts"] = rows;
  return j.dump(2);
}

ForecastPanel panel_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("invalid JSON: ") + e.what());
  }
  if (!j.contains("target") || !j.contains("forecasts")) {
    throw Error(ErrorKind::schema, "panel JSON needs 'target' and 'forecasts'");
  }
  std::vector<double> y = j["target"].get<std::vector<double>>();
  std::vector<std::vector<double>> rows = j["forecasts"].get<std::vector<std::vector<double>>>();
  std::vector<std::string> names;
  if (j.contains("names")) names = j["names"].get<std::vector<std::string>>();

  Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::MatrixXd F(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != static_cast<std::size_t>(F.cols())) {
      throw Error(ErrorKind::schema, "ragged forecast rows in panel JSON");
    }
    for (std::size_t k = 0; k < rows[i].size(); ++k) F(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return make_panel(std::move(yv), std::move(F), std::move(names));
}

}  // namespace tvc
