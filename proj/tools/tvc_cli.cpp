#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "tvc/bandwidth.hpp"
#include "tvc/baselines.hpp"
#include "tvc/csv.hpp"
#include "tvc/errors.hpp"
#include "tvc/evaluation.hpp"
#include "tvc/kernel.hpp"
#include "tvc/local_linear.hpp"
#include "tvc/panel.hpp"
#include "tvc/parallel.hpp"
#include "tvc/simulation.hpp"
#include "tvc/sparse_tvc.hpp"

namespace {

// Settings shared by the file-consuming subcommands. A value counts as
// "given" only when it came from the command line; config-file values fill
// the gaps afterwards, so flags always win.
struct CommonOpts {
  std::string input;
  std::string target = "y";
  std::string kernel = "epanechnikov";
  std::string out = ".";
  std::string config_path;
  double bandwidth = 0.0;
  std::string cv_spec;
  int threads = 0;
  std::uint64_t seed = 0;
};

struct OptSeen {
  CLI::Option* input = nullptr;
  CLI::Option* target = nullptr;
  CLI::Option* kernel = nullptr;
  CLI::Option* out = nullptr;
  CLI::Option* bandwidth = nullptr;
  CLI::Option* cv = nullptr;
  CLI::Option* threads = nullptr;
  CLI::Option* seed = nullptr;
};

OptSeen add_common(CLI::App* cmd, CommonOpts& o, bool with_bandwidth) {
  OptSeen seen;
  seen.input = cmd->add_option("--input", o.input, "Input CSV path");
  seen.target = cmd->add_option("--target", o.target, "Name of the target column");
  seen.kernel = cmd->add_option("--kernel", o.kernel, "Kernel: epanechnikov, uniform, quartic")
                    ->check(CLI::IsMember({"epanechnikov", "uniform", "quartic"}));
  seen.out = cmd->add_option("--out", o.out, "Output directory");
  seen.threads = cmd->add_option("--threads", o.threads,
                                 "Worker threads (0 = TVC_THREADS env, then hardware)");
  seen.seed = cmd->add_option("--seed", o.seed, "Top-level RNG seed");
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its values");
  if (with_bandwidth) {
    seen.bandwidth = cmd->add_option("--bandwidth", o.bandwidth, "Fixed bandwidth in (0, 1]");
    seen.cv = cmd->add_option("--cv", o.cv_spec,
                              "Bandwidth CV spec c1,c2,n (grid [c1,c2]*T^-0.2, n points)");
    seen.bandwidth->excludes(seen.cv);
    seen.cv->excludes(seen.bandwidth);
  }
  return seen;
}

// Config-file values are accepted as native JSON types or as the string a
// user would have typed after the flag.
class ConfigDoc {
 public:
  void load(const std::string& path) {
    if (path.empty()) return;
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(tvc::read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw tvc::Error(tvc::ErrorKind::parse, std::string("config file: ") + e.what(), path);
    }
    if (!parsed.is_object()) {
      throw tvc::Error(tvc::ErrorKind::config, "config file must hold a JSON object", path);
    }
    doc_ = std::move(parsed);
  }

  bool has(const std::string& key) const { return doc_.contains(key); }

  std::string str(const std::string& key) const {
    const auto& v = doc_.at(key);
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }

  double number(const std::string& key) const {
    const auto& v = doc_.at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      try {
        std::size_t pos = 0;
        const std::string s = v.get<std::string>();
        const double d = std::stod(s, &pos);
        if (pos == s.size()) return d;
      } catch (const std::exception&) {
      }
    }
    throw tvc::Error(tvc::ErrorKind::config, "config key '" + key + "' is not a number");
  }

  std::vector<std::string> strings(const std::string& key) const {
    const auto& v = doc_.at(key);
    std::vector<std::string> out;
    if (v.is_array()) {
      for (const auto& e : v) {
        if (!e.is_string()) {
          throw tvc::Error(tvc::ErrorKind::config, "config key '" + key + "' has a non-string");
        }
        out.push_back(e.get<std::string>());
      }
      return out;
    }
    if (v.is_string()) {
      out.push_back(v.get<std::string>());
      return out;
    }
    throw tvc::Error(tvc::ErrorKind::config, "config key '" + key + "' is not a string list");
  }

  std::vector<double> numbers(const std::string& key) const {
    const auto& v = doc_.at(key);
    std::vector<double> out;
    if (v.is_array()) {
      for (const auto& e : v) {
        if (!e.is_number()) {
          throw tvc::Error(tvc::ErrorKind::config, "config key '" + key + "' has a non-number");
        }
        out.push_back(e.get<double>());
      }
      return out;
    }
    if (v.is_string() || v.is_number()) {
      std::stringstream ss(str(key));
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
      }
      return out;
    }
    throw tvc::Error(tvc::ErrorKind::config, "config key '" + key + "' is not a list");
  }

 private:
  nlohmann::json doc_;
};

void merge_common(const ConfigDoc& cfg, CommonOpts& o, const OptSeen& seen) {
  if (cfg.has("input") && seen.input->count() == 0) o.input = cfg.str("input");
  if (cfg.has("target") && seen.target->count() == 0) o.target = cfg.str("target");
  if (cfg.has("kernel") && seen.kernel->count() == 0) o.kernel = cfg.str("kernel");
  if (cfg.has("out") && seen.out->count() == 0) o.out = cfg.str("out");
  if (cfg.has("threads") && seen.threads->count() == 0) {
    o.threads = static_cast<int>(cfg.number("threads"));
  }
  if (cfg.has("seed") && seen.seed->count() == 0) {
    o.seed = static_cast<std::uint64_t>(cfg.number("seed"));
  }
  if (seen.bandwidth != nullptr) {
    if (cfg.has("bandwidth") && seen.bandwidth->count() == 0 && seen.cv->count() == 0) {
      o.bandwidth = cfg.number("bandwidth");
    }
    if (cfg.has("cv") && seen.cv->count() == 0 && seen.bandwidth->count() == 0 &&
        !(cfg.has("bandwidth") && seen.bandwidth->count() == 0)) {
      o.cv_spec = cfg.str("cv");
    }
  }
}

struct CvSpec {
  double c1 = 0.5;
  double c2 = 3.0;
  int n_grid = 20;
};

CvSpec parse_cv_spec(const std::string& spec) {
  CvSpec out;
  if (spec.empty()) return out;
  std::stringstream ss(spec);
  std::string tok;
  std::vector<double> vals;
  while (std::getline(ss, tok, ',')) {
    try {
      vals.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw tvc::Error(tvc::ErrorKind::config, "bad --cv value '" + tok + "'", spec);
    }
  }
  if (vals.size() != 3) {
    throw tvc::Error(tvc::ErrorKind::config, "--cv wants c1,c2,n", spec);
  }
  out.c1 = vals[0];
  out.c2 = vals[1];
  out.n_grid = static_cast<int>(vals[2]);
  return out;
}

void check_input_given(const CommonOpts& o) {
  if (o.input.empty()) {
    throw tvc::Error(tvc::ErrorKind::config, "no input file given (--input or config)");
  }
}

std::filesystem::path ensure_out_dir(const std::string& out) {
  std::filesystem::path dir(out.empty() ? "." : out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw tvc::Error(tvc::ErrorKind::io, "cannot create output directory: " + ec.message(),
                     dir.string());
  }
  return dir;
}

void emit(const std::filesystem::path& path, const std::string& content) {
  tvc::write_text_file(path.string(), content);
  std::cout << "wrote " << path.string() << "\n";
}

// Fits either at the fixed bandwidth or at the CV choice; curve is non-null
// when CV ran.
struct BandwidthChoice {
  double h = 0.0;
  bool from_cv = false;
  tvc::CvCurve curve;
};

BandwidthChoice choose_bandwidth(const tvc::ForecastPanel& panel, const tvc::Kernel& kernel,
                                 const CommonOpts& o, const OptSeen& seen, const ConfigDoc& cfg) {
  BandwidthChoice choice;
  const bool fixed = seen.bandwidth->count() > 0 ||
                     (cfg.has("bandwidth") && seen.cv->count() == 0);
  if (fixed && o.bandwidth > 0.0) {
    choice.h = o.bandwidth;
    return choice;
  }
  if (fixed) {
    throw tvc::Error(tvc::ErrorKind::config, "bandwidth must be positive");
  }
  const CvSpec spec = parse_cv_spec(o.cv_spec);
  choice.curve = tvc::select_bandwidth(panel, kernel, spec.c1, spec.c2, spec.n_grid, o.threads);
  choice.h = choice.curve.h_star;
  choice.from_cv = true;
  return choice;
}

int cmd_estimate(const CommonOpts& o, const OptSeen& seen, const ConfigDoc& cfg) {
  check_input_given(o);
  const tvc::Kernel kernel = tvc::Kernel::from_name(o.kernel);
  const tvc::ForecastPanel panel = tvc::load_csv(o.input, o.target);
  const BandwidthChoice bw = choose_bandwidth(panel, kernel, o, seen, cfg);
  const tvc::WeightPath path = tvc::fit_path(panel, bw.h, kernel, o.threads);
  const auto dir = ensure_out_dir(o.out);
  emit(dir / "weights.csv", tvc::weight_path_csv(path));
  emit(dir / "weights.json", tvc::weight_path_json(path));
  if (bw.from_cv) emit(dir / "cv_curve.csv", tvc::cv_curve_csv(bw.curve));
  return 0;
}

int cmd_forecast(const CommonOpts& o, const OptSeen& seen, const ConfigDoc& cfg) {
  check_input_given(o);
  const tvc::Kernel kernel = tvc::Kernel::from_name(o.kernel);
  const tvc::LoadedPanel loaded = tvc::load_csv_with_tail(o.input, o.target);
  const BandwidthChoice bw = choose_bandwidth(loaded.panel, kernel, o, seen, cfg);
  const double yhat = tvc::forecast_next(loaded.panel, bw.h, kernel, loaded.next_forecasts);
  nlohmann::json j;
  j["forecast"] = yhat;
  j["h"] = bw.h;
  j["h_from_cv"] = bw.from_cv;
  j["kernel"] = kernel.name();
  j["T"] = loaded.panel.T();
  j["p"] = loaded.panel.p();
  const auto dir = ensure_out_dir(o.out);
  emit(dir / "forecast.json", j.dump(2) + "\n");
  if (bw.from_cv) emit(dir / "cv_curve.csv", tvc::cv_curve_csv(bw.curve));
  return 0;
}

int cmd_cv(const CommonOpts& o) {
  check_input_given(o);
  const tvc::Kernel kernel = tvc::Kernel::from_name(o.kernel);
  const tvc::ForecastPanel panel = tvc::load_csv(o.input, o.target);
  const CvSpec spec = parse_cv_spec(o.cv_spec);
  const tvc::CvCurve curve =
      tvc::select_bandwidth(panel, kernel, spec.c1, spec.c2, spec.n_grid, o.threads);
  nlohmann::json j;
  j["h_star"] = curve.h_star;
  j["kernel"] = kernel.name();
  j["warnings"] = curve.warnings;
  const auto dir = ensure_out_dir(o.out);
  emit(dir / "cv_curve.csv", tvc::cv_curve_csv(curve));
  emit(dir / "cv.json", j.dump(2) + "\n");
  return 0;
}

int cmd_two_stage(const CommonOpts& o, const std::string& lambda_grid_spec, bool grid_given,
                  double bandwidth_constant) {
  check_input_given(o);
  const tvc::Kernel kernel = tvc::Kernel::from_name(o.kernel);
  const tvc::ForecastPanel panel = tvc::load_csv(o.input, o.target);
  Eigen::VectorXd grid;
  if (grid_given) {
    std::vector<double> vals;
    std::stringstream ss(lambda_grid_spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      try {
        vals.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw tvc::Error(tvc::ErrorKind::config, "bad --lambda-grid value '" + tok + "'");
      }
    }
    if (vals.empty()) {
      throw tvc::Error(tvc::ErrorKind::config, "empty lambda3 grid");
    }
    grid = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  }
  const tvc::StagedPaths paths = tvc::fit_two_stage(panel, grid, bandwidth_constant, kernel);
  const auto dir = ensure_out_dir(o.out);
  emit(dir / "two_stage.csv", tvc::staged_paths_csv(paths));
  emit(dir / "two_stage.json", tvc::staged_paths_json(paths));
  return 0;
}

int cmd_simulate(const CommonOpts& o, const ConfigDoc& cfg, int table, CLI::Option* table_opt,
                 int reps, CLI::Option* reps_opt, std::vector<int> T_list, CLI::Option* T_opt,
                 std::vector<int> J_list, CLI::Option* J_opt, int n_oos, CLI::Option* oos_opt) {
  if (cfg.has("table") && table_opt->count() == 0) table = static_cast<int>(cfg.number("table"));
  if (cfg.has("reps") && reps_opt->count() == 0) reps = static_cast<int>(cfg.number("reps"));
  if (cfg.has("T") && T_opt->count() == 0) {
    T_list.clear();
    for (double v : cfg.numbers("T")) T_list.push_back(static_cast<int>(v));
  }
  if (cfg.has("J") && J_opt->count() == 0) {
    J_list.clear();
    for (double v : cfg.numbers("J")) J_list.push_back(static_cast<int>(v));
  }
  if (cfg.has("oos") && oos_opt->count() == 0) n_oos = static_cast<int>(cfg.number("oos"));
  if (table != 1 && table != 2) {
    throw tvc::Error(tvc::ErrorKind::config, "--table must be 1 or 2");
  }
  const auto dir = ensure_out_dir(o.out);
  if (table == 1) {
    tvc::Table1Config c;
    c.reps = reps;
    if (!T_list.empty()) c.T_list = T_list;
    if (n_oos > 0) c.n_oos = n_oos;
    c.seed = o.seed;
    c.threads = o.threads;
    const CvSpec spec = parse_cv_spec(o.cv_spec);
    c.c1 = spec.c1;
    c.c2 = spec.c2;
    c.n_grid = spec.n_grid;
    const tvc::Table1Result r = tvc::run_table1(c);
    emit(dir / "table1.csv", tvc::table1_csv(r));
    emit(dir / "table1_manifest.json", tvc::table1_manifest_json(c, r));
  } else {
    tvc::Table2Config c;
    c.reps = reps;
    if (!T_list.empty()) c.T_list = T_list;
    if (!J_list.empty()) c.J_list = J_list;
    if (n_oos > 0) c.n_oos = n_oos;
    c.seed = o.seed;
    c.threads = o.threads;
    const tvc::Table2Result r = tvc::run_table2(c);
    emit(dir / "table2.csv", tvc::table2_csv(r));
    emit(dir / "table2_manifest.json", tvc::table2_manifest_json(c, r));
  }
  return 0;
}

struct Comparison {
  std::string a;
  std::string b;
  tvc::TailDirection direction = tvc::TailDirection::less;
};

Comparison parse_comparison(const std::string& spec) {
  const auto lt = spec.find('<');
  const auto gt = spec.find('>');
  Comparison c;
  std::size_t pos;
  if (lt != std::string::npos && gt == std::string::npos) {
    pos = lt;
    c.direction = tvc::TailDirection::less;
  } else if (gt != std::string::npos && lt == std::string::npos) {
    pos = gt;
    c.direction = tvc::TailDirection::greater;
  } else {
    throw tvc::Error(tvc::ErrorKind::config,
                     "comparison wants exactly one of '<' or '>': " + spec);
  }
  c.a = spec.substr(0, pos);
  c.b = spec.substr(pos + 1);
  if (c.a.empty() || c.b.empty()) {
    throw tvc::Error(tvc::ErrorKind::config, "comparison names a missing method: " + spec);
  }
  return c;
}

int cmd_evaluate(const CommonOpts& o, const ConfigDoc& cfg, std::vector<std::string> compares,
                 CLI::Option* compare_opt, std::string rc_benchmark, CLI::Option* rc_opt,
                 int bootstrap, CLI::Option* bootstrap_opt, double block_q,
                 CLI::Option* block_q_opt) {
  check_input_given(o);
  if (cfg.has("compare") && compare_opt->count() == 0) compares = cfg.strings("compare");
  if (cfg.has("rc") && rc_opt->count() == 0) rc_benchmark = cfg.str("rc");
  if (cfg.has("bootstrap") && bootstrap_opt->count() == 0) {
    bootstrap = static_cast<int>(cfg.number("bootstrap"));
  }
  if (cfg.has("block-q") && block_q_opt->count() == 0) block_q = cfg.number("block-q");

  const tvc::CsvTable table = tvc::read_numeric_csv(o.input);
  const std::string actual_col = o.target == "y" ? std::string("actual") : o.target;
  int actual_idx = -1;
  std::vector<int> method_idx;
  std::vector<std::string> methods;
  for (int j = 0; j < static_cast<int>(table.header.size()); ++j) {
    if (table.header[j] == actual_col) {
      actual_idx = j;
    } else if (table.header[j] != "t") {
      method_idx.push_back(j);
      methods.push_back(table.header[j]);
    }
  }
  if (actual_idx < 0) {
    throw tvc::Error(tvc::ErrorKind::schema, "no column named '" + actual_col + "'", o.input);
  }
  if (methods.size() < 2) {
    throw tvc::Error(tvc::ErrorKind::schema, "need at least 2 method columns", o.input);
  }
  const Eigen::VectorXd actuals = table.values.col(actual_idx);
  const int n_methods = static_cast<int>(methods.size());

  auto find_method = [&](const std::string& name) {
    for (int k = 0; k < n_methods; ++k) {
      if (methods[k] == name) return k;
    }
    throw tvc::Error(tvc::ErrorKind::schema, "unknown method '" + name + "'", o.input);
  };

  Eigen::VectorXd mean_ascfe(n_methods), sd_ascfe(n_methods);
  std::vector<Eigen::VectorXd> losses(n_methods);
  for (int k = 0; k < n_methods; ++k) {
    losses[k] = tvc::squared_losses(actuals, table.values.col(method_idx[k]));
    mean_ascfe(k) = losses[k].mean();
    const double n = static_cast<double>(losses[k].size());
    sd_ascfe(k) = n > 1.0
                      ? std::sqrt((losses[k].array() - mean_ascfe(k)).square().sum() / (n - 1.0))
                      : 0.0;
  }

  nlohmann::json report;
  report["methods"] = methods;
  report["dm"] = nlohmann::json::array();
  for (const std::string& spec : compares) {
    const Comparison c = parse_comparison(spec);
    const int a = find_method(c.a);
    const int b = find_method(c.b);
    const tvc::TestResult r = tvc::dm_test(losses[a], losses[b], c.direction);
    nlohmann::json e;
    e["a"] = c.a;
    e["b"] = c.b;
    e["alternative"] = r.alternative;
    e["statistic"] = r.statistic;
    e["p_value"] = r.p_value;
    e["lag"] = r.lag;
    report["dm"].push_back(e);
  }
  if (!rc_benchmark.empty()) {
    const int bench = find_method(rc_benchmark);
    std::vector<Eigen::VectorXd> candidates;
    std::vector<std::string> candidate_names;
    for (int k = 0; k < n_methods; ++k) {
      if (k == bench) continue;
      candidates.push_back(losses[k]);
      candidate_names.push_back(methods[k]);
    }
    const tvc::TestResult r =
        tvc::rc_test(losses[bench], candidates, bootstrap, block_q, o.seed, o.threads);
    nlohmann::json e;
    e["benchmark"] = rc_benchmark;
    e["candidates"] = candidate_names;
    e["statistic"] = r.statistic;
    e["p_value"] = r.p_value;
    e["bootstrap"] = r.bootstrap;
    e["block_q"] = r.block_q;
    e["seed"] = r.seed;
    report["rc"] = e;
  }

  const auto dir = ensure_out_dir(o.out);
  emit(dir / "ascfe.csv", tvc::ascfe_table_csv(methods, mean_ascfe, sd_ascfe));
  emit(dir / "tests.json", report.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-varying forecast combination"};
  app.require_subcommand(1);

  CommonOpts est_o, fc_o, cv_o, ts_o, sim_o, ev_o;

  CLI::App* est = app.add_subcommand("estimate", "Fit combination weight paths from a panel CSV");
  OptSeen est_seen = add_common(est, est_o, true);

  CLI::App* fc = app.add_subcommand("forecast", "One-step-ahead combined forecast");
  OptSeen fc_seen = add_common(fc, fc_o, true);

  CLI::App* cv = app.add_subcommand("cv", "Leave-one-out bandwidth cross-validation");
  OptSeen cv_seen = add_common(cv, cv_o, false);
  CLI::Option* cv_spec_opt =
      cv->add_option("--cv", cv_o.cv_spec, "Grid spec c1,c2,n (default 0.5,3.0,20)");

  CLI::App* ts = app.add_subcommand("two-stage", "Penalized two-stage fit for wide panels");
  OptSeen ts_seen = add_common(ts, ts_o, false);
  std::string lambda_grid_spec;
  double bandwidth_constant = 1.0;
  CLI::Option* grid_opt = ts->add_option("--lambda-grid", lambda_grid_spec,
                                         "Comma-separated descending lambda3 grid");
  CLI::Option* bc_opt = ts->add_option("--bandwidth-constant", bandwidth_constant,
                                       "C in h = C (log(p+1)/T)^0.2");

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo comparison tables");
  OptSeen sim_seen = add_common(sim, sim_o, false);
  CLI::Option* sim_cv_opt =
      sim->add_option("--cv", sim_o.cv_spec, "Bandwidth CV spec c1,c2,n (table 1)");
  int table = 0, reps = 0, n_oos = 0;
  std::vector<int> T_list, J_list;
  CLI::Option* table_opt = sim->add_option("--table", table, "Which table: 1 or 2");
  CLI::Option* reps_opt = sim->add_option("--reps", reps, "Replication count");
  CLI::Option* T_opt = sim->add_option("--T", T_list, "Sample sizes")->delimiter(',');
  CLI::Option* J_opt = sim->add_option("--J", J_list, "Redundant forecast counts (table 2)")
                           ->delimiter(',');
  CLI::Option* oos_opt = sim->add_option("--oos", n_oos, "Out-of-sample points per replication");

  CLI::App* ev = app.add_subcommand("evaluate", "Accuracy table and DM/RC tests for an OOS CSV");
  OptSeen ev_seen = add_common(ev, ev_o, false);
  std::vector<std::string> compares;
  std::string rc_benchmark;
  int bootstrap = 1000;
  double block_q = 0.1;
  CLI::Option* compare_opt = ev->add_option(
      "--compare", compares, "One-sided DM comparison 'A<B' (A more accurate); repeatable");
  CLI::Option* rc_opt =
      ev->add_option("--rc", rc_benchmark, "Reality Check with this method as benchmark");
  CLI::Option* bootstrap_opt = ev->add_option("--bootstrap", bootstrap, "RC bootstrap replicates");
  CLI::Option* block_q_opt =
      ev->add_option("--block-q", block_q, "RC stationary bootstrap restart probability");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (est->parsed()) {
      ConfigDoc cfg;
      cfg.load(est_o.config_path);
      merge_common(cfg, est_o, est_seen);
      return cmd_estimate(est_o, est_seen, cfg);
    }
    if (fc->parsed()) {
      ConfigDoc cfg;
      cfg.load(fc_o.config_path);
      merge_common(cfg, fc_o, fc_seen);
      return cmd_forecast(fc_o, fc_seen, cfg);
    }
    if (cv->parsed()) {
      ConfigDoc cfg;
      cfg.load(cv_o.config_path);
      merge_common(cfg, cv_o, cv_seen);
      if (cfg.has("cv") && cv_spec_opt->count() == 0) cv_o.cv_spec = cfg.str("cv");
      return cmd_cv(cv_o);
    }
    if (ts->parsed()) {
      ConfigDoc cfg;
      cfg.load(ts_o.config_path);
      merge_common(cfg, ts_o, ts_seen);
      bool grid_given = grid_opt->count() > 0;
      if (cfg.has("lambda-grid") && !grid_given) {
        lambda_grid_spec.clear();
        bool first = true;
        for (double v : cfg.numbers("lambda-grid")) {
          if (!first) lambda_grid_spec += ',';
          lambda_grid_spec += tvc::format_double(v);
          first = false;
        }
        grid_given = true;
      }
      if (cfg.has("bandwidth-constant") && bc_opt->count() == 0) {
        bandwidth_constant = cfg.number("bandwidth-constant");
      }
      return cmd_two_stage(ts_o, lambda_grid_spec, grid_given, bandwidth_constant);
    }
    if (sim->parsed()) {
      ConfigDoc cfg;
      cfg.load(sim_o.config_path);
      merge_common(cfg, sim_o, sim_seen);
      if (cfg.has("cv") && sim_cv_opt->count() == 0) sim_o.cv_spec = cfg.str("cv");
      return cmd_simulate(sim_o, cfg, table, table_opt, reps, reps_opt, T_list, T_opt, J_list,
                          J_opt, n_oos, oos_opt);
    }
    if (ev->parsed()) {
      ConfigDoc cfg;
      cfg.load(ev_o.config_path);
      merge_common(cfg, ev_o, ev_seen);
      return cmd_evaluate(ev_o, cfg, compares, compare_opt, rc_benchmark, rc_opt, bootstrap,
                          bootstrap_opt, block_q, block_q_opt);
    }
  } catch (const tvc::Error& e) {
    nlohmann::json j;
    j["kind"] = tvc::error_kind_name(e.kind());
    j["location"] = e.location();
    j["message"] = e.what();
    std::cerr << j.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    nlohmann::json j;
    j["kind"] = "domain";
    j["location"] = "";
    j["message"] = e.what();
    std::cerr << j.dump() << "\n";
    return 1;
  }
  return 2;
}
