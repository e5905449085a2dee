// Command-line front end: run, check, discretize, oracle, sweep.
// Exit codes: 0 success, 2 validation or parse failure, 3 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "onebit/analysis.hpp"
#include "onebit/engine.hpp"
#include "onebit/io.hpp"
#include "onebit/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

fs::path output_path(const std::string& out) {
  fs::path p(out);
  if (p.is_relative()) {
    if (const char* dir = std::getenv("ONEBIT_OUT_DIR"); dir && *dir) p = fs::path(dir) / p;
  }
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size() && cell.find_first_not_of(" \t", used) != std::string::npos)
        throw std::invalid_argument(cell);
    } catch (const std::logic_error&) {
      throw onebit::Error(onebit::ErrorCode::ParseError, "not a number: '" + cell + "'");
    }
  }
  return out;
}

/// eta file: a JSON array, or one number per line.
std::vector<double> read_series(const std::string& path) {
  std::ifstream in(path);
  onebit::require(in.good(), onebit::ErrorCode::ParseError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      return json::parse(text).get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw onebit::Error(onebit::ErrorCode::ParseError, path + ": " + e.what());
    }
  }
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  std::stringstream lines(text);
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(std::stod(line));
    } catch (const std::logic_error&) {
      throw onebit::Error(onebit::ErrorCode::ParseError,
                          path + ":" + std::to_string(lineno) + ": not a number");
    }
  }
  return out;
}

json matrix_json(const onebit::Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

struct RunOptions {
  std::string scenario;
  std::string out;
  std::string format = "csv";
  int reps = 0;
  long long seed = -1;
  long long horizon = 0;
  int threads = 0;
  bool every_step = false;
};

void apply_overrides(onebit::Scenario& s, const RunOptions& o) {
  if (o.reps > 0) s.config.replications = o.reps;
  if (o.seed >= 0) s.config.seed = static_cast<std::uint64_t>(o.seed);
  if (o.horizon > 0) s.config.horizon = o.horizon;
  s.config.threads = o.threads;
  s.config.record_every_step = o.every_step;
}

int cmd_run(const RunOptions& o) {
  auto s = onebit::load_scenario(o.scenario);
  apply_overrides(s, o);
  const auto metrics = onebit::run_replications(s.config);
  const auto summary = onebit::run_summary(s, metrics);
  if (o.out.empty()) {
    if (o.format == "csv") onebit::write_csv(std::cout, metrics);
    else std::cout << summary.dump(2) << '\n';
    return 0;
  }
  const auto path = output_path(o.out);
  if (o.format == "csv") {
    std::ofstream csv(path);
    onebit::write_csv(csv, metrics);
    auto side = path;
    side.replace_extension(".summary.json");
    std::ofstream(side) << summary.dump(2) << '\n';
    std::cerr << "wrote " << path.string() << " and " << side.string() << '\n';
  } else {
    std::ofstream(path) << summary.dump(2) << '\n';
    std::cerr << "wrote " << path.string() << '\n';
  }
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_check(const std::string& scenario) {
  const auto s = onebit::load_scenario(scenario);
  std::cout << onebit::check_report(s).dump(2) << '\n';
  return 0;
}

int cmd_discretize(const std::string& scenario) {
  const auto s = onebit::load_scenario(scenario);
  onebit::require(s.continuous.has_value(), onebit::ErrorCode::NotContinuous,
                  "scenario has no continuous block");
  const auto d = onebit::zoh_discretize(*s.continuous, s.period);
  json j;
  j["T"] = s.period;
  j["A_d"] = matrix_json(d.A());
  j["B_d"] = std::vector<double>(d.B().data(), d.B().data() + d.B().size());
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_oracle(const std::string& b_text, const std::string& eta_path, std::optional<double> limit) {
  const auto b = b_text.empty() ? std::vector<double>{} : parse_list(b_text);
  const auto eta = read_series(eta_path);
  const auto r = onebit::difference_equation_oracle(b, eta, limit);
  json j;
  j["xi"] = r.xi;
  j["xi_final"] = r.xi.empty() ? 0.0 : r.xi.back();
  j["limit"] = r.limit ? json(*r.limit) : json(nullptr);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_sweep(const RunOptions& o, const std::string& param, const std::string& values) {
  onebit::require(param == "beta" || param == "gamma", onebit::ErrorCode::ValidationError,
                  "--param must be beta or gamma");
  const auto grid = parse_list(values);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(output_path(o.out));
    out = &file;
  }
  *out << param << ",slope,r2,final_mse,lambda_min_U,regime\n";
  for (double v : grid) {
    auto s = onebit::load_scenario(o.scenario);
    apply_overrides(s, o);
    (param == "beta" ? s.config.beta : s.config.gamma) = v;
    const auto k = onebit::theorem_constants(s.config.topology, s.config.link, s.config.radius);
    const auto u = onebit::lambda_min_U(s.config.beta, s.config.gamma, k);
    const auto metrics = onebit::run_replications(s.config);
    const auto summary = onebit::run_summary(s, metrics);
    *out << onebit::format_double(v) << ','
         << (summary["slope"].is_null() ? std::string("nan")
                                        : onebit::format_double(summary["slope"].get<double>()))
         << ','
         << (summary.contains("r2") ? onebit::format_double(summary["r2"].get<double>())
                                    : std::string("nan"))
         << ',' << onebit::format_double(summary["final_mse"].get<double>()) << ','
         << onebit::format_double(u.value) << ',' << onebit::to_string(u.regime) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-bit consensus simulator for linear multi-agent systems"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Simulate a scenario and emit a trace and summary");
  run->add_option("--scenario", run_opts.scenario, "Scenario JSON")->required();
  run->add_option("--reps", run_opts.reps, "Replications (overrides the scenario)");
  run->add_option("--seed", run_opts.seed, "Seed (overrides the scenario)");
  run->add_option("--horizon", run_opts.horizon, "Steps (overrides the scenario)");
  run->add_option("--threads", run_opts.threads, "Worker threads, 0 for all cores");
  run->add_option("--out", run_opts.out, "Output file; relative paths resolve under $ONEBIT_OUT_DIR");
  run->add_option("--format", run_opts.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  run->add_flag("--every-step", run_opts.every_step, "Record every step instead of decimating");

  std::string check_scenario;
  auto* check = app.add_subcommand("check", "Theorem constants and beta/gamma admissibility");
  check->add_option("--scenario", check_scenario, "Scenario JSON")->required();

  std::string disc_scenario;
  auto* disc = app.add_subcommand("discretize", "Zero-order-hold discretization of the continuous block");
  disc->add_option("--scenario", disc_scenario, "Scenario JSON")->required();

  std::string oracle_b;
  std::string oracle_eta;
  std::optional<double> oracle_limit;
  auto* oracle = app.add_subcommand("oracle", "Iterate the compressed-state difference equation");
  oracle->add_option("--b", oracle_b, "Comma-separated coefficients b_1..b_m");
  oracle->add_option("--eta", oracle_eta, "File with the eta sequence")->required();
  oracle->add_option("--limit", oracle_limit, "Limit of eta, for the predicted xi limit");

  RunOptions sweep_opts;
  std::string sweep_param;
  std::string sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Slope of the consensus error across a beta or gamma grid");
  sweep->add_option("--scenario", sweep_opts.scenario, "Scenario JSON")->required();
  sweep->add_option("--param", sweep_param, "beta or gamma")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated grid")->required();
  sweep->add_option("--reps", sweep_opts.reps, "Replications per grid point");
  sweep->add_option("--seed", sweep_opts.seed, "Seed");
  sweep->add_option("--horizon", sweep_opts.horizon, "Steps");
  sweep->add_option("--threads", sweep_opts.threads, "Worker threads");
  sweep->add_option("--out", sweep_opts.out, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*check) return cmd_check(check_scenario);
    if (*disc) return cmd_discretize(disc_scenario);
    if (*oracle) return cmd_oracle(oracle_b, oracle_eta, oracle_limit);
    if (*sweep) return cmd_sweep(sweep_opts, sweep_param, sweep_values);
  } catch (const onebit::Error& e) {
    std::cerr << "error [" << onebit::to_string(e.code()) << "]: " << e.what() << '\n';
    return e.error_class() == onebit::ErrorClass::Numeric ? kExitNumeric : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
