#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "onebit/analysis.hpp"
#include "onebit/engine.hpp"
#include "onebit/error.hpp"
#include "onebit/scenario.hpp"

namespace onebit {

/// Shortest round-trip text for a double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_header(int n) {
  std::string h = "t,m,agent";
  for (int k = 1; k <= n; ++k) h += ",x_" + std::to_string(k);
  return h + ",cons_err,V,R";
}

/// One line per (recorded t, agent): ensemble means of x_i and of the
/// consensus error, plus the ensemble-mean V and R samples. m is 1-based.
inline void write_csv(std::ostream& out, const EnsembleMetrics& m) {
  out << csv_header(m.n) << '\n';
  for (std::size_t r = 0; r < m.t.size(); ++r) {
    for (int i = 0; i < m.agents; ++i) {
      out << m.t[r] << ',' << (m.m[r] + 1) << ',' << (i + 1);
      for (int k = 0; k < m.n; ++k)
        out << ',' << format_double(m.x_mean[r][static_cast<std::size_t>(i * m.n + k)]);
      out << ',' << format_double(m.cons_err_mean[r][static_cast<std::size_t>(i)]) << ','
          << format_double(m.V_mean[r]) << ',' << format_double(m.R_mean[r]) << '\n';
    }
  }
}

struct CsvRow {
  long long t = 0;
  int m = 0;
  int agent = 0;
  std::vector<double> x;
  double cons_err = 0.0;
  double V = 0.0;
  double R = 0.0;
};

inline std::vector<CsvRow> read_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::ParseError, "empty trace file");
  int cols = 0;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) ++cols;
  }
  require(cols >= 7, ErrorCode::ParseError, "trace header has too few columns");
  const int n = cols - 6;
  require(line == csv_header(n), ErrorCode::ParseError, "unexpected trace header: " + line);
  std::vector<CsvRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    require(static_cast<int>(cells.size()) == cols, ErrorCode::ParseError,
            "line " + std::to_string(lineno) + ": expected " + std::to_string(cols) + " fields");
    try {
      CsvRow r;
      r.t = std::stoll(cells[0]);
      r.m = std::stoi(cells[1]);
      r.agent = std::stoi(cells[2]);
      for (int k = 0; k < n; ++k) r.x.push_back(std::stod(cells[static_cast<std::size_t>(3 + k)]));
      r.cons_err = std::stod(cells[static_cast<std::size_t>(3 + n)]);
      r.V = std::stod(cells[static_cast<std::size_t>(4 + n)]);
      r.R = std::stod(cells[static_cast<std::size_t>(5 + n)]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

/// Summary of an ensemble run: fitted slope of the max-over-agents consensus
/// error, its window, the final value, and the parameters that produced it.
inline nlohmann::json run_summary(const Scenario& s, const EnsembleMetrics& m,
                                  std::optional<std::pair<double, double>> window = {}) {
  const auto& c = s.config;
  nlohmann::json j;
  j["scenario"] = s.name;
  j["reconstructed"] = s.reconstructed;
  try {
    const auto fit = rate_slope(m, Metric::MaxConsensusError, window);
    j["slope"] = fit.slope;
    j["r2"] = fit.r2;
    j["slope_window"] = {fit.t_lo, fit.t_hi};
  } catch (const Error& e) {
    j["slope"] = nullptr;
    j["slope_error"] = e.what();
  }
  j["final_mse"] = m.max_cons_err.empty() ? 0.0 : m.max_cons_err.back();
  j["final_V"] = m.V_mean.empty() ? 0.0 : m.V_mean.back();
  j["final_R"] = m.R_mean.empty() ? 0.0 : m.R_mean.back();
  j["bound_violations"] = m.bound_violations;
  j["max_abs_compressed"] = m.max_abs_compressed;
  j["params"] = {{"beta", c.beta},
                 {"gamma", c.gamma},
                 {"M", c.radius},
                 {"sigma", c.link.noise.sigma()},
                 {"t0", effective_t0(c)},
                 {"horizon", c.horizon},
                 {"seed", c.seed},
                 {"replications", c.replications},
                 {"agents", c.topology.agents()},
                 {"graphs", c.topology.size()}};
  return j;
}

inline nlohmann::json check_report(const Scenario& s) {
  const auto& c = s.config;
  const auto k = theorem_constants(c.topology, c.link, c.radius);
  const auto r = rate_report(c.beta, c.gamma, k);
  nlohmann::json j;
  j["lambda2"] = k.lambda2;
  j["lambda_G"] = k.lambda_G;
  j["lambda_QW"] = k.lambda_QW;
  j["lambda_QL"] = k.lambda_QL;
  j["alpha"] = k.alpha;
  j["f_M"] = k.f_M;
  j["pi_min"] = k.pi_min;
  j["beta_min_consensus"] = r.beta_threshold_consensus;
  j["beta_min_rate"] = r.beta_threshold_rate ? nlohmann::json(*r.beta_threshold_rate) : nlohmann::json(nullptr);
  j["gamma_min"] = r.gamma_threshold;
  j["lambda_min_U"] = r.lambda_min_U;
  j["regime"] = to_string(r.regime);
  j["pass"] = {{"consensus", c.beta > r.beta_threshold_consensus},
               {"rate", r.beta_threshold_rate.has_value() && c.beta > *r.beta_threshold_rate}};
  j["topology_reconstructed"] =
      std::any_of(s.reconstructed.begin(), s.reconstructed.end(),
                  [](const std::string& r) { return r.rfind("topology", 0) == 0; });
  return j;
}

}  // namespace onebit
