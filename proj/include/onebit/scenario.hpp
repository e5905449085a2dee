#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "onebit/channel.hpp"
#include "onebit/engine.hpp"
#include "onebit/error.hpp"
#include "onebit/linsys.hpp"
#include "onebit/topology.hpp"

namespace onebit {

/// Loaded experiment: a validated SimConfig plus metadata. Agent and graph
/// indices in files are 1-based.
struct Scenario {
  std::string name{};
  std::string description{};
  std::string units{};
  std::vector<std::string> reconstructed{};  // parts not taken verbatim from the source data
  std::optional<LinearSystem> continuous{};
  double period = 0.0;
  bool gains_supplied = false;
  SimConfig config;
  nlohmann::json raw{};
};

inline constexpr double kSuppliedGainTol = 2e-3;
inline constexpr double kDiscretizationTol = 1e-3;

namespace detail {

/// 1-based line of the first occurrence of "key" in the source text, or 0.
inline int line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

inline int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

class Loader {
 public:
  Loader(std::string source, std::string origin) : text_(std::move(source)), origin_(std::move(origin)) {}

  [[noreturn]] void fail(ErrorCode code, const std::string& key, const std::string& msg) const {
    const int line = line_of_key(text_, key);
    std::string where = origin_;
    if (line > 0) where += ":" + std::to_string(line);
    throw Error(code, where + ": " + key + ": " + msg);
  }

  void check(bool ok, ErrorCode code, const std::string& key, const std::string& msg) const {
    if (!ok) fail(code, key, msg);
  }

  /// Re-raises library errors with the location of the key that caused them.
  template <class F>
  auto at(const std::string& key, F&& f) const {
    try {
      return f();
    } catch (const Error& e) {
      fail(e.code(), key, e.what());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, key, e.what());
    }
  }

  const nlohmann::json& need(const nlohmann::json& obj, const std::string& key) const {
    if (!obj.contains(key)) fail(ErrorCode::ValidationError, key, "required key is missing");
    return obj.at(key);
  }

  double number(const nlohmann::json& v, const std::string& key) const {
    check(v.is_number(), ErrorCode::ParseError, key, "expected a number");
    const double d = v.get<double>();
    check(std::isfinite(d), ErrorCode::ValidationError, key, "must be finite");
    return d;
  }

  Vector vector(const nlohmann::json& v, const std::string& key, bool allow_empty = false) const {
    check(v.is_array() && (allow_empty || !v.empty()), ErrorCode::ParseError, key,
          "expected a non-empty array");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = number(v[i], key);
    return out;
  }

  Matrix matrix(const nlohmann::json& v, const std::string& key) const {
    check(v.is_array() && !v.empty() && v[0].is_array(), ErrorCode::ParseError, key,
          "expected an array of rows");
    const auto rows = v.size();
    const auto cols = v[0].size();
    Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      check(v[r].is_array() && v[r].size() == cols, ErrorCode::ParseError, key, "ragged matrix rows");
      for (std::size_t c = 0; c < cols; ++c)
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(v[r][c], key);
    }
    return out;
  }

  Scenario load(const nlohmann::json& j) const {
    check(j.is_object(), ErrorCode::ParseError, "scenario", "top level must be an object");
    Scenario s{.config = placeholder()};
    s.raw = j;
    s.name = j.value("name", std::string{});
    s.description = j.value("description", std::string{});
    s.units = j.value("units", std::string{});
    if (j.contains("reconstructed")) {
      check(j["reconstructed"].is_array(), ErrorCode::ParseError, "reconstructed", "expected an array");
      for (const auto& r : j["reconstructed"]) s.reconstructed.push_back(r.get<std::string>());
    }

    std::optional<LinearSystem> discrete;
    if (j.contains("continuous")) {
      const auto& c = j["continuous"];
      s.continuous = at("continuous", [&] {
        return LinearSystem(matrix(need(c, "A"), "A"), vector(need(c, "B"), "B"), TimeKind::Continuous);
      });
      s.period = number(need(c, "T"), "T");
    }
    if (j.contains("system")) {
      const auto& sys = j["system"];
      discrete = at("system", [&] {
        return LinearSystem(matrix(need(sys, "A"), "A"), vector(need(sys, "B"), "B"));
      });
      if (s.continuous) {
        const auto zoh = at("continuous", [&] { return zoh_discretize(*s.continuous, s.period); });
        const double gap = std::max((zoh.A() - discrete->A()).cwiseAbs().maxCoeff(),
                                    (zoh.B() - discrete->B()).cwiseAbs().maxCoeff());
        check(gap <= kDiscretizationTol, ErrorCode::ValidationError, "system",
              "discretized continuous block differs from the discrete system by " +
                  std::to_string(gap));
      }
    } else if (s.continuous) {
      discrete = at("continuous", [&] { return zoh_discretize(*s.continuous, s.period); });
    } else {
      fail(ErrorCode::ValidationError, "system", "either a system or a continuous block is required");
    }
    const int n = discrete->n();

    GainPair gains;
    const bool has_gains = j.contains("gains");
    const bool has_b = j.contains("compression");
    check(has_gains != has_b, ErrorCode::ValidationError, has_gains ? "compression" : "gains",
          "exactly one of gains or compression must be given");
    if (has_gains) {
      const auto& g = j["gains"];
      gains.K1 = vector(need(g, "K1"), "K1").transpose();
      gains.K2 = vector(need(g, "K2"), "K2").transpose();
      gains.frame = Frame::Original;
      check(gains.K1.size() == n && gains.K2.size() == n, ErrorCode::DimensionMismatch, "gains",
            "gain lengths must equal n = " + std::to_string(n));
      const auto res = gain_residuals(*discrete, gains);
      check(res.k2b <= kSuppliedGainTol && res.closed_loop <= kSuppliedGainTol,
            ErrorCode::IdentityViolation, "gains",
            "supplied gains violate K2 B = 1 or K2(A+BK1) = K2 (residuals " +
                std::to_string(res.k2b) + ", " + std::to_string(res.closed_loop) + ")");
      s.gains_supplied = true;
    } else {
      const auto& c = j["compression"];
      const Vector bv = vector(need(c, "b"), "b", true);
      const std::vector<double> b(bv.data(), bv.data() + bv.size());
      gains = at("compression", [&] {
        const auto canon = to_brunovsky(*discrete);
        return synthesize_gains(*discrete, canon, b).original;
      });
    }

    const auto& graphs_json = need(j, "graphs");
    check(graphs_json.is_array() && !graphs_json.empty(), ErrorCode::ParseError, "graphs",
          "expected a non-empty array of graphs");
    const int agents = static_cast<int>(need(j, "agents").get<int>());
    check(agents >= 1, ErrorCode::ValidationError, "agents", "need at least one agent");
    std::vector<Graph> graphs;
    for (const auto& gj : graphs_json) {
      std::vector<Edge> edges;
      auto pair_at = [&](const nlohmann::json& p, const char* key) {
        check(p.is_array() && p.size() == 2 && p[0].is_number_integer() && p[1].is_number_integer(),
              ErrorCode::ParseError, key, "edges are pairs of 1-based agent indices");
        return std::pair<int, int>{p[0].get<int>() - 1, p[1].get<int>() - 1};
      };
      if (gj.contains("undirected"))
        for (const auto& p : gj["undirected"]) {
          auto [a, b] = pair_at(p, "undirected");
          edges.push_back({a, b});
          edges.push_back({b, a});
        }
      if (gj.contains("edges"))
        for (const auto& p : gj["edges"]) {
          auto [l, src] = pair_at(p, "edges");
          edges.push_back({l, src});
        }
      graphs.push_back(at("graphs", [&] { return Graph(agents, std::move(edges)); }));
    }
    Matrix transition = Matrix::Ones(1, 1);
    if (j.contains("transition")) transition = matrix(j["transition"], "transition");
    else check(graphs.size() == 1, ErrorCode::ValidationError, "transition",
               "a transition matrix is required for more than one graph");
    auto topology = at("transition", [&] { return MarkovTopologyProcess(graphs, transition); });
    if (graphs.size() == 1)
      check(topology.jointly_connected(), ErrorCode::NotConnected, "graphs",
            "the communication graph must be connected");
    else
      check(topology.jointly_connected(), ErrorCode::NotJointlyConnected, "graphs",
            "the union of the switching graphs must be connected");

    const auto& union_edges = topology.union_graph().edges();
    const auto& noise_json = need(j, "noise");
    const NoiseModel noise = at("noise", [&] { return NoiseModel(number(need(noise_json, "sigma"), "sigma")); });
    const auto& th = need(j, "thresholds");
    std::vector<double> thresholds(union_edges.size(), number(need(th, "default"), "default"));
    if (th.contains("overrides"))
      for (const auto& o : th["overrides"]) {
        check(o.is_array() && o.size() == 3, ErrorCode::ParseError, "overrides",
              "overrides are [listener, source, threshold] triples");
        const Edge e{o[0].get<int>() - 1, o[1].get<int>() - 1};
        const auto it = std::lower_bound(union_edges.begin(), union_edges.end(), e);
        check(it != union_edges.end() && *it == e, ErrorCode::EdgeNotInUnion, "overrides",
              "threshold override names an edge outside the union graph");
        thresholds[static_cast<std::size_t>(it - union_edges.begin())] = number(o[2], "overrides");
      }

    const auto& x0_json = need(j, "x0");
    check(x0_json.is_array() && static_cast<int>(x0_json.size()) == agents,
          ErrorCode::DimensionMismatch, "x0", "one initial state per agent is required");
    std::vector<Vector> x0;
    for (const auto& xi : x0_json) {
      x0.push_back(vector(xi, "x0"));
      check(x0.back().size() == n, ErrorCode::DimensionMismatch, "x0",
            "initial state length must equal n = " + std::to_string(n));
    }
    std::vector<double> zhat0;
    if (j.contains("zhat0")) {
      const auto& z = j["zhat0"];
      if (z.is_number()) zhat0.assign(union_edges.size(), number(z, "zhat0"));
      else {
        const Vector zv = vector(z, "zhat0");
        zhat0.assign(zv.data(), zv.data() + zv.size());
      }
    }

    SimConfig cfg{*discrete, gains, std::move(topology), LinkConfig{std::move(thresholds), noise}};
    cfg.beta = number(need(j, "beta"), "beta");
    cfg.gamma = number(need(j, "gamma"), "gamma");
    cfg.radius = number(need(j, "M"), "M");
    if (j.contains("t0")) {
      check(j["t0"].is_number_integer() && j["t0"].get<long long>() >= 1, ErrorCode::ValidationError,
            "t0", "t0 must be a positive integer");
      cfg.t0 = j["t0"].get<long long>();
    }
    cfg.x0 = std::move(x0);
    cfg.zhat0 = std::move(zhat0);
    check(j.contains("seed"), ErrorCode::ValidationError, "seed", "a seed is required");
    check(j["seed"].is_number_unsigned(), ErrorCode::ParseError, "seed", "seed must be a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("horizon")) cfg.horizon = j["horizon"].get<long long>();
    if (j.contains("replications")) cfg.replications = j["replications"].get<int>();
    if (j.contains("initial_topology")) cfg.initial_topology = j["initial_topology"].get<int>() - 1;
    if (j.contains("enforce_bound")) cfg.enforce_bound = j["enforce_bound"].get<bool>();

    validate(cfg);
    s.config = std::move(cfg);
    return s;
  }

  /// Maps SimConfig validation failures onto the responsible key.
  void validate(const SimConfig& cfg) const {
    try {
      validate_config(cfg);
    } catch (const Error& e) {
      const std::string what = e.what();
      std::string key = "scenario";
      if (what.find("K2 x_") != std::string::npos) key = "x0";
      else if (what.find("estimate") != std::string::npos) key = "zhat0";
      else if (what.find("t0") != std::string::npos) key = "t0";
      else if (what.find("M must") != std::string::npos) key = "M";
      else if (what.find("beta") != std::string::npos) key = "beta";
      else if (what.find("horizon") != std::string::npos) key = "horizon";
      else if (what.find("replication") != std::string::npos) key = "replications";
      else if (what.find("initial topology") != std::string::npos) key = "initial_topology";
      fail(e.code(), key, what);
    }
  }

 private:
  static SimConfig placeholder() {
    return SimConfig{LinearSystem(Matrix::Zero(1, 1), Vector::Zero(1)), GainPair{},
                     MarkovTopologyProcess::fixed(Graph(1, {})), LinkConfig{{}, NoiseModel(1.0)}};
  }

  std::string text_;
  std::string origin_;
};

}  // namespace detail

inline Scenario parse_scenario(const std::string& text, const std::string& origin = "<scenario>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, origin + ":" +
                                           std::to_string(detail::line_of_offset(text, e.byte)) +
                                           ": " + e.what());
  }
  detail::Loader loader(text, origin);
  try {
    return loader.load(j);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, origin + ": " + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::ParseError, "cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace onebit
