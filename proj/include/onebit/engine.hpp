#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <thread>
#include <exception>
#include <utility>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "onebit/channel.hpp"
#include "onebit/error.hpp"
#include "onebit/linsys.hpp"
#include "onebit/protocol.hpp"
#include "onebit/rng.hpp"
#include "onebit/topology.hpp"

namespace onebit {

inline constexpr double kBoundTol = 1e-9;

struct SimConfig {
  LinearSystem sys;
  GainPair gains;  // original frame
  MarkovTopologyProcess topology;
  LinkConfig link;  // thresholds in union edge order
  double beta = 0.0;
  double gamma = 0.0;
  double radius = 1.0;  // M
  long long t0 = 0;     // 0 selects max(1, ceil(gamma * d_max))
  std::vector<Vector> x0{};
  std::vector<double> zhat0{};  // empty means all zeros
  long long horizon = 100000;
  std::uint64_t seed = 1;
  int replications = 1;
  int initial_topology = 0;  // m(t0)

  double decimation_ratio = 1.05;  // spacing of recorded steps beyond step 100
  bool record_every_step = false;
  bool enforce_bound = true;   // throw BoundViolation when |K2 x_i| > M
  int threads = 0;             // 0: hardware concurrency
  bool shared_stream = false;  // test hook: every replication replays stream 0
};

inline long long default_t0(double gamma, int d_max) {
  return std::max(1LL, static_cast<long long>(std::ceil(gamma * static_cast<double>(d_max))));
}

inline long long effective_t0(const SimConfig& c) {
  return c.t0 > 0 ? c.t0 : default_t0(c.gamma, c.topology.union_graph().max_degree());
}

/// Checks every initiation constraint. Throws ValidationError.
inline void validate_config(const SimConfig& c) {
  const int n = c.sys.n();
  const int agents = c.topology.agents();
  const auto d = c.topology.union_graph().edges().size();
  require(c.sys.kind() == TimeKind::Discrete, ErrorCode::ValidationError,
          "simulation needs a discrete-time system");
  require(c.gains.K1.size() == n && c.gains.K2.size() == n, ErrorCode::DimensionMismatch,
          "gain lengths must equal the state dimension");
  require(c.link.thresholds.size() == d, ErrorCode::DimensionMismatch,
          "one threshold per directed edge is required");
  require(static_cast<int>(c.x0.size()) == agents, ErrorCode::DimensionMismatch,
          "one initial state per agent is required");
  require(c.zhat0.empty() || c.zhat0.size() == d, ErrorCode::DimensionMismatch,
          "one initial estimate per directed edge is required");
  require(c.radius > 0.0, ErrorCode::NonPositiveRadius, "M must be positive");
  require(c.beta >= 0.0 && c.gamma >= 0.0, ErrorCode::ValidationError,
          "beta and gamma must be non-negative");
  require(c.horizon >= 1, ErrorCode::ValidationError, "horizon must be at least one step");
  require(c.replications >= 1, ErrorCode::ValidationError, "at least one replication");
  require(c.decimation_ratio > 1.0, ErrorCode::ValidationError, "decimation ratio must exceed 1");
  require(c.initial_topology >= 0 && c.initial_topology < c.topology.size(),
          ErrorCode::ValidationError, "initial topology index out of range");
  for (int i = 0; i < agents; ++i) {
    const auto& x = c.x0[static_cast<std::size_t>(i)];
    require(x.size() == n, ErrorCode::DimensionMismatch, "initial state length differs from n");
    require(std::abs(c.gains.K2.dot(x)) <= c.radius, ErrorCode::ValidationError,
            "initiation: |K2 x_" + std::to_string(i + 1) + "^0| exceeds M");
  }
  for (double z : c.zhat0)
    require(std::abs(z) <= c.radius, ErrorCode::ValidationError,
            "initiation: an initial estimate exceeds M");
  const double d_max = c.topology.union_graph().max_degree();
  require(static_cast<double>(effective_t0(c)) > c.gamma * d_max - 1.0,
          ErrorCode::ValidationError, "initial time must satisfy t0 > gamma * d_max - 1");
}

struct ConsensusError {
  std::vector<double> per_agent;
  double max = 0.0;
};

/// ||x_i - xbar||^2 per agent.
inline ConsensusError consensus_error(const std::vector<Vector>& x) {
  ConsensusError e;
  if (x.empty()) return e;
  Vector mean = Vector::Zero(x.front().size());
  for (const auto& xi : x) mean += xi;
  mean /= static_cast<double>(x.size());
  e.per_agent.reserve(x.size());
  for (const auto& xi : x) {
    e.per_agent.push_back((xi - mean).squaredNorm());
    e.max = std::max(e.max, e.per_agent.back());
  }
  return e;
}

struct LyapunovSample {
  double V = 0.0;
  double R = 0.0;
};

/// V = ||(T^{-1} (x) K2)(J_N (x) I_n) x||^2 and R = ||z_hat - (Q (x) K2) x||^2,
/// evaluated with explicit Kronecker products.
inline LyapunovSample lyapunov_samples(const Vector& x_stacked, const std::vector<double>& z_hat,
                                       const Matrix& T, const RowVector& k2, const Matrix& q) {
  const auto n = k2.size();
  const auto agents = T.rows();
  require(x_stacked.size() == agents * n && q.cols() == agents &&
              q.rows() == static_cast<Eigen::Index>(z_hat.size()),
          ErrorCode::DimensionMismatch, "Lyapunov sample dimensions disagree");
  const Matrix j = Matrix::Identity(agents, agents) -
                   Matrix::Constant(agents, agents, 1.0 / static_cast<double>(agents));
  const Matrix tinv_k2 = Eigen::kroneckerProduct(Matrix(T.transpose()), Matrix(k2));
  const Matrix j_in = Eigen::kroneckerProduct(j, Matrix::Identity(n, n));
  LyapunovSample s;
  s.V = (tinv_k2 * (j_in * x_stacked)).squaredNorm();
  const Vector zh = Eigen::Map<const Vector>(z_hat.data(), static_cast<Eigen::Index>(z_hat.size()));
  s.R = (zh - Eigen::kroneckerProduct(q, Matrix(k2)) * x_stacked).squaredNorm();
  return s;
}

struct TraceRow {
  long long t = 0;  // t0 + k
  int m = 0;        // active topology index, zero-based
  std::vector<double> x;  // stacked, agent-major
  std::vector<double> z_hat;
  std::vector<double> cons_err;
  double V = 0.0;
  double R = 0.0;
};

struct Trace {
  int agents = 0;
  int n = 0;
  int edges = 0;
  long long t0 = 0;
  std::vector<TraceRow> rows;
  double max_abs_compressed = 0.0;
  long long bound_violations = 0;
  std::uint64_t checksum = 0xcbf29ce484222325ULL;
};

namespace detail {

inline void fnv1a(std::uint64_t& h, const double* data, std::size_t count) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < count * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
}

/// Steps k (1-based) at which metrics are recorded: every step up to 100,
/// then geometrically spaced, and always the final step.
inline std::vector<long long> record_steps(long long horizon, double ratio, bool every) {
  std::vector<long long> ks;
  if (every) {
    ks.resize(static_cast<std::size_t>(horizon));
    for (long long k = 1; k <= horizon; ++k) ks[static_cast<std::size_t>(k - 1)] = k;
    return ks;
  }
  for (long long k = 1; k <= std::min(horizon, 100LL); ++k) ks.push_back(k);
  double next = 100.0;
  while (true) {
    next *= ratio;
    const auto k = static_cast<long long>(std::ceil(next));
    if (k >= horizon) break;
    if (k > ks.back()) ks.push_back(k);
  }
  if (ks.back() != horizon) ks.push_back(horizon);
  return ks;
}

struct Prepared {
  Matrix T;  // orthogonal diagonalizer of L (fixed) or the expected Laplacian
  std::vector<std::vector<std::size_t>> in_edges;  // per listener, union edge indices
  std::vector<int> source;
};

inline Prepared prepare(const SimConfig& c) {
  Prepared p;
  p.T = orthogonal_diagonalizer(expected_laplacian(c.topology)).T;
  const auto& edges = c.topology.union_graph().edges();
  p.in_edges.resize(static_cast<std::size_t>(c.topology.agents()));
  for (std::size_t s = 0; s < edges.size(); ++s) {
    p.in_edges[static_cast<std::size_t>(edges[s].listener)].push_back(s);
    p.source.push_back(edges[s].source);
  }
  return p;
}

inline Trace simulate(const SimConfig& c, const Prepared& prep, int replication) {
  const int agents = c.topology.agents();
  const int n = c.sys.n();
  const auto& edges = c.topology.union_graph().edges();
  const std::size_t d = edges.size();
  const long long t0 = effective_t0(c);
  const auto stream_rep = static_cast<std::uint64_t>(c.shared_stream ? 0 : replication);
  const Matrix& Q = c.topology.selection(0).Q;

  Trace tr;
  tr.agents = agents;
  tr.n = n;
  tr.edges = static_cast<int>(d);
  tr.t0 = t0;

  std::vector<Vector> x = c.x0;
  EstimatorState est(c.zhat0.empty() ? std::vector<double>(d, 0.0) : c.zhat0, c.radius, c.beta);
  const ControllerConfig ctrl{c.gains, c.gamma};

  const auto records = record_steps(c.horizon, c.decimation_ratio, c.record_every_step);
  tr.rows.reserve(records.size());
  std::size_t next_record = 0;

  std::vector<std::optional<double>> bits(d);
  std::vector<double> compressed(static_cast<std::size_t>(agents));
  std::vector<double> neighbor;
  Vector stacked(agents * n);
  int m = c.initial_topology;

  for (long long k = 1; k <= c.horizon; ++k) {
    const long long t = t0 + k;
    {
      CounterStream chain(c.seed, stream_rep, static_cast<std::uint64_t>(k), lane::kChain);
      m = c.topology.next(m, chain.uniform());
    }
    const auto& sel = c.topology.selection(m);

    for (int i = 0; i < agents; ++i) {
      const double z = c.gains.K2.dot(x[static_cast<std::size_t>(i)]);
      compressed[static_cast<std::size_t>(i)] = z;
      tr.max_abs_compressed = std::max(tr.max_abs_compressed, std::abs(z));
      if (std::abs(z) > c.radius + kBoundTol) {
        ++tr.bound_violations;
        if (c.enforce_bound)
          throw Error(ErrorCode::BoundViolation,
                      "|K2 x_" + std::to_string(i + 1) + "(" + std::to_string(t) +
                          ")| = " + std::to_string(std::abs(z)) + " exceeds M");
      }
      require(std::isfinite(z), ErrorCode::NonFinite, "state diverged");
    }

    for (std::size_t s = 0; s < d; ++s) {
      if (!sel.active[s]) {
        bits[s].reset();
        continue;
      }
      const auto& e = edges[s];
      CounterStream noise(c.seed, stream_rep, static_cast<std::uint64_t>(k),
                          lane::noise(static_cast<std::uint64_t>(e.listener) *
                                          static_cast<std::uint64_t>(agents) +
                                      static_cast<std::uint64_t>(e.source)));
      bits[s] = transmit(compressed[static_cast<std::size_t>(prep.source[s])],
                         c.link.thresholds[s], c.link.noise, noise);
    }
    est.step(bits, c.link.thresholds, c.link.noise, sel.active, t);
    const auto& zh = est.z_hat();

    if (next_record < records.size() && records[next_record] == k) {
      ++next_record;
      TraceRow row;
      row.t = t;
      row.m = m;
      for (int i = 0; i < agents; ++i) stacked.segment(i * n, n) = x[static_cast<std::size_t>(i)];
      row.x.assign(stacked.data(), stacked.data() + stacked.size());
      row.z_hat = zh;
      row.cons_err = consensus_error(x).per_agent;
      const auto ly = lyapunov_samples(stacked, zh, prep.T, c.gains.K2, Q);
      row.V = ly.V;
      row.R = ly.R;
      tr.rows.push_back(std::move(row));
    }

    for (int i = 0; i < agents; ++i) {
      neighbor.clear();
      for (std::size_t s : prep.in_edges[static_cast<std::size_t>(i)])
        if (sel.active[s]) neighbor.push_back(zh[s]);
      auto& xi = x[static_cast<std::size_t>(i)];
      const double u = control_input(xi, neighbor, ctrl, t);
      fnv1a(tr.checksum, xi.data(), static_cast<std::size_t>(n));
      xi = agent_step(xi, u, c.sys);
    }
    fnv1a(tr.checksum, zh.data(), d);
  }
  return tr;
}

}  // namespace detail

/// Single replication on a fixed connected graph.
inline Trace run_fixed(const SimConfig& c, int replication = 0) {
  require(c.topology.size() == 1, ErrorCode::ValidationError,
          "fixed-topology run needs exactly one graph");
  require(c.topology.jointly_connected(), ErrorCode::NotConnected, "graph is not connected");
  validate_config(c);
  return detail::simulate(c, detail::prepare(c), replication);
}

/// Single replication under Markovian switching among jointly connected graphs.
inline Trace run_switching(const SimConfig& c, int replication = 0) {
  require(c.topology.jointly_connected(), ErrorCode::NotJointlyConnected,
          "switching graphs are not jointly connected");
  validate_config(c);
  return detail::simulate(c, detail::prepare(c), replication);
}

struct EnsembleMetrics {
  int replications = 0;
  int agents = 0;
  int n = 0;
  std::vector<long long> t;
  std::vector<int> m;  // topology index seen by replication 0
  std::vector<std::vector<double>> x_mean;         // per row, stacked
  std::vector<std::vector<double>> cons_err_mean;  // per row, per agent
  std::vector<std::vector<double>> cons_err_stderr;
  std::vector<double> V_mean, V_stderr, R_mean, R_stderr;
  std::vector<double> max_cons_err;  // max over agents of the ensemble mean
  long long bound_violations = 0;
  double max_abs_compressed = 0.0;
  std::vector<std::uint64_t> checksums;
};

namespace detail {

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
  }
  double mean(int count) const { return sum / count; }
  double stderr_of_mean(int count) const {
    if (count < 2) return 0.0;
    const double mu = mean(count);
    const double var = std::max(0.0, (sum_sq - count * mu * mu) / (count - 1));
    return std::sqrt(var / count);
  }
};

}  // namespace detail

/// Independent replications on disjoint substreams, averaged pointwise in t.
/// Reduction runs in replication order, so the result is independent of the
/// thread count.
inline EnsembleMetrics run_replications(const SimConfig& c) {
  if (c.topology.size() == 1)
    require(c.topology.jointly_connected(), ErrorCode::NotConnected, "graph is not connected");
  else
    require(c.topology.jointly_connected(), ErrorCode::NotJointlyConnected,
            "switching graphs are not jointly connected");
  validate_config(c);
  const auto prep = detail::prepare(c);
  const int reps = c.replications;

  std::vector<Trace> traces(static_cast<std::size_t>(reps));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(reps));
  unsigned workers = c.threads > 0 ? static_cast<unsigned>(c.threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(reps));
  auto job = [&](unsigned w) {
    for (int r = static_cast<int>(w); r < reps; r += static_cast<int>(workers)) {
      try {
        traces[static_cast<std::size_t>(r)] = detail::simulate(c, prep, r);
      } catch (...) {
        failures[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    job(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(job, w);
    for (auto& th : pool) th.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  EnsembleMetrics out;
  out.replications = reps;
  out.agents = traces.front().agents;
  out.n = traces.front().n;
  const auto rows = traces.front().rows.size();
  const auto agents = static_cast<std::size_t>(out.agents);
  const auto width = traces.front().rows.front().x.size();
  for (const auto& tr : traces) {
    out.bound_violations += tr.bound_violations;
    out.max_abs_compressed = std::max(out.max_abs_compressed, tr.max_abs_compressed);
    out.checksums.push_back(tr.checksum);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    out.t.push_back(traces.front().rows[r].t);
    out.m.push_back(traces.front().rows[r].m);
    std::vector<detail::Moments> ce(agents);
    std::vector<double> xm(width, 0.0);
    detail::Moments v, rr;
    for (const auto& tr : traces) {
      const auto& row = tr.rows[r];
      for (std::size_t i = 0; i < agents; ++i) ce[i].add(row.cons_err[i]);
      for (std::size_t k = 0; k < width; ++k) xm[k] += row.x[k];
      v.add(row.V);
      rr.add(row.R);
    }
    std::vector<double> mean(agents), se(agents);
    for (std::size_t i = 0; i < agents; ++i) {
      mean[i] = ce[i].mean(reps);
      se[i] = ce[i].stderr_of_mean(reps);
    }
    for (auto& val : xm) val /= reps;
    out.max_cons_err.push_back(*std::max_element(mean.begin(), mean.end()));
    out.cons_err_mean.push_back(std::move(mean));
    out.cons_err_stderr.push_back(std::move(se));
    out.x_mean.push_back(std::move(xm));
    out.V_mean.push_back(v.mean(reps));
    out.V_stderr.push_back(v.stderr_of_mean(reps));
    out.R_mean.push_back(rr.mean(reps));
    out.R_stderr.push_back(rr.stderr_of_mean(reps));
  }
  return out;
}

}  // namespace onebit
