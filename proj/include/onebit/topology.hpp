#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <compare>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "onebit/error.hpp"
#include "onebit/linsys.hpp"

namespace onebit {

/// Directed edge (i, j): agent i listens to agent j. Zero-based.
struct Edge {
  int listener = 0;
  int source = 0;
  auto operator<=>(const Edge&) const = default;
};

inline constexpr double kConnectivityTol = 1e-9;

class Graph {
 public:
  Graph() = default;

  /// Edges are stored in canonical order: listener ascending, then source.
  Graph(int agents, std::vector<Edge> edges) : n_(agents), edges_(std::move(edges)) {
    require(n_ >= 1, ErrorCode::InvalidEdge, "graph needs at least one agent");
    std::sort(edges_.begin(), edges_.end());
    for (std::size_t s = 0; s < edges_.size(); ++s) {
      const auto& e = edges_[s];
      require(e.listener >= 0 && e.listener < n_ && e.source >= 0 && e.source < n_,
              ErrorCode::InvalidEdge, "edge endpoint out of range");
      require(e.listener != e.source, ErrorCode::InvalidEdge, "self-loops are not allowed");
      require(s == 0 || edges_[s - 1] != e, ErrorCode::InvalidEdge, "duplicate edge");
    }
  }

  /// Adds both directions of every pair.
  static Graph undirected(int agents, const std::vector<std::pair<int, int>>& pairs) {
    std::vector<Edge> e;
    e.reserve(pairs.size() * 2);
    for (auto [i, j] : pairs) {
      e.push_back({i, j});
      e.push_back({j, i});
    }
    return Graph(agents, std::move(e));
  }

  int agents() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int total_degree() const { return static_cast<int>(edges_.size()); }

  bool has_edge(Edge e) const { return std::binary_search(edges_.begin(), edges_.end(), e); }

  std::vector<int> degrees() const {
    std::vector<int> d(static_cast<std::size_t>(n_), 0);
    for (const auto& e : edges_) ++d[static_cast<std::size_t>(e.listener)];
    return d;
  }

  int max_degree() const {
    const auto d = degrees();
    return d.empty() ? 0 : *std::max_element(d.begin(), d.end());
  }

  Matrix adjacency() const {
    Matrix a = Matrix::Zero(n_, n_);
    for (const auto& e : edges_) a(e.listener, e.source) = 1.0;
    return a;
  }

  Matrix laplacian() const {
    Matrix a = adjacency();
    Matrix l = -a;
    for (int i = 0; i < n_; ++i) l(i, i) = a.row(i).sum();
    return l;
  }

  bool is_symmetric() const {
    return std::all_of(edges_.begin(), edges_.end(),
                       [&](const Edge& e) { return has_edge({e.source, e.listener}); });
  }

  /// Weakly connected components by breadth-first search.
  int component_count() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_));
    for (const auto& e : edges_) {
      adj[static_cast<std::size_t>(e.listener)].push_back(e.source);
      adj[static_cast<std::size_t>(e.source)].push_back(e.listener);
    }
    std::vector<char> seen(static_cast<std::size_t>(n_), 0);
    int count = 0;
    for (int s = 0; s < n_; ++s) {
      if (seen[static_cast<std::size_t>(s)]) continue;
      ++count;
      std::queue<int> q;
      q.push(s);
      seen[static_cast<std::size_t>(s)] = 1;
      while (!q.empty()) {
        const int v = q.front();
        q.pop();
        for (int w : adj[static_cast<std::size_t>(v)])
          if (!seen[static_cast<std::size_t>(w)]) {
            seen[static_cast<std::size_t>(w)] = 1;
            q.push(w);
          }
      }
    }
    return count;
  }

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
};

struct Spectrum {
  Vector eigenvalues;  // ascending
  bool connected = false;
  double lambda2() const { return eigenvalues.size() > 1 ? eigenvalues(1) : 0.0; }
};

inline Spectrum symmetric_spectrum(const Matrix& l) {
  require(l.rows() == l.cols(), ErrorCode::DimensionMismatch, "Laplacian must be square");
  require((l - l.transpose()).cwiseAbs().maxCoeff() <= 1e-12, ErrorCode::AsymmetricGraph,
          "Laplacian is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(l, Eigen::EigenvaluesOnly);
  Spectrum s;
  s.eigenvalues = es.eigenvalues();
  s.connected = l.rows() == 1 || s.lambda2() > kConnectivityTol;
  return s;
}

inline Spectrum laplacian_spectrum(const Graph& g) {
  require(g.is_symmetric(), ErrorCode::AsymmetricGraph,
          "spectral analysis needs every edge paired with its reverse");
  auto s = symmetric_spectrum(g.laplacian());
  assert(s.connected == (g.component_count() == 1));
  return s;
}

struct Diagonalizer {
  Matrix T;            // orthogonal, first column 1/sqrt(N)
  Vector eigenvalues;  // T^T L T = diag(eigenvalues); eigenvalues(0) belongs to the ones vector
};

/// Orthogonal T with T^{-1} L T diagonal and first column exactly 1/sqrt(N).
/// L must be symmetric with zero row sums. The complement of the ones vector is
/// spanned by a Householder reflector, and L is diagonalized on that subspace.
inline Diagonalizer orthogonal_diagonalizer(const Matrix& l) {
  const auto n = l.rows();
  require(n == l.cols() && n >= 1, ErrorCode::DimensionMismatch, "Laplacian must be square");
  require((l - l.transpose()).cwiseAbs().maxCoeff() <= 1e-12, ErrorCode::AsymmetricGraph,
          "Laplacian is not symmetric");
  require(l.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-9, ErrorCode::ValidationError,
          "Laplacian rows must sum to zero");

  Diagonalizer out;
  const Vector u = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  if (n == 1) {
    out.T = Matrix::Ones(1, 1);
    out.eigenvalues = Vector::Zero(1);
    return out;
  }
  Vector v = u;
  v(0) -= 1.0;
  const Matrix reflector = Matrix::Identity(n, n) - 2.0 * v * v.transpose() / v.squaredNorm();
  const Matrix h = reflector.rightCols(n - 1);
  const Matrix sub = h.transpose() * l * h;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sub + sub.transpose()));

  out.T.resize(n, n);
  out.T.col(0) = u;
  out.T.rightCols(n - 1) = h * es.eigenvectors();
  out.eigenvalues.resize(n);
  out.eigenvalues(0) = 0.0;
  out.eigenvalues.tail(n - 1) = es.eigenvalues();
  return out;
}

inline Diagonalizer orthogonal_diagonalizer(const Graph& g) {
  require(g.is_symmetric(), ErrorCode::AsymmetricGraph,
          "spectral analysis needs every edge paired with its reverse");
  return orthogonal_diagonalizer(g.laplacian());
}

/// Q (d x N), W (N x d) and the diagonal mask P against a fixed edge order.
struct SelectionMatrices {
  Matrix Q;
  Matrix W;
  std::vector<char> active;  // diagonal of P
  std::vector<Edge> edge_order;

  Matrix P() const {
    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(active.size()),
                            static_cast<Eigen::Index>(active.size()));
    for (std::size_t s = 0; s < active.size(); ++s)
      p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) = active[s] ? 1.0 : 0.0;
    return p;
  }
};

/// Selection matrices against the union's edge order. Q always describes the
/// union; W and the mask describe `sub` (the union itself when absent).
inline SelectionMatrices build_selection(const Graph& uni, const std::optional<Graph>& sub = {}) {
  const auto& edges = uni.edges();
  const auto d = static_cast<Eigen::Index>(edges.size());
  const int n = uni.agents();
  if (sub) {
    require(sub->agents() == n, ErrorCode::MismatchedAgentCount,
            "sub-graph agent count differs from the union");
    for (const auto& e : sub->edges())
      require(uni.has_edge(e), ErrorCode::EdgeNotInUnion,
              "edge (" + std::to_string(e.listener + 1) + "," + std::to_string(e.source + 1) +
                  ") is not in the union");
  }
  SelectionMatrices s;
  s.edge_order = edges;
  s.Q = Matrix::Zero(d, n);
  s.W = Matrix::Zero(n, d);
  s.active.assign(edges.size(), 0);
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto& e = edges[static_cast<std::size_t>(k)];
    s.Q(k, e.source) = 1.0;
    const bool on = !sub || sub->has_edge(e);
    s.active[static_cast<std::size_t>(k)] = on ? 1 : 0;
    if (on) s.W(e.listener, k) = 1.0;
  }
  return s;
}

struct UnionReport {
  Graph graph;
  bool jointly_connected = false;
};

inline UnionReport union_and_check_joint_connectivity(const std::vector<Graph>& graphs) {
  require(!graphs.empty(), ErrorCode::ValidationError, "at least one graph is required");
  const int n = graphs.front().agents();
  std::vector<Edge> all;
  for (const auto& g : graphs) {
    require(g.agents() == n, ErrorCode::MismatchedAgentCount, "graphs disagree on agent count");
    all.insert(all.end(), g.edges().begin(), g.edges().end());
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  UnionReport r{Graph(n, std::move(all)), false};
  r.jointly_connected = laplacian_spectrum(r.graph).connected;
  return r;
}

inline constexpr double kStochasticTol = 1e-12;

inline void validate_stochastic(const Matrix& p) {
  require(p.rows() >= 1 && p.rows() == p.cols(), ErrorCode::NotStochastic,
          "transition matrix must be square");
  require(p.allFinite() && p.minCoeff() >= 0.0, ErrorCode::NotStochastic,
          "transition probabilities must be non-negative");
  for (Eigen::Index r = 0; r < p.rows(); ++r)
    require(std::abs(p.row(r).sum() - 1.0) <= kStochasticTol, ErrorCode::NotStochastic,
            "row " + std::to_string(r + 1) + " of the transition matrix does not sum to 1");
}

/// Some power P^k with k <= h^2 entrywise positive (irreducible and aperiodic).
inline bool is_primitive(const Matrix& p) {
  const auto h = p.rows();
  Matrix pattern = (p.array() > 0.0).cast<double>().matrix();
  Matrix power = pattern;
  for (Eigen::Index k = 1; k <= h * h; ++k) {
    if ((power.array() > 0.0).all()) return true;
    power = ((power * pattern).array() > 0.0).cast<double>().matrix();
  }
  return false;
}

/// pi P = pi, sum(pi) = 1: one row of (P^T - I) is replaced by the normalization.
inline Vector stationary_distribution(const Matrix& p) {
  validate_stochastic(p);
  require(is_primitive(p), ErrorCode::NotErgodic,
          "transition matrix is not irreducible and aperiodic");
  const auto h = p.rows();
  Matrix sys = p.transpose() - Matrix::Identity(h, h);
  sys.row(h - 1).setOnes();
  Vector rhs = Vector::Zero(h);
  rhs(h - 1) = 1.0;
  return sys.fullPivLu().solve(rhs);
}

/// Inverse-CDF draw from row `current` given one uniform variate in [0, 1).
inline int sample_chain(const Matrix& p, int current, double uniform) {
  double acc = 0.0;
  const auto h = static_cast<int>(p.cols());
  for (int v = 0; v < h; ++v) {
    acc += p(current, v);
    if (uniform < acc) return v;
  }
  // rounding left a sliver above the last cumulative sum
  for (int v = h - 1; v >= 0; --v)
    if (p(current, v) > 0.0) return v;
  return current;
}

class MarkovTopologyProcess {
 public:
  MarkovTopologyProcess(std::vector<Graph> graphs, Matrix transition)
      : graphs_(std::move(graphs)), transition_(std::move(transition)) {
    require(static_cast<Eigen::Index>(graphs_.size()) == transition_.rows(),
            ErrorCode::DimensionMismatch, "one transition row per graph is required");
    validate_stochastic(transition_);
    auto u = union_and_check_joint_connectivity(graphs_);
    union_ = std::move(u.graph);
    jointly_connected_ = u.jointly_connected;
    pi_ = stationary_distribution(transition_);
    for (const auto& g : graphs_) selections_.push_back(build_selection(union_, g));
  }

  /// A fixed graph as a one-state chain.
  static MarkovTopologyProcess fixed(Graph g) {
    return MarkovTopologyProcess({std::move(g)}, Matrix::Ones(1, 1));
  }

  /// Test hook: identity transition pinned to graph `u`. The chain is
  /// reducible, so pi is the point mass at `u` instead of a stationary solve.
  static MarkovTopologyProcess frozen_for_testing(std::vector<Graph> graphs, int u) {
    const auto h = static_cast<Eigen::Index>(graphs.size());
    require(u >= 0 && u < h, ErrorCode::ValidationError, "frozen graph index out of range");
    Vector pi = Vector::Zero(h);
    pi(u) = 1.0;
    return MarkovTopologyProcess(std::move(graphs), Matrix::Identity(h, h), std::move(pi));
  }

  int size() const { return static_cast<int>(graphs_.size()); }
  int agents() const { return union_.agents(); }
  const std::vector<Graph>& graphs() const { return graphs_; }
  const Graph& union_graph() const { return union_; }
  const Matrix& transition() const { return transition_; }
  const Vector& pi() const { return pi_; }
  bool jointly_connected() const { return jointly_connected_; }
  const SelectionMatrices& selection(int m) const {
    return selections_[static_cast<std::size_t>(m)];
  }
  int next(int current, double uniform) const { return sample_chain(transition_, current, uniform); }

 private:
  MarkovTopologyProcess(std::vector<Graph> graphs, Matrix transition, Vector pi)
      : graphs_(std::move(graphs)), transition_(std::move(transition)) {
    pi_ = std::move(pi);
    auto u = union_and_check_joint_connectivity(graphs_);
    union_ = std::move(u.graph);
    jointly_connected_ = u.jointly_connected;
    for (const auto& g : graphs_) selections_.push_back(build_selection(union_, g));
  }

  std::vector<Graph> graphs_;
  Matrix transition_;
  Graph union_;
  bool jointly_connected_ = false;
  Vector pi_;
  std::vector<SelectionMatrices> selections_;
};

/// sum_u pi_u L_u
inline Matrix expected_laplacian(const MarkovTopologyProcess& proc) {
  const int n = proc.agents();
  Matrix l = Matrix::Zero(n, n);
  for (int u = 0; u < proc.size(); ++u)
    l += proc.pi()(u) * proc.graphs()[static_cast<std::size_t>(u)].laplacian();
  return l;
}

}  // namespace onebit
