#pragma once

#include <random>
#include <string>
#include <vector>

#include "onebit/engine.hpp"
#include "onebit/linsys.hpp"
#include "onebit/topology.hpp"

namespace fixtures {

using onebit::Matrix;
using onebit::RowVector;
using onebit::Vector;

// Aircraft altitude example, printed to four decimals.
inline Matrix aircraft_Ad() {
  Matrix a(4, 4);
  a << 0.7358, 0.1839, 0, 0,
      -0.7358, 0, 0, 0,
      0.7073, 0.0777, 1, 0.5,
      2.6891, 0.3964, 0, 1;
  return a;
}

inline Vector aircraft_Bd() {
  Vector b(4);
  b << 0.1982, 0.5518, -0.093, -0.2668;
  return b;
}

inline RowVector aircraft_K1() {
  RowVector k(4);
  k << -0.9224, -0.1825, -0.0000, -0.1788;
  return k;
}

inline RowVector aircraft_K2() {
  RowVector k(4);
  k << 3.8734, 0.9054, 0.3575, 0.8772;
  return k;
}

inline Matrix aircraft_Ac() {
  Matrix a(4, 4);
  a << 0, 1, 0, 0,
      -4, -4, 0, 0,
      0, 0, 0, 1,
      6, 0, 0, 0;
  return a;
}

/// Input column that reproduces the printed discrete pair (elevator force
/// enters the altitude equation with a minus sign).
inline Vector aircraft_Bc() {
  Vector b(4);
  b << 0, 3, 0, -1;
  return b;
}

/// Input column exactly as printed next to the continuous matrix.
inline Vector aircraft_Bc_as_printed() {
  Vector b(4);
  b << 0, 3, 0, 1;
  return b;
}

inline std::vector<double> initial_altitudes() { return {5, 2, 4, 3, 1.5, 2.5, 1}; }

inline std::vector<Vector> aircraft_x0() {
  std::vector<Vector> x0;
  for (double h : initial_altitudes()) {
    Vector x = Vector::Zero(4);
    x(2) = h;
    x0.push_back(x);
  }
  return x0;
}

/// 1-based undirected pairs to a graph.
inline onebit::Graph undirected(int n, const std::vector<std::pair<int, int>>& pairs) {
  std::vector<std::pair<int, int>> zero;
  for (auto [i, j] : pairs) zero.push_back({i - 1, j - 1});
  return onebit::Graph::undirected(n, zero);
}

/// Seven-agent ring with three chords, total degree 20.
inline onebit::Graph seven_agent_graph() {
  return undirected(7, {{1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {7, 1}, {1, 4}, {2, 6}, {3, 7}});
}

inline std::vector<onebit::Graph> seven_agent_switching_graphs() {
  return {undirected(7, {{1, 2}, {2, 3}, {3, 4}, {4, 5}}), undirected(7, {{5, 6}, {6, 7}, {7, 1}}),
          undirected(7, {{1, 4}, {2, 6}, {3, 7}})};
}

inline Matrix switching_transition() {
  Matrix p(3, 3);
  p << 0.5, 0.3, 0.2,
      0.2, 0.5, 0.3,
      0.3, 0.2, 0.5;
  return p;
}

inline onebit::GainPair aircraft_gains() {
  onebit::GainPair g;
  g.K1 = aircraft_K1();
  g.K2 = aircraft_K2();
  return g;
}

/// Aircraft configuration on the given topology with the published gains.
inline onebit::SimConfig aircraft_config(onebit::MarkovTopologyProcess topo, double beta,
                                         double gamma, long long horizon, int reps) {
  const auto d = topo.union_graph().edges().size();
  onebit::SimConfig c{onebit::LinearSystem(aircraft_Ad(), aircraft_Bd()), aircraft_gains(),
                      std::move(topo),
                      onebit::LinkConfig{std::vector<double>(d, -2.0), onebit::NoiseModel(4.0)}};
  c.beta = beta;
  c.gamma = gamma;
  c.radius = 2.0;
  c.x0 = aircraft_x0();
  c.horizon = horizon;
  c.replications = reps;
  c.seed = 7;
  return c;
}

/// Random controllable single-input system with entries in (-2, 2).
inline onebit::LinearSystem random_system(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  while (true) {
    Matrix a(n, n);
    Vector b(n);
    for (int i = 0; i < n; ++i) {
      b(i) = u(rng);
      for (int j = 0; j < n; ++j) a(i, j) = u(rng);
    }
    onebit::LinearSystem sys(a, b);
    if (onebit::controllability_rank(sys) == n && onebit::condition_number(onebit::controllability_matrix(sys)) < 1e6)
      return sys;
  }
}

/// Coefficients b_1..b_m of a polynomial with random roots strictly inside the unit disk.
inline std::vector<double> random_stable_coefficients(std::mt19937_64& rng, int m, double max_radius = 0.9) {
  std::uniform_real_distribution<double> rad(0.0, max_radius);
  std::uniform_real_distribution<double> ang(0.0, 3.141592653589793);
  std::vector<std::complex<double>> roots;
  while (static_cast<int>(roots.size()) < m) {
    if (m - static_cast<int>(roots.size()) >= 2 && rng() % 2 == 0) {
      const auto z = std::polar(rad(rng), ang(rng));
      roots.push_back(z);
      roots.push_back(std::conj(z));
    } else {
      roots.push_back(rad(rng) * (rng() % 2 == 0 ? 1.0 : -1.0));
    }
  }
  // Expand prod (s - r): coefficients from highest power down.
  std::vector<std::complex<double>> poly{1.0};
  for (const auto& r : roots) {
    std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
    for (std::size_t k = 0; k < poly.size(); ++k) {
      next[k] += poly[k];
      next[k + 1] -= r * poly[k];
    }
    poly = next;
  }
  // poly = [1, b_m, ..., b_1]
  std::vector<double> b(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) b[static_cast<std::size_t>(k)] = poly[static_cast<std::size_t>(m - k)].real();
  return b;
}

}  // namespace fixtures
