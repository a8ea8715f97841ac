#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dfl/numerics.hpp"

namespace dfl {

enum class TopologyKind { kRing, kGrid, kExponential, kFull, kErdosRenyi, kWattsStrogatz, kRandomDynamic };

std::string to_string(TopologyKind kind);
/// Throws ConfigError on an unknown name.
TopologyKind topology_kind_from_string(const std::string& name);

struct TopologySpec {
  TopologyKind kind = TopologyKind::kRandomDynamic;
  std::size_t m = 100;
  std::uint64_t seed = 1;
  double p = 0.1;              // erdos_renyi edge probability
  std::size_t k = 8;           // watts_strogatz lattice degree (even)
  double p_rewire = 0.02;      // watts_strogatz rewiring probability
  std::size_t n_neighbors = 10;  // random_dynamic peers drawn per client

  /// Throws ConfigError when a parameter is out of range.
  void validate() const;
};

/// Undirected simple graph. Edges are stored once as (i, j) with i < j,
/// sorted; no self-loops.
class Graph {
 public:
  Graph() = default;
  Graph(std::size_t m, std::vector<std::pair<std::size_t, std::size_t>> edges);

  std::size_t node_count() const noexcept { return m_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
  std::size_t degree(std::size_t i) const { return adjacency_[i].size(); }
  bool connected() const noexcept { return connected_; }
  bool has_edge(std::size_t i, std::size_t j) const;

 private:
  std::size_t m_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
  bool connected_ = true;
};

struct MixingMatrix {
  SymmetricMatrix w;
  double psi = 0.0;
  double spectral_gap = 1.0;
};

/// Deterministic in (spec, seed). Random kinds are redrawn until connected,
/// at most 100 times. random_dynamic yields its round-0 graph.
Graph build_graph(const TopologySpec& spec);

/// Out-links generated by node i in the exponential graph: i + 2^j mod m for
/// every power of two below m.
std::vector<std::size_t> exponential_targets(std::size_t i, std::size_t m);

/// Metropolis-Hastings weights: w_ij = 1 / (1 + max(deg_i, deg_j)) on edges,
/// the residual mass on the diagonal.
MixingMatrix metropolis_weights(const Graph& g);

struct RoundTopology {
  Graph graph;
  MixingMatrix mixing;
};

/// Per-round graph for random_dynamic: every client draws n_neighbors
/// distinct peers, the union of directed choices is symmetrized.
/// Deterministic given (spec.seed, round). Disconnected graphs are allowed;
/// check graph.connected().
RoundTopology sample_round_topology(const TopologySpec& spec, std::size_t round);

struct ValidationReport {
  double max_row_sum_deviation = 0.0;
  double max_col_sum_deviation = 0.0;
  double max_asymmetry = 0.0;
  double min_entry = 0.0;
  double psi = 0.0;
  double lemma1_deviation = 0.0;

  bool stochastic_ok = false;
  bool symmetric_ok = false;
  bool null_space_ok = false;
  bool lemma1_ok = false;
  bool passes() const { return stochastic_ok && symmetric_ok && null_space_ok && lemma1_ok; }
};

/// Report-style check of the gossip-matrix properties. Accepts any square
/// matrix given row-major; SymmetricMatrix overload for the usual case.
ValidationReport validate(std::size_t order, const std::vector<double>& row_major,
                          std::uint64_t seed = 7);
ValidationReport validate(const MixingMatrix& mixing, std::uint64_t seed = 7);

}  // namespace dfl
