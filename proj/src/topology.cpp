#include "dfl/topology.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dfl/error.hpp"
#include "dfl/rng.hpp"

namespace dfl {

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::kRing: return "ring";
    case TopologyKind::kGrid: return "grid";
    case TopologyKind::kExponential: return "exponential";
    case TopologyKind::kFull: return "full";
    case TopologyKind::kErdosRenyi: return "erdos_renyi";
    case TopologyKind::kWattsStrogatz: return "watts_strogatz";
    case TopologyKind::kRandomDynamic: return "random_dynamic";
  }
  return "unknown";
}

TopologyKind topology_kind_from_string(const std::string& name) {
  for (auto k : {TopologyKind::kRing, TopologyKind::kGrid, TopologyKind::kExponential,
                 TopologyKind::kFull, TopologyKind::kErdosRenyi, TopologyKind::kWattsStrogatz,
                 TopologyKind::kRandomDynamic}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown topology kind '" + name + "'");
}

void TopologySpec::validate() const {
  if (m < 1) throw ConfigError("topology: m must be at least 1");
  switch (kind) {
    case TopologyKind::kErdosRenyi:
      if (!(p > 0.0 && p <= 1.0)) throw ConfigError("topology: erdos_renyi needs 0 < p <= 1");
      break;
    case TopologyKind::kWattsStrogatz:
      if (k == 0 || k % 2 != 0 || k >= m) {
        throw ConfigError("topology: watts_strogatz needs k even, positive and < m");
      }
      if (!(p_rewire >= 0.0 && p_rewire <= 1.0)) {
        throw ConfigError("topology: watts_strogatz needs 0 <= p_rewire <= 1");
      }
      break;
    case TopologyKind::kRandomDynamic:
      if (n_neighbors == 0 || n_neighbors >= m) {
        throw ConfigError("topology: random_dynamic needs 0 < n_neighbors < m");
      }
      break;
    default:
      break;
  }
}

Graph::Graph(std::size_t m, std::vector<std::pair<std::size_t, std::size_t>> edges)
    : m_(m), adjacency_(m) {
  std::set<std::pair<std::size_t, std::size_t>> unique;
  for (auto [a, b] : edges) {
    if (a >= m || b >= m) throw TopologyError("Graph: edge endpoint out of range");
    if (a == b) continue;
    unique.insert({std::min(a, b), std::max(a, b)});
  }
  edges_.assign(unique.begin(), unique.end());
  for (auto [a, b] : edges_) {
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());

  if (m_ == 0) return;
  std::vector<char> seen(m_, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : adjacency_[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++visited;
        stack.push_back(v);
      }
    }
  }
  connected_ = visited == m_;
}

bool Graph::has_edge(std::size_t i, std::size_t j) const {
  const auto& adj = adjacency_.at(i);
  return std::binary_search(adj.begin(), adj.end(), j);
}

std::vector<std::size_t> exponential_targets(std::size_t i, std::size_t m) {
  std::vector<std::size_t> out;
  for (std::size_t step = 1; step < m; step *= 2) out.push_back((i + step) % m);
  return out;
}

namespace {

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

EdgeList ring_edges(std::size_t m) {
  EdgeList e;
  if (m < 2) return e;
  for (std::size_t i = 0; i < m; ++i) e.emplace_back(i, (i + 1) % m);
  return e;
}

EdgeList grid_edges(std::size_t m) {
  const auto rows = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));
  const std::size_t cols = (m + rows - 1) / rows;
  EdgeList e;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t c = i % cols;
    if (c + 1 < cols && i + 1 < m) e.emplace_back(i, i + 1);
    if (i + cols < m) e.emplace_back(i, i + cols);
  }
  return e;
}

EdgeList exponential_edges(std::size_t m) {
  EdgeList e;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j : exponential_targets(i, m)) e.emplace_back(i, j);
  }
  return e;
}

EdgeList full_edges(std::size_t m) {
  EdgeList e;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) e.emplace_back(i, j);
  }
  return e;
}

EdgeList erdos_renyi_edges(std::size_t m, double p, RngStream& rng) {
  EdgeList e;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (rng.uniform() < p) e.emplace_back(i, j);
    }
  }
  return e;
}

// Ring lattice with k/2 neighbours per side, each lattice edge rewired with
// probability p_rewire to a uniformly chosen node (no self-loops, no duplicates).
EdgeList watts_strogatz_edges(std::size_t m, std::size_t k, double p_rewire, RngStream& rng) {
  std::set<std::pair<std::size_t, std::size_t>> edges;
  auto key = [](std::size_t a, std::size_t b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t s = 1; s <= k / 2; ++s) edges.insert(key(i, (i + s) % m));
  }
  for (std::size_t s = 1; s <= k / 2; ++s) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto old_edge = key(i, (i + s) % m);
      if (rng.uniform() >= p_rewire) continue;
      if (edges.count(old_edge) == 0) continue;
      // Node i already adjacent to everyone: nothing to rewire to.
      std::size_t deg = 0;
      for (const auto& e : edges) deg += (e.first == i || e.second == i);
      if (deg >= m - 1) continue;
      std::size_t target;
      do {
        target = rng.below(m);
      } while (target == i || edges.count(key(i, target)) != 0);
      edges.erase(old_edge);
      edges.insert(key(i, target));
    }
  }
  return EdgeList(edges.begin(), edges.end());
}

EdgeList random_dynamic_edges(const TopologySpec& spec, std::size_t round) {
  EdgeList e;
  std::vector<std::size_t> peers;
  for (std::size_t i = 0; i < spec.m; ++i) {
    RngStream rng(spec.seed, i, Purpose::kTopology, round);
    peers.clear();
    for (std::size_t j = 0; j < spec.m; ++j) {
      if (j != i) peers.push_back(j);
    }
    // Partial Fisher-Yates: the first n_neighbors slots are a uniform draw
    // without replacement.
    for (std::size_t s = 0; s < spec.n_neighbors; ++s) {
      const std::size_t r = s + rng.below(peers.size() - s);
      std::swap(peers[s], peers[r]);
      e.emplace_back(i, peers[s]);
    }
  }
  return e;
}

constexpr int kMaxConnectRetries = 100;

double psi_or_best_estimate(const SymmetricMatrix& w) {
  try {
    return second_eigenvalue_magnitude(w);
  } catch (const NumericalError& e) {
    return e.best_estimate();
  }
}

}  // namespace

Graph build_graph(const TopologySpec& spec) {
  spec.validate();
  const std::size_t m = spec.m;
  switch (spec.kind) {
    case TopologyKind::kRing: return Graph(m, ring_edges(m));
    case TopologyKind::kGrid: return Graph(m, grid_edges(m));
    case TopologyKind::kExponential: return Graph(m, exponential_edges(m));
    case TopologyKind::kFull: return Graph(m, full_edges(m));
    case TopologyKind::kRandomDynamic: return sample_round_topology(spec, 0).graph;
    case TopologyKind::kErdosRenyi:
    case TopologyKind::kWattsStrogatz: {
      for (int attempt = 0; attempt <= kMaxConnectRetries; ++attempt) {
        RngStream rng(spec.seed, 0, Purpose::kTopology, static_cast<std::uint64_t>(attempt));
        Graph g = spec.kind == TopologyKind::kErdosRenyi
                      ? Graph(m, erdos_renyi_edges(m, spec.p, rng))
                      : Graph(m, watts_strogatz_edges(m, spec.k, spec.p_rewire, rng));
        if (g.connected()) return g;
      }
      throw TopologyError(to_string(spec.kind) + " graph still disconnected after " +
                          std::to_string(kMaxConnectRetries) + " retries (m=" +
                          std::to_string(m) + ")");
    }
  }
  throw ConfigError("build_graph: unhandled topology kind");
}

MixingMatrix metropolis_weights(const Graph& g) {
  const std::size_t m = g.node_count();
  SymmetricMatrix w(m);
  for (auto [i, j] : g.edges()) {
    const double weight = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(i), g.degree(j))));
    w.set(i, j, weight);
  }
  for (std::size_t i = 0; i < m; ++i) {
    double off = 0.0;
    for (std::size_t j : g.neighbors(i)) off += w(i, j);
    w.set(i, i, 1.0 - off);
  }
  MixingMatrix out;
  out.psi = m > 0 ? psi_or_best_estimate(w) : 0.0;
  out.spectral_gap = 1.0 - out.psi;
  out.w = std::move(w);
  return out;
}

RoundTopology sample_round_topology(const TopologySpec& spec, std::size_t round) {
  if (spec.kind != TopologyKind::kRandomDynamic) {
    throw ConfigError("sample_round_topology requires a random_dynamic spec");
  }
  spec.validate();
  RoundTopology out;
  out.graph = Graph(spec.m, random_dynamic_edges(spec, round));
  out.mixing = metropolis_weights(out.graph);
  return out;
}

ValidationReport validate(std::size_t order, const std::vector<double>& row_major,
                          std::uint64_t seed) {
  if (row_major.size() != order * order) throw DimensionError("validate: wrong entry count");
  ValidationReport r;
  auto at = [&](std::size_t i, std::size_t j) { return row_major[i * order + j]; };
  r.min_entry = order > 0 ? at(0, 0) : 0.0;
  for (std::size_t i = 0; i < order; ++i) {
    double row = 0.0;
    double col = 0.0;
    for (std::size_t j = 0; j < order; ++j) {
      row += at(i, j);
      col += at(j, i);
      r.max_asymmetry = std::max(r.max_asymmetry, std::abs(at(i, j) - at(j, i)));
      r.min_entry = std::min(r.min_entry, at(i, j));
    }
    r.max_row_sum_deviation = std::max(r.max_row_sum_deviation, std::abs(row - 1.0));
    r.max_col_sum_deviation = std::max(r.max_col_sum_deviation, std::abs(col - 1.0));
  }

  // sum_i sum_j w_ij a_j == sum_i a_i for an arbitrary sequence a.
  RngStream rng(seed, 0, Purpose::kEstimate, 0);
  std::vector<double> a(order);
  for (auto& v : a) v = rng.normal();
  double lhs = 0.0;
  double rhs = 0.0;
  for (std::size_t i = 0; i < order; ++i) {
    for (std::size_t j = 0; j < order; ++j) lhs += at(i, j) * a[j];
    rhs += a[i];
  }
  r.lemma1_deviation = std::abs(lhs - rhs);

  r.stochastic_ok = r.max_row_sum_deviation < 1e-12 && r.max_col_sum_deviation < 1e-12 &&
                    r.min_entry >= 0.0;
  r.symmetric_ok = r.max_asymmetry == 0.0;
  r.lemma1_ok = r.lemma1_deviation < 1e-10;
  if (r.symmetric_ok && order > 0) {
    r.psi = psi_or_best_estimate(SymmetricMatrix(order, row_major));
    r.null_space_ok = r.psi < 1.0 - 1e-9;
  }
  return r;
}

ValidationReport validate(const MixingMatrix& mixing, std::uint64_t seed) {
  return validate(mixing.w.order(), mixing.w.entries(), seed);
}

}  // namespace dfl
