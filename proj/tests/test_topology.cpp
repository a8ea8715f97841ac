#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dfl/error.hpp"
#include "dfl/topology.hpp"

using namespace dfl;

namespace {

TopologySpec spec_of(TopologyKind kind, std::size_t m, std::uint64_t seed = 1) {
  TopologySpec s;
  s.kind = kind;
  s.m = m;
  s.seed = seed;
  s.k = std::min<std::size_t>(8, (m - 1) / 2 * 2);
  s.n_neighbors = std::min<std::size_t>(10, m - 1);
  if (kind == TopologyKind::kErdosRenyi && m < 20) s.p = 0.5;
  return s;
}

std::size_t row_nonzeros(const SymmetricMatrix& w, std::size_t i) {
  std::size_t n = 0;
  for (double v : w.row(i)) n += v != 0.0;
  return n;
}

}  // namespace

TEST_SUITE("topology") {

TEST_CASE("kind names round-trip") {
  for (auto k : {TopologyKind::kRing, TopologyKind::kGrid, TopologyKind::kExponential, TopologyKind::kFull,
                 TopologyKind::kErdosRenyi, TopologyKind::kWattsStrogatz, TopologyKind::kRandomDynamic}) {
    CHECK(topology_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(topology_kind_from_string("torus"), ConfigError);
}

TEST_CASE("ring m=5 edges") {
  const Graph g = build_graph(spec_of(TopologyKind::kRing, 5));
  const std::vector<std::pair<std::size_t, std::size_t>> expect{{0, 1}, {0, 4}, {1, 2}, {2, 3}, {3, 4}};
  CHECK(g.edges() == expect);
}

TEST_CASE("full m=4 has 6 edges") { CHECK(build_graph(spec_of(TopologyKind::kFull, 4)).edges().size() == 6); }

TEST_CASE("exponential m=8") {
  CHECK(exponential_targets(0, 8) == std::vector<std::size_t>{1, 2, 4});
  const Graph g = build_graph(spec_of(TopologyKind::kExponential, 8));
  for (std::size_t j : {1, 2, 4}) CHECK(g.has_edge(0, j));
  // Undirected: node 0 also hears from 7 (7+1) and 6 (6+2); 4+4 = 0 is already covered.
  CHECK(g.neighbors(0) == std::vector<std::size_t>{1, 2, 4, 6, 7});
}

TEST_CASE("grid is a non-wrapping lattice") {
  const Graph g = build_graph(spec_of(TopologyKind::kGrid, 9));
  CHECK(g.edges().size() == 12);
  CHECK(g.degree(4) == 4);
  CHECK(g.degree(0) == 2);
  CHECK(g.connected());
}

TEST_CASE("metropolis weights") {
  const MixingMatrix ring = metropolis_weights(build_graph(spec_of(TopologyKind::kRing, 4)));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(ring.w(i, i) == doctest::Approx(1.0 / 3.0));
    CHECK(ring.w(i, (i + 1) % 4) == doctest::Approx(1.0 / 3.0));
    CHECK(ring.w(i, (i + 2) % 4) == 0.0);
  }
  CHECK(std::abs(ring.psi - 1.0 / 3.0) < 1e-9);

  const MixingMatrix full = metropolis_weights(build_graph(spec_of(TopologyKind::kFull, 6)));
  for (double v : full.w.entries()) CHECK(v == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(std::abs(full.psi) < 1e-10);

  const MixingMatrix pair = metropolis_weights(Graph(2, {{0, 1}}));
  for (double v : pair.w.entries()) CHECK(v == 0.5);
  CHECK(std::abs(pair.psi) < 1e-10);
}

TEST_CASE("every builder passes validation for m in {4, 16, 100}") {
  for (auto k : {TopologyKind::kRing, TopologyKind::kGrid, TopologyKind::kExponential, TopologyKind::kFull,
                 TopologyKind::kErdosRenyi, TopologyKind::kWattsStrogatz, TopologyKind::kRandomDynamic}) {
    for (std::size_t m : {4, 16, 100}) {
      for (std::uint64_t seed : {1, 2, 3}) {
        const Graph g = build_graph(spec_of(k, m, seed));
        const ValidationReport r = validate(metropolis_weights(g));
        INFO(to_string(k), " m=", m, " seed=", seed);
        CHECK(r.stochastic_ok);
        CHECK(r.symmetric_ok);
        if (g.connected()) CHECK(r.null_space_ok);
        CHECK(r.lemma1_ok);
      }
    }
  }
}

TEST_CASE("validate flags identity and accepts P") {
  const std::size_t m = 5;
  const ValidationReport id = validate(m, SymmetricMatrix::identity(m).entries());
  CHECK(id.stochastic_ok);
  CHECK_FALSE(id.null_space_ok);
  CHECK(id.psi == doctest::Approx(1.0));
  const ValidationReport p = validate(m, SymmetricMatrix::averaging(m).entries());
  CHECK(p.passes());
  CHECK(std::abs(p.psi) < 1e-10);
  std::vector<double> bad = SymmetricMatrix::averaging(m).entries();
  bad[1] += 1e-3;
  const ValidationReport b = validate(m, bad);
  CHECK_FALSE(b.passes());
  CHECK(b.max_row_sum_deviation == doctest::Approx(1e-3));
}

TEST_CASE("random_dynamic per-round sampling") {
  TopologySpec s = spec_of(TopologyKind::kRandomDynamic, 100, 4);
  const RoundTopology a = sample_round_topology(s, 7);
  const RoundTopology b = sample_round_topology(s, 7);
  CHECK(a.mixing.w == b.mixing.w);
  CHECK_FALSE(sample_round_topology(s, 8).mixing.w == a.mixing.w);
  // Self + own 10 picks at least; peers that picked this client add more, so
  // the row count is 1 + |own picks U pickers| (about 20 on average, not capped at 21).
  std::size_t lo = 1000, hi = 0, total = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const std::size_t nz = row_nonzeros(a.mixing.w, i);
    lo = std::min(lo, nz);
    hi = std::max(hi, nz);
    total += nz;
    CHECK(nz == 1 + a.graph.degree(i));
  }
  CHECK(lo >= 11);
  CHECK(hi <= 100);
  // P(edge) = 1 - (1 - 10/99)^2, so the mean row count is 1 + 99 * 0.192 = 20.0.
  const double mean = static_cast<double>(total) / 100.0;
  CHECK(mean > 18.0);
  CHECK(mean < 22.0);
  MESSAGE("random_dynamic m=100 row nonzeros in [", lo, ", ", hi, "]");

  s = spec_of(TopologyKind::kRandomDynamic, 6);
  s.n_neighbors = 5;
  for (std::size_t r = 0; r < 3; ++r) CHECK(sample_round_topology(s, r).graph.edges().size() == 15);
}

TEST_CASE("invalid parameters") {
  TopologySpec s = spec_of(TopologyKind::kWattsStrogatz, 10);
  s.k = 3;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = spec_of(TopologyKind::kErdosRenyi, 10);
  s.p = 1.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("erdos renyi gives up on hopeless probabilities") {
  TopologySpec s = spec_of(TopologyKind::kErdosRenyi, 50);
  s.p = 1e-6;
  CHECK_THROWS_AS(build_graph(s), TopologyError);
}

}
