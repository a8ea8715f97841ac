#include <doctest.h>

#include <cmath>
#include <limits>

#include "dfl/analysis.hpp"
#include "dfl/error.hpp"

using namespace dfl;

namespace {

std::vector<RoundRecord> series(std::size_t n, double (*f)(double)) {
  std::vector<RoundRecord> out;
  for (std::size_t t = 1; t <= n; ++t) {
    RoundRecord r;
    r.round = t;
    r.grad_norm_z_sq = f(static_cast<double>(t));
    out.push_back(r);
  }
  return out;
}

RunConfig probe_config() {
  RunConfig c;
  c.m = 6;
  c.topology.kind = TopologyKind::kRing;
  c.topology.m = 6;
  c.problem.classes = 3;
  c.problem.input_dim = 4;
  c.problem.samples = 400;
  c.hyper.beta = 0.5;
  c.hyper.batch_size = 4;
  return c;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("kappa_psi implementations agree") {
  CHECK(std::abs(kappa_psi(0.5, 0.5) - kappa_psi_alt(0.5, 0.5)) < 1e-12 * kappa_psi(0.5, 0.5));
  for (double psi = 0.05; psi < 1.0; psi += 0.1) {
    for (double alpha = 0.05; alpha < 1.0; alpha += 0.15) {
      const double a = kappa_psi(psi, alpha);
      CHECK(std::abs(a - kappa_psi_alt(psi, alpha)) <= 1e-12 * a);
    }
  }
}

TEST_CASE("kappa_psi grows as psi approaches 1") {
  const double a = kappa_psi(0.9, 0.5), b = kappa_psi(0.99, 0.5), c = kappa_psi(0.999, 0.5);
  CHECK(a < b);
  CHECK(b < c);
  CHECK_THROWS_AS(kappa_psi(0.0, 0.5), NumericalError);
  CHECK_THROWS_AS(kappa_psi(1.0, 0.5), NumericalError);
  CHECK_THROWS_AS(kappa_psi(0.5, 1.0), NumericalError);
  CHECK(kappa_psi_order(0.5) == doctest::Approx(1.0 / (0.5 * std::log(2.0))));
}

TEST_CASE("geometric-sum bound holds by brute force") {
  for (double psi : {0.2, 0.6, 0.95}) {
    for (double alpha : {0.2, 0.8}) CHECK(check_kappa_bound(psi, alpha, 10000).holds());
  }
}

TEST_CASE("rate_fit") {
  CHECK(rate_fit(series(200, [](double t) { return 1.0 / std::sqrt(t); })) == doctest::Approx(-0.5).epsilon(0.05));
  CHECK(std::abs(rate_fit(series(50, [](double) { return 3.0; }))) < 1e-12);
  CHECK(rate_fit(series(50, [](double t) { return t > 30 ? 0.0 : 1.0; })) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(rate_fit(series(10, [](double) { return 1.0; })), DataError);
  // first_round restricts the fit to the suffix.
  CHECK(rate_fit(series(100, [](double t) { return t < 50 ? 1.0 : 1.0 / t; }), 50) == doctest::Approx(-1.0).epsilon(0.01));
}

TEST_CASE("consensus distance of states") {
  std::vector<ClientState> s{ClientState::initial({0}), ClientState::initial({2})};
  CHECK(consensus_distance(s) == 1.0);
  s[1].x = {0};
  CHECK(consensus_distance(s) == 0.0);
}

TEST_CASE("stability probe coupling") {
  StabilityProbeConfig pc;
  pc.rounds = 30;
  pc.mu_tilde = 0.05;
  pc.perturbed_client = 2;
  pc.perturbed_index = 3;
  const StabilityReport rep = stability_probe(probe_config(), pc);
  REQUIRE(rep.delta.size() == 30);
  CHECK(rep.identical_before_tau0);
  REQUIRE(rep.tau0_round.has_value());
  for (std::size_t t = 0; t < *rep.tau0_round; ++t) CHECK(rep.delta[t] == 0.0);
  CHECK(rep.delta.back() > 0.0);
  CHECK(rep.U > 0.0);
  CHECK(rep.L_G > 0.0);
  CHECK(rep.probe_samples > 0);
}

TEST_CASE("identical replacement gives zero gaps") {
  const RunConfig c = probe_config();
  const Problem p = build_problem(c.problem, c.partition, c.m, c.seed);
  // Make the held-out replacement equal to the sample it replaces.
  const LabeledDataset* test = p.test_set();
  const std::size_t client = 1, pos = 0;
  const Problem twin = p.with_replaced_sample(client, pos, test->row(test->n - 1), test->labels[test->n - 1]);
  StabilityProbeConfig pc;
  pc.rounds = 10;
  pc.perturbed_client = client;
  pc.perturbed_index = pos;
  const StabilityReport rep = stability_probe(c, twin, pc);
  for (double d : rep.delta) CHECK(d == 0.0);
  for (double g : rep.sup_gap_xbar) CHECK(g == 0.0);
}

TEST_CASE("probe rejects bad settings") {
  StabilityProbeConfig pc;
  pc.perturbed_client = 99;
  CHECK_THROWS_AS(stability_probe(probe_config(), pc), ConfigError);
  pc = {};
  pc.mu_tilde = 100.0;
  CHECK_THROWS_AS(stability_probe(probe_config(), pc), ConfigError);
}

}
