#include <doctest.h>

#include <cmath>

#include "dfl/error.hpp"
#include "dfl/optimizers.hpp"

using namespace dfl;

namespace {

Problem logistic(std::size_t m = 4) {
  ProblemSpec spec;
  spec.classes = 3;
  spec.input_dim = 4;
  spec.samples = 200;
  return build_problem(spec, PartitionSpec{}, m, 2);
}

HyperParams full_batch(double eta, double lambda, std::size_t K, double beta = 0.0) {
  HyperParams h;
  h.eta = eta;
  h.lambda = lambda;
  h.K = K;
  h.beta = beta;
  h.batch_size = 0;
  return h;
}

}  // namespace

TEST_SUITE("optimizers") {

TEST_CASE("extrapolate") {
  ClientState s = ClientState::initial({2});
  s.x_prev = {1};
  CHECK(extrapolate(s, 0.5) == DenseVector{2.5});
  CHECK(s.anchor == DenseVector{2.5});
  CHECK(extrapolate(s, 0.0) == DenseVector{2});
  ClientState same = ClientState::initial({3, 4});
  CHECK(extrapolate(same, 0.9) == DenseVector{3, 4});
}

TEST_CASE("gamma coefficients") {
  const auto c = local_update_coefficients(0.1, 0.5, 5);
  CHECK(c.gamma == doctest::Approx(0.2262190625).epsilon(1e-14));
  double sum = 0;
  for (double w : c.weights) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  const auto lim = local_update_coefficients(0.1, 0.0, 5);
  CHECK(lim.lambda_limit);
  CHECK(lim.gamma_over_lambda == doctest::Approx(0.5));
  for (double w : lim.weights) CHECK(w == 0.2);
}

TEST_CASE("K=1, lambda=0 is one gradient step") {
  const Problem p = logistic();
  ClientState s = ClientState::initial(DenseVector(p.dim(), 0.1));
  const HyperParams h = full_batch(0.3, 0.0, 1);
  ClientStreams st(1, 0, 0);
  const DenseVector out = local_update(AlgorithmKind::kDFedCata, s, p, h, 0, 0, st);
  CHECK(out == axpy(-0.3, p.grad(0, s.x), s.x));
}

TEST_CASE("closed form of the local phase") {
  const Problem p = logistic();
  for (double lambda : {0.0, 0.1, 1.0}) {
    for (std::size_t K : {1, 3, 10}) {
      const HyperParams h = full_batch(0.2, lambda, K, 0.7);
      ClientState s = ClientState::initial(DenseVector(p.dim(), 0.2));
      s.x_prev = DenseVector(p.dim(), -0.1);
      ClientStreams st(1, 2, 0);
      LocalTrace trace;
      const DenseVector out = local_update(AlgorithmKind::kDFedCata, s, p, h, 2, 0, st, &trace);
      const auto c = local_update_coefficients(0.2, lambda, K);
      DenseVector pred = s.anchor;
      for (std::size_t k = 0; k < K; ++k) axpy_inplace(-c.gamma_over_lambda * c.weights[k], trace.grads[k], pred);
      CHECK(max_abs(subtract(pred, out)) < 1e-10);
      CHECK(trace.iterates.size() == K + 1);
    }
  }
}

TEST_CASE("degenerate baselines coincide with DFedAvg") {
  const Problem p = logistic();
  HyperParams h;
  h.batch_size = 8;
  h.K = 4;
  auto run_one = [&](AlgorithmKind kind, const HyperParams& hp) {
    ClientState s = ClientState::initial(DenseVector(p.dim(), 0.05));
    ClientStreams st(3, 1, 5);
    return local_update(kind, s, p, hp, 1, 5, st);
  };
  const DenseVector avg = run_one(AlgorithmKind::kDFedAvg, h);
  HyperParams m0 = h;
  m0.momentum = 0.0;
  CHECK(run_one(AlgorithmKind::kDFedAvgM, m0) == avg);
  HyperParams r0 = h;
  r0.rho = 0.0;
  CHECK(run_one(AlgorithmKind::kDFedSAM, r0) == avg);
  HyperParams c0 = h;
  c0.lambda = 0.0;
  c0.beta = 0.0;
  CHECK(run_one(AlgorithmKind::kDFedCata, c0) == avg);
  CHECK_FALSE(run_one(AlgorithmKind::kDFedSAM, h) == avg);
  CHECK_FALSE(run_one(AlgorithmKind::kDFedAvgM, h) == avg);
}

TEST_CASE("dpsgd takes one step") {
  const Problem p = logistic();
  HyperParams h = full_batch(0.1, 0.0, 5);
  ClientState s = ClientState::initial(DenseVector(p.dim()));
  ClientStreams st(1, 0, 0);
  LocalTrace tr;
  local_update(AlgorithmKind::kDPSGD, s, p, h, 0, 0, st, &tr);
  CHECK(tr.grads.size() == 1);
  CHECK(local_steps(AlgorithmKind::kDPSGD, h) == 1);
}

TEST_CASE("replayed batches match the ones drawn") {
  const Problem p = logistic();
  HyperParams h;
  h.batch_size = 5;
  ClientState s = ClientState::initial(DenseVector(p.dim()));
  ClientStreams st(9, 3, 12);
  LocalTrace tr;
  local_update(AlgorithmKind::kDFedCata, s, p, h, 3, 12, st, &tr);
  CHECK(tr.batches == replay_batches(p, h, AlgorithmKind::kDFedCata, 3, 12, 9));
}

TEST_CASE("mix") {
  std::vector<ClientState> states{ClientState::initial({1, 0}), ClientState::initial({3, 2})};
  const std::vector<DenseVector> local{{1, 0}, {3, 2}};
  mix(states, local, SymmetricMatrix::identity(2));
  CHECK(states[0].x == DenseVector{1, 0});
  mix(states, local, SymmetricMatrix::averaging(2));
  CHECK(states[0].x == DenseVector{2, 1});
  CHECK(states[1].x == DenseVector{2, 1});
  CHECK(states[0].x_prev == DenseVector{1, 0});
  CHECK_THROWS_AS(mix(states, local, SymmetricMatrix::identity(3)), DimensionError);
}

TEST_CASE("divergence names round and client") {
  const Problem p = Problem::quadratic({{SymmetricMatrix::identity(2), {0, 0}}});
  HyperParams h = full_batch(1e200, 0.0, 3);
  ClientState s = ClientState::initial({1e200, 1e200});
  ClientStreams st(1, 0, 7);
  try {
    local_update(AlgorithmKind::kDFedAvg, s, p, h, 0, 7, st);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.round() == 7);
    CHECK(e.client() == 0);
  }
}

TEST_CASE("schedules") {
  HyperParams h;
  h.eta = 0.1;
  h.lr_decay = 0.5;
  CHECK(step_size(h, 2, 3) == 0.025);
  h.schedule = LrSchedule::kInverseTime;
  h.mu_tilde = 1.0;
  h.K = 5;
  CHECK(step_size(h, 0, 0) == 1.0);
  CHECK(step_size(h, 2, 1) == 1.0 / 12.0);
  HyperParams bad;
  bad.beta = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

}
