#include <doctest.h>

#include <cmath>
#include <memory>

#include "dfl/error.hpp"
#include "dfl/problems.hpp"
#include "dfl/rng.hpp"

using namespace dfl;

namespace {

Problem data_problem(ProblemKind kind, std::size_t m = 3) {
  ProblemSpec spec;
  spec.kind = kind;
  spec.classes = 4;
  spec.input_dim = 5;
  spec.samples = 300;
  spec.hidden = 6;
  PartitionSpec part;
  part.kind = PartitionKind::kIid;
  return build_problem(spec, part, m, 3);
}

double fd_rel_error(const Problem& p, std::size_t client, const DenseVector& x) {
  const DenseVector g = p.grad(client, x);
  DenseVector fd(x.size());
  const double h = 1e-5;
  for (std::size_t j = 0; j < x.size(); ++j) {
    DenseVector a = x, b = x;
    a[j] += h;
    b[j] -= h;
    fd[j] = (p.loss(client, a) - p.loss(client, b)) / (2 * h);
  }
  return norm(subtract(g, fd)) / std::max(1e-8, norm(fd));
}

DenseVector random_point(std::size_t d, std::uint64_t seed) {
  RngStream r(seed, 0, Purpose::kInit, 99);
  DenseVector x(d);
  for (auto& v : x) v = r.normal();
  return x;
}

}  // namespace

TEST_SUITE("problems") {

TEST_CASE("quadratic losses and gradients") {
  const Problem p = Problem::quadratic({{SymmetricMatrix::identity(2), {0, 0}}});
  CHECK(p.loss(0, {3, 4}) == 12.5);
  CHECK(p.grad(0, {3, 4}) == DenseVector{3, 4});
  const Problem q = Problem::quadratic({{SymmetricMatrix::identity(2), {1, -1}}});
  CHECK(q.loss(0, {1, -1}) == 0.0);
  CHECK(q.grad(0, {2, 2}) == DenseVector{1, 3});
}

TEST_CASE("logistic at zero is ln C") {
  const Problem p = data_problem(ProblemKind::kLogistic);
  CHECK(p.loss(0, DenseVector(p.dim())) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(p.dim() == 4 * 5 + 4);
  const Problem mlp = data_problem(ProblemKind::kMlp);
  CHECK(mlp.dim() == 6 * 5 + 6 + 4 * 6 + 4);
}

TEST_CASE("finite differences agree with analytic gradients") {
  ProblemSpec qs;
  qs.kind = ProblemKind::kQuadratic;
  qs.quad_dim = 7;
  const Problem quad = build_problem(qs, PartitionSpec{}, 3, 5);
  const Problem logi = data_problem(ProblemKind::kLogistic);
  const Problem mlp = data_problem(ProblemKind::kMlp);
  for (const Problem* p : {&quad, &logi, &mlp}) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const DenseVector x = random_point(p->dim(), s);
      CHECK(fd_rel_error(*p, s % 3, x) < 1e-5);
    }
  }
}

TEST_CASE("gradients are deterministic without noise") {
  const Problem p = data_problem(ProblemKind::kMlp);
  const DenseVector x = random_point(p.dim(), 1);
  CHECK(p.grad(1, x) == p.grad(1, x));
}

TEST_CASE("minibatches") {
  const Problem p = data_problem(ProblemKind::kLogistic);
  const std::size_t s = p.client_size(0);
  RngStream a(1, 0, Purpose::kMinibatch, 4);
  RngStream b(1, 0, Purpose::kMinibatch, 4);
  const auto ia = p.sample_minibatch(0, s, a);
  CHECK(ia.size() == s);
  for (std::size_t i : ia) CHECK(i < s);
  CHECK(ia == p.sample_minibatch(0, s, b));
}

TEST_CASE("minibatch gradient is unbiased") {
  const Problem p = data_problem(ProblemKind::kLogistic);
  const DenseVector x = random_point(p.dim(), 2);
  const DenseVector full = p.grad(0, x);
  const std::size_t draws = 10000;
  DenseVector mean(p.dim()), sq(p.dim());
  RngStream rng(5, 0, Purpose::kMinibatch, 0);
  for (std::size_t d = 0; d < draws; ++d) {
    const auto idx = p.sample_minibatch(0, 4, rng);
    const DenseVector g = p.grad(0, x, idx);
    for (std::size_t j = 0; j < g.size(); ++j) {
      mean[j] += g[j];
      sq[j] += g[j] * g[j];
    }
  }
  for (std::size_t j = 0; j < p.dim(); ++j) {
    const double m = mean[j] / draws;
    const double sd = std::sqrt(std::max(0.0, sq[j] / draws - m * m));
    CHECK(std::abs(m - full[j]) <= 3.0 * sd / 100.0 + 1e-12);
  }
}

TEST_CASE("injected noise has the configured second moment") {
  Problem p = Problem::quadratic({{SymmetricMatrix::identity(50), DenseVector(50)}}, {0.7, true});
  const DenseVector x(50);
  double total = 0.0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    RngStream r(1, 0, Purpose::kNoise, static_cast<std::uint64_t>(i));
    total += squared_norm(p.grad(0, x, {}, &r));
  }
  CHECK(total / n == doctest::Approx(0.49).epsilon(0.05));
  CHECK(p.grad(0, x) == DenseVector(50));
}

TEST_CASE("smoothness estimates") {
  const std::vector<double> d{1.0, 4.0};
  const Problem p = Problem::quadratic({{SymmetricMatrix::diagonal(d), {0, 0}}, {SymmetricMatrix::diagonal(d), {0, 0}}});
  const SmoothnessProfile sp = estimate_smoothness(p, {}, 1);
  CHECK(sp.L_exact);
  CHECK(sp.L == doctest::Approx(4.0).epsilon(1e-9));
  REQUIRE(sp.G);
  CHECK(*sp.G < 1e-6);
  CHECK(*sp.B == doctest::Approx(1.0).epsilon(1e-6));

  const Problem het = Problem::quadratic({{SymmetricMatrix::diagonal(d), {3, 0}}, {SymmetricMatrix::diagonal(d), {-3, 0}}});
  CHECK(*estimate_smoothness(het, {}, 1).G > 0.1);
}

TEST_CASE("replacing one sample touches one client") {
  const Problem p = data_problem(ProblemKind::kLogistic);
  const std::vector<double> feat(5, 10.0);
  const Problem q = p.with_replaced_sample(1, 0, feat, 2);
  const DenseVector x = random_point(p.dim(), 3);
  CHECK(p.loss(0, x) == q.loss(0, x));
  CHECK(p.loss(2, x) == q.loss(2, x));
  CHECK(p.loss(1, x) != q.loss(1, x));
  CHECK(p.train_set()->features != q.train_set()->features);
}

TEST_CASE("bad inputs throw") {
  const Problem p = data_problem(ProblemKind::kLogistic);
  CHECK_THROWS_AS(p.loss(0, DenseVector(3)), DimensionError);
  CHECK_THROWS(p.loss(9, DenseVector(p.dim())));
}

}
