#include "dfl/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dfl/error.hpp"
#include "dfl/rng.hpp"

namespace dfl {

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kQuadratic: return "quadratic";
    case ProblemKind::kLogistic: return "logistic";
    case ProblemKind::kMlp: return "mlp";
  }
  return "unknown";
}

ProblemKind problem_kind_from_string(const std::string& name) {
  if (name == "quadratic") return ProblemKind::kQuadratic;
  if (name == "logistic") return ProblemKind::kLogistic;
  if (name == "mlp") return ProblemKind::kMlp;
  throw ConfigError("unknown problem kind '" + name + "'");
}

Problem Problem::quadratic(std::vector<QuadraticClient> clients, NoiseConfig noise) {
  if (clients.empty()) throw ConfigError("quadratic problem needs at least one client");
  Problem p;
  p.kind_ = ProblemKind::kQuadratic;
  p.dim_ = clients.front().b.size();
  for (const auto& c : clients) {
    if (c.b.size() != p.dim_ || c.a.order() != p.dim_) {
      throw DimensionError("quadratic problem: all clients must share the dimension");
    }
  }
  p.quad_ = std::move(clients);
  p.noise_ = noise;
  return p;
}

namespace {

void check_partition(const LabeledDataset& ds, const Partition& part) {
  if (part.assignments.empty()) throw ConfigError("problem: partition has no clients");
  for (std::size_t i = 0; i < part.assignments.size(); ++i) {
    if (part.assignments[i].empty()) {
      throw DataError("problem: client " + std::to_string(i) + " has no samples");
    }
    for (std::size_t idx : part.assignments[i]) {
      if (idx >= ds.n) throw DataError("problem: partition index out of range");
    }
  }
}

}  // namespace

Problem Problem::logistic(std::shared_ptr<const LabeledDataset> train, Partition partition,
                          NoiseConfig noise) {
  train->check();
  check_partition(*train, partition);
  Problem p;
  p.kind_ = ProblemKind::kLogistic;
  p.dim_ = train->classes * (train->dim + 1);
  p.train_ = std::move(train);
  p.partition_ = std::move(partition);
  p.noise_ = noise;
  return p;
}

Problem Problem::mlp(std::shared_ptr<const LabeledDataset> train, Partition partition,
                     std::size_t hidden, NoiseConfig noise) {
  if (hidden == 0) throw ConfigError("mlp: hidden units must be positive");
  train->check();
  check_partition(*train, partition);
  Problem p;
  p.kind_ = ProblemKind::kMlp;
  p.hidden_ = hidden;
  p.dim_ = hidden * train->dim + hidden + train->classes * hidden + train->classes;
  p.train_ = std::move(train);
  p.partition_ = std::move(partition);
  p.noise_ = noise;
  return p;
}

std::size_t Problem::clients() const noexcept {
  return kind_ == ProblemKind::kQuadratic ? quad_.size() : partition_.assignments.size();
}

std::size_t Problem::client_size(std::size_t client) const {
  check_client(client);
  return kind_ == ProblemKind::kQuadratic ? 1 : partition_.assignments[client].size();
}

void Problem::check_x(const DenseVector& x) const {
  if (x.size() != dim_) {
    throw DimensionError("problem: parameter length " + std::to_string(x.size()) +
                         " but dimension is " + std::to_string(dim_));
  }
}

void Problem::check_client(std::size_t client) const {
  if (client >= clients()) throw DataError("problem: client " + std::to_string(client) + " out of range");
}

std::size_t Problem::global_index(std::size_t client, std::size_t position) const {
  const auto& list = partition_.assignments[client];
  if (position >= list.size()) {
    throw DataError("problem: sample position " + std::to_string(position) + " out of range for client " +
                    std::to_string(client));
  }
  return list[position];
}

double Problem::accumulate_sample(const DenseVector& x, std::span<const double> features, int label,
                                  DenseVector* g) const {
  const std::size_t c = train_->classes;
  const std::size_t din = train_->dim;
  const auto y = static_cast<std::size_t>(label);
  std::vector<double> logits(c);

  if (kind_ == ProblemKind::kLogistic) {
    const double* w = x.data();
    const double* bias = x.data() + c * din;
    for (std::size_t k = 0; k < c; ++k) {
      double s = bias[k];
      for (std::size_t j = 0; j < din; ++j) s += w[k * din + j] * features[j];
      logits[k] = s;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    if (g) {
      double* gw = g->data();
      double* gb = g->data() + c * din;
      for (std::size_t k = 0; k < c; ++k) {
        const double delta = std::exp(logits[k] - lse) - (k == y ? 1.0 : 0.0);
        for (std::size_t j = 0; j < din; ++j) gw[k * din + j] += delta * features[j];
        gb[k] += delta;
      }
    }
    return lse - logits[y];
  }

  // MLP
  const std::size_t h = hidden_;
  const double* w1 = x.data();
  const double* b1 = w1 + h * din;
  const double* w2 = b1 + h;
  const double* b2 = w2 + c * h;
  std::vector<double> act(h);
  for (std::size_t u = 0; u < h; ++u) {
    double s = b1[u];
    for (std::size_t j = 0; j < din; ++j) s += w1[u * din + j] * features[j];
    act[u] = std::tanh(s);
  }
  for (std::size_t k = 0; k < c; ++k) {
    double s = b2[k];
    for (std::size_t u = 0; u < h; ++u) s += w2[k * h + u] * act[u];
    logits[k] = s;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  if (g) {
    double* gw1 = g->data();
    double* gb1 = gw1 + h * din;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + c * h;
    std::vector<double> back(h, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
      const double delta = std::exp(logits[k] - lse) - (k == y ? 1.0 : 0.0);
      for (std::size_t u = 0; u < h; ++u) {
        gw2[k * h + u] += delta * act[u];
        back[u] += w2[k * h + u] * delta;
      }
      gb2[k] += delta;
    }
    for (std::size_t u = 0; u < h; ++u) {
      const double dh = back[u] * (1.0 - act[u] * act[u]);
      for (std::size_t j = 0; j < din; ++j) gw1[u * din + j] += dh * features[j];
      gb1[u] += dh;
    }
  }
  return lse - logits[y];
}

double Problem::loss(std::size_t client, const DenseVector& x,
                     std::span<const std::size_t> indices) const {
  check_client(client);
  check_x(x);
  if (kind_ == ProblemKind::kQuadratic) {
    for (std::size_t idx : indices) {
      if (idx != 0) throw DataError("problem: quadratic clients hold a single sample");
    }
    const auto& q = quad_[client];
    const DenseVector diff = subtract(x, q.b);
    return 0.5 * dot(diff, q.a.multiply(diff));
  }
  double total = 0.0;
  if (indices.empty()) {
    const auto& list = partition_.assignments[client];
    for (std::size_t gi : list) total += accumulate_sample(x, train_->row(gi), train_->labels[gi], nullptr);
    return total / static_cast<double>(list.size());
  }
  for (std::size_t pos : indices) {
    const std::size_t gi = global_index(client, pos);
    total += accumulate_sample(x, train_->row(gi), train_->labels[gi], nullptr);
  }
  return total / static_cast<double>(indices.size());
}

DenseVector Problem::grad(std::size_t client, const DenseVector& x,
                          std::span<const std::size_t> indices, RngStream* noise_rng) const {
  check_client(client);
  check_x(x);
  DenseVector g(dim_);
  if (kind_ == ProblemKind::kQuadratic) {
    for (std::size_t idx : indices) {
      if (idx != 0) throw DataError("problem: quadratic clients hold a single sample");
    }
    const auto& q = quad_[client];
    g = q.a.multiply(subtract(x, q.b));
  } else if (indices.empty()) {
    const auto& list = partition_.assignments[client];
    for (std::size_t gi : list) accumulate_sample(x, train_->row(gi), train_->labels[gi], &g);
    const double inv = 1.0 / static_cast<double>(list.size());
    for (auto& v : g) v *= inv;
  } else {
    for (std::size_t pos : indices) {
      const std::size_t gi = global_index(client, pos);
      accumulate_sample(x, train_->row(gi), train_->labels[gi], &g);
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    for (auto& v : g) v *= inv;
  }
  if (noise_.enabled && noise_.sigma > 0.0 && noise_rng != nullptr) {
    const double scale = noise_.sigma / std::sqrt(static_cast<double>(dim_));
    for (auto& v : g) v += scale * noise_rng->normal();
  }
  return g;
}

std::vector<std::size_t> Problem::sample_minibatch(std::size_t client, std::size_t batch_size,
                                                   RngStream& rng) const {
  check_client(client);
  if (batch_size == 0) throw ConfigError("minibatch size must be at least 1");
  const std::size_t s = client_size(client);
  if (s == 0) throw DataError("client " + std::to_string(client) + " has no samples");
  std::vector<std::size_t> out(batch_size);
  for (auto& v : out) v = rng.below(s);
  return out;
}

double Problem::global_loss(const DenseVector& x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < clients(); ++i) total += loss(i, x);
  return total / static_cast<double>(clients());
}

DenseVector Problem::global_grad(const DenseVector& x) const {
  DenseVector total(dim_);
  for (std::size_t i = 0; i < clients(); ++i) axpy_inplace(1.0, grad(i, x), total);
  const double inv = 1.0 / static_cast<double>(clients());
  for (auto& v : total) v *= inv;
  return total;
}

double Problem::sample_loss(const DenseVector& x, std::span<const double> features, int label) const {
  if (kind_ == ProblemKind::kQuadratic) throw ConfigError("sample_loss: quadratic problems have no samples");
  check_x(x);
  return accumulate_sample(x, features, label, nullptr);
}

DenseVector Problem::sample_grad(const DenseVector& x, std::span<const double> features, int label) const {
  if (kind_ == ProblemKind::kQuadratic) throw ConfigError("sample_grad: quadratic problems have no samples");
  check_x(x);
  DenseVector g(dim_);
  accumulate_sample(x, features, label, &g);
  return g;
}

int Problem::predict(const DenseVector& x, std::span<const double> features) const {
  const std::size_t c = train_->classes;
  const std::size_t din = train_->dim;
  std::vector<double> logits(c);
  if (kind_ == ProblemKind::kLogistic) {
    for (std::size_t k = 0; k < c; ++k) {
      double s = x[c * din + k];
      for (std::size_t j = 0; j < din; ++j) s += x[k * din + j] * features[j];
      logits[k] = s;
    }
  } else {
    const std::size_t h = hidden_;
    std::vector<double> act(h);
    for (std::size_t u = 0; u < h; ++u) {
      double s = x[h * din + u];
      for (std::size_t j = 0; j < din; ++j) s += x[u * din + j] * features[j];
      act[u] = std::tanh(s);
    }
    const std::size_t w2 = h * din + h;
    for (std::size_t k = 0; k < c; ++k) {
      double s = x[w2 + c * h + k];
      for (std::size_t u = 0; u < h; ++u) s += x[w2 + k * h + u] * act[u];
      logits[k] = s;
    }
  }
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::optional<double> Problem::accuracy(const DenseVector& x, const LabeledDataset& ds) const {
  if (kind_ == ProblemKind::kQuadratic || ds.n == 0) return std::nullopt;
  check_x(x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.n; ++i) correct += predict(x, ds.row(i)) == ds.labels[i];
  return static_cast<double>(correct) / static_cast<double>(ds.n);
}

Problem Problem::with_replaced_sample(std::size_t client, std::size_t position,
                                      std::span<const double> features, int label) const {
  if (kind_ == ProblemKind::kQuadratic) throw ConfigError("with_replaced_sample: quadratic problem");
  check_client(client);
  if (features.size() != train_->dim) throw DimensionError("with_replaced_sample: feature length");
  const std::size_t gi = global_index(client, position);
  auto copy = std::make_shared<LabeledDataset>(*train_);
  std::copy(features.begin(), features.end(), copy->features.begin() + static_cast<std::ptrdiff_t>(gi * copy->dim));
  copy->labels[gi] = label;
  copy->check();
  Problem out(*this);
  out.train_ = std::move(copy);
  return out;
}

SmoothnessProfile estimate_smoothness(const Problem& p, std::span<const std::size_t> clients,
                                      std::uint64_t seed, std::size_t samples) {
  SmoothnessProfile out;
  out.sigma = p.noise().enabled ? p.noise().sigma : 0.0;
  std::vector<std::size_t> set(clients.begin(), clients.end());
  if (set.empty()) {
    set.resize(p.clients());
    std::iota(set.begin(), set.end(), 0);
  }
  RngStream rng(seed, 0, Purpose::kEstimate, 0);
  auto random_point = [&] {
    DenseVector v(p.dim());
    for (auto& x : v) x = rng.normal();
    return v;
  };

  if (p.kind() == ProblemKind::kQuadratic) {
    out.L_exact = true;
    for (std::size_t i : set) {
      out.L = std::max(out.L, power_iteration(p.quadratic_clients().at(i).a, seed + i).magnitude);
    }
  } else {
    for (std::size_t s = 0; s < samples; ++s) {
      const DenseVector x = random_point();
      const DenseVector y = random_point();
      const double dx = norm(subtract(x, y));
      for (std::size_t i : set) {
        const double dg = norm(subtract(p.grad(i, x), p.grad(i, y)));
        out.L = std::max(out.L, dg / dx);
      }
    }
  }

  // Fit mean_i ||grad f_i||^2 = G^2 + B^2 ||grad f||^2 by least squares.
  std::vector<double> u(samples);
  std::vector<double> v(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const DenseVector x = random_point();
    DenseVector full(p.dim());
    double local = 0.0;
    for (std::size_t i : set) {
      const DenseVector gi = p.grad(i, x);
      local += squared_norm(gi);
      axpy_inplace(1.0, gi, full);
    }
    const double inv = 1.0 / static_cast<double>(set.size());
    for (auto& e : full) e *= inv;
    u[s] = squared_norm(full);
    v[s] = local * inv;
  }
  const double mu = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(samples);
  const double mv = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(samples);
  double suu = 0.0;
  double suv = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    suu += (u[s] - mu) * (u[s] - mu);
    suv += (u[s] - mu) * (v[s] - mv);
  }
  const double b2 = suu > 0.0 ? suv / suu : 1.0;
  const double g2 = mv - b2 * mu;
  out.B = std::sqrt(std::max(b2, 0.0));
  out.G = std::sqrt(std::max(g2, 0.0));
  return out;
}

namespace {

// Random orthogonal matrix (row-major) by Gram-Schmidt on Gaussian rows.
std::vector<double> random_orthogonal(std::size_t d, RngStream& rng) {
  std::vector<double> q(d * d);
  for (auto& v : q) v = rng.normal();
  for (std::size_t i = 0; i < d; ++i) {
    double* ri = &q[i * d];
    for (std::size_t k = 0; k < i; ++k) {
      const double* rk = &q[k * d];
      double proj = 0.0;
      for (std::size_t j = 0; j < d; ++j) proj += ri[j] * rk[j];
      for (std::size_t j = 0; j < d; ++j) ri[j] -= proj * rk[j];
    }
    double n = 0.0;
    for (std::size_t j = 0; j < d; ++j) n += ri[j] * ri[j];
    n = std::sqrt(n);
    for (std::size_t j = 0; j < d; ++j) ri[j] /= n;
  }
  return q;
}

QuadraticClient make_quadratic_client(const ProblemSpec& spec, RngStream& rng) {
  const std::size_t d = spec.quad_dim;
  std::vector<double> eig(d);
  for (auto& e : eig) e = spec.eig_min + (spec.eig_max - spec.eig_min) * rng.uniform();
  SymmetricMatrix a(d);
  if (spec.rotate) {
    const auto q = random_orthogonal(d, rng);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += q[k * d + i] * eig[k] * q[k * d + j];
        a.set(i, j, s);
      }
    }
  } else {
    a = SymmetricMatrix::diagonal(eig);
  }
  DenseVector b(d);
  for (auto& v : b) v = spec.b_spread * rng.normal();
  return {std::move(a), std::move(b)};
}

}  // namespace

Problem build_problem(const ProblemSpec& spec, const PartitionSpec& pspec, std::size_t m,
                      std::uint64_t seed) {
  if (m == 0) throw ConfigError("problem: m must be positive");
  if (spec.noise_sigma < 0.0 || !std::isfinite(spec.noise_sigma)) {
    throw ConfigError("problem: noise sigma must be finite and >= 0");
  }
  NoiseConfig noise{spec.noise_sigma, spec.noise_sigma > 0.0};

  if (spec.kind == ProblemKind::kQuadratic) {
    if (spec.quad_dim == 0) throw ConfigError("problem: quadratic dimension must be positive");
    if (!(spec.eig_min > 0.0) || spec.eig_max < spec.eig_min) {
      throw ConfigError("problem: need 0 < eig_min <= eig_max");
    }
    std::vector<QuadraticClient> clients;
    clients.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      RngStream rng(seed, spec.homogeneous ? 0 : i, Purpose::kData, 1);
      clients.push_back(make_quadratic_client(spec, rng));
    }
    return Problem::quadratic(std::move(clients), noise);
  }

  LabeledDataset all;
  if (spec.dataset == "blobs") {
    all = make_synthetic_blobs(spec.classes, spec.input_dim, spec.samples, spec.separation, seed);
  } else if (spec.dataset == "csv") {
    all = load_dataset_csv(spec.csv_path);
  } else {
    throw ConfigError("problem: unknown dataset source '" + spec.dataset + "'");
  }
  if (!(spec.test_fraction >= 0.0 && spec.test_fraction < 1.0)) {
    throw ConfigError("problem: test_fraction must be in [0, 1)");
  }

  // Shuffle, then hold out the tail as the test set.
  RngStream rng(seed, 0, Purpose::kData, 2);
  std::vector<std::size_t> order(all.n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  LabeledDataset shuffled = all;
  for (std::size_t i = 0; i < all.n; ++i) {
    std::copy_n(all.features.begin() + static_cast<std::ptrdiff_t>(order[i] * all.dim), all.dim,
                shuffled.features.begin() + static_cast<std::ptrdiff_t>(i * all.dim));
    shuffled.labels[i] = all.labels[order[i]];
  }
  const auto n_test = static_cast<std::size_t>(std::floor(spec.test_fraction * static_cast<double>(all.n)));
  auto train = std::make_shared<LabeledDataset>(shuffled.slice(0, all.n - n_test));
  train->classes = all.classes;
  std::shared_ptr<LabeledDataset> test;
  if (n_test > 0) test = std::make_shared<LabeledDataset>(shuffled.slice(all.n - n_test, n_test));

  Partition part;
  switch (pspec.kind) {
    case PartitionKind::kDirichlet: part = partition_dirichlet(*train, m, pspec.alpha, seed); break;
    case PartitionKind::kPathological:
      part = partition_pathological(*train, m, pspec.classes_per_client, seed);
      break;
    case PartitionKind::kIid: part = partition_iid(*train, m, seed); break;
  }
  Problem p = spec.kind == ProblemKind::kLogistic ? Problem::logistic(train, std::move(part), noise)
                                                  : Problem::mlp(train, std::move(part), spec.hidden, noise);
  if (test) p.set_test_set(test);
  return p;
}

}  // namespace dfl
