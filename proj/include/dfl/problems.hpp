#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfl/data.hpp"
#include "dfl/numerics.hpp"

namespace dfl {

class RngStream;

enum class ProblemKind { kQuadratic, kLogistic, kMlp };

std::string to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(const std::string& name);

/// Optional isotropic gradient noise: N(0, sigma^2/d I), so E||noise||^2 = sigma^2.
struct NoiseConfig {
  double sigma = 0.0;
  bool enabled = false;
};

struct SmoothnessProfile {
  double L = 0.0;
  bool L_exact = false;
  double sigma = 0.0;
  /// Least-squares estimates of the heterogeneity constants; never used to
  /// gate behaviour.
  std::optional<double> G;
  std::optional<double> B;
};

/// f_i(x) = 1/2 (x - b)^T A (x - b). Treated as a client with one sample.
struct QuadraticClient {
  SymmetricMatrix a;
  DenseVector b;
};

/// Finite-sum objective f = (1/m) sum_i f_i with per-client data.
///
/// Index sets passed to loss/grad are positions into a client's own sample
/// list (0 .. client_size(i)-1). An empty span means "all of the client's
/// samples".
class Problem {
 public:
  static Problem quadratic(std::vector<QuadraticClient> clients, NoiseConfig noise = {});
  /// Multinomial logistic regression; parameters are [W (C x d_in), b (C)].
  static Problem logistic(std::shared_ptr<const LabeledDataset> train, Partition partition,
                          NoiseConfig noise = {});
  /// One tanh hidden layer; parameters are [W1 (H x d_in), b1 (H), W2 (C x H), b2 (C)].
  static Problem mlp(std::shared_ptr<const LabeledDataset> train, Partition partition,
                     std::size_t hidden, NoiseConfig noise = {});

  ProblemKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t clients() const noexcept;
  std::size_t client_size(std::size_t client) const;
  std::size_t hidden_units() const noexcept { return hidden_; }
  const NoiseConfig& noise() const noexcept { return noise_; }
  void set_noise(NoiseConfig noise) { noise_ = noise; }

  const std::vector<QuadraticClient>& quadratic_clients() const noexcept { return quad_; }
  const LabeledDataset* train_set() const noexcept { return train_.get(); }
  const Partition& partition() const noexcept { return partition_; }
  const LabeledDataset* test_set() const noexcept { return test_.get(); }
  void set_test_set(std::shared_ptr<const LabeledDataset> test) { test_ = std::move(test); }

  double loss(std::size_t client, const DenseVector& x,
              std::span<const std::size_t> indices = {}) const;
  /// Exact gradient of `loss` over the index set, plus injected noise when
  /// enabled and a noise stream is supplied.
  DenseVector grad(std::size_t client, const DenseVector& x,
                   std::span<const std::size_t> indices = {}, RngStream* noise_rng = nullptr) const;

  /// Uniform draws with replacement from the client's sample positions.
  std::vector<std::size_t> sample_minibatch(std::size_t client, std::size_t batch_size,
                                            RngStream& rng) const;

  /// f(x) = (1/m) sum_i f_i(x) and its exact gradient.
  double global_loss(const DenseVector& x) const;
  DenseVector global_grad(const DenseVector& x) const;

  /// Loss and gradient of a single labelled sample (data-driven kinds only).
  double sample_loss(const DenseVector& x, std::span<const double> features, int label) const;
  DenseVector sample_grad(const DenseVector& x, std::span<const double> features, int label) const;
  /// Top-1 accuracy on a dataset; nullopt for quadratic problems.
  std::optional<double> accuracy(const DenseVector& x, const LabeledDataset& ds) const;
  int predict(const DenseVector& x, std::span<const double> features) const;

  /// Copy whose client `client` has its local sample `position` replaced.
  /// The training set is duplicated; other clients are untouched.
  Problem with_replaced_sample(std::size_t client, std::size_t position,
                               std::span<const double> features, int label) const;

 private:
  void check_x(const DenseVector& x) const;
  void check_client(std::size_t client) const;
  std::size_t global_index(std::size_t client, std::size_t position) const;
  // Accumulates the per-sample loss gradient into g and returns the loss.
  double accumulate_sample(const DenseVector& x, std::span<const double> features, int label,
                           DenseVector* g) const;

  ProblemKind kind_ = ProblemKind::kQuadratic;
  std::size_t dim_ = 0;
  std::size_t hidden_ = 0;
  NoiseConfig noise_;
  std::vector<QuadraticClient> quad_;
  std::shared_ptr<const LabeledDataset> train_;
  std::shared_ptr<const LabeledDataset> test_;
  Partition partition_;
};

SmoothnessProfile estimate_smoothness(const Problem& p, std::span<const std::size_t> clients,
                                      std::uint64_t seed, std::size_t samples = 16);

/// Declarative description used by configs to build a Problem.
struct ProblemSpec {
  ProblemKind kind = ProblemKind::kLogistic;
  double noise_sigma = 0.0;

  // quadratic
  std::size_t quad_dim = 20;
  double eig_min = 0.5;
  double eig_max = 2.0;
  double b_spread = 1.0;
  bool homogeneous = false;
  bool rotate = true;

  // data-driven (logistic / mlp)
  std::string dataset = "blobs";  // "blobs" or "csv"
  std::string csv_path;
  std::size_t classes = 10;
  std::size_t input_dim = 10;
  std::size_t samples = 2000;
  double separation = 3.0;
  double test_fraction = 0.2;
  std::size_t hidden = 16;
};

struct PartitionSpec {
  PartitionKind kind = PartitionKind::kDirichlet;
  double alpha = 0.3;
  std::size_t classes_per_client = 2;
};

/// Deterministic in (spec, m, seed). Data-driven problems hold out
/// test_fraction of the shuffled samples as the test set.
Problem build_problem(const ProblemSpec& spec, const PartitionSpec& partition, std::size_t m,
                      std::uint64_t seed);

}  // namespace dfl
