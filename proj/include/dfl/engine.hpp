#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfl/optimizers.hpp"
#include "dfl/problems.hpp"
#include "dfl/topology.hpp"

namespace dfl {

enum class InitKind { kZeros, kGaussian };

struct RunConfig {
  AlgorithmKind algorithm = AlgorithmKind::kDFedCata;
  HyperParams hyper;
  TopologySpec topology;  // topology.seed == 0 derives it from `seed`
  ProblemSpec problem;
  PartitionSpec partition;
  std::size_t m = 100;
  std::uint64_t seed = 1;
  std::size_t eval_every = 1;
  bool verification_mode = false;
  InitKind init = InitKind::kZeros;
  double init_scale = 0.1;  // std-dev of the Gaussian initial point
  /// 0: DFL_THREADS / OpenMP default. 1: sequential reference path.
  int threads = 0;

  /// Throws ConfigError when fields disagree (e.g. m vs topology.m).
  void validate() const;
  TopologySpec resolved_topology() const;
};

struct RoundRecord {
  std::size_t round = 0;
  double train_loss = 0.0;
  double grad_norm_z_sq = 0.0;
  double consensus = 0.0;
  std::optional<double> test_accuracy;
  double psi_round = 0.0;
  double elapsed_ms = 0.0;
};

/// Equality on everything except wall time.
bool same_metrics(const RoundRecord& a, const RoundRecord& b);

/// Largest per-round deviations observed by the verification checks.
struct VerificationStats {
  double mean_sequence = 0.0;     // x-bar recursion with extrapolation
  double auxiliary_sequence = 0.0;  // z^{t+1} - z^t recursion
  double virtual_sequence = 0.0;  // mean of the virtual per-client recursion vs z^t
  double mean_after_mix = 0.0;    // mixing preserves the mean
  std::size_t rounds_checked = 0;
};

struct VerificationTolerances {
  double recursion = 1e-8;
  double mixing = 1e-12;
};

struct RunResult {
  std::vector<RoundRecord> records;
  std::vector<ClientState> states;
  DenseVector x_bar;
  DenseVector z;
  VerificationStats verification;
  std::size_t disconnected_rounds = 0;
};

struct RunHooks {
  /// Called as each record is produced (before the run finishes).
  std::function<void(const RoundRecord&)> on_record;
  /// Called after mixing in every round with the post-round states (round = t+1).
  std::function<void(std::size_t, std::span<const ClientState>)> on_round_end;
};

/// Initial parameter vector shared by all clients.
DenseVector initial_point(const RunConfig& cfg, std::size_t dim);

RunResult run(const RunConfig& cfg, const RunHooks& hooks = {});
RunResult run(const RunConfig& cfg, const Problem& problem, const RunHooks& hooks = {});

enum class Metric { kTestAccuracy, kTrainLoss, kGradNormZSq };
std::string to_string(Metric m);
Metric metric_from_string(const std::string& name);
std::optional<double> metric_value(const RoundRecord& r, Metric m);

/// First recorded round where the metric reaches the threshold (>= for
/// accuracy, <= for the losses).
std::optional<std::size_t> rounds_to_threshold(std::span<const RoundRecord> records, Metric metric,
                                               double threshold);

struct SweepCell {
  std::string value;
  std::uint64_t seed = 0;
  std::vector<RoundRecord> records;
  double psi = 0.0;  // psi of the (round-0) mixing matrix
};

/// Axis names: beta, K, lambda, m, topology, eta.
RunConfig apply_axis(const RunConfig& base, const std::string& axis, const std::string& value);

/// One run per (value, seed), values outermost.
std::vector<SweepCell> sweep(const RunConfig& base, const std::string& axis,
                             std::span<const std::string> values, std::span<const std::uint64_t> seeds);

}  // namespace dfl
