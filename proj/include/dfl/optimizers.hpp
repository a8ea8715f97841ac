#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dfl/numerics.hpp"
#include "dfl/problems.hpp"
#include "dfl/rng.hpp"
#include "dfl/topology.hpp"

namespace dfl {

enum class AlgorithmKind { kDFedCata, kDFedAvg, kDFedAvgM, kDPSGD, kDFedSAM };

std::string to_string(AlgorithmKind kind);
AlgorithmKind algorithm_kind_from_string(const std::string& name);

enum class LrSchedule {
  /// eta * lr_decay^round, constant within a round.
  kExponentialDecay,
  /// mu_tilde / (round * K + k + 1), the decayed schedule of the stability analysis.
  kInverseTime,
};

std::string to_string(LrSchedule s);
LrSchedule lr_schedule_from_string(const std::string& name);

struct HyperParams {
  double eta = 0.1;
  double lambda = 0.05;
  double beta = 0.99;
  std::size_t K = 5;
  std::size_t T = 500;
  double rho = 0.1;
  double momentum = 0.9;
  /// 0 selects full-batch (deterministic) gradients.
  std::size_t batch_size = 32;
  double lr_decay = 0.998;
  LrSchedule schedule = LrSchedule::kExponentialDecay;
  double mu_tilde = 0.1;

  /// Throws ConfigError on an out-of-range value.
  void validate() const;
};

/// Step size for local iteration k of round t.
double step_size(const HyperParams& h, std::size_t round, std::size_t k);

struct ClientState {
  DenseVector x;             // x_i^t
  DenseVector x_prev;        // x_i^{t-1}
  DenseVector anchor;        // x_{i,0}^t
  DenseVector momentum_buf;  // heavy-ball buffer (DFedAvgM)

  /// All vectors set to x0; x_prev == x0 makes the first extrapolation the identity.
  static ClientState initial(const DenseVector& x0);
};

/// Per-client random streams for one round. Minibatch draws and injected
/// noise use separate streams so either can be replayed on its own.
struct ClientStreams {
  RngStream data;
  RngStream noise;
  ClientStreams(std::uint64_t seed, std::size_t client, std::size_t round)
      : data(seed, client, Purpose::kMinibatch, round), noise(seed, client, Purpose::kNoise, round) {}
};

/// Optional record of one local phase: the gradient used at each step and
/// the iterates x_{i,0} .. x_{i,K}.
struct LocalTrace {
  std::vector<DenseVector> grads;
  std::vector<DenseVector> iterates;
  std::vector<std::vector<std::size_t>> batches;
};

/// anchor = x + beta (x - x_prev); stored in the state and returned.
DenseVector extrapolate(ClientState& s, double beta);

/// K steps of x <- x - eta (g + lambda (x - anchor)), starting from the anchor.
/// Expects extrapolate() to have run this round.
DenseVector local_update_dfedcata(ClientState& s, const Problem& p, const HyperParams& h,
                                  std::size_t client, std::size_t round, ClientStreams& streams,
                                  LocalTrace* trace = nullptr);

/// DFedAvg (plain SGD), DFedAvgM (heavy ball), DFedSAM (SAM every step) and
/// D-PSGD (one SGD step per round) starting from s.x.
DenseVector local_update_baseline(AlgorithmKind kind, ClientState& s, const Problem& p,
                                  const HyperParams& h, std::size_t client, std::size_t round,
                                  ClientStreams& streams, LocalTrace* trace = nullptr);

/// Dispatches on kind; DFedCata includes the extrapolation step.
DenseVector local_update(AlgorithmKind kind, ClientState& s, const Problem& p, const HyperParams& h,
                         std::size_t client, std::size_t round, ClientStreams& streams,
                         LocalTrace* trace = nullptr);

/// The K minibatches a client draws in a round, replayed from its data stream.
std::vector<std::vector<std::size_t>> replay_batches(const Problem& p, const HyperParams& h,
                                                     AlgorithmKind kind, std::size_t client,
                                                     std::size_t round, std::uint64_t seed);

/// Local steps actually taken per round (D-PSGD forces one).
std::size_t local_steps(AlgorithmKind kind, const HyperParams& h);

/// x_i^{t+1} = sum_j w_ij x_{j,K}^t for every client; x_prev <- pre-round x.
/// Sequential reference; kernels.hpp has the parallel variant.
void mix(std::span<ClientState> states, std::span<const DenseVector> local_results,
         const SymmetricMatrix& w);

/// Coefficients of the closed-form local update:
/// x_{i,K} - x_{i,0} = -(gamma/lambda) sum_k (gamma_k/gamma) g_k.
/// With lambda == 0 the analytic limits gamma/lambda -> K eta and
/// gamma_k/gamma -> 1/K are used.
struct LocalUpdateCoefficients {
  double gamma = 0.0;             // 1 - (1 - eta lambda)^K
  double gamma_over_lambda = 0.0;
  std::vector<double> weights;    // gamma_k / gamma, k = 0..K-1
  bool lambda_limit = false;
};
LocalUpdateCoefficients local_update_coefficients(double eta, double lambda, std::size_t K);

}  // namespace dfl
