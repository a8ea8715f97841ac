#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dfl/engine.hpp"

namespace dfl {

/// kappa_psi = (a/e)^a / (psi ln(1/psi)^a) + 2^a / ((1-a) e psi ln(1/psi)) + 2^a / (psi ln(1/psi)).
/// Throws NumericalError outside 0 < psi < 1, 0 < alpha < 1.
double kappa_psi(double psi, double alpha);
/// Same expression evaluated independently (log space, different grouping).
double kappa_psi_alt(double psi, double alpha);
/// Order estimate 1 / (psi ln(1/psi)).
double kappa_psi_order(double psi);

/// Brute-force check of sum_{s<t} psi^{t-s-1} / (s+1)^alpha <= kappa_psi / t^alpha.
struct KappaBoundCheck {
  double max_ratio = 0.0;  // max over t of lhs * t^alpha / kappa
  std::size_t worst_t = 0;
  bool holds() const { return max_ratio <= 1.0; }
};
KappaBoundCheck check_kappa_bound(double psi, double alpha, std::size_t t_max);

/// Least-squares slope of log(best-so-far grad_norm_z_sq) against log(round)
/// over records with round >= first_round. Needs >= 20 such records; returns
/// -infinity once the best value reaches exactly 0.
double rate_fit(std::span<const RoundRecord> records, std::size_t first_round = 0);

/// (1/m) sum_i ||x_i - mean||^2.
double consensus_distance(std::span<const ClientState> states);

struct StabilityProbeConfig {
  double mu_tilde = 0.01;
  std::size_t perturbed_client = 0;
  std::size_t perturbed_index = 0;
  std::size_t probe_size = 512;  // held-out samples used for the sup loss gap
  std::size_t rounds = 100;
};

struct StabilityReport {
  std::vector<double> delta;         // sum_i ||x_i^t - x~_i^t||, t = 1..T
  std::vector<double> sup_gap_xbar;  // max over probe set of |loss(x-bar) - loss(x~-bar)|
  std::vector<double> sup_gap_z;     // same on the auxiliary sequence
  /// First local iteration at which client i* draws sample j*; absent if never.
  std::optional<std::size_t> tau0_round;
  std::optional<std::size_t> tau0_step;
  std::optional<std::size_t> tau0_iteration;  // round * K + step
  /// Both runs agree bit for bit in every round that ends before tau0.
  bool identical_before_tau0 = true;
  double U = 0.0;    // max probe loss at the final averaged model
  double L_G = 0.0;  // max per-sample gradient norm over the probe set
  double L = 0.0;    // estimated smoothness
  double psi = 0.0;
  double mu = 0.0;   // mu_tilde / (1 - beta)
  std::optional<double> kappa;
  /// tau0 suggested by the generalization bound; reported only.
  std::optional<double> theorem_tau0;
  std::size_t probe_samples = 0;
};

/// Twin runs on the original data and on a copy with sample perturbed_index of
/// client perturbed_client replaced by a held-out sample. Both runs consume
/// identical random streams. Forces the inverse_time schedule with mu_tilde.
/// Needs a data-driven problem with a test set of at least two samples.
StabilityReport stability_probe(const RunConfig& cfg, const StabilityProbeConfig& probe);
StabilityReport stability_probe(const RunConfig& cfg, const Problem& problem,
                                const StabilityProbeConfig& probe);

}  // namespace dfl
