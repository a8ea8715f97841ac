#include "dfl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dfl/error.hpp"
#include "dfl/kernels.hpp"

namespace dfl {

namespace {

void check_kappa_domain(double psi, double alpha) {
  if (!(psi > 0.0 && psi < 1.0)) {
    throw NumericalError("kappa_psi: psi must lie in (0, 1), got " + std::to_string(psi),
                         std::numeric_limits<double>::quiet_NaN());
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw NumericalError("kappa_psi: alpha must lie in (0, 1), got " + std::to_string(alpha),
                         std::numeric_limits<double>::quiet_NaN());
  }
}

}  // namespace

double kappa_psi(double psi, double alpha) {
  check_kappa_domain(psi, alpha);
  const double e = std::numbers::e;
  const double ell = std::log(1.0 / psi);
  const double two_a = std::pow(2.0, alpha);
  const double t1 = std::pow(alpha / e, alpha) / (psi * std::pow(ell, alpha));
  const double t2 = two_a / ((1.0 - alpha) * e * psi * ell);
  const double t3 = two_a / (psi * ell);
  return t1 + t2 + t3;
}

double kappa_psi_alt(double psi, double alpha) {
  check_kappa_domain(psi, alpha);
  // Everything over the common factor 1 / (psi ln(1/psi)).
  const double ell = -std::log(psi);
  const double base = 1.0 / (psi * ell);
  const double first = std::exp(alpha * (std::log(alpha) - 1.0 - std::log(ell)) + std::log(ell));
  const double rest = std::exp(alpha * std::numbers::ln2) * (1.0 + std::exp(-1.0) / (1.0 - alpha));
  return base * (first + rest);
}

double kappa_psi_order(double psi) {
  if (!(psi > 0.0 && psi < 1.0)) {
    throw NumericalError("kappa_psi_order: psi must lie in (0, 1)", std::numeric_limits<double>::quiet_NaN());
  }
  return 1.0 / (psi * std::log(1.0 / psi));
}

KappaBoundCheck check_kappa_bound(double psi, double alpha, std::size_t t_max) {
  const double kappa = kappa_psi(psi, alpha);
  KappaBoundCheck out;
  // S_1 = 1, S_{t+1} = psi S_t + (t+1)^-alpha.
  double s = 0.0;
  for (std::size_t t = 1; t <= t_max; ++t) {
    const double td = static_cast<double>(t);
    s = psi * s + std::pow(td, -alpha);
    const double ratio = s * std::pow(td, alpha) / kappa;
    if (ratio > out.max_ratio) {
      out.max_ratio = ratio;
      out.worst_t = t;
    }
  }
  return out;
}

double rate_fit(std::span<const RoundRecord> records, std::size_t first_round) {
  std::vector<double> lx;
  std::vector<double> ly;
  double best = std::numeric_limits<double>::infinity();
  bool hit_zero = false;
  for (const auto& r : records) {
    best = std::min(best, r.grad_norm_z_sq);
    if (r.round < first_round || r.round == 0) continue;
    if (best == 0.0) {
      hit_zero = true;
      continue;
    }
    lx.push_back(std::log(static_cast<double>(r.round)));
    ly.push_back(std::log(best));
  }
  if (hit_zero) return -std::numeric_limits<double>::infinity();
  if (lx.size() < 20) {
    throw DataError("rate_fit needs at least 20 records, got " + std::to_string(lx.size()));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw DataError("rate_fit: all records share one round");
  return sxy / sxx;
}

double consensus_distance(std::span<const ClientState> states) {
  if (states.empty()) throw DimensionError("consensus_distance: no clients");
  std::vector<DenseVector> xs;
  xs.reserve(states.size());
  for (const auto& s : states) xs.push_back(s.x);
  return kernels::consensus_distance_reference(xs);
}

namespace {

struct Snapshot {
  std::vector<DenseVector> x;
  DenseVector xbar;
  DenseVector z;
};

Snapshot snapshot(std::span<const ClientState> states, double beta) {
  Snapshot s;
  std::vector<DenseVector> prev;
  for (const auto& c : states) {
    s.x.push_back(c.x);
    prev.push_back(c.x_prev);
  }
  s.xbar = mean_of(s.x);
  s.z = axpy(beta / (1.0 - beta), subtract(s.xbar, mean_of(prev)), s.xbar);
  return s;
}

double sup_gap(const Problem& p, const LabeledDataset& probe, std::size_t count, const DenseVector& a,
               const DenseVector& b) {
  double gap = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto row = probe.row(i);
    gap = std::max(gap, std::abs(p.sample_loss(a, row, probe.labels[i]) - p.sample_loss(b, row, probe.labels[i])));
  }
  return gap;
}

}  // namespace

StabilityReport stability_probe(const RunConfig& cfg, const StabilityProbeConfig& probe) {
  cfg.validate();
  const Problem problem = build_problem(cfg.problem, cfg.partition, cfg.m, cfg.seed);
  return stability_probe(cfg, problem, probe);
}

StabilityReport stability_probe(const RunConfig& base, const Problem& problem,
                                const StabilityProbeConfig& probe) {
  if (problem.kind() == ProblemKind::kQuadratic) {
    throw ConfigError("stability probe needs a data-driven problem");
  }
  const LabeledDataset* test = problem.test_set();
  if (!test || test->n < 2) throw ConfigError("stability probe needs a test set with at least two samples");
  if (probe.perturbed_client >= problem.clients()) {
    throw ConfigError("stability probe: perturbed_client out of range");
  }
  if (probe.perturbed_index >= problem.client_size(probe.perturbed_client)) {
    throw ConfigError("stability probe: perturbed_index out of range for client " +
                      std::to_string(probe.perturbed_client));
  }
  if (probe.rounds == 0) throw ConfigError("stability probe: rounds must be positive");
  if (probe.probe_size == 0) throw ConfigError("stability probe: probe_size must be positive");

  RunConfig cfg = base;
  cfg.hyper.schedule = LrSchedule::kInverseTime;
  cfg.hyper.mu_tilde = probe.mu_tilde;
  cfg.hyper.T = probe.rounds;
  cfg.eval_every = probe.rounds;
  cfg.verification_mode = false;
  cfg.validate();
  const double beta = cfg.algorithm == AlgorithmKind::kDFedCata ? cfg.hyper.beta : 0.0;

  StabilityReport rep;
  rep.L = estimate_smoothness(problem, {}, cfg.seed).L;
  if (probe.mu_tilde * rep.L > 1.0) {
    throw ConfigError("stability probe: mu_tilde * L = " + std::to_string(probe.mu_tilde * rep.L) +
                      " exceeds 1");
  }
  rep.mu = probe.mu_tilde / (1.0 - beta);

  // The last test sample replaces j*; the rest (up to probe_size) form the probe set.
  const std::size_t replacement = test->n - 1;
  rep.probe_samples = std::min(probe.probe_size, test->n - 1);
  const Problem twin = problem.with_replaced_sample(probe.perturbed_client, probe.perturbed_index,
                                                    test->row(replacement), test->labels[replacement]);

  // Measured tau0 from replayed minibatch draws (full batch touches j* at once).
  const std::size_t steps = local_steps(cfg.algorithm, cfg.hyper);
  for (std::size_t t = 0; t < cfg.hyper.T && !rep.tau0_round; ++t) {
    const auto batches = replay_batches(problem, cfg.hyper, cfg.algorithm, probe.perturbed_client, t, cfg.seed);
    for (std::size_t k = 0; k < batches.size(); ++k) {
      const auto& b = batches[k];
      if (b.empty() || std::find(b.begin(), b.end(), probe.perturbed_index) != b.end()) {
        rep.tau0_round = t;
        rep.tau0_step = k;
        rep.tau0_iteration = t * steps + k;
        break;
      }
    }
  }

  std::vector<Snapshot> first;
  first.reserve(cfg.hyper.T);
  RunHooks h1;
  h1.on_round_end = [&](std::size_t, std::span<const ClientState> states) {
    first.push_back(snapshot(states, beta));
  };
  const RunResult r1 = run(cfg, problem, h1);

  RunHooks h2;
  h2.on_round_end = [&](std::size_t round, std::span<const ClientState> states) {
    const Snapshot s = snapshot(states, beta);
    const Snapshot& o = first.at(round - 1);
    double delta = 0.0;
    bool same = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      delta += norm(subtract(s.x[i], o.x[i]));
      same = same && s.x[i] == o.x[i];
    }
    // Rounds ending before tau0's round never touch the replaced sample.
    const bool before = !rep.tau0_round || round <= *rep.tau0_round;
    if (before && !same) rep.identical_before_tau0 = false;
    rep.delta.push_back(delta);
    rep.sup_gap_xbar.push_back(sup_gap(problem, *test, rep.probe_samples, o.xbar, s.xbar));
    rep.sup_gap_z.push_back(sup_gap(problem, *test, rep.probe_samples, o.z, s.z));
  };
  run(cfg, twin, h2);

  for (std::size_t i = 0; i < rep.probe_samples; ++i) {
    const auto row = test->row(i);
    rep.U = std::max(rep.U, problem.sample_loss(r1.x_bar, row, test->labels[i]));
    rep.L_G = std::max(rep.L_G, norm(problem.sample_grad(r1.x_bar, row, test->labels[i])));
  }

  const TopologySpec topo = cfg.resolved_topology();
  rep.psi = topo.kind == TopologyKind::kRandomDynamic ? sample_round_topology(topo, 0).mixing.psi
                                                      : metropolis_weights(build_graph(topo)).psi;
  const double muL = rep.mu * rep.L;
  const double alpha = 1.0 - muL;
  if (rep.psi > 0.0 && rep.psi < 1.0 && alpha > 0.0 && alpha < 1.0 && rep.U > 0.0 && rep.L > 0.0) {
    rep.kappa = kappa_psi(rep.psi, alpha);
    const double m = static_cast<double>(cfg.m);
    const double sigma = problem.noise().enabled ? problem.noise().sigma : 0.0;
    const double lead = (2.0 * sigma * rep.L_G / (rep.U * rep.L)) * (1.0 + 6.0 * std::sqrt(m) * *rep.kappa) / m;
    const double TK = static_cast<double>(cfg.hyper.T * steps);
    rep.theorem_tau0 = std::pow(lead, 1.0 / (1.0 + muL)) * std::pow(TK, muL / (1.0 + muL));
  }
  return rep;
}

}  // namespace dfl
