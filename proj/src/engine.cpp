#include "dfl/engine.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "dfl/error.hpp"
#include "dfl/kernels.hpp"

namespace dfl {

void RunConfig::validate() const {
  if (m == 0) throw ConfigError("m must be positive");
  if (topology.m != m) {
    throw ConfigError("topology.m (" + std::to_string(topology.m) + ") does not match m (" +
                      std::to_string(m) + ")");
  }
  if (seed == 0) throw ConfigError("seed must be non-zero");
  if (eval_every == 0) throw ConfigError("eval_every must be at least 1");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw ConfigError("init_scale must be >= 0");
  hyper.validate();
  resolved_topology().validate();
  if (verification_mode) {
    if (algorithm == AlgorithmKind::kDFedAvgM || algorithm == AlgorithmKind::kDFedSAM) {
      throw ConfigError("verification mode covers dfedcata, dfedavg and dpsgd only");
    }
    if (hyper.schedule != LrSchedule::kExponentialDecay) {
      throw ConfigError("verification mode needs a step size that is constant within a round");
    }
  }
}

TopologySpec RunConfig::resolved_topology() const {
  TopologySpec t = topology;
  if (t.seed == 0) t.seed = seed * 0x9e3779b97f4a7c15ULL + 0x51ed270b;
  return t;
}

bool same_metrics(const RoundRecord& a, const RoundRecord& b) {
  return a.round == b.round && a.train_loss == b.train_loss && a.grad_norm_z_sq == b.grad_norm_z_sq &&
         a.consensus == b.consensus && a.test_accuracy == b.test_accuracy && a.psi_round == b.psi_round;
}

DenseVector initial_point(const RunConfig& cfg, std::size_t dim) {
  DenseVector x0(dim, 0.0);
  if (cfg.init == InitKind::kGaussian) {
    RngStream rng(cfg.seed, 0, Purpose::kInit, 0);
    for (auto& v : x0) v = cfg.init_scale * rng.normal();
  }
  return x0;
}

namespace {

std::vector<DenseVector> params_of(std::span<const ClientState> states) {
  std::vector<DenseVector> xs;
  xs.reserve(states.size());
  for (const auto& s : states) xs.push_back(s.x);
  return xs;
}

double scale_of(const DenseVector& v) { return std::max(1.0, max_abs(v)); }

[[noreturn]] void fail_verification(const char* what, std::size_t round, double dev, double tol) {
  std::ostringstream os;
  os.precision(17);
  os << "verification: " << what << " violated at round " << round << " (deviation " << dev
     << " > tolerance " << tol << ")";
  throw VerificationError(os.str());
}

}  // namespace

RunResult run(const RunConfig& cfg, const RunHooks& hooks) {
  cfg.validate();
  const Problem problem = build_problem(cfg.problem, cfg.partition, cfg.m, cfg.seed);
  return run(cfg, problem, hooks);
}

RunResult run(const RunConfig& cfg, const Problem& problem, const RunHooks& hooks) {
  cfg.validate();
  if (problem.clients() != cfg.m) {
    throw ConfigError("problem has " + std::to_string(problem.clients()) + " clients, config m = " +
                      std::to_string(cfg.m));
  }
  const auto start = std::chrono::steady_clock::now();
  const std::size_t m = cfg.m;
  const HyperParams& h = cfg.hyper;
  const AlgorithmKind kind = cfg.algorithm;
  const bool cata = kind == AlgorithmKind::kDFedCata;
  const double beta_eff = cata ? h.beta : 0.0;
  const double lambda_eff = cata ? h.lambda : 0.0;
  const int threads = kernels::resolve_threads(cfg.threads);
  const TopologySpec topo = cfg.resolved_topology();
  const bool dynamic = topo.kind == TopologyKind::kRandomDynamic;

  MixingMatrix static_mixing;
  if (!dynamic) {
    const Graph g = build_graph(topo);
    static_mixing = metropolis_weights(g);
  }

  RunResult result;
  const DenseVector x0 = initial_point(cfg, problem.dim());
  result.states.assign(m, ClientState::initial(x0));
  DenseVector xbar = x0;
  DenseVector xbar_prev = x0;
  DenseVector z = x0;
  std::vector<DenseVector> virtual_z(cfg.verification_mode ? m : 0, x0);

  std::vector<DenseVector> local(m);
  std::vector<LocalTrace> traces(cfg.verification_mode ? m : 0);

  for (std::size_t t = 0; t < h.T; ++t) {
    MixingMatrix round_mixing;
    const MixingMatrix* mixing = &static_mixing;
    if (dynamic) {
      RoundTopology rt = sample_round_topology(topo, t);
      if (!rt.graph.connected()) ++result.disconnected_rounds;
      round_mixing = std::move(rt.mixing);
      mixing = &round_mixing;
    }

    for (auto& tr : traces) tr = LocalTrace{};
    kernels::for_each_client(m, threads, [&](std::size_t i) {
      ClientStreams streams(cfg.seed, i, t);
      local[i] = local_update(kind, result.states[i], problem, h, i, t, streams,
                              cfg.verification_mode ? &traces[i] : nullptr);
    });

    kernels::mix_states(result.states, local, mixing->w, threads);

    const std::vector<DenseVector> xs = params_of(result.states);
    const DenseVector xbar_next = mean_of(xs);
    const DenseVector z_next = axpy(beta_eff / (1.0 - beta_eff), subtract(xbar_next, xbar), xbar_next);

    if (cfg.verification_mode) {
      const VerificationTolerances tol;
      auto& vs = result.verification;
      const std::size_t steps = local_steps(kind, h);
      const auto coef = local_update_coefficients(step_size(h, t, 0), lambda_eff, steps);

      // sum_k (gamma_k/gamma) * mean_i g_{i,k}
      DenseVector weighted(problem.dim());
      for (std::size_t k = 0; k < steps; ++k) {
        DenseVector gbar(problem.dim());
        for (std::size_t i = 0; i < m; ++i) axpy_inplace(1.0, traces[i].grads[k], gbar);
        axpy_inplace(coef.weights[k] / static_cast<double>(m), gbar, weighted);
      }

      const double mix_dev = max_abs(subtract(xbar_next, mean_of(local)));
      vs.mean_after_mix = std::max(vs.mean_after_mix, mix_dev);
      if (mix_dev > tol.mixing * scale_of(xbar_next)) fail_verification("mean preservation", t, mix_dev, tol.mixing);

      DenseVector predicted = axpy(beta_eff, subtract(xbar, xbar_prev), xbar);
      axpy_inplace(-coef.gamma_over_lambda, weighted, predicted);
      const double dev4 = max_abs(subtract(predicted, xbar_next));
      vs.mean_sequence = std::max(vs.mean_sequence, dev4);
      if (dev4 > tol.recursion * scale_of(xbar_next)) fail_verification("mean-sequence recursion", t, dev4, tol.recursion);

      const double aux_step = coef.gamma_over_lambda / (1.0 - beta_eff);
      const DenseVector predicted_z = axpy(-aux_step, weighted, z);
      const double dev6 = max_abs(subtract(predicted_z, z_next));
      vs.auxiliary_sequence = std::max(vs.auxiliary_sequence, dev6);
      if (dev6 > tol.recursion * scale_of(z_next)) fail_verification("auxiliary-sequence recursion", t, dev6, tol.recursion);

      std::vector<DenseVector> virtual_local(m);
      for (std::size_t i = 0; i < m; ++i) {
        DenseVector zi = virtual_z[i];
        for (std::size_t k = 0; k < steps; ++k) axpy_inplace(-aux_step * coef.weights[k], traces[i].grads[k], zi);
        virtual_local[i] = std::move(zi);
      }
      virtual_z = kernels::mix_rows(mixing->w, virtual_local, threads);
      const double dev9 = max_abs(subtract(mean_of(virtual_z), z_next));
      vs.virtual_sequence = std::max(vs.virtual_sequence, dev9);
      if (dev9 > tol.recursion * scale_of(z_next)) fail_verification("virtual-sequence mean", t, dev9, tol.recursion);
      ++vs.rounds_checked;
    }

    xbar_prev = std::move(xbar);
    xbar = xbar_next;
    z = z_next;

    if (hooks.on_round_end) hooks.on_round_end(t + 1, result.states);

    if ((t + 1) % cfg.eval_every == 0 || t + 1 == h.T) {
      RoundRecord r;
      r.round = t + 1;
      r.train_loss = problem.global_loss(xbar);
      r.grad_norm_z_sq = squared_norm(problem.global_grad(z));
      r.consensus = kernels::consensus_distance(xs, threads);
      if (const LabeledDataset* test = problem.test_set()) r.test_accuracy = problem.accuracy(xbar, *test);
      r.psi_round = mixing->psi;
      r.elapsed_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (!std::isfinite(r.train_loss) || !std::isfinite(r.grad_norm_z_sq)) {
        throw DivergenceError("non-finite metrics at round " + std::to_string(t + 1), static_cast<int>(t + 1), -1);
      }
      if (hooks.on_record) hooks.on_record(r);
      result.records.push_back(r);
    }
  }
  result.x_bar = xbar;
  result.z = z;
  return result;
}

std::string to_string(Metric m) {
  switch (m) {
    case Metric::kTestAccuracy: return "test_accuracy";
    case Metric::kTrainLoss: return "train_loss";
    case Metric::kGradNormZSq: return "grad_norm_z_sq";
  }
  return "unknown";
}

Metric metric_from_string(const std::string& name) {
  if (name == "test_accuracy") return Metric::kTestAccuracy;
  if (name == "train_loss") return Metric::kTrainLoss;
  if (name == "grad_norm_z_sq") return Metric::kGradNormZSq;
  throw ConfigError("unknown metric '" + name + "'");
}

std::optional<double> metric_value(const RoundRecord& r, Metric m) {
  switch (m) {
    case Metric::kTestAccuracy: return r.test_accuracy;
    case Metric::kTrainLoss: return r.train_loss;
    case Metric::kGradNormZSq: return r.grad_norm_z_sq;
  }
  return std::nullopt;
}

std::optional<std::size_t> rounds_to_threshold(std::span<const RoundRecord> records, Metric metric,
                                               double threshold) {
  for (const auto& r : records) {
    const auto v = metric_value(r, metric);
    if (!v) continue;
    const bool hit = metric == Metric::kTestAccuracy ? *v >= threshold : *v <= threshold;
    if (hit) return r.round;
  }
  return std::nullopt;
}

namespace {

double parse_number(const std::string& axis, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("sweep axis " + axis + ": '" + value + "' is not a number");
  }
}

std::size_t parse_count(const std::string& axis, const std::string& value) {
  const double v = parse_number(axis, value);
  if (v < 0 || v != std::floor(v)) throw ConfigError("sweep axis " + axis + ": '" + value + "' is not a count");
  return static_cast<std::size_t>(v);
}

}  // namespace

RunConfig apply_axis(const RunConfig& base, const std::string& axis, const std::string& value) {
  RunConfig cfg = base;
  if (axis == "beta") {
    cfg.hyper.beta = parse_number(axis, value);
  } else if (axis == "K") {
    cfg.hyper.K = parse_count(axis, value);
  } else if (axis == "lambda" || axis == "lambda_") {
    cfg.hyper.lambda = parse_number(axis, value);
  } else if (axis == "eta") {
    cfg.hyper.eta = parse_number(axis, value);
  } else if (axis == "m") {
    cfg.m = parse_count(axis, value);
    cfg.topology.m = cfg.m;
  } else if (axis == "topology") {
    cfg.topology.kind = topology_kind_from_string(value);
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "' (expected beta, K, lambda, m, topology, eta)");
  }
  return cfg;
}

std::vector<SweepCell> sweep(const RunConfig& base, const std::string& axis,
                             std::span<const std::string> values, std::span<const std::uint64_t> seeds) {
  std::vector<SweepCell> cells;
  for (const auto& value : values) {
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = apply_axis(base, axis, value);
      cfg.seed = seed;
      SweepCell cell;
      cell.value = value;
      cell.seed = seed;
      cell.records = run(cfg).records;
      const TopologySpec topo = cfg.resolved_topology();
      cell.psi = topo.kind == TopologyKind::kRandomDynamic
                     ? sample_round_topology(topo, 0).mixing.psi
                     : metropolis_weights(build_graph(topo)).psi;
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace dfl
