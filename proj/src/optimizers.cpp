#include "dfl/optimizers.hpp"

#include <cmath>

#include "dfl/error.hpp"

namespace dfl {

std::string to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::kDFedCata: return "dfedcata";
    case AlgorithmKind::kDFedAvg: return "dfedavg";
    case AlgorithmKind::kDFedAvgM: return "dfedavgm";
    case AlgorithmKind::kDPSGD: return "dpsgd";
    case AlgorithmKind::kDFedSAM: return "dfedsam";
  }
  return "unknown";
}

AlgorithmKind algorithm_kind_from_string(const std::string& name) {
  for (auto k : {AlgorithmKind::kDFedCata, AlgorithmKind::kDFedAvg, AlgorithmKind::kDFedAvgM,
                 AlgorithmKind::kDPSGD, AlgorithmKind::kDFedSAM}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown algorithm '" + name + "'");
}

std::string to_string(LrSchedule s) {
  return s == LrSchedule::kExponentialDecay ? "exponential_decay" : "inverse_time";
}

LrSchedule lr_schedule_from_string(const std::string& name) {
  if (name == "exponential_decay") return LrSchedule::kExponentialDecay;
  if (name == "inverse_time") return LrSchedule::kInverseTime;
  throw ConfigError("unknown lr schedule '" + name + "'");
}

void HyperParams::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!(eta > 0.0) || !finite(eta)) throw ConfigError("hyper.eta must be positive and finite");
  if (!(lambda >= 0.0) || !finite(lambda)) throw ConfigError("hyper.lambda must be >= 0");
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("hyper.beta must be in [0, 1)");
  if (K < 1) throw ConfigError("hyper.K must be at least 1");
  if (!(rho >= 0.0) || !finite(rho)) throw ConfigError("hyper.rho must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("hyper.momentum must be in [0, 1)");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("hyper.lr_decay must be in (0, 1]");
  if (!(mu_tilde > 0.0) || !finite(mu_tilde)) throw ConfigError("hyper.mu_tilde must be positive");
}

double step_size(const HyperParams& h, std::size_t round, std::size_t k) {
  if (h.schedule == LrSchedule::kInverseTime) {
    return h.mu_tilde / static_cast<double>(round * h.K + k + 1);
  }
  return h.eta * std::pow(h.lr_decay, static_cast<double>(round));
}

ClientState ClientState::initial(const DenseVector& x0) {
  return ClientState{x0, x0, x0, DenseVector(x0.size(), 0.0)};
}

DenseVector extrapolate(ClientState& s, double beta) {
  require_same_size(s.x, s.x_prev, "extrapolate");
  DenseVector a(s.x.size());
  for (std::size_t j = 0; j < a.size(); ++j) a[j] = s.x[j] + beta * (s.x[j] - s.x_prev[j]);
  s.anchor = a;
  return a;
}

namespace {

std::vector<std::size_t> draw_batch(const Problem& p, const HyperParams& h, std::size_t client,
                                    ClientStreams& streams) {
  if (h.batch_size == 0) return {};
  return p.sample_minibatch(client, h.batch_size, streams.data);
}

void check_iterate(const DenseVector& x, std::size_t round, std::size_t client) {
  if (!all_finite(x)) {
    throw DivergenceError("non-finite iterate at round " + std::to_string(round) + " on client " +
                              std::to_string(client),
                          static_cast<int>(round), static_cast<int>(client));
  }
}

void record(LocalTrace* trace, const DenseVector& g, const DenseVector& x_next,
            std::vector<std::size_t> batch) {
  if (!trace) return;
  trace->grads.push_back(g);
  trace->iterates.push_back(x_next);
  trace->batches.push_back(std::move(batch));
}

}  // namespace

DenseVector local_update_dfedcata(ClientState& s, const Problem& p, const HyperParams& h,
                                  std::size_t client, std::size_t round, ClientStreams& streams,
                                  LocalTrace* trace) {
  require_same_size(s.anchor, s.x, "local_update_dfedcata");
  DenseVector x = s.anchor;
  const std::size_t d = x.size();
  if (trace) trace->iterates.push_back(x);
  for (std::size_t k = 0; k < h.K; ++k) {
    auto batch = draw_batch(p, h, client, streams);
    const DenseVector g = p.grad(client, x, batch, &streams.noise);
    const double eta = step_size(h, round, k);
    for (std::size_t j = 0; j < d; ++j) x[j] -= eta * (g[j] + h.lambda * (x[j] - s.anchor[j]));
    check_iterate(x, round, client);
    record(trace, g, x, std::move(batch));
  }
  return x;
}

std::size_t local_steps(AlgorithmKind kind, const HyperParams& h) {
  return kind == AlgorithmKind::kDPSGD ? 1 : h.K;
}

DenseVector local_update_baseline(AlgorithmKind kind, ClientState& s, const Problem& p,
                                  const HyperParams& h, std::size_t client, std::size_t round,
                                  ClientStreams& streams, LocalTrace* trace) {
  if (kind == AlgorithmKind::kDFedCata) {
    throw ConfigError("local_update_baseline called with dfedcata");
  }
  DenseVector x = s.x;
  s.anchor = s.x;
  const std::size_t d = x.size();
  if (trace) trace->iterates.push_back(x);
  // Momentum is local to a round.
  if (kind == AlgorithmKind::kDFedAvgM) s.momentum_buf = DenseVector(d, 0.0);

  const std::size_t steps = local_steps(kind, h);
  for (std::size_t k = 0; k < steps; ++k) {
    auto batch = draw_batch(p, h, client, streams);
    const double eta = step_size(h, round, k);
    DenseVector g;
    switch (kind) {
      case AlgorithmKind::kDFedAvg:
      case AlgorithmKind::kDPSGD:
        g = p.grad(client, x, batch, &streams.noise);
        for (std::size_t j = 0; j < d; ++j) x[j] -= eta * g[j];
        break;
      case AlgorithmKind::kDFedAvgM: {
        g = p.grad(client, x, batch, &streams.noise);
        auto& v = s.momentum_buf;
        for (std::size_t j = 0; j < d; ++j) {
          v[j] = h.momentum * v[j] + g[j];
          x[j] -= eta * v[j];
        }
        break;
      }
      case AlgorithmKind::kDFedSAM: {
        // Ascent direction from the noise-free minibatch gradient; injected
        // noise enters once, at the descent gradient.
        DenseVector probe = x;
        if (h.rho > 0.0) {
          const DenseVector g0 = p.grad(client, x, batch, nullptr);
          const double n0 = norm(g0);
          if (n0 > 0.0) {
            for (std::size_t j = 0; j < d; ++j) probe[j] += h.rho * g0[j] / n0;
          }
        }
        g = p.grad(client, probe, batch, &streams.noise);
        for (std::size_t j = 0; j < d; ++j) x[j] -= eta * g[j];
        break;
      }
      case AlgorithmKind::kDFedCata:
        break;
    }
    check_iterate(x, round, client);
    record(trace, g, x, std::move(batch));
  }
  return x;
}

DenseVector local_update(AlgorithmKind kind, ClientState& s, const Problem& p, const HyperParams& h,
                         std::size_t client, std::size_t round, ClientStreams& streams,
                         LocalTrace* trace) {
  if (kind == AlgorithmKind::kDFedCata) {
    extrapolate(s, h.beta);
    return local_update_dfedcata(s, p, h, client, round, streams, trace);
  }
  return local_update_baseline(kind, s, p, h, client, round, streams, trace);
}

std::vector<std::vector<std::size_t>> replay_batches(const Problem& p, const HyperParams& h,
                                                     AlgorithmKind kind, std::size_t client,
                                                     std::size_t round, std::uint64_t seed) {
  ClientStreams streams(seed, client, round);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t k = 0; k < local_steps(kind, h); ++k) out.push_back(draw_batch(p, h, client, streams));
  return out;
}

void mix(std::span<ClientState> states, std::span<const DenseVector> local_results,
         const SymmetricMatrix& w) {
  const std::size_t m = states.size();
  if (w.order() != m || local_results.size() != m) {
    throw DimensionError("mix: mixing matrix order " + std::to_string(w.order()) + " for " +
                         std::to_string(m) + " clients");
  }
  std::vector<DenseVector> mixed(m);
  for (std::size_t i = 0; i < m; ++i) {
    DenseVector acc(local_results[0].size());
    for (std::size_t j = 0; j < m; ++j) axpy_inplace(w(i, j), local_results[j], acc);
    mixed[i] = std::move(acc);
  }
  for (std::size_t i = 0; i < m; ++i) {
    states[i].x_prev = std::move(states[i].x);
    states[i].x = std::move(mixed[i]);
  }
}

LocalUpdateCoefficients local_update_coefficients(double eta, double lambda, std::size_t K) {
  LocalUpdateCoefficients c;
  c.weights.resize(K);
  const double kd = static_cast<double>(K);
  if (lambda == 0.0) {
    c.lambda_limit = true;
    c.gamma = 0.0;
    c.gamma_over_lambda = kd * eta;
    for (auto& w : c.weights) w = 1.0 / kd;
    return c;
  }
  const double el = eta * lambda;
  c.gamma = -std::expm1(kd * std::log1p(-el));
  c.gamma_over_lambda = c.gamma / lambda;
  for (std::size_t k = 0; k < K; ++k) {
    const double gk = el * std::pow(1.0 - el, static_cast<double>(K - 1 - k));
    c.weights[k] = gk / c.gamma;
  }
  return c;
}

}  // namespace dfl
