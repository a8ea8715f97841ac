#include "dfl/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>

#include "dfl/error.hpp"

namespace dfl::kernels {

int resolve_threads(int requested) {
  int cap = 0;
  if (const char* env = std::getenv("DFL_THREADS")) {
    try {
      cap = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("DFL_THREADS is not an integer: '") + env + "'");
    }
  }
  int n = requested > 0 ? requested : omp_get_max_threads();
  if (cap > 0) n = std::min(n, cap);
  return std::max(n, 1);
}

void for_each_client_reference(std::size_t m, const std::function<void(std::size_t)>& fn) {
  for (std::size_t i = 0; i < m; ++i) fn(i);
}

void for_each_client(std::size_t m, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || m <= 1) {
    for_each_client_reference(m, fn);
    return;
  }
  std::vector<std::exception_ptr> errors(m);
  const auto count = static_cast<long long>(m);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

DenseVector mix_row(const SymmetricMatrix& w, std::span<const DenseVector> xs, std::size_t i) {
  DenseVector acc(xs[0].size());
  for (std::size_t j = 0; j < xs.size(); ++j) axpy_inplace(w(i, j), xs[j], acc);
  return acc;
}

void check_mix(const SymmetricMatrix& w, std::span<const DenseVector> xs) {
  if (xs.empty() || w.order() != xs.size()) {
    throw DimensionError("mix: mixing matrix order " + std::to_string(w.order()) + " for " +
                         std::to_string(xs.size()) + " vectors");
  }
}

}  // namespace

std::vector<DenseVector> mix_rows_reference(const SymmetricMatrix& w, std::span<const DenseVector> xs) {
  check_mix(w, xs);
  std::vector<DenseVector> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = mix_row(w, xs, i);
  return out;
}

std::vector<DenseVector> mix_rows(const SymmetricMatrix& w, std::span<const DenseVector> xs, int threads) {
  check_mix(w, xs);
  std::vector<DenseVector> out(xs.size());
  const auto count = static_cast<long long>(xs.size());
#pragma omp parallel for schedule(static) num_threads(std::max(threads, 1)) if (threads > 1)
  for (long long i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = mix_row(w, xs, static_cast<std::size_t>(i));
  }
  return out;
}

void mix_states(std::span<ClientState> states, std::span<const DenseVector> local_results,
                const SymmetricMatrix& w, int threads) {
  if (states.size() != local_results.size()) throw DimensionError("mix_states: size mismatch");
  auto mixed = mix_rows(w, local_results, threads);
  for (std::size_t i = 0; i < states.size(); ++i) {
    states[i].x_prev = std::move(states[i].x);
    states[i].x = std::move(mixed[i]);
  }
}

double consensus_distance_reference(std::span<const DenseVector> xs) {
  const DenseVector mean = mean_of(xs);
  double total = 0.0;
  for (const auto& x : xs) total += squared_norm(subtract(x, mean));
  return total / static_cast<double>(xs.size());
}

double consensus_distance(std::span<const DenseVector> xs, int threads) {
  const DenseVector mean = mean_of(xs);
  std::vector<double> parts(xs.size());
  const auto count = static_cast<long long>(xs.size());
#pragma omp parallel for schedule(static) num_threads(std::max(threads, 1)) if (threads > 1)
  for (long long i = 0; i < count; ++i) {
    parts[static_cast<std::size_t>(i)] = squared_norm(subtract(xs[static_cast<std::size_t>(i)], mean));
  }
  double total = 0.0;
  for (double v : parts) total += v;
  return total / static_cast<double>(xs.size());
}

}  // namespace dfl::kernels
