#pragma once

// Client-parallel kernels. Each parallel kernel has a sequential reference
// twin with the same per-element arithmetic order, so the two agree bit for
// bit; tests and bench_kernels compare them.

#include <cstddef>
#include <exception>
#include <functional>
#include <span>
#include <vector>

#include "dfl/numerics.hpp"
#include "dfl/optimizers.hpp"

namespace dfl::kernels {

/// Worker count from DFL_THREADS (if set and positive), else the OpenMP
/// default. `requested` > 0 overrides both but is still capped by DFL_THREADS.
int resolve_threads(int requested = 0);

/// Calls fn(i) for i in [0, m). threads <= 1 runs the sequential reference
/// loop. The first exception (lowest client index) is rethrown after all
/// clients finish.
void for_each_client(std::size_t m, int threads, const std::function<void(std::size_t)>& fn);
void for_each_client_reference(std::size_t m, const std::function<void(std::size_t)>& fn);

/// out_i = sum_j w_ij x_j, rows computed in parallel.
std::vector<DenseVector> mix_rows(const SymmetricMatrix& w, std::span<const DenseVector> xs,
                                  int threads);
std::vector<DenseVector> mix_rows_reference(const SymmetricMatrix& w, std::span<const DenseVector> xs);

/// Parallel counterpart of dfl::mix.
void mix_states(std::span<ClientState> states, std::span<const DenseVector> local_results,
                const SymmetricMatrix& w, int threads);

/// (1/m) sum_i ||x_i - mean||^2. Per-client norms in parallel, summed in index order.
double consensus_distance(std::span<const DenseVector> xs, int threads);
double consensus_distance_reference(std::span<const DenseVector> xs);

}  // namespace dfl::kernels
