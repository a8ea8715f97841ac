// Times the OpenMP kernels against their sequential reference twins and
// checks that both produce identical bits.
//
//   bench_kernels [m] [dim] [reps]

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>

#include "dfl/engine.hpp"
#include "dfl/kernels.hpp"

using namespace dfl;

namespace {

template <class F>
double time_ms(std::size_t reps, F&& f) {
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t r = 0; r < reps; ++r) f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count() /
         static_cast<double>(reps);
}

void row(const std::string& name, double ref, double par, bool same) {
  std::cout << name << "  reference " << ref << " ms  parallel " << par << " ms  speedup " << ref / par
            << "  identical " << (same ? "yes" : "NO") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t m = argc > 1 ? std::stoul(argv[1]) : 100;
  const std::size_t dim = argc > 2 ? std::stoul(argv[2]) : 2000;
  const std::size_t reps = argc > 3 ? std::stoul(argv[3]) : 5;
  const int threads = kernels::resolve_threads();
  std::cout << "m " << m << " dim " << dim << " threads " << threads << '\n';

  std::vector<DenseVector> xs(m, DenseVector(dim));
  for (std::size_t i = 0; i < m; ++i) {
    RngStream rng(1, i, Purpose::kInit, 0);
    for (auto& v : xs[i]) v = rng.normal();
  }
  TopologySpec spec;
  spec.m = m;
  spec.n_neighbors = std::min<std::size_t>(10, m - 1);
  const MixingMatrix w = sample_round_topology(spec, 0).mixing;

  std::vector<DenseVector> a, b;
  const double mix_ref = time_ms(reps, [&] { a = kernels::mix_rows_reference(w.w, xs); });
  const double mix_par = time_ms(reps, [&] { b = kernels::mix_rows(w.w, xs, threads); });
  row("mix_rows          ", mix_ref, mix_par, a == b);

  double ca = 0.0, cb = 0.0;
  const double cd_ref = time_ms(reps, [&] { ca = kernels::consensus_distance_reference(xs); });
  const double cd_par = time_ms(reps, [&] { cb = kernels::consensus_distance(xs, threads); });
  row("consensus_distance", cd_ref, cd_par, ca == cb);

  // Whole simulation: local updates dominate.
  RunConfig cfg;
  cfg.m = std::min<std::size_t>(m, 32);
  cfg.topology.m = cfg.m;
  cfg.topology.n_neighbors = std::min<std::size_t>(10, cfg.m - 1);
  cfg.problem.samples = 4000;
  cfg.hyper.T = 5;
  cfg.threads = 1;
  RunResult ra, rb;
  const double run_ref = time_ms(1, [&] { ra = run(cfg); });
  cfg.threads = threads;
  const double run_par = time_ms(1, [&] { rb = run(cfg); });
  bool same = ra.records.size() == rb.records.size();
  for (std::size_t i = 0; same && i < ra.records.size(); ++i) same = same_metrics(ra.records[i], rb.records[i]);
  row("run (5 rounds)    ", run_ref, run_par, same);
  return 0;
}
