#include "dfl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dfl/error.hpp"

namespace dfl {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t client, Purpose purpose,
                     std::uint64_t round) {
  std::uint64_t k = mix64(seed + kGolden);
  k = mix64(k ^ (client + 0x632be59bd9b4e019ULL));
  k = mix64(k ^ (static_cast<std::uint64_t>(purpose) * 0x85ebca6bULL));
  k = mix64(k ^ (round + 0xc2b2ae3d27d4eb4fULL));
  key_ = k;
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open_low() {
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

std::size_t RngStream::below(std::size_t n) {
  if (n == 0) throw ConfigError("RngStream::below: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = bound * (UINT64_MAX / bound);
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

double RngStream::normal() {
  const double u1 = uniform_open_low();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::gamma(double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw ConfigError("gamma shape must be positive and finite");
  }
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform_open_low(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open_low();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> RngStream::dirichlet(double concentration, std::size_t n) {
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& v : p) {
    v = gamma(concentration);
    total += v;
  }
  if (!(total > 0.0)) {
    // All draws underflowed (tiny concentration): put the mass on one entry.
    std::fill(p.begin(), p.end(), 0.0);
    p[below(n)] = 1.0;
    return p;
  }
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace dfl
