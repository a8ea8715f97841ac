#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace dfl {

/// What a random stream is used for. Part of the stream key, so two purposes
/// never share draws even for the same client and round.
enum class Purpose : std::uint64_t {
  kInit = 1,
  kTopology = 2,
  kPartition = 3,
  kMinibatch = 4,
  kNoise = 5,
  kData = 6,
  kPower = 7,
  kProbe = 8,
  kEstimate = 9,
};

/// Counter-based random stream. Output number n is a pure function of
/// (seed, client, purpose, round, n), so a stream can be recreated anywhere
/// and replayed from any draw count. Distributions are implemented here
/// rather than via <random> so results do not depend on the standard library.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t client, Purpose purpose, std::uint64_t round = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in (0, 1].
  double uniform_open_low();
  /// Uniform integer in [0, n). Rejection sampling, unbiased.
  std::size_t below(std::size_t n);
  /// Standard normal by Box-Muller; always consumes exactly two draws.
  double normal();
  /// Gamma(shape, 1) by Marsaglia-Tsang.
  double gamma(double shape);
  /// One Dirichlet(concentration * 1_n) vector.
  std::vector<double> dirichlet(double concentration, std::size_t n);
  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t draws() const noexcept { return counter_; }
  void seek(std::uint64_t draw_count) noexcept { counter_ = draw_count; }
  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace dfl
