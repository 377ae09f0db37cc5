#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace latentdlm {

/// A seeded random stream. Each Markov chain owns one; streams must not be
/// shared between threads. Identical (seed, stream) pairs produce identical
/// draw sequences.
class RngStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  engine_type& engine() { return engine_; }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // ziggurat draws; several times cheaper than the polar method
  double normal() { return normal_(engine_); }

  /// Standard exponential (rate 1).
  double exponential() { return exponential_(engine_); }

  std::size_t uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  engine_type engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
  boost::random::exponential_distribution<double> exponential_{1.0};
};

}  // namespace latentdlm
