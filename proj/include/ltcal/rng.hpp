#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ltcal {

/// Deterministic random source. All distribution code is implemented here on
/// top of std::mt19937_64 so that a given seed produces the same stream on any
/// platform; std:: distributions are not used because their output is
/// implementation-defined.
///
/// Streams: one root seed fans out into named sub-streams (dataset / train /
/// calibrate / ...) via derive(), so pipeline stages are independently
/// reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Stable seed for a named sub-stream of `root`.
  static std::uint64_t derive(std::uint64_t root, std::string_view stream);

  /// New generator seeded from derive(seed(), name).
  Rng stream(std::string_view name) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();

  /// Uniform in [a, b).
  double uniform(double a, double b);

  /// Uniform in the open interval (a, b); rejects the endpoints.
  double uniform_open(double a, double b);

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  double normal(double mean = 0.0, double stddev = 1.0);

  /// Gamma(shape, 1) via Marsaglia-Tsang; shape > 0.
  double gamma(double shape);

  /// Beta(a, b) on [0, 1].
  double beta(double a, double b);

  bool bernoulli(double p);

  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  /// k distinct indices drawn uniformly from [0, n), in random order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 gen_;
  std::uint64_t seed_;
};

}  // namespace ltcal
