#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace infoprio {

/// Explicit-state pseudo random generator. No global randomness anywhere in
/// the library: every stochastic operation takes an Rng (or a seed).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Independent sub-stream derived from (seed, name), e.g. "env", "model-init".
  /// Changing how one stream is consumed never shifts another.
  static Rng stream(std::uint64_t seed, std::string_view name);

  /// Mixes a seed with a name and an index into a new 64-bit seed.
  static std::uint64_t derive_seed(std::uint64_t seed, std::string_view name,
                                   std::uint64_t index = 0);

  double uniform();  // [0, 1)
  double normal();   // N(0, 1)
  double gamma(double shape);
  int uniform_int(int n);  // {0, ..., n-1}
  int categorical(std::span<const double> probs);
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace infoprio
