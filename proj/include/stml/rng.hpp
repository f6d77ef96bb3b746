#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace stml {

/// Deterministic random source shared by every stochastic step.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so the
/// uniform, integer, and normal draws are derived here from raw engine output:
///   - uniform(): top 53 bits of one draw, scaled to [0, 1);
///   - below(n): rejection sampling on the raw 64-bit draw;
///   - normal(): Box-Muller, consuming two uniforms per pair of variates.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64+u53+boxmuller";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();

  /// `count` distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count);

  /// Independent child stream; advances this generator by one draw.
  Rng fork() { return Rng(next_u64()); }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace stml
