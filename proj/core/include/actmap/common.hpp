#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace actmap {

// Single RNG type used across the project. All stochastic code takes an
// engine (or a seed) explicitly so runs are reproducible.
using Rng = std::mt19937_64;

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

[[noreturn]] inline void io_fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

// Uniform double in [0, 1) with 53 random bits. The standard distributions
// have implementation-defined sequences; these are pinned so datasets are
// reproducible byte-for-byte.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
  const auto span = static_cast<uint64_t>(hi_inclusive - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}

// Box-Muller. Draws two uniforms per sample; no hidden state.
inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  return mean + stddev * z;
}

}  // namespace actmap
