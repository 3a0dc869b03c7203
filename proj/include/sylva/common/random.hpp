#pragma once

#include <cstdint>
#include <random>

namespace sylva {

using Rng = std::mt19937_64;

/// Independent, reproducible stream derived from a master seed. Each
/// subsystem draws from its own stream so adding draws in one place does
/// not perturb another.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                    0x51u};
  return Rng(seq);
}

inline double draw_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }
inline double draw_uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

namespace streams {
inline constexpr std::uint64_t kWorld = 1;
inline constexpr std::uint64_t kLidar = 2;
inline constexpr std::uint64_t kOdometry = 3;
inline constexpr std::uint64_t kRegistration = 4;
}  // namespace streams

}  // namespace sylva
