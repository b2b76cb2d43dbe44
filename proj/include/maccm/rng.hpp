#pragma once

#include <cstdint>
#include <random>

namespace maccm {

/// Single seeded stream shared by instance construction and simulation.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one draw. Defined here
/// rather than via <random> distributions so outputs are identical across
/// standard library implementations.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in the open interval (0, 1).
inline double uniform_open01(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace maccm
