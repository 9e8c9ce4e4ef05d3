#pragma once

#include <cstdint>

namespace gatedflow {

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
template <typename Engine>
double uniform01(Engine& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by multiply-shift.
template <typename Engine>
std::uint64_t uniform_index(Engine& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

}  // namespace gatedflow
