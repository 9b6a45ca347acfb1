#pragma once

#include <cstdint>
#include <random>

namespace brc {

using Rng = std::mt19937_64;

/// Seeds an independent stream. Streams with different `stream` ids never
/// share a seed sequence, so chains and scenarios stay decoupled.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace brc
