#pragma once

#include <cstdint>
#include <random>

namespace cwtune {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a master seed and a stream index
/// (splitmix64 finalizer). Used so that per-cell / per-period seeds never
/// depend on evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept
{
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) noexcept
{
    return derive_seed(derive_seed(master, a), b);
}

/// Uniform integer on [lo, hi] by rejection. Kept local instead of
/// std::uniform_int_distribution so run logs stay identical across standard
/// library implementations.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi)
{
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) {
        return static_cast<std::int64_t>(rng());
    }
    const std::uint64_t limit = Rng::max() - (Rng::max() % span);
    std::uint64_t draw = rng();
    while (draw >= limit) {
        draw = rng();
    }
    return lo + static_cast<std::int64_t>(draw % span);
}

/// Uniform real on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace cwtune
