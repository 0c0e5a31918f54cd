#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace worldsync {

// Deterministic RNG used everywhere randomness appears. mt19937_64 has a
// standard-mandated output sequence, and the unit-interval conversion below
// avoids std::uniform_real_distribution, whose draws are implementation
// defined. Identical seeds therefore produce identical draw sequences on
// every platform.
class DetRng {
public:
    explicit DetRng(uint64_t seed)
        : engine_(seed)
    {
    }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53 random mantissa bits.
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

    bool chance(double probability) { return unit() < probability; }

    // Uniform in [0, n). Modulo bias is irrelevant at simulation scale.
    uint64_t below(uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    int64_t int_range(int64_t lo, int64_t hi) // inclusive bounds
    {
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

private:
    std::mt19937_64 engine_;
};

inline constexpr uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t hash = kFnvOffsetBasis)
{
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        hash ^= bytes[i];
        hash *= kFnvPrime;
    }
    return hash;
}

inline uint64_t fnv1a64(std::string_view text, uint64_t hash = kFnvOffsetBasis)
{
    return fnv1a64(text.data(), text.size(), hash);
}

// splitmix64 finalizer; used to derive stream seeds from (seed, label) pairs.
inline uint64_t mix_seed(uint64_t a, uint64_t b)
{
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace worldsync
