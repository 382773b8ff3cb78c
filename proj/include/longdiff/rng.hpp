#pragma once

#include <cstdint>
#include <random>

namespace longdiff {

// Mixes a seed and a stream id into an independent substream seed.
std::uint64_t splitmix64(std::uint64_t x);

// Deterministic random source. The standard library's distributions are
// implementation-defined, so uniform and normal variates are derived by hand
// from the (fully specified) mt19937_64 stream; outputs are identical across
// platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second variate is cached.
    double normal();

    // Uniform integer in [lo, hi], rejection sampled to avoid modulo bias.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace longdiff
