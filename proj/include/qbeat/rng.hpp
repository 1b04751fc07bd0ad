#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qbeat {

// Deterministic random source. Every (seed, stream) pair gives an
// independent, reproducible substream; the conversions below avoid the
// implementation-defined std distributions so draws are identical across
// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        engine_.seed(seq);
    }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1].
    double uniform_positive() { return 1.0 - uniform(); }

    double exponential(double rate) { return -std::log(uniform_positive()) / rate; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

    std::uint64_t next() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace qbeat
