#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace feplab {

// Counter-based stream: splitmix64 over an incrementing counter. A stream is
// fully determined by (seed, stream_index), so ensemble members reproduce
// bit-exactly regardless of scheduling.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) {
        counter_ = mix(mix(seed + 0x9E3779B97F4A7C15ULL) ^ mix(stream + 0xBF58476D1CE4E5B9ULL));
    }

    std::uint64_t next_u64() {
        counter_ += 0x9E3779B97F4A7C15ULL;
        return mix(counter_);
    }

    // Uniform on (0, 1]; never returns 0 so logarithms are safe.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Box-Muller; consumes a fixed two uniforms per pair.
    double next_normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace feplab
