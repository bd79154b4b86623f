#pragma once

#include <cmath>
#include <cstdint>

namespace shapeservo {

// Deterministic RNG with a platform-independent Gaussian sampler.
// std::normal_distribution is implementation-defined, which would break the
// byte-identical-telemetry contract across standard libraries, so the
// Box-Muller transform is done by hand on top of a splitmix64/xoshiro mix.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // Warm the state so nearby seeds diverge immediately.
        next_u64();
        next_u64();
    }

    // Derives an independent stream, e.g. per disturbance event or repeat.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
        return r;
    }

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; caches the spare deviate.
    double gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        spare_ = mag * std::sin(two_pi * u2);
        has_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

    double gauss(double mean, double std) { return mean + std * gauss(); }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace shapeservo
