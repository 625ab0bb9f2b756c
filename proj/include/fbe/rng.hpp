#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace fbe {

// Bit mixer used to derive independent stream seeds from one master seed.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic random stream: a standard mt19937_64 engine plus our own
// uniform/normal transforms so the produced values are identical across
// platforms and standard-library versions. Streams derived from the same
// master seed with different ids are statistically independent.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    static RandomStream substream(std::uint64_t seed, std::uint64_t stream_id) {
        return RandomStream(mix64(mix64(seed) ^ mix64(stream_id)));
    }

    // Uniform draw in [0, 1) with 53 random bits.
    double uniform01() {
        return double(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound). Rejection-free modulo is fine here:
    // bounds in this project are tiny relative to 2^64.
    std::uint64_t uniform_below(std::uint64_t bound) {
        return engine_() % bound;
    }

    // Standard normal via the Marsaglia polar method (caches the spare value).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fbe
