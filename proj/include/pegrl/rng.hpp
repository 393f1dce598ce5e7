#pragma once

#include <cstdint>
#include <random>

namespace pegrl {

// Seeded RNG stream. Streams are keyed by (seed, id, purpose) so adding or
// removing one consumer never perturbs another (seed isolation).
class Rng {
  public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static std::uint64_t derive(std::uint64_t seed, std::uint64_t id, std::uint64_t purpose) {
        // splitmix64 over the packed key
        std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + id * 0xBF58476D1CE4E5B9ull +
                          purpose * 0x94D049BB133111EBull + 0x2545F4914F6CDD1Dull;
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    static Rng stream(std::uint64_t seed, std::uint64_t id, std::uint64_t purpose) {
        return Rng(derive(seed, id, purpose));
    }

    // Uniform in [0, 1).
    double uniform() {
        return (engine_() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (no distribution state, stable across platforms).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pegrl
