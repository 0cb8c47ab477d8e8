#ifndef E2E_RNG_HPP
#define E2E_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace e2e {

// splitmix64 finalizer, used for seed mixing and stream derivation.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Seeded generator with explicit distributions so that sequences are
// identical across standard libraries. Derived streams depend only on
// (root seed, salt), never on how much the parent has consumed, which
// keeps sharded Monte-Carlo runs independent of scheduling.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(mix64(seed)) {}

    uint64_t seed() const noexcept { return seed_; }

    Rng derive(uint64_t salt) const {
        return Rng(mix64(seed_ ^ mix64(salt + 0x632be59bd9b4e019ull)));
    }

    uint64_t next_u64() { return gen_(); }

    // uniform on [0,1) with 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one draw per call (the spare is discarded on purpose so
    // the stream position is a pure function of the call count)
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // integer in [0, n)
    int uniform_int(int n) {
        uint64_t lim = UINT64_MAX - UINT64_MAX % static_cast<uint64_t>(n);
        uint64_t x = gen_();
        while (x >= lim) x = gen_();
        return static_cast<int>(x % static_cast<uint64_t>(n));
    }

    double rademacher() { return (gen_() & 1u) ? 1.0 : -1.0; }

private:
    uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace e2e

#endif
