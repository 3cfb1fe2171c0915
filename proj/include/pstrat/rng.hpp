#pragma once

// Deterministic random streams.
//
// Every independent unit of work (bootstrap replicate, Monte Carlo replicate)
// draws from its own substream, derived from (seed, stream index) by
// SplitMix64 mixing. Results therefore do not depend on scheduling order or
// thread count. Bounded integers and uniforms are generated here rather than
// through <random> distributions so that sequences are identical across
// standard library implementations.

#include <cstdint>
#include <random>

namespace pstrat {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    // Substream `index` of the stream seeded with `seed`.
    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        return Rng(splitmix64(seed) ^ splitmix64(index * 0xd1b54a32d192ed03ULL + 1));
    }

    std::uint64_t next() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer on [0, bound), unbiased (rejection on the top range).
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t r;
        do {
            r = next();
        } while (r >= limit);
        return r % bound;
    }

    // Index drawn from a discrete distribution given by weights summing to 1.
    template <typename Range>
    std::size_t categorical(const Range& probs) {
        const double u = uniform();
        double acc = 0.0;
        std::size_t i = 0, last = 0;
        for (double p : probs) {
            acc += p;
            if (p > 0.0) last = i;
            if (u < acc) return i;
            ++i;
        }
        return last;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace pstrat
