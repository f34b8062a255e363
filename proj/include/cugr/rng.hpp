#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cugr {

// splitmix64 finalizer, used to mix seeds and derive substreams.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Deterministic RNG. Distributions are implemented by hand so that streams
// reproduce across platforms and standard library versions
// (std::uniform_real_distribution et al. are implementation-defined).
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(mix64(seed)) {}

    // Independent substream keyed by one or more tags. Substreams derived
    // with the same tags from the same parent are identical; this is what
    // makes per-sample / per-epoch work order-independent and resumable.
    Rng derive(uint64_t tag) const { return Rng(hash_combine(seed_, tag)); }
    Rng derive(uint64_t tag_a, uint64_t tag_b) const {
        return Rng(hash_combine(hash_combine(seed_, tag_a), tag_b));
    }

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n > 0. Modulo bias is negligible for the
    // small ranges used here and keeps the stream layout trivial.
    uint64_t uniform_int(uint64_t n) { return gen_() % n; }

    int uniform_int(int lo, int hi) { // inclusive
        return lo + static_cast<int>(uniform_int(static_cast<uint64_t>(hi - lo + 1)));
    }

    // Standard normal via Box-Muller, no cached spare.
    double normal() {
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform_int(static_cast<uint64_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace cugr
