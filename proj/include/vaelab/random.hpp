#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace vaelab {

// SplitMix64-based generator. Self-contained so that seeded runs are
// reproducible independent of the standard library's distribution
// implementations.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // index in [0, n)
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller, one spare cached
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // keep u1 away from 0 so log() is finite
        u1 = u1 < 1e-300 ? 1e-300 : u1;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

  private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// One master seed fans out into independent named streams (weights, shuffle,
// noise, ...) so toggling a consumer of one stream cannot shift the others.
inline uint64_t derive_seed(uint64_t master, std::string_view stream) {
    Rng mix(master ^ fnv1a64(stream));
    return mix.next_u64();
}

inline uint64_t derive_seed(uint64_t master, std::string_view stream, uint64_t index) {
    Rng mix(derive_seed(master, stream) ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    return mix.next_u64();
}

}  // namespace vaelab
