#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace vidsplice {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
    // FNV-1a 64
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic RNG on top of mt19937_64. All derived draws (uniform,
// gaussian, ints) are hand-rolled from raw 64-bit outputs so sequences are
// bit-identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed)
        : gen_(splitmix64(seed)), stream_id_(splitmix64(seed ^ 0xa0761d6478bd642fULL)) {}

    // Independent child stream; (seed, tag) identifies the stream no matter
    // what has been drawn from the parent.
    Rng fork(std::string_view tag) const { return Rng(stream_id_ ^ hash_tag(tag)); }
    Rng fork(std::uint64_t index) const {
        return Rng(stream_id_ ^ splitmix64(index + 0x517cc1b727220a95ULL));
    }

    std::uint64_t next_u64() { return gen_(); }

    double uniform() {  // [0, 1), 53-bit resolution
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive on both ends.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto range = static_cast<std::uint64_t>(hi - lo) + 1;
        const auto draw = static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * range) >> 64);
        return lo + static_cast<std::int64_t>(draw);
    }

    double gaussian() {  // Box-Muller
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double gaussian(double mu, double sigma) { return mu + sigma * gaussian(); }

private:
    std::mt19937_64 gen_;
    std::uint64_t stream_id_;
};

}  // namespace vidsplice
