#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace fedauth {

// splitmix64 generator. Chosen over std::mt19937 because its entire output
// sequence is defined by this file alone, so seeded runs reproduce
// bit-for-bit regardless of standard-library version.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0,n), n > 0
    uint64_t bounded(uint64_t n) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(u64()) * n) >> 64);
    }

    // standard normal via Marsaglia polar (avoids sin/cos; only log and sqrt)
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double m = std::sqrt(-2.0 * std::log(s) / s);
        cached_ = v * m;
        has_cached_ = true;
        return u * m;
    }

private:
    uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// FNV-1a over (base, tag, index). All sub-streams (per client, per class,
// per restart, ...) derive their seeds through this so that evaluation
// order and thread count never change what a component draws.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index = 0) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto absorb = [&h](uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    };
    absorb(base);
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    absorb(index);
    return h;
}

}  // namespace fedauth
