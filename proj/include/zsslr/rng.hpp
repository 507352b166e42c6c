#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace zsslr {

/// Counter-based splittable generator. Output i of a stream is a fixed hash of
/// (key, i), so child streams derived with child() are stable no matter in what
/// order sibling streams are consumed. splitmix64 finalizer throughout.
class SplitRng {
public:
    explicit SplitRng(std::uint64_t seed) : key_(mix(seed + kGolden)) {}

    /// Derive an independent child stream; deterministic in (parent key, label).
    SplitRng child(std::uint64_t label) const {
        SplitRng r(0);
        r.key_ = mix(key_ ^ mix(label + kLeaf));
        r.counter_ = 0;
        r.have_cached_normal_ = false;
        return r;
    }

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGolden); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller; the paired value is cached.
    double normal() {
        if (have_cached_normal_) {
            have_cached_normal_ = false;
            return cached_normal_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        cached_normal_ = r * std::sin(a);
        have_cached_normal_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, n) without modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t lim = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= lim);
        return x % n;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t kLeaf = 0xD1B54A32D192ED03ull;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace zsslr
