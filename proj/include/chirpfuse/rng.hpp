#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <string_view>
#include <vector>

namespace chirpfuse {

// Deterministic splitmix64 generator. Every consumer of randomness derives a
// named child stream from the original seed, so the draw sequence of one
// stream never depends on how much another stream has consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    // splitmix64 finalizer; also used to fold stream names into seeds.
    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 1469598103934665603ULL;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        return h;
    }

    // Child stream keyed by name; independent of this stream's position.
    Rng stream(std::string_view name) const {
        return Rng(mix(seed_ ^ fnv1a(name)));
    }

    // Child stream keyed by name and index (per-clip jitter, per-run seeds).
    Rng stream(std::string_view name, std::uint64_t index) const {
        return Rng(mix(mix(seed_ ^ fnv1a(name)) ^ (0x9e3779b97f4a7c15ULL * (index + 1))));
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Uniform draw on the open interval (0, 1); never returns 0 or 1, so it
    // is safe inside log().
    double next_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_open();
    }

    // Unbiased-enough integer in [0, n) via 128-bit multiply; n must be > 0.
    std::uint64_t next_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller; caches the second deviate.
    double next_gauss() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = next_open();
        double u2 = next_open();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // Standard Gumbel deviate: -log(-log(u)) with u on (0, 1).
    double next_gumbel() {
        return -std::log(-std::log(next_open()));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(next_index(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

} // namespace chirpfuse
