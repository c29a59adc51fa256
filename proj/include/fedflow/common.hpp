#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedflow {

// Thrown by the time stepper when the state turns non-finite; carries the
// simulation time at which integration failed.
class blowup_error : public std::runtime_error {
public:
    explicit blowup_error(double t)
        : std::runtime_error("numerical blowup at t = " + std::to_string(t)), t_(t) {}
    double time() const noexcept { return t_; }

private:
    double t_;
};

// File/frame layout violation; carries the byte offset of the first bad byte.
class format_error : public std::runtime_error {
public:
    format_error(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::uint64_t byte_offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

class degenerate_data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class protocol_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// SplitMix64 mixing function. Used both as the core of Rng and as a seed
// combiner, so derived seeds are decorrelated from their inputs.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic per-(round, client) seed; keeps client shuffle streams
// reproducible without correlating them across clients or rounds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t round,
                                 std::uint64_t client) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ round);
    return splitmix64(h ^ client);
}

// Small deterministic RNG (SplitMix64 stream). The standard <random>
// distributions are implementation-defined, so uniform draws are produced
// from raw bits here; results are identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53 random bits
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [-1, 1)
    double next_symmetric() { return 2.0 * next_unit() - 1.0; }

    // uniform integer in [0, n); rejection sampling, exactly unbiased
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = ~0ULL - ~0ULL % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[next_below(i)]);
        }
    }

private:
    std::uint64_t state_;
};

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    return idx;
}

}  // namespace fedflow
