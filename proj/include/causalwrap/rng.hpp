#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "causalwrap/errors.hpp"

namespace cw {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// mt19937_64 wrapper with hand-rolled distribution transforms so that streams
// are identical across standard library implementations. State round-trips
// through a string for checkpoint resume.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        engine_.seed(splitmix64(s));
    }

    // Independent child stream; depends only on the construction seed and tag,
    // not on how many draws this stream has made.
    Rng fork(std::uint64_t tag) const {
        std::uint64_t s = seed_ ^ (0x517cc1b727220a95ULL * (tag + 1));
        return Rng(splitmix64(s));
    }

    std::uint64_t bits() { return engine_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Unbiased via rejection.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw NumericError("uniform_int: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Box-Muller, cosine branch only, so each call consumes exactly two words.
    double normal() {
        const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<std::size_t>(uniform_int(i))]);
        }
    }

    // First k of a seeded permutation of 0..n-1 (partial Fisher-Yates).
    std::vector<int> sample_indices(int n, int k) {
        std::vector<int> idx(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        const int take = k < n ? k : n;
        for (int i = 0; i < take; ++i) {
            const int j = i + static_cast<int>(uniform_int(static_cast<std::uint64_t>(n - i)));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        idx.resize(static_cast<std::size_t>(take));
        return idx;
    }

    std::string state() const {
        std::ostringstream oss;
        oss << seed_ << ' ' << engine_;
        return oss.str();
    }

    void set_state(const std::string& s) {
        std::istringstream iss(s);
        iss >> seed_ >> engine_;
        if (!iss) throw ValidationError("rng: malformed state string");
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace cw
