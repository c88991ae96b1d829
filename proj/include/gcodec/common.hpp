// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace gcodec {

// Domain error types. Plumbing errors (bad shapes, bad arguments) use
// std::invalid_argument directly.
struct InvalidStateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DecodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EncodeRangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct WrongModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic RNG. std::mt19937_64 output is pinned by the standard;
// the distributions below are hand-rolled so streams are identical on
// every platform (libstdc++/libc++ distributions are not).
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    uint64_t uniform_index(uint64_t n) {
        // modulo bias is < 2^-40 for any n that fits in practice
        return eng_() % n;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Mixes a base seed with a stream tag and step so independent random
// streams (data order, quantizer noise, lambda choice) never collide.
inline uint64_t substream_seed(uint64_t seed, uint64_t tag, uint64_t step) {
    uint64_t x = seed * 0x9e3779b97f4a7c15ull + tag * 0xbf58476d1ce4e5b9ull + step;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

// FNV-1a over raw bytes; used for the checkpoint/model checksum.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace gcodec
