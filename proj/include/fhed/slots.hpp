#pragma once

#include <complex>
#include <cstdint>
#include <cstring>
#include <vector>

#include "fhed/errors.hpp"

namespace fhed {

/// Plaintext image of a ciphertext: one complex value per slot.
/// Real payloads occupy the real part; the DFT baseline needs the full plane.
using SlotVector = std::vector<std::complex<double>>;

inline SlotVector to_slots(const std::vector<double>& v) {
    SlotVector out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = {v[i], 0.0};
    return out;
}

inline std::vector<double> real_parts(const SlotVector& v) {
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i].real();
    return out;
}

inline double max_abs_diff(const SlotVector& a, const SlotVector& b) {
    if (a.size() != b.size()) throw SizeError("slot vectors differ in length");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

namespace rng {

/// splitmix64: tiny deterministic generator used where cross-platform
/// byte-identical streams matter (std::normal_distribution is not portable).
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t seed) : state(seed) {}
    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    /// Uniform in [0, 1).
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }
    /// Uniform in [-1, 1).
    double uniform_sym() { return 2.0 * uniform() - 1.0; }
    /// Box-Muller; one value per call (the pair's second half is dropped so
    /// the stream stays position-independent).
    double gaussian(double stddev) {
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return stddev * std::sqrt(-2.0 * std::log(u1)) *
               std::cos(6.283185307179586476925286766559 * u2);
    }
};

inline uint64_t mix(uint64_t a, uint64_t b) {
    SplitMix64 g(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
    return g.next();
}

/// FNV-1a over raw bytes; used to derive per-op noise seeds from payloads.
inline uint64_t hash_bytes(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t hash_slots(const SlotVector& v, uint64_t seed) {
    return hash_bytes(v.data(), v.size() * sizeof(SlotVector::value_type), seed);
}

}  // namespace rng
}  // namespace fhed
