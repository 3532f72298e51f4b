#pragma once

#include <cstdint>
#include <vector>

#include "fhed/errors.hpp"

namespace fhed::ckks {

using u64 = uint64_t;
using u128 = unsigned __int128;

inline u64 add_mod(u64 a, u64 b, u64 p) {
    u64 s = a + b;
    return s >= p ? s - p : s;
}

inline u64 sub_mod(u64 a, u64 b, u64 p) { return a >= b ? a - b : a + p - b; }

inline u64 mul_mod(u64 a, u64 b, u64 p) { return u64(u128(a) * b % p); }

inline u64 pow_mod(u64 a, u64 e, u64 p) {
    u64 r = 1;
    a %= p;
    while (e) {
        if (e & 1) r = mul_mod(r, a, p);
        a = mul_mod(a, a, p);
        e >>= 1;
    }
    return r;
}

/// Precomputed Shoup multiplier: floor(w * 2^64 / p). Enables a mulmod with
/// two 64x64 multiplies and no division when w is fixed.
inline u64 shoup_precompute(u64 w, u64 p) { return u64((u128(w) << 64) / p); }

inline u64 mul_mod_shoup(u64 x, u64 w, u64 w_shoup, u64 p) {
    u64 q = u64((u128(x) * w_shoup) >> 64);
    u64 r = x * w - q * p;  // wrapping arithmetic; r < 2p
    return r >= p ? r - p : r;
}

inline u64 inv_mod(u64 a, u64 p) { return pow_mod(a, p - 2, p); }

/// Deterministic Miller-Rabin for 64-bit inputs.
inline bool is_prime_u64(u64 n) {
    if (n < 2) return false;
    for (u64 q : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        if (n == q) return true;
        if (n % q == 0) return false;
    }
    u64 d = n - 1;
    int s = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++s;
    }
    for (u64 a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        u64 x = pow_mod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool witness = true;
        for (int i = 1; i < s; ++i) {
            x = mul_mod(x, x, n);
            if (x == n - 1) {
                witness = false;
                break;
            }
        }
        if (witness) return false;
    }
    return true;
}

/// NTT-friendly primes p = k*2^17 + 1 descending from 2^62, so every power-of-two
/// transform length up to 2^16 has the required roots of unity.
inline std::vector<u64> ntt_primes(size_t count) {
    static constexpr u64 kStep = u64(1) << 17;
    std::vector<u64> primes;
    u64 candidate = ((u64(1) << 62) / kStep) * kStep + 1;
    while (primes.size() < count) {
        if (is_prime_u64(candidate)) primes.push_back(candidate);
        if (candidate <= kStep) throw ConfigError("ran out of NTT primes");
        candidate -= kStep;
    }
    return primes;
}

/// Element of order exactly 2n in Z_p^* (n a power of two dividing 2^16).
inline u64 primitive_root_2n(u64 p, u64 two_n) {
    if ((p - 1) % two_n != 0) throw ConfigError("prime does not support transform length");
    u64 exp = (p - 1) / two_n;
    for (u64 g = 2;; ++g) {
        u64 r = pow_mod(g, exp, p);
        if (pow_mod(r, two_n / 2, p) == p - 1) return r;  // order exactly 2n
        if (g > 1000) throw ConfigError("no primitive root found");
    }
}

}  // namespace fhed::ckks
