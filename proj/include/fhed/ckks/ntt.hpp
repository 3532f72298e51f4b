#pragma once

#include <vector>

#include "fhed/ckks/modmath.hpp"

namespace fhed::ckks {

/// Negacyclic number-theoretic transform over Z_p[X]/(X^n + 1), n a power of
/// two. Powers of the 2n-th root psi are folded into the butterflies in
/// bit-reversed order (Harvey layout), with Shoup companions for the twiddles.
struct NttTables {
    u64 p = 0;
    size_t n = 0;
    std::vector<u64> psi, psi_shoup;          // bit-reversed psi powers
    std::vector<u64> psi_inv, psi_inv_shoup;  // bit-reversed inverse powers
    u64 n_inv = 0, n_inv_shoup = 0;

    NttTables() = default;

    NttTables(u64 prime, size_t length) : p(prime), n(length) {
        u64 root = primitive_root_2n(p, 2 * u64(n));
        u64 root_inv = inv_mod(root, p);
        psi.resize(n);
        psi_inv.resize(n);
        size_t log_n = 0;
        while ((size_t(1) << log_n) < n) ++log_n;
        u64 w = 1, wi = 1;
        for (size_t i = 0; i < n; ++i) {
            size_t rev = bit_reverse(i, log_n);
            psi[rev] = w;
            psi_inv[rev] = wi;
            w = mul_mod(w, root, p);
            wi = mul_mod(wi, root_inv, p);
        }
        psi_shoup.resize(n);
        psi_inv_shoup.resize(n);
        for (size_t i = 0; i < n; ++i) {
            psi_shoup[i] = shoup_precompute(psi[i], p);
            psi_inv_shoup[i] = shoup_precompute(psi_inv[i], p);
        }
        n_inv = inv_mod(u64(n), p);
        n_inv_shoup = shoup_precompute(n_inv, p);
    }

    static size_t bit_reverse(size_t x, size_t bits) {
        size_t r = 0;
        for (size_t i = 0; i < bits; ++i) r |= ((x >> i) & 1) << (bits - 1 - i);
        return r;
    }

    /// In-place forward transform; natural input order, bit-reversed output.
    void forward(u64* a) const {
        size_t t = n;
        for (size_t m = 1; m < n; m <<= 1) {
            t >>= 1;
            for (size_t i = 0; i < m; ++i) {
                u64 w = psi[m + i], ws = psi_shoup[m + i];
                u64* lo = a + 2 * i * t;
                u64* hi = lo + t;
                for (size_t j = 0; j < t; ++j) {
                    u64 u = lo[j];
                    u64 v = mul_mod_shoup(hi[j], w, ws, p);
                    lo[j] = add_mod(u, v, p);
                    hi[j] = sub_mod(u, v, p);
                }
            }
        }
    }

    /// In-place inverse transform; bit-reversed input, natural output.
    void inverse(u64* a) const {
        size_t t = 1;
        for (size_t m = n >> 1; m >= 1; m >>= 1) {
            for (size_t i = 0; i < m; ++i) {
                u64 w = psi_inv[m + i], ws = psi_inv_shoup[m + i];
                u64* lo = a + 2 * i * t;
                u64* hi = lo + t;
                for (size_t j = 0; j < t; ++j) {
                    u64 u = lo[j];
                    u64 v = hi[j];
                    lo[j] = add_mod(u, v, p);
                    hi[j] = mul_mod_shoup(sub_mod(u, v, p), w, ws, p);
                }
            }
            t <<= 1;
        }
        for (size_t j = 0; j < n; ++j) a[j] = mul_mod_shoup(a[j], n_inv, n_inv_shoup, p);
    }
};

}  // namespace fhed::ckks
