#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <vector>

#include "fhed/ckks/ntt.hpp"
#include "fhed/errors.hpp"

namespace fhed::ckks {

using BigInt = boost::multiprecision::cpp_int;

inline BigInt pow2(int bits) { return BigInt(1) << bits; }

/// Element of Z_q[X]/(X^N + 1). Coefficients are kept as nonnegative
/// residues in [0, q); centering happens at the few places that need it
/// (serialization, rescaling, per-prime reduction).
struct RingPoly {
    std::vector<BigInt> coeffs;

    RingPoly() = default;
    explicit RingPoly(size_t n) : coeffs(n) {}

    size_t n() const { return coeffs.size(); }

    static RingPoly zero(size_t n) { return RingPoly(n); }
};

inline RingPoly ring_add(const RingPoly& a, const RingPoly& b, const BigInt& q) {
    RingPoly out(a.n());
    for (size_t i = 0; i < a.n(); ++i) {
        BigInt s = a.coeffs[i] + b.coeffs[i];
        if (s >= q) s -= q;
        out.coeffs[i] = std::move(s);
    }
    return out;
}

inline RingPoly ring_sub(const RingPoly& a, const RingPoly& b, const BigInt& q) {
    RingPoly out(a.n());
    for (size_t i = 0; i < a.n(); ++i) {
        BigInt s = a.coeffs[i] - b.coeffs[i];
        if (s < 0) s += q;
        out.coeffs[i] = std::move(s);
    }
    return out;
}

inline RingPoly ring_neg(const RingPoly& a, const BigInt& q) {
    RingPoly out(a.n());
    for (size_t i = 0; i < a.n(); ++i)
        out.coeffs[i] = a.coeffs[i] == 0 ? BigInt(0) : BigInt(q - a.coeffs[i]);
    return out;
}

/// Reduce residues into a divisor modulus (power-of-two chains nest, so plain
/// masking is a correct modulus switch without scaling).
inline RingPoly ring_mod(const RingPoly& a, const BigInt& q_new) {
    BigInt mask = q_new - 1;
    RingPoly out(a.n());
    for (size_t i = 0; i < a.n(); ++i) out.coeffs[i] = a.coeffs[i] & mask;
    return out;
}

inline BigInt center(const BigInt& x, const BigInt& q) {
    // centered representative in (-q/2, q/2]
    return 2 * x > q ? BigInt(x - q) : x;
}

inline BigInt to_residue(const BigInt& centered, const BigInt& q) {
    if (centered >= 0) {
        BigInt r = centered % q;
        return r;
    }
    BigInt r = (-centered) % q;
    return r == 0 ? BigInt(0) : BigInt(q - r);
}

/// round(x / 2^bits), half away from zero, on a centered value.
inline BigInt round_shift(const BigInt& centered, int bits) {
    BigInt half = pow2(bits - 1);
    if (centered >= 0) return (centered + half) >> bits;
    return -((-centered + half) >> bits);
}

/// Divide every coefficient by 2^bits with rounding; q_out = q_in / 2^bits.
inline RingPoly ring_rescale(const RingPoly& a, const BigInt& q_in, int bits, const BigInt& q_out) {
    RingPoly out(a.n());
    for (size_t i = 0; i < a.n(); ++i)
        out.coeffs[i] = to_residue(round_shift(center(a.coeffs[i], q_in), bits), q_out);
    return out;
}

/// a(X) -> a(X^t) in Z_q[X]/(X^N + 1); t must be odd so the map is a ring
/// automorphism.
inline RingPoly ring_automorphism(const RingPoly& a, uint64_t t, const BigInt& q) {
    const size_t n = a.n();
    const uint64_t two_n = 2 * n;
    RingPoly out(n);
    for (size_t i = 0; i < n; ++i) {
        if (a.coeffs[i] == 0) continue;
        uint64_t k = (uint64_t(i) * t) % two_n;
        if (k < n) {
            out.coeffs[k] = a.coeffs[i];
        } else {
            out.coeffs[k - n] = a.coeffs[i] == 0 ? BigInt(0) : BigInt(q - a.coeffs[i]);
        }
    }
    return out;
}

/// O(N^2) negacyclic product on centered values; the correctness oracle for
/// the CRT-NTT path (tests run it at small N).
inline RingPoly ring_mult_schoolbook(const RingPoly& a, const RingPoly& b, const BigInt& q_a,
                                     const BigInt& q_b, const BigInt& q_out) {
    const size_t n = a.n();
    std::vector<BigInt> acc(n, BigInt(0));
    for (size_t i = 0; i < n; ++i) {
        BigInt ai = center(a.coeffs[i], q_a);
        if (ai == 0) continue;
        for (size_t j = 0; j < n; ++j) {
            BigInt t = ai * center(b.coeffs[j], q_b);
            size_t k = i + j;
            if (k < n)
                acc[k] += t;
            else
                acc[k - n] -= t;
        }
    }
    RingPoly out(n);
    for (size_t i = 0; i < n; ++i) out.coeffs[i] = to_residue(acc[i], q_out);
    return out;
}

/// Multi-prime NTT image of one operand. Cached forms (keys) carry Shoup
/// companions so repeated products skip the 128-bit divisions.
struct NttForm {
    size_t prime_count = 0;
    std::vector<std::vector<u64>> rows;
    std::vector<std::vector<u64>> shoup;  // empty unless cached

    bool has_shoup() const { return !shoup.empty(); }
};

/// Exact negacyclic multiplication of big-coefficient polynomials: reduce the
/// centered operands modulo enough 62-bit NTT primes to cover the product
/// magnitude, transform, multiply pointwise, and CRT-reconstruct the integer
/// result before reducing into the target modulus.
class RingMultiplier {
public:
    RingMultiplier(size_t n, int max_product_bits) : n_(n) {
        log_n_ = 0;
        while ((size_t(1) << log_n_) < n_) ++log_n_;
        if ((size_t(1) << log_n_) != n_) throw ConfigError("ring degree must be a power of two");
        size_t k_max = tier_for_bits(max_product_bits);
        primes_ = ntt_primes(k_max);
        tables_.reserve(k_max);
        for (u64 p : primes_) tables_.emplace_back(p, n_);
        // 2^64 mod p with Shoup companion, for limb-wise reduction
        two64_.resize(k_max);
        two64_shoup_.resize(k_max);
        for (size_t i = 0; i < k_max; ++i) {
            u64 p = primes_[i];
            u64 t = (u64(0) - p) % p;  // 2^64 mod p
            two64_[i] = t;
            two64_shoup_[i] = shoup_precompute(t, p);
        }
        for (size_t k = kTierStep; k <= k_max; k += kTierStep) tiers_.push_back(make_tier(k));
    }

    size_t n() const { return n_; }

    /// Prime count needed for a product whose coefficients stay below
    /// 2^product_bits in absolute value, rounded up to a tier.
    size_t tier_for_bits(int product_bits) const {
        size_t k = size_t((product_bits + kPrimeBits - 1) / kPrimeBits);
        k = ((k + kTierStep - 1) / kTierStep) * kTierStep;
        return k;
    }

    int product_bits(int mag_bits_a, int mag_bits_b) const {
        return int(log_n_) + mag_bits_a + mag_bits_b + 2;
    }

    /// Reduce centered coefficients of `a` (mod q) into each prime row and
    /// transform. mag_bits bounds |centered coefficient|.
    NttForm transform(const RingPoly& a, const BigInt& q, size_t prime_count,
                      bool with_shoup = false) const {
        if (prime_count > primes_.size()) throw ConfigError("prime tier exceeds precomputed set");
        NttForm f;
        f.prime_count = prime_count;
        f.rows.assign(prime_count, std::vector<u64>(n_, 0));
        BigInt half = q >> 1;
        std::vector<u64> limbs;
        for (size_t j = 0; j < n_; ++j) {
            const BigInt& x = a.coeffs[j];
            if (x == 0) continue;
            bool neg = x > half;  // centered value is x - q
            const BigInt mag = neg ? BigInt(q - x) : x;
            limbs.clear();
            export_limbs(mag, limbs);
            for (size_t i = 0; i < prime_count; ++i) {
                u64 p = primes_[i];
                u64 acc = 0;
                for (size_t t = limbs.size(); t-- > 0;) {
                    acc = mul_mod_shoup(acc, two64_[i], two64_shoup_[i], p);
                    u64 l = limbs[t];
                    while (l >= p) l -= p;
                    acc = add_mod(acc, l, p);
                }
                f.rows[i][j] = neg ? (acc == 0 ? 0 : p - acc) : acc;
            }
        }
        for (size_t i = 0; i < prime_count; ++i) tables_[i].forward(f.rows[i].data());
        if (with_shoup) {
            f.shoup.assign(prime_count, std::vector<u64>(n_));
            for (size_t i = 0; i < prime_count; ++i)
                for (size_t j = 0; j < n_; ++j)
                    f.shoup[i][j] = shoup_precompute(f.rows[i][j], primes_[i]);
        }
        return f;
    }

    /// Pointwise product, inverse transform, CRT reconstruction, reduction
    /// into q_out. Both forms must share the same tier.
    RingPoly multiply(const NttForm& a, const NttForm& b, const BigInt& q_out) const {
        if (a.prime_count != b.prime_count) throw ConfigError("NTT forms from different tiers");
        const size_t K = a.prime_count;
        const CrtTier& tier = tier_data(K);
        std::vector<std::vector<u64>> prod(K, std::vector<u64>(n_));
        for (size_t i = 0; i < K; ++i) {
            u64 p = primes_[i];
            const u64* ra = a.rows[i].data();
            const u64* rb = b.rows[i].data();
            u64* out = prod[i].data();
            if (b.has_shoup()) {
                const u64* rs = b.shoup[i].data();
                for (size_t j = 0; j < n_; ++j) out[j] = mul_mod_shoup(ra[j], rb[j], rs[j], p);
            } else {
                for (size_t j = 0; j < n_; ++j) out[j] = mul_mod(ra[j], rb[j], p);
            }
            tables_[i].inverse(out);
        }
        RingPoly result(n_);
        BigInt mask = q_out - 1;
        BigInt acc;
        for (size_t j = 0; j < n_; ++j) {
            acc = 0;
            for (size_t i = 0; i < K; ++i) {
                u64 t = mul_mod(prod[i][j], tier.inv[i], primes_[i]);
                acc += tier.m_over_p[i] * t;
            }
            acc %= tier.m;
            // center, then fold into the power-of-two target modulus
            if (2 * acc > tier.m) {
                BigInt neg = tier.m - acc;  // = -centered
                BigInt r = neg & mask;
                result.coeffs[j] = r == 0 ? BigInt(0) : BigInt(q_out - r);
            } else {
                result.coeffs[j] = acc & mask;
            }
        }
        return result;
    }

    /// One-shot product of polynomials mod q_a and q_b with centered
    /// magnitudes below 2^mag_a and 2^mag_b.
    RingPoly multiply(const RingPoly& a, const BigInt& q_a, int mag_a, const RingPoly& b,
                      const BigInt& q_b, int mag_b, const BigInt& q_out) const {
        size_t K = tier_for_bits(product_bits(mag_a, mag_b));
        NttForm fa = transform(a, q_a, K);
        NttForm fb = transform(b, q_b, K);
        return multiply(fa, fb, q_out);
    }

private:
    static constexpr int kPrimeBits = 61;  // primes sit just below 2^62
    static constexpr size_t kTierStep = 4;

    struct CrtTier {
        BigInt m;
        std::vector<BigInt> m_over_p;
        std::vector<u64> inv;  // (m/p_i)^-1 mod p_i
    };

    CrtTier make_tier(size_t k) const {
        CrtTier t;
        t.m = 1;
        for (size_t i = 0; i < k; ++i) t.m *= primes_[i];
        t.m_over_p.resize(k);
        t.inv.resize(k);
        for (size_t i = 0; i < k; ++i) {
            t.m_over_p[i] = t.m / primes_[i];
            u64 r = u64(t.m_over_p[i] % primes_[i]);
            t.inv[i] = inv_mod(r, primes_[i]);
        }
        return t;
    }

    const CrtTier& tier_data(size_t k) const {
        if (k % kTierStep != 0 || k == 0 || k / kTierStep > tiers_.size())
            throw ConfigError("no CRT tier for prime count " + std::to_string(k));
        return tiers_[k / kTierStep - 1];
    }

    static void export_limbs(const BigInt& x, std::vector<u64>& out) {
        boost::multiprecision::export_bits(x, std::back_inserter(out), 64, false);
    }

    size_t n_;
    size_t log_n_;
    std::vector<u64> primes_;
    std::vector<NttTables> tables_;
    std::vector<u64> two64_, two64_shoup_;
    std::vector<CrtTier> tiers_;
};

}  // namespace fhed::ckks
