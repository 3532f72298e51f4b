#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "fhed/ckks/ring.hpp"
#include "fhed/slots.hpp"

namespace fhed::ckks {

/// Canonical-embedding codec for the negacyclic ring of degree N = 2n.
/// Slot j corresponds to evaluation at w^(5^j mod 2N twice)... concretely at
/// the primitive M-th root w = exp(2*pi*i/M), M = 2N, index 5^j mod M.
/// The Galois map X -> X^(5^r) then shifts slots left by r, which is the
/// rotation convention the backend contract fixes.
class Embedding {
public:
    Embedding(size_t n_slots, size_t ring_degree)
        : n_(n_slots), big_n_(ring_degree), m_(2 * ring_degree) {
        rot_group_.resize(n_);
        uint64_t five = 1;
        for (size_t j = 0; j < n_; ++j) {
            rot_group_[j] = five;
            five = (five * 5) % m_;
        }
        roots_.resize(m_);
        for (size_t k = 0; k < m_; ++k) {
            double angle = 2.0 * kPi * double(k) / double(m_);
            roots_[k] = {std::cos(angle), std::sin(angle)};
        }
        log_m_ = 0;
        while ((size_t(1) << log_m_) < m_) ++log_m_;
    }

    uint64_t galois_exponent(uint32_t rotation_step) const {
        uint64_t g = 1;
        for (uint32_t i = 0; i < rotation_step; ++i) g = (g * 5) % m_;
        return g;
    }

    /// Round(scale * inverse-embedding of v) as integer coefficients; throws
    /// when a coefficient would not fit the target modulus.
    RingPoly encode(const SlotVector& v, int scale_bits, const BigInt& q) const {
        if (v.size() != n_) throw SizeError("encode: expected " + std::to_string(n_) + " slots");
        std::vector<std::complex<double>> y(m_, {0.0, 0.0});
        double scale = std::ldexp(1.0, scale_bits);
        for (size_t j = 0; j < n_; ++j) {
            std::complex<double> z = v[j] * scale;
            y[rot_group_[j]] = z;
            y[m_ - rot_group_[j]] = std::conj(z);
        }
        fft(y, /*invert_exponent=*/false);
        RingPoly out(big_n_);
        BigInt half = q >> 1;
        double inv_n = 1.0 / double(big_n_);
        for (size_t t = 0; t < big_n_; ++t) {
            BigInt c = round_to_bigint(y[t].real() * inv_n);
            if (c > half || -c > half)
                throw EncodingOverflow("encoded coefficient exceeds modulus at scale 2^" +
                                       std::to_string(scale_bits));
            out.coeffs[t] = to_residue(c, q);
        }
        return out;
    }

    SlotVector decode(const RingPoly& p, int scale_bits, const BigInt& q) const {
        if (p.n() != big_n_) throw SizeError("decode: ring degree mismatch");
        std::vector<std::complex<double>> y(m_, {0.0, 0.0});
        double inv_scale = std::ldexp(1.0, -scale_bits);
        for (size_t t = 0; t < big_n_; ++t)
            y[t] = {big_to_double(center(p.coeffs[t], q)) * inv_scale, 0.0};
        fft(y, /*invert_exponent=*/true);
        SlotVector out(n_);
        for (size_t j = 0; j < n_; ++j) out[j] = y[rot_group_[j]];
        return out;
    }

    /// Direct per-slot evaluation of the embedding; quadratic, test oracle only.
    SlotVector decode_direct(const RingPoly& p, int scale_bits, const BigInt& q) const {
        double inv_scale = std::ldexp(1.0, -scale_bits);
        SlotVector out(n_);
        for (size_t j = 0; j < n_; ++j) {
            std::complex<double> acc{0.0, 0.0};
            for (size_t t = 0; t < big_n_; ++t) {
                double c = big_to_double(center(p.coeffs[t], q));
                acc += c * roots_[(rot_group_[j] * t) % m_];
            }
            out[j] = acc * inv_scale;
        }
        return out;
    }

private:
    static constexpr double kPi = 3.14159265358979323846;

    static BigInt round_to_bigint(double x) {
        if (std::abs(x) < 9.0e15) return BigInt(llround(x));
        // doubles at or above 2^53 are already integral; convert exactly
        int e;
        double m = std::frexp(x, &e);
        long long mantissa = llround(std::ldexp(m, 53));
        BigInt r(mantissa);
        if (e > 53)
            r <<= (e - 53);
        else
            r >>= (53 - e);
        return r;
    }

    static double big_to_double(const BigInt& x) { return x.convert_to<double>(); }

    /// Iterative radix-2 FFT of length m_. invert_exponent=false applies
    /// kernel exp(-2*pi*i*kt/M) (used by encode), true applies the positive
    /// kernel (evaluation / decode). No normalization.
    void fft(std::vector<std::complex<double>>& a, bool invert_exponent) const {
        const size_t m = a.size();
        for (size_t i = 1, j = 0; i < m; ++i) {
            size_t bit = m >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            if (i < j) std::swap(a[i], a[j]);
        }
        for (size_t len = 2; len <= m; len <<= 1) {
            size_t step = m_ / len;
            for (size_t i = 0; i < m; i += len) {
                for (size_t k = 0; k < len / 2; ++k) {
                    size_t idx = step * k;
                    std::complex<double> w =
                        invert_exponent ? roots_[idx] : std::conj(roots_[idx]);
                    auto u = a[i + k];
                    auto v = a[i + k + len / 2] * w;
                    a[i + k] = u + v;
                    a[i + k + len / 2] = u - v;
                }
            }
        }
    }

    size_t n_, big_n_, m_, log_m_;
    std::vector<uint64_t> rot_group_;
    std::vector<std::complex<double>> roots_;
};

}  // namespace fhed::ckks
