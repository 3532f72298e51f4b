#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "fhed/ckks/embedding.hpp"
#include "fhed/ckks/ring.hpp"

using namespace fhed;
using namespace fhed::ckks;

namespace {

RingPoly random_poly(std::mt19937_64& rng, size_t n, const BigInt& q) {
    RingPoly p(n);
    int bits = int(boost::multiprecision::msb(q)) + 1;
    int chunks = (bits + 63) / 64;
    for (size_t i = 0; i < n; ++i) {
        BigInt acc = 0;
        for (int c = 0; c < chunks; ++c) {
            acc <<= 64;
            acc += BigInt(rng());
        }
        p.coeffs[i] = acc % q;
    }
    return p;
}

}  // namespace

TEST_CASE("NTT forward/inverse is the identity") {
    std::mt19937_64 rng(1);
    for (size_t n : {8u, 64u, 256u}) {
        auto primes = ntt_primes(3);
        for (u64 p : primes) {
            NttTables t(p, n);
            std::vector<u64> a(n), orig;
            for (auto& x : a) x = rng() % p;
            orig = a;
            t.forward(a.data());
            t.inverse(a.data());
            CHECK(a == orig);
        }
    }
}

TEST_CASE("NTT negacyclic wraparound sign") {
    // (X^(n-1)) * X = X^n = -1 in the negacyclic ring
    const size_t n = 16;
    u64 p = ntt_primes(1)[0];
    NttTables t(p, n);
    std::vector<u64> a(n, 0), b(n, 0);
    a[n - 1] = 1;
    b[1] = 1;
    t.forward(a.data());
    t.forward(b.data());
    for (size_t i = 0; i < n; ++i) a[i] = mul_mod(a[i], b[i], p);
    t.inverse(a.data());
    CHECK(a[0] == p - 1);
    for (size_t i = 1; i < n; ++i) CHECK(a[i] == 0);
}

TEST_CASE("CRT-NTT multiplication agrees with the schoolbook oracle") {
    std::mt19937_64 rng(7);
    for (size_t n : {8u, 16u, 32u}) {
        for (int qbits : {30, 120, 400}) {
            BigInt q = pow2(qbits);
            RingMultiplier mult(n, int(64) + 2 * qbits + 2);
            for (int trial = 0; trial < 3; ++trial) {
                RingPoly a = random_poly(rng, n, q);
                RingPoly b = random_poly(rng, n, q);
                RingPoly fast = mult.multiply(a, q, qbits, b, q, qbits, q);
                RingPoly slow = ring_mult_schoolbook(a, b, q, q, q);
                CHECK(fast.coeffs == slow.coeffs);
            }
        }
    }
}

TEST_CASE("cached (Shoup) transforms give identical products") {
    std::mt19937_64 rng(9);
    const size_t n = 32;
    BigInt q = pow2(100);
    RingMultiplier mult(n, 64 + 200 + 2);
    RingPoly a = random_poly(rng, n, q);
    RingPoly b = random_poly(rng, n, q);
    size_t tier = mult.tier_for_bits(mult.product_bits(100, 100));
    auto fa = mult.transform(a, q, tier);
    auto fb_plain = mult.transform(b, q, tier);
    auto fb_cached = mult.transform(b, q, tier, /*with_shoup=*/true);
    CHECK(mult.multiply(fa, fb_plain, q).coeffs == mult.multiply(fa, fb_cached, q).coeffs);
}

TEST_CASE("automorphism respects ring structure") {
    std::mt19937_64 rng(3);
    const size_t n = 16;
    BigInt q = pow2(60);
    RingMultiplier mult(n, 8 + 120 + 2);
    RingPoly a = random_poly(rng, n, q);
    RingPoly b = random_poly(rng, n, q);

    // automorphism is multiplicative: phi(a*b) = phi(a)*phi(b)
    uint64_t t = 5;  // odd, as required
    RingPoly ab = mult.multiply(a, q, 60, b, q, 60, q);
    RingPoly lhs = ring_automorphism(ab, t, q);
    RingPoly rhs = mult.multiply(ring_automorphism(a, t, q), q, 60,
                                 ring_automorphism(b, t, q), q, 60, q);
    CHECK(lhs.coeffs == rhs.coeffs);
}

TEST_CASE("rescale divides and rounds") {
    BigInt q_in = pow2(80), q_out = pow2(40);
    RingPoly p(4);
    p.coeffs[0] = BigInt(7) << 40;             // exactly 7 * 2^40
    p.coeffs[1] = (BigInt(7) << 40) + (BigInt(1) << 39);  // rounds away from zero
    p.coeffs[2] = to_residue(BigInt(-3) << 40, q_in);
    p.coeffs[3] = 5;  // rounds to zero
    RingPoly out = ring_rescale(p, q_in, 40, q_out);
    CHECK(out.coeffs[0] == 7);
    CHECK(out.coeffs[1] == 8);
    CHECK(out.coeffs[2] == q_out - 3);
    CHECK(out.coeffs[3] == 0);
}

TEST_CASE("embedding decode matches the direct evaluation oracle") {
    std::mt19937_64 rng(12);
    const size_t n = 8, big_n = 16;
    Embedding emb(n, big_n);
    BigInt q = pow2(120);
    SlotVector v(n);
    for (auto& z : v)
        z = {double(int(rng() % 200) - 100) / 10.0, double(int(rng() % 200) - 100) / 10.0};
    RingPoly m = emb.encode(v, 40, q);
    auto fast = emb.decode(m, 40, q);
    auto direct = emb.decode_direct(m, 40, q);
    CHECK(max_abs_diff(fast, direct) < 1e-9);
    CHECK(max_abs_diff(fast, v) < 1e-8);
}

TEST_CASE("embedding encode/decode of the basis cases") {
    const size_t n = 4, big_n = 8;
    Embedding emb(n, big_n);
    BigInt q = pow2(120);

    SlotVector zeros(n, {0.0, 0.0});
    RingPoly m = emb.encode(zeros, 40, q);
    for (const auto& c : m.coeffs) CHECK(c == 0);
    CHECK(max_abs_diff(emb.decode(m, 40, q), zeros) == 0.0);

    SlotVector iv{{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    auto round = emb.decode(emb.encode(iv, 40, q), 40, q);
    CHECK(max_abs_diff(round, iv) < 1e-8);

    // linearity: encode(v) + encode(w) decodes to v + w within 2x a single
    // encoding's error
    std::mt19937_64 rng(5);
    SlotVector a(n), b(n), expect(n);
    for (size_t i = 0; i < n; ++i) {
        a[i] = {double(int(rng() % 19) - 9) / 4.0, double(int(rng() % 19) - 9) / 4.0};
        b[i] = {double(int(rng() % 19) - 9) / 4.0, double(int(rng() % 19) - 9) / 4.0};
        expect[i] = a[i] + b[i];
    }
    RingPoly sum = ring_add(emb.encode(a, 40, q), emb.encode(b, 40, q), q);
    CHECK(max_abs_diff(emb.decode(sum, 40, q), expect) < 2e-8);
}

TEST_CASE("encode overflow raises") {
    Embedding emb(4, 8);
    BigInt q = pow2(44);
    SlotVector big(4, {1000.0, 0.0});  // 1000 * 2^40 > q/2
    CHECK_THROWS_AS(emb.encode(big, 40, q), EncodingOverflow);
}
