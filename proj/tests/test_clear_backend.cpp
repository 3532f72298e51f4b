#include <catch2/catch_amalgamated.hpp>

#include "fhed/clear_backend.hpp"
#include "testutil.hpp"

using namespace fhed;

namespace {
HEParams small_params(double noise = 0.0) {
    HEParams p;
    p.log_slots = 2;
    p.log_scale = 40;
    p.log_modulus = 200;
    p.noise_stddev = noise;
    return p;
}
}  // namespace

TEST_CASE("parameter validation") {
    HEParams p = small_params();
    REQUIRE_NOTHROW(p.validate());
    CHECK(p.depth_budget() == 4);

    p.log_slots = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = small_params();
    p.log_scale = 200;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = small_params();
    p.log_modulus = 60;  // depth budget would be 0
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("encrypt/decrypt round trip is exact at zero noise") {
    ClearBackend be(small_params());
    auto ks = be.keygen(1);

    SlotVector zeros(4, {0.0, 0.0});
    auto c = be.encrypt(zeros, ks.public_key);
    CHECK(c.level == be.params().depth_budget());
    CHECK(c.scale_bits == be.params().log_scale);
    for (auto z : be.decrypt(c, ks.secret)) CHECK(z == std::complex<double>(0.0, 0.0));

    SlotVector v = to_slots({1, 2, 3, 4});
    auto d = be.decrypt(be.encrypt(v, ks.public_key), ks.secret);
    CHECK(d == v);

    SlotVector bad(3);
    CHECK_THROWS_AS(be.encrypt(bad, ks.public_key), SizeError);
    CHECK_THROWS_AS(be.encrypt(v, ks.secret), KeyError);
}

TEST_CASE("add/sub/negate semantics") {
    ClearBackend be(small_params());
    auto ks = be.keygen(2);
    auto a = be.encrypt(to_slots({1, 2, 0, 0}), ks.public_key);
    auto b = be.encrypt(to_slots({3, 4, 0, 0}), ks.public_key);

    auto sum = be.decrypt(be.add(a, b), ks.secret);
    CHECK(sum[0].real() == 4.0);
    CHECK(sum[1].real() == 6.0);

    auto zero = be.encrypt(SlotVector(4, {0.0, 0.0}), ks.public_key);
    CHECK(be.decrypt(be.add(a, zero), ks.secret) == be.decrypt(a, ks.secret));

    auto diff = be.decrypt(be.sub(a, b), ks.secret);
    CHECK(diff[0].real() == -2.0);
    auto neg = be.decrypt(be.negate(a), ks.secret);
    CHECK(neg[1].real() == -2.0);
}

TEST_CASE("mult consumes exactly one level and multiplies slot-wise") {
    ClearBackend be(small_params());
    auto ks = be.keygen(3);
    auto a = be.encrypt(to_slots({2, 3, 0, 0}), ks.public_key);
    auto b = be.encrypt(to_slots({5, 7, 0, 0}), ks.public_key);

    auto prod = be.mult(a, b, ks.eval);
    CHECK(prod.level == a.level - 1);
    auto d = be.decrypt(prod, ks.secret);
    CHECK(d[0].real() == 10.0);
    CHECK(d[1].real() == 21.0);

    auto ones = SlotVector(4, {1.0, 0.0});
    auto viaplain = be.mult_plain(a, ones);
    CHECK(viaplain.level == a.level - 1);
    CHECK(be.decrypt(viaplain, ks.secret) == be.decrypt(a, ks.secret));
}

TEST_CASE("depth budget is enforced") {
    ClearBackend be(small_params());
    auto ks = be.keygen(4);
    auto c = be.encrypt(to_slots({1, 1, 1, 1}), ks.public_key);
    for (int i = 0; i < be.params().depth_budget(); ++i) c = be.mult(c, c, ks.eval);
    CHECK(c.level == 0);
    CHECK_THROWS_AS(be.mult(c, c, ks.eval), DepthExceeded);
    CHECK_THROWS_AS(be.mult_plain(c, SlotVector(4, {1.0, 0.0})), DepthExceeded);
}

TEST_CASE("rotation is a left cyclic shift") {
    ClearBackend be(small_params());
    auto ks = be.keygen(5);
    auto c = be.encrypt(to_slots({1, 2, 3, 4}), ks.public_key);

    auto r1 = real_parts(be.decrypt(be.rotate(c, 1, ks.eval), ks.secret));
    CHECK(r1 == std::vector<double>{2, 3, 4, 1});

    CHECK(be.decrypt(be.rotate(c, 0, ks.eval), ks.secret) == be.decrypt(c, ks.secret));

    auto twice = be.rotate(be.rotate(c, 2, ks.eval), 2, ks.eval);
    CHECK(be.decrypt(twice, ks.secret) == be.decrypt(c, ks.secret));

    // composition law: rotate(j) then rotate(k) == rotate(j + k mod n)
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 16; ++trial) {
        auto v = testutil::random_slots(rng, 4);
        auto ct = be.encrypt(v, ks.public_key);
        int j = int(rng() % 4), k = int(rng() % 4);
        auto lhs = be.rotate(be.rotate(ct, j, ks.eval), k, ks.eval);
        auto rhs = be.rotate(ct, (j + k) % 4, ks.eval);
        CHECK(be.decrypt(lhs, ks.secret) == be.decrypt(rhs, ks.secret));
    }

    EvalKeys crippled = ks.eval;
    crippled.rotation.erase(2);
    CHECK_THROWS_AS(be.rotate(c, 2, crippled), KeyError);
    CHECK_THROWS_AS(be.rotate(c, 3, crippled), KeyError);  // 3 = 2 + 1
    CHECK_NOTHROW(be.rotate(c, 1, crippled));
}

TEST_CASE("scale and backend mismatches are rejected") {
    ClearBackend be(small_params());
    auto ks = be.keygen(6);
    auto a = be.encrypt(to_slots({1, 2, 3, 4}), ks.public_key);
    auto b = a;
    b.scale_bits += 1;
    CHECK_THROWS_AS(be.add(a, b), ScaleError);
    b = a;
    b.backend_tag = BackendTag::ckks;
    CHECK_THROWS_AS(be.add(a, b), BackendError);
}

TEST_CASE("homomorphism holds for random vectors at zero noise") {
    HEParams p = small_params();
    p.log_slots = 4;
    ClearBackend be(p);
    auto ks = be.keygen(7);
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
        auto v = testutil::random_slots(rng, 16);
        auto w = testutil::random_slots(rng, 16);
        auto ev = be.encrypt(v, ks.public_key);
        auto ew = be.encrypt(w, ks.public_key);
        auto sum = be.decrypt(be.add(ev, ew), ks.secret);
        auto prod = be.decrypt(be.mult(ev, ew, ks.eval), ks.secret);
        for (size_t i = 0; i < 16; ++i) {
            CHECK(sum[i] == v[i] + w[i]);
            CHECK(prod[i] == v[i] * w[i]);
        }
    }
}

TEST_CASE("noise injection is deterministic and scales with stddev") {
    HEParams p = small_params(1e-6);
    ClearBackend be1(p), be2(p);
    auto ks = be1.keygen(8);
    SlotVector v = to_slots({1, 2, 3, 4});
    auto d1 = be1.decrypt(be1.encrypt(v, ks.public_key), ks.secret);
    auto d2 = be2.decrypt(be2.encrypt(v, ks.public_key), ks.secret);
    CHECK(d1 == d2);  // same seed, same stream
    double dev = max_abs_diff(d1, v);
    CHECK(dev > 0.0);
    CHECK(dev < 1e-4);
}

TEST_CASE("clear ciphertext serialization round trip") {
    ClearBackend be(small_params());
    auto ks = be.keygen(9);
    std::mt19937_64 rng(42);
    auto v = testutil::random_slots(rng, 4);
    auto c = be.encrypt(v, ks.public_key);
    auto blob = be.serialize_cipher(c);
    auto c2 = be.deserialize_cipher(blob.data(), blob.size());
    CHECK(c2.level == c.level);
    CHECK(c2.scale_bits == c.scale_bits);
    CHECK(be.decrypt(c2, ks.secret) == be.decrypt(c, ks.secret));

    auto bad = blob;
    bad[0] ^= 0xFF;
    CHECK_THROWS_AS(be.deserialize_cipher(bad.data(), bad.size()), FormatError);
    CHECK_THROWS_AS(be.deserialize_cipher(blob.data(), blob.size() - 1), FormatError);
}

TEST_CASE("key files carry the type byte and params") {
    ClearBackend be(small_params());
    auto ks = be.keygen(10);
    auto blob = be.serialize_key(ks.secret, 0);
    CHECK(serial::key_type_of_blob(blob.data(), blob.size()) == KeyType::secret);
    auto [k, step] = be.deserialize_key(blob.data(), blob.size());
    CHECK(k.type == KeyType::secret);
    CHECK(step == 0);

    auto rot = be.serialize_key(ks.eval.rotation.at(2), 2);
    auto [k2, step2] = be.deserialize_key(rot.data(), rot.size());
    CHECK(k2.type == KeyType::rotation);
    CHECK(step2 == 2);
}

TEST_CASE("no operation ever raises a level") {
    HEParams p = small_params();
    p.log_slots = 3;
    ClearBackend be(p);
    auto ks = be.keygen(11);
    std::mt19937_64 rng(11);
    auto a = be.encrypt(testutil::random_slots(rng, 8), ks.public_key);
    auto b = be.encrypt(testutil::random_slots(rng, 8), ks.public_key);
    for (int step = 0; step < 40; ++step) {
        int before = a.level;
        switch (rng() % 6) {
            case 0: a = be.add(a, b); break;
            case 1: a = be.sub(a, b); break;
            case 2: a = be.negate(a); break;
            case 3: a = be.rotate(a, int64_t(rng() % 8), ks.eval); break;
            case 4:
                if (a.level >= 1 && b.level >= 1) {
                    a = be.mult(a, b, ks.eval);
                    CHECK(a.level == before - 1);
                }
                break;
            case 5:
                if (a.level >= 1) {
                    a = be.mult_plain(a, SlotVector(8, {0.5, 0.0}));
                    CHECK(a.level == before - 1);
                }
                break;
        }
        CHECK(a.level <= before);
    }

    std::vector<uint32_t> steps;
    for (const auto& [s, _] : be.keygen(1).eval.rotation) steps.push_back(s);
    CHECK(steps == std::vector<uint32_t>{1, 2, 4});
}
