#pragma once

#include <random>

#include "fhed/backend.hpp"
#include "fhed/ckks/embedding.hpp"
#include "fhed/ckks/ring.hpp"
#include "fhed/serial_util.hpp"

namespace fhed::ckks {

/// Ternary polynomial with coefficients in {-1, 0, 1} (secrets and
/// encryption randomness); kept small so products can use the tight CRT tier.
struct SmallPoly {
    std::vector<int8_t> coeffs;

    explicit SmallPoly(size_t n = 0) : coeffs(n, 0) {}
    size_t n() const { return coeffs.size(); }

    RingPoly to_ring(const BigInt& q) const {
        RingPoly out(coeffs.size());
        for (size_t i = 0; i < coeffs.size(); ++i) {
            if (coeffs[i] > 0)
                out.coeffs[i] = coeffs[i];
            else if (coeffs[i] < 0)
                out.coeffs[i] = q - (-coeffs[i]);
        }
        return out;
    }

    SmallPoly automorphism(uint64_t t) const {
        const size_t n = coeffs.size();
        const uint64_t two_n = 2 * n;
        SmallPoly out(n);
        for (size_t i = 0; i < n; ++i) {
            if (coeffs[i] == 0) continue;
            uint64_t k = (uint64_t(i) * t) % two_n;
            if (k < n)
                out.coeffs[k] = coeffs[i];
            else
                out.coeffs[k - n] = int8_t(-coeffs[i]);
        }
        return out;
    }
};

namespace detail {

struct CkksCipherPayload : CipherPayload {
    RingPoly c0, c1;
};

struct CkksSecretPayload : KeyPayload {
    SmallPoly s;
};

/// Public key (b, a) = (-a*s + e, a) mod q_L, plus the seed that derives
/// per-message encryption randomness (research artifact: encryption is
/// deterministic in (key, message) so benchmark outputs are reproducible).
struct CkksPublicPayload : KeyPayload {
    RingPoly b, a;
    uint64_t enc_seed = 0;
    NttForm b_ntt, a_ntt;  // cached at the encrypt tier
};

/// Switching key (b, a) = (-a*s + e + P*s_from, a) mod P*q_L.
struct CkksSwitchPayload : KeyPayload {
    RingPoly b, a;
    NttForm b_ntt, a_ntt;  // cached at the key-switch tier
};

}  // namespace detail

/// Textbook CKKS over a single power-of-two modulus chain: q_level drops by
/// exactly log_scale bits per rescale, so scales never drift. Key switching
/// raises to P*q and divides back down; the special modulus P carries 60
/// bits of headroom over the top modulus so rotations and relinearizations
/// contribute only rounding-level noise at every level.
///
/// NOT secure at desk-scale ring degrees; see the README disclaimer.
class CkksBackend : public Backend {
public:
    explicit CkksBackend(const HEParams& params)
        : Backend(params),
          big_n_(params.ring_degree()),
          embedding_(params.slot_count(), params.ring_degree()),
          multiplier_(params.ring_degree(),
                      key_switch_product_bits(params.ring_degree(), params.log_modulus)) {}

    BackendTag tag() const override { return BackendTag::ckks; }

    // -- keys ---------------------------------------------------------------

    KeySet keygen(uint64_t seed) const override {
        std::mt19937_64 rng(seed);
        const BigInt q_top = top_modulus();
        const BigInt pq = key_switch_modulus();

        auto secret = std::make_shared<detail::CkksSecretPayload>();
        secret->s = sample_ternary_hw(rng);

        auto pk = std::make_shared<detail::CkksPublicPayload>();
        pk->a = sample_uniform(rng, params_.log_modulus);
        RingPoly e = sample_gaussian(rng, q_top);
        pk->b = ring_sub(e, mult_by_small(pk->a, secret->s, q_top), q_top);
        pk->enc_seed = rng();
        cache_public(*pk);

        KeySet ks;
        ks.params = params_;
        ks.tag = tag();
        ks.seed = seed;
        ks.secret = KeyHandle{KeyType::secret, secret};
        ks.public_key = KeyHandle{KeyType::public_key, pk};

        // relinearization: source secret s^2
        SmallPolySquare s2 = square_small(secret->s);
        ks.eval.relin = KeyHandle{KeyType::relin, make_switch_key(rng, secret->s, s2, pq)};

        // rotation keys for every power-of-two step below n
        for (uint32_t step = 1; step < slot_count(); step <<= 1) {
            SmallPoly rotated = secret->s.automorphism(embedding_.galois_exponent(step));
            SmallPolySquare src;
            src.coeffs.assign(rotated.coeffs.begin(), rotated.coeffs.end());
            ks.eval.rotation[step] =
                KeyHandle{KeyType::rotation, make_switch_key(rng, secret->s, src, pq)};
        }
        return ks;
    }

    // -- encrypt / decrypt ----------------------------------------------------

    CipherHandle encrypt(const SlotVector& v, const KeyHandle& public_key) const override {
        if (public_key.type != KeyType::public_key) throw KeyError("encrypt needs a public key");
        const auto* pk = payload_as<detail::CkksPublicPayload>(public_key.payload.get());
        if (v.size() != slot_count())
            throw SizeError("vector length " + std::to_string(v.size()) + " != slot count " +
                            std::to_string(slot_count()));
        const BigInt q = top_modulus();
        RingPoly m = embedding_.encode(v, params_.log_scale, q);

        std::mt19937_64 rng(rng::hash_slots(v, pk->enc_seed));
        SmallPoly u = sample_zo(rng);
        size_t tier = encrypt_tier();
        NttForm u_ntt = multiplier_.transform(u.to_ring(q), q, tier);

        auto out = std::make_shared<detail::CkksCipherPayload>();
        out->c0 = multiplier_.multiply(u_ntt, pk->b_ntt, q);
        out->c0 = ring_add(out->c0, m, q);
        out->c0 = ring_add(out->c0, sample_gaussian(rng, q), q);
        out->c1 = multiplier_.multiply(u_ntt, pk->a_ntt, q);
        out->c1 = ring_add(out->c1, sample_gaussian(rng, q), q);
        return wrap(std::move(out), params_.depth_budget(), params_.log_scale);
    }

    SlotVector decrypt(const CipherHandle& c, const KeyHandle& secret) const override {
        if (secret.type != KeyType::secret) throw KeyError("decrypt needs the secret key");
        const auto* sk = payload_as<detail::CkksSecretPayload>(secret.payload.get());
        check_own(c);
        const auto* p = cipher_of(c);
        const BigInt q = modulus_at(c.level);
        RingPoly m = ring_add(p->c0, mult_by_small(p->c1, sk->s, q), q);
        return embedding_.decode(m, c.scale_bits, q);
    }

    // -- arithmetic -----------------------------------------------------------

    CipherHandle add(const CipherHandle& a, const CipherHandle& b) const override {
        return linear_op(a, b, /*subtract=*/false);
    }

    CipherHandle sub(const CipherHandle& a, const CipherHandle& b) const override {
        return linear_op(a, b, /*subtract=*/true);
    }

    CipherHandle negate(const CipherHandle& a) const override {
        check_own(a);
        const auto* pa = cipher_of(a);
        const BigInt q = modulus_at(a.level);
        auto out = std::make_shared<detail::CkksCipherPayload>();
        out->c0 = ring_neg(pa->c0, q);
        out->c1 = ring_neg(pa->c1, q);
        return wrap(std::move(out), a.level, a.scale_bits);
    }

    CipherHandle add_plain(const CipherHandle& a, const SlotVector& p) const override {
        check_own(a);
        check_plain_size(p);
        const auto* pa = cipher_of(a);
        const BigInt q = modulus_at(a.level);
        RingPoly m = embedding_.encode(p, a.scale_bits, q);
        auto out = std::make_shared<detail::CkksCipherPayload>();
        out->c0 = ring_add(pa->c0, m, q);
        out->c1 = pa->c1;
        return wrap(std::move(out), a.level, a.scale_bits);
    }

    CipherHandle mult(const CipherHandle& a, const CipherHandle& b,
                      const EvalKeys& keys) const override {
        check_operands(a, b);
        if (keys.relin.type != KeyType::relin) throw KeyError("mult needs a relinearization key");
        const auto* rk = payload_as<detail::CkksSwitchPayload>(keys.relin.payload.get());
        check_mult_depth(a);
        check_mult_depth(b);

        const int level = std::min(a.level, b.level);
        const int qbits = params_.modulus_bits_at(level);
        const BigInt q = pow2(qbits);
        RingPoly a0 = ring_mod(cipher_of(a)->c0, q), a1 = ring_mod(cipher_of(a)->c1, q);
        RingPoly b0 = ring_mod(cipher_of(b)->c0, q), b1 = ring_mod(cipher_of(b)->c1, q);

        size_t tier = multiplier_.tier_for_bits(multiplier_.product_bits(qbits, qbits));
        NttForm fa0 = multiplier_.transform(a0, q, tier);
        NttForm fa1 = multiplier_.transform(a1, q, tier);
        NttForm fb0 = multiplier_.transform(b0, q, tier);
        NttForm fb1 = multiplier_.transform(b1, q, tier);

        RingPoly d0 = multiplier_.multiply(fa0, fb0, q);
        RingPoly d1 = ring_add(multiplier_.multiply(fa0, fb1, q), multiplier_.multiply(fa1, fb0, q), q);
        RingPoly d2 = multiplier_.multiply(fa1, fb1, q);

        auto [ks0, ks1] = key_switch(d2, *rk, qbits);
        d0 = ring_add(d0, ks0, q);
        d1 = ring_add(d1, ks1, q);
        return rescale_pair(std::move(d0), std::move(d1), level, /*from_scale_bits=*/2 * a.scale_bits);
    }

    CipherHandle mult_plain(const CipherHandle& a, const SlotVector& p) const override {
        check_own(a);
        check_plain_size(p);
        check_mult_depth(a);
        const int qbits = params_.modulus_bits_at(a.level);
        const BigInt q = pow2(qbits);
        RingPoly m = embedding_.encode(p, a.scale_bits, q);
        int mag = poly_mag_bits(m, q);
        size_t tier = multiplier_.tier_for_bits(multiplier_.product_bits(qbits, mag));
        NttForm fm = multiplier_.transform(m, q, tier);
        NttForm f0 = multiplier_.transform(cipher_of(a)->c0, q, tier);
        NttForm f1 = multiplier_.transform(cipher_of(a)->c1, q, tier);
        RingPoly d0 = multiplier_.multiply(f0, fm, q);
        RingPoly d1 = multiplier_.multiply(f1, fm, q);
        return rescale_pair(std::move(d0), std::move(d1), a.level, 2 * a.scale_bits);
    }

    CipherHandle rotate(const CipherHandle& a, int64_t k, const EvalKeys& keys) const override {
        check_own(a);
        auto steps = rotation_steps(k, slot_count());
        CipherHandle cur = a;
        for (uint32_t step : steps) {
            auto it = keys.rotation.find(step);
            if (it == keys.rotation.end() || it->second.type != KeyType::rotation)
                throw KeyError("missing rotation key for step " + std::to_string(step));
            cur = rotate_pow2(cur, step, *payload_as<detail::CkksSwitchPayload>(it->second.payload.get()));
        }
        return cur;
    }

    CipherHandle zero(int level) const override {
        if (level < 0 || level > params_.depth_budget())
            throw ConfigError("zero(): level out of range");
        auto out = std::make_shared<detail::CkksCipherPayload>();
        out->c0 = RingPoly(big_n_);
        out->c1 = RingPoly(big_n_);
        return wrap(std::move(out), level, params_.log_scale);
    }

    CipherHandle trivial_cipher(const SlotVector& v, int level) const override {
        if (level < 0 || level > params_.depth_budget())
            throw ConfigError("trivial_cipher(): level out of range");
        if (v.size() != slot_count())
            throw SizeError("vector length " + std::to_string(v.size()) +
                            " != slot count " + std::to_string(slot_count()));
        auto out = std::make_shared<detail::CkksCipherPayload>();
        out->c0 = embedding_.encode(v, params_.log_scale, modulus_at(level));
        out->c1 = RingPoly(big_n_);
        return wrap(std::move(out), level, params_.log_scale);
    }

    // -- serialization --------------------------------------------------------

    std::vector<uint8_t> serialize_cipher(const CipherHandle& c) const override {
        check_own(c);
        const auto* p = cipher_of(c);
        const int qbits = params_.modulus_bits_at(c.level);
        const BigInt q = pow2(qbits);
        const uint32_t width = coeff_width(qbits);
        serial::Writer w;
        serial::write_cipher_header(w, BackendTag::ckks, c.slot_count, uint32_t(c.level),
                                    uint32_t(c.scale_bits), width);
        write_poly(w, p->c0, q, width);
        write_poly(w, p->c1, q, width);
        return std::move(w.bytes);
    }

    CipherHandle deserialize_cipher(const uint8_t* data, size_t len) const override {
        serial::Reader r(data, len);
        auto h = serial::read_cipher_header(r);
        if (h.backend != BackendTag::ckks) throw FormatError("not a ckks ciphertext");
        if (h.slot_count != slot_count()) throw SizeError("ciphertext slot count mismatch");
        if (int(h.level) > params_.depth_budget()) throw FormatError("level exceeds depth budget");
        const int qbits = params_.modulus_bits_at(int(h.level));
        if (h.coeff_bytes != coeff_width(qbits))
            throw FormatError("coefficient width does not match level modulus");
        const BigInt q = pow2(qbits);
        auto p = std::make_shared<detail::CkksCipherPayload>();
        p->c0 = read_poly(r, q, h.coeff_bytes);
        p->c1 = read_poly(r, q, h.coeff_bytes);
        r.expect_end();
        return wrap(std::move(p), int(h.level), int(h.scale_bits));
    }

    std::vector<uint8_t> serialize_key(const KeyHandle& k, uint32_t rotation_step) const override {
        serial::Writer w;
        serial::write_key_header(w, k.type, params_);
        w.u8(uint8_t(BackendTag::ckks));
        w.u32(rotation_step);
        switch (k.type) {
            case KeyType::secret: {
                const auto* p = payload_as<detail::CkksSecretPayload>(k.payload.get());
                for (int8_t c : p->s.coeffs) w.u8(uint8_t(c));
                break;
            }
            case KeyType::public_key: {
                const auto* p = payload_as<detail::CkksPublicPayload>(k.payload.get());
                w.u64(p->enc_seed);
                const uint32_t width = coeff_width(params_.log_modulus);
                const BigInt q = top_modulus();
                w.u32(width);
                write_poly(w, p->b, q, width);
                write_poly(w, p->a, q, width);
                break;
            }
            case KeyType::relin:
            case KeyType::rotation: {
                const auto* p = payload_as<detail::CkksSwitchPayload>(k.payload.get());
                const uint32_t width = coeff_width(special_bits() + params_.log_modulus);
                const BigInt pq = key_switch_modulus();
                w.u32(width);
                write_poly(w, p->b, pq, width);
                write_poly(w, p->a, pq, width);
                break;
            }
        }
        return std::move(w.bytes);
    }

    std::pair<KeyHandle, uint32_t> deserialize_key(const uint8_t* data, size_t len) const override {
        serial::Reader r(data, len);
        auto h = serial::read_key_header(r);
        if (!h.params.same_scheme(params_)) throw FormatError("key parameters mismatch");
        if (BackendTag(r.u8()) != BackendTag::ckks) throw FormatError("not a ckks key");
        uint32_t step = r.u32();
        switch (h.type) {
            case KeyType::secret: {
                auto p = std::make_shared<detail::CkksSecretPayload>();
                p->s = SmallPoly(big_n_);
                for (size_t i = 0; i < big_n_; ++i) p->s.coeffs[i] = int8_t(r.u8());
                r.expect_end();
                return {KeyHandle{h.type, p}, step};
            }
            case KeyType::public_key: {
                auto p = std::make_shared<detail::CkksPublicPayload>();
                p->enc_seed = r.u64();
                uint32_t width = r.u32();
                if (width != coeff_width(params_.log_modulus)) throw FormatError("bad key width");
                const BigInt q = top_modulus();
                p->b = read_poly(r, q, width);
                p->a = read_poly(r, q, width);
                r.expect_end();
                cache_public(*p);
                return {KeyHandle{h.type, p}, step};
            }
            case KeyType::relin:
            case KeyType::rotation: {
                auto p = std::make_shared<detail::CkksSwitchPayload>();
                uint32_t width = r.u32();
                if (width != coeff_width(special_bits() + params_.log_modulus))
                    throw FormatError("bad key width");
                const BigInt pq = key_switch_modulus();
                p->b = read_poly(r, pq, width);
                p->a = read_poly(r, pq, width);
                r.expect_end();
                cache_switch(*p);
                return {KeyHandle{h.type, p}, step};
            }
        }
        throw FormatError("unreachable key type");
    }

    const Embedding& embedding() const { return embedding_; }
    const RingMultiplier& ring_multiplier() const { return multiplier_; }
    BigInt modulus_at(int level) const { return pow2(params_.modulus_bits_at(level)); }

private:
    struct SmallPolySquare {
        std::vector<int16_t> coeffs;
    };

    static constexpr int kSpecialExtraBits = 60;

    static int key_switch_product_bits(size_t ring_degree, int log_modulus) {
        int log_n = 0;
        while ((size_t(1) << log_n) < ring_degree) ++log_n;
        // d2 (mod q) times a key mod P*q_top, P = 2^(log_modulus + extra)
        return log_n + 3 * log_modulus + kSpecialExtraBits + 2;
    }

    int special_bits() const { return params_.log_modulus + kSpecialExtraBits; }
    BigInt top_modulus() const { return pow2(params_.log_modulus); }
    BigInt key_switch_modulus() const { return pow2(special_bits() + params_.log_modulus); }

    size_t encrypt_tier() const {
        return multiplier_.tier_for_bits(multiplier_.product_bits(2, params_.log_modulus));
    }
    size_t switch_tier() const {
        return multiplier_.tier_for_bits(
            key_switch_product_bits(big_n_, params_.log_modulus));
    }

    static uint32_t coeff_width(int modulus_bits) { return uint32_t((modulus_bits + 8) / 8); }

    template <typename T>
    static const T* payload_as(const KeyPayload* p) {
        const auto* cast = dynamic_cast<const T*>(p);
        if (!cast) throw KeyError("key payload has the wrong backend or type");
        return cast;
    }

    static const detail::CkksCipherPayload* cipher_of(const CipherHandle& c) {
        const auto* p = dynamic_cast<const detail::CkksCipherPayload*>(c.payload.get());
        if (!p) throw BackendError("not a ckks ciphertext");
        return p;
    }

    CipherHandle wrap(std::shared_ptr<detail::CkksCipherPayload>&& p, int level,
                      int scale_bits) const {
        CipherHandle h;
        h.backend_tag = BackendTag::ckks;
        h.slot_count = slot_count();
        h.level = level;
        h.scale_bits = scale_bits;
        h.payload = std::move(p);
        return h;
    }

    CipherHandle linear_op(const CipherHandle& a, const CipherHandle& b, bool subtract) const {
        check_operands(a, b);
        const int level = std::min(a.level, b.level);
        const BigInt q = modulus_at(level);
        RingPoly a0 = ring_mod(cipher_of(a)->c0, q), a1 = ring_mod(cipher_of(a)->c1, q);
        RingPoly b0 = ring_mod(cipher_of(b)->c0, q), b1 = ring_mod(cipher_of(b)->c1, q);
        auto out = std::make_shared<detail::CkksCipherPayload>();
        out->c0 = subtract ? ring_sub(a0, b0, q) : ring_add(a0, b0, q);
        out->c1 = subtract ? ring_sub(a1, b1, q) : ring_add(a1, b1, q);
        return wrap(std::move(out), level, a.scale_bits);
    }

    /// (round(d * swk.b / P), round(d * swk.a / P)) mod q_level.
    std::pair<RingPoly, RingPoly> key_switch(const RingPoly& d,
                                             const detail::CkksSwitchPayload& swk,
                                             int qbits) const {
        const BigInt q = pow2(qbits);
        const BigInt pq_level = pow2(special_bits() + qbits);
        NttForm fd = multiplier_.transform(d, q, switch_tier());
        RingPoly rb = multiplier_.multiply(fd, swk.b_ntt, pq_level);
        RingPoly ra = multiplier_.multiply(fd, swk.a_ntt, pq_level);
        return {ring_rescale(rb, pq_level, special_bits(), q),
                ring_rescale(ra, pq_level, special_bits(), q)};
    }

    CipherHandle rotate_pow2(const CipherHandle& a, uint32_t step,
                             const detail::CkksSwitchPayload& swk) const {
        const BigInt q = modulus_at(a.level);
        uint64_t g = embedding_.galois_exponent(step);
        const auto* pa = cipher_of(a);
        RingPoly r0 = ring_automorphism(pa->c0, g, q);
        RingPoly r1 = ring_automorphism(pa->c1, g, q);
        auto [ks0, ks1] = key_switch(r1, swk, params_.modulus_bits_at(a.level));
        auto out = std::make_shared<detail::CkksCipherPayload>();
        out->c0 = ring_add(r0, ks0, q);
        out->c1 = std::move(ks1);
        return wrap(std::move(out), a.level, a.scale_bits);
    }

    CipherHandle rescale_pair(RingPoly&& c0, RingPoly&& c1, int level, int from_scale_bits) const {
        const BigInt q_from = modulus_at(level);
        const BigInt q_to = modulus_at(level - 1);
        auto out = std::make_shared<detail::CkksCipherPayload>();
        out->c0 = ring_rescale(c0, q_from, params_.log_scale, q_to);
        out->c1 = ring_rescale(c1, q_from, params_.log_scale, q_to);
        return wrap(std::move(out), level - 1, from_scale_bits - params_.log_scale);
    }

    RingPoly mult_by_small(const RingPoly& a, const SmallPoly& s, const BigInt& q) const {
        size_t tier = multiplier_.tier_for_bits(
            multiplier_.product_bits(poly_mag_bits_bound(q), 2));
        NttForm fa = multiplier_.transform(a, q, tier);
        NttForm fs = multiplier_.transform(s.to_ring(q), q, tier);
        return multiplier_.multiply(fa, fs, q);
    }

    static int poly_mag_bits_bound(const BigInt& q) { return int(boost::multiprecision::msb(q)); }

    static int poly_mag_bits(const RingPoly& p, const BigInt& q) {
        BigInt m = 0;
        for (const auto& c : p.coeffs) {
            BigInt v = center(c, q);
            if (v < 0) v = -v;
            if (v > m) m = v;
        }
        return m == 0 ? 1 : int(boost::multiprecision::msb(m)) + 1;
    }

    void cache_public(detail::CkksPublicPayload& pk) const {
        const BigInt q = top_modulus();
        pk.b_ntt = multiplier_.transform(pk.b, q, encrypt_tier(), /*with_shoup=*/true);
        pk.a_ntt = multiplier_.transform(pk.a, q, encrypt_tier(), /*with_shoup=*/true);
    }

    void cache_switch(detail::CkksSwitchPayload& swk) const {
        const BigInt pq = key_switch_modulus();
        swk.b_ntt = multiplier_.transform(swk.b, pq, switch_tier(), /*with_shoup=*/true);
        swk.a_ntt = multiplier_.transform(swk.a, pq, switch_tier(), /*with_shoup=*/true);
    }

    std::shared_ptr<detail::CkksSwitchPayload> make_switch_key(std::mt19937_64& rng,
                                                               const SmallPoly& target_secret,
                                                               const SmallPolySquare& source,
                                                               const BigInt& pq) const {
        auto swk = std::make_shared<detail::CkksSwitchPayload>();
        swk->a = sample_uniform(rng, special_bits() + params_.log_modulus);
        RingPoly e = sample_gaussian(rng, pq);
        RingPoly body = ring_sub(e, mult_by_small(swk->a, target_secret, pq), pq);
        // + P * source
        for (size_t i = 0; i < big_n_; ++i) {
            if (source.coeffs[i] == 0) continue;
            BigInt t = BigInt(source.coeffs[i]) << special_bits();
            body.coeffs[i] = to_residue(center(body.coeffs[i], pq) + t, pq);
        }
        swk->b = std::move(body);
        cache_switch(*swk);
        return swk;
    }

    SmallPolySquare square_small(const SmallPoly& s) const {
        SmallPolySquare out;
        out.coeffs.assign(big_n_, 0);
        std::vector<size_t> nz;
        for (size_t i = 0; i < big_n_; ++i)
            if (s.coeffs[i] != 0) nz.push_back(i);
        for (size_t i : nz) {
            for (size_t j : nz) {
                size_t k = i + j;
                int v = int(s.coeffs[i]) * int(s.coeffs[j]);
                if (k < big_n_)
                    out.coeffs[k] = int16_t(out.coeffs[k] + v);
                else
                    out.coeffs[k - big_n_] = int16_t(out.coeffs[k - big_n_] - v);
            }
        }
        return out;
    }

    // -- samplers (deterministic per rng state) ------------------------------

    RingPoly sample_uniform(std::mt19937_64& rng, int bits) const {
        RingPoly out(big_n_);
        const int chunks = (bits + 63) / 64;
        const BigInt mask = pow2(bits) - 1;
        for (size_t i = 0; i < big_n_; ++i) {
            BigInt acc = 0;
            for (int c = 0; c < chunks; ++c) {
                acc <<= 64;
                acc += BigInt(rng());
            }
            out.coeffs[i] = acc & mask;
        }
        return out;
    }

    SmallPoly sample_ternary_hw(std::mt19937_64& rng) const {
        const size_t h = std::min<size_t>(64, big_n_ / 2);
        SmallPoly s(big_n_);
        std::vector<size_t> idx(big_n_);
        for (size_t i = 0; i < big_n_; ++i) idx[i] = i;
        for (size_t i = 0; i < h; ++i) {
            size_t j = i + size_t(rng() % (big_n_ - i));
            std::swap(idx[i], idx[j]);
            s.coeffs[idx[i]] = (rng() & 1) ? int8_t(1) : int8_t(-1);
        }
        return s;
    }

    SmallPoly sample_zo(std::mt19937_64& rng) const {
        SmallPoly s(big_n_);
        for (size_t i = 0; i < big_n_; ++i) {
            uint64_t b = rng() & 3;
            s.coeffs[i] = b == 3 ? int8_t(-1) : (b == 2 ? int8_t(1) : int8_t(0));
        }
        return s;
    }

    RingPoly sample_gaussian(std::mt19937_64& rng, const BigInt& q) const {
        RingPoly out(big_n_);
        for (size_t i = 0; i < big_n_; ++i) {
            double u1 = double(rng() >> 11) * 0x1.0p-53;
            double u2 = double(rng() >> 11) * 0x1.0p-53;
            while (u1 <= 0.0) u1 = double(rng() >> 11) * 0x1.0p-53;
            double g = kErrorStddev * std::sqrt(-2.0 * std::log(u1)) *
                       std::cos(6.283185307179586 * u2);
            long long r = llround(g);
            out.coeffs[i] = to_residue(BigInt(r), q);
        }
        return out;
    }

    static void write_poly(serial::Writer& w, const RingPoly& p, const BigInt& q, uint32_t width) {
        const BigInt wrap_at = BigInt(1) << (8 * width);
        std::vector<uint8_t> buf;
        for (const auto& c : p.coeffs) {
            BigInt v = center(c, q);
            if (v < 0) v += wrap_at;
            buf.clear();
            boost::multiprecision::export_bits(v, std::back_inserter(buf), 8, false);
            buf.resize(width, 0);
            w.raw(buf.data(), width);
        }
    }

    RingPoly read_poly(serial::Reader& r, const BigInt& q, uint32_t width) const {
        const BigInt wrap_at = BigInt(1) << (8 * width);
        const BigInt half = wrap_at >> 1;
        RingPoly out(big_n_);
        std::vector<uint8_t> buf(width);
        for (size_t i = 0; i < big_n_; ++i) {
            r.raw(buf.data(), width);
            BigInt v;
            boost::multiprecision::import_bits(v, buf.begin(), buf.end(), 8, false);
            if (v >= half) v -= wrap_at;  // two's complement
            out.coeffs[i] = to_residue(v, q);
        }
        return out;
    }

    static constexpr double kErrorStddev = 3.2;

    size_t big_n_;
    Embedding embedding_;
    RingMultiplier multiplier_;
};

}  // namespace fhed::ckks
