#pragma once

#include <atomic>
#include <cstring>

#include "fhed/backend.hpp"
#include "fhed/serial_util.hpp"

namespace fhed {

namespace detail {
struct ClearCipherPayload : CipherPayload {
    SlotVector slots;
};
struct ClearKeyPayload : KeyPayload {
    uint64_t seed = 0;
};
}  // namespace detail

/// Exact slot-level backend: ciphertexts are the slot vectors themselves.
/// Level and scale bookkeeping mirror the CKKS backend one-to-one, so depth
/// and key-availability bugs show up without big-integer arithmetic.
/// Optional Gaussian noise (params.noise_stddev) is injected per operation;
/// the noise stream is a pure function of the operand payloads, keeping
/// every operation deterministic and side-effect free.
class ClearBackend : public Backend {
public:
    explicit ClearBackend(const HEParams& params, uint64_t noise_seed = 0x5eedULL)
        : Backend(params), noise_seed_(noise_seed) {}

    BackendTag tag() const override { return BackendTag::clear; }

    KeySet keygen(uint64_t seed) const override {
        KeySet ks;
        ks.params = params_;
        ks.tag = tag();
        ks.seed = seed;
        ks.secret = make_key(KeyType::secret, seed);
        ks.public_key = make_key(KeyType::public_key, seed);
        ks.eval.relin = make_key(KeyType::relin, seed);
        for (uint32_t step = 1; step < slot_count(); step <<= 1)
            ks.eval.rotation[step] = make_key(KeyType::rotation, seed);
        return ks;
    }

    CipherHandle encrypt(const SlotVector& v, const KeyHandle& public_key) const override {
        if (public_key.type != KeyType::public_key)
            throw KeyError("encrypt needs a public key");
        if (v.size() != slot_count())
            throw SizeError("vector length " + std::to_string(v.size()) +
                            " != slot count " + std::to_string(slot_count()));
        SlotVector slots = v;
        add_noise(slots, 0xE0);
        return wrap(std::move(slots), params_.depth_budget(), params_.log_scale);
    }

    SlotVector decrypt(const CipherHandle& c, const KeyHandle& secret) const override {
        if (secret.type != KeyType::secret) throw KeyError("decrypt needs the secret key");
        check_own(c);
        return slots_of(c);
    }

    CipherHandle add(const CipherHandle& a, const CipherHandle& b) const override {
        check_operands(a, b);
        const auto &va = slots_of(a), &vb = slots_of(b);
        SlotVector out(va.size());
        for (size_t i = 0; i < va.size(); ++i) out[i] = va[i] + vb[i];
        add_noise(out, 0xA0);
        return wrap(std::move(out), std::min(a.level, b.level), a.scale_bits);
    }

    CipherHandle sub(const CipherHandle& a, const CipherHandle& b) const override {
        check_operands(a, b);
        const auto &va = slots_of(a), &vb = slots_of(b);
        SlotVector out(va.size());
        for (size_t i = 0; i < va.size(); ++i) out[i] = va[i] - vb[i];
        add_noise(out, 0xA1);
        return wrap(std::move(out), std::min(a.level, b.level), a.scale_bits);
    }

    CipherHandle negate(const CipherHandle& a) const override {
        check_own(a);
        SlotVector out = slots_of(a);
        for (auto& x : out) x = -x;
        return wrap(std::move(out), a.level, a.scale_bits);
    }

    CipherHandle add_plain(const CipherHandle& a, const SlotVector& p) const override {
        check_own(a);
        check_plain_size(p);
        SlotVector out = slots_of(a);
        for (size_t i = 0; i < out.size(); ++i) out[i] += p[i];
        add_noise(out, 0xA2);
        return wrap(std::move(out), a.level, a.scale_bits);
    }

    CipherHandle mult(const CipherHandle& a, const CipherHandle& b, const EvalKeys& keys) const override {
        check_operands(a, b);
        if (keys.relin.type != KeyType::relin) throw KeyError("mult needs a relinearization key");
        check_mult_depth(a);
        check_mult_depth(b);
        const auto &va = slots_of(a), &vb = slots_of(b);
        SlotVector out(va.size());
        for (size_t i = 0; i < va.size(); ++i) out[i] = va[i] * vb[i];
        add_noise(out, 0xB0);
        return wrap(std::move(out), std::min(a.level, b.level) - 1, a.scale_bits);
    }

    CipherHandle mult_plain(const CipherHandle& a, const SlotVector& p) const override {
        check_own(a);
        check_plain_size(p);
        check_mult_depth(a);
        const auto& va = slots_of(a);
        SlotVector out(va.size());
        for (size_t i = 0; i < va.size(); ++i) out[i] = va[i] * p[i];
        add_noise(out, 0xB1);
        return wrap(std::move(out), a.level - 1, a.scale_bits);
    }

    CipherHandle rotate(const CipherHandle& a, int64_t k, const EvalKeys& keys) const override {
        check_own(a);
        const uint32_t n = slot_count();
        auto steps = rotation_steps(k, n);
        for (uint32_t s : steps) {
            auto it = keys.rotation.find(s);
            if (it == keys.rotation.end() || it->second.type != KeyType::rotation)
                throw KeyError("missing rotation key for step " + std::to_string(s));
        }
        if (steps.empty()) return a;
        const auto& va = slots_of(a);
        uint32_t r = 0;
        for (uint32_t s : steps) r += s;
        SlotVector out(n);
        for (uint32_t i = 0; i < n; ++i) out[i] = va[(i + r) % n];
        add_noise(out, 0xC0);
        return wrap(std::move(out), a.level, a.scale_bits);
    }

    CipherHandle zero(int level) const override {
        if (level < 0 || level > params_.depth_budget())
            throw ConfigError("zero(): level out of range");
        return wrap(SlotVector(slot_count(), {0.0, 0.0}), level, params_.log_scale);
    }

    CipherHandle trivial_cipher(const SlotVector& v, int level) const override {
        if (level < 0 || level > params_.depth_budget())
            throw ConfigError("trivial_cipher(): level out of range");
        if (v.size() != slot_count())
            throw SizeError("vector length " + std::to_string(v.size()) +
                            " != slot count " + std::to_string(slot_count()));
        return wrap(SlotVector(v), level, params_.log_scale);
    }

    std::vector<uint8_t> serialize_cipher(const CipherHandle& c) const override {
        check_own(c);
        const auto& v = slots_of(c);
        serial::Writer w;
        serial::write_cipher_header(w, BackendTag::clear, c.slot_count, uint32_t(c.level),
                                    uint32_t(c.scale_bits), sizeof(double));
        for (const auto& z : v) w.f64(z.real());
        for (const auto& z : v) w.f64(z.imag());
        return std::move(w.bytes);
    }

    CipherHandle deserialize_cipher(const uint8_t* data, size_t len) const override {
        serial::Reader r(data, len);
        auto h = serial::read_cipher_header(r);
        if (h.backend != BackendTag::clear) throw FormatError("not a clear-backend ciphertext");
        if (h.slot_count != slot_count()) throw SizeError("ciphertext slot count mismatch");
        if (h.coeff_bytes != sizeof(double)) throw FormatError("unexpected slot width");
        if (int(h.level) > params_.depth_budget()) throw FormatError("level exceeds depth budget");
        SlotVector v(h.slot_count);
        for (auto& z : v) z.real(r.f64());
        for (size_t i = 0; i < v.size(); ++i) v[i].imag(r.f64());
        r.expect_end();
        return wrap(std::move(v), int(h.level), int(h.scale_bits));
    }

    std::vector<uint8_t> serialize_key(const KeyHandle& k, uint32_t rotation_step) const override {
        const auto* p = dynamic_cast<const detail::ClearKeyPayload*>(k.payload.get());
        if (!p) throw FormatError("not a clear-backend key");
        serial::Writer w;
        serial::write_key_header(w, k.type, params_);
        w.u8(uint8_t(BackendTag::clear));
        w.u32(rotation_step);
        w.u64(p->seed);
        return std::move(w.bytes);
    }

    std::pair<KeyHandle, uint32_t> deserialize_key(const uint8_t* data, size_t len) const override {
        serial::Reader r(data, len);
        auto h = serial::read_key_header(r);
        if (!h.params.same_scheme(params_)) throw FormatError("key parameters mismatch");
        if (BackendTag(r.u8()) != BackendTag::clear) throw FormatError("not a clear-backend key");
        uint32_t step = r.u32();
        uint64_t seed = r.u64();
        r.expect_end();
        return {make_key(h.type, seed), step};
    }

    /// Direct slot access; used by debug contract checks and tests only.
    static const SlotVector& peek(const CipherHandle& c) { return slots_of(c); }

private:
    static const SlotVector& slots_of(const CipherHandle& c) {
        const auto* p = dynamic_cast<const detail::ClearCipherPayload*>(c.payload.get());
        if (!p) throw BackendError("not a clear-backend ciphertext");
        return p->slots;
    }

    CipherHandle wrap(SlotVector&& v, int level, int scale_bits) const {
        auto p = std::make_shared<detail::ClearCipherPayload>();
        p->slots = std::move(v);
        CipherHandle h;
        h.backend_tag = BackendTag::clear;
        h.slot_count = slot_count();
        h.level = level;
        h.scale_bits = scale_bits;
        h.payload = std::move(p);
        return h;
    }

    static KeyHandle make_key(KeyType t, uint64_t seed) {
        auto p = std::make_shared<detail::ClearKeyPayload>();
        p->seed = seed;
        return KeyHandle{t, std::move(p)};
    }

    void add_noise(SlotVector& v, uint8_t op_id) const {
        if (params_.noise_stddev <= 0.0) return;
        uint64_t h = rng::hash_slots(v, noise_seed_ ^ (uint64_t(op_id) << 56));
        rng::SplitMix64 g(h);
        for (auto& z : v)
            z += std::complex<double>(g.gaussian(params_.noise_stddev),
                                      g.gaussian(params_.noise_stddev));
    }

    uint64_t noise_seed_;
};

}  // namespace fhed
