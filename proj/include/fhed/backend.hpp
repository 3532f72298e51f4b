#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fhed/backend_fwd.hpp"
#include "fhed/errors.hpp"
#include "fhed/params.hpp"
#include "fhed/slots.hpp"

namespace fhed {

struct CipherPayload {
    virtual ~CipherPayload() = default;
};

struct KeyPayload {
    virtual ~KeyPayload() = default;
};

/// Value-semantic ciphertext. The payload is immutable and shared; copies are
/// cheap and thread-safe.
struct CipherHandle {
    BackendTag backend_tag = BackendTag::clear;
    uint32_t slot_count = 0;
    int level = 0;        // remaining rescales
    int scale_bits = 0;   // current log2 of the scale
    std::shared_ptr<const CipherPayload> payload;
};

struct KeyHandle {
    KeyType type = KeyType::public_key;
    std::shared_ptr<const KeyPayload> payload;
};

/// The keys a server may hold: everything except the secret key.
struct EvalKeys {
    KeyHandle relin;
    std::map<uint32_t, KeyHandle> rotation;  // step (power of two) -> key
};

struct KeySet {
    HEParams params;
    BackendTag tag = BackendTag::clear;
    uint64_t seed = 0;
    KeyHandle secret;
    KeyHandle public_key;
    EvalKeys eval;
};

/// Homomorphic backend contract. All operations are pure: inputs are never
/// mutated and results carry fresh payloads. Level bookkeeping is identical
/// across backends so depth bugs surface on the cheap one.
class Backend {
public:
    explicit Backend(const HEParams& params) : params_(params) { params_.validate(); }
    virtual ~Backend() = default;

    Backend(const Backend&) = delete;
    Backend& operator=(const Backend&) = delete;

    const HEParams& params() const { return params_; }
    uint32_t slot_count() const { return params_.slot_count(); }
    virtual BackendTag tag() const = 0;

    virtual KeySet keygen(uint64_t seed) const = 0;

    virtual CipherHandle encrypt(const SlotVector& v, const KeyHandle& public_key) const = 0;
    virtual SlotVector decrypt(const CipherHandle& c, const KeyHandle& secret) const = 0;

    virtual CipherHandle add(const CipherHandle& a, const CipherHandle& b) const = 0;
    virtual CipherHandle sub(const CipherHandle& a, const CipherHandle& b) const = 0;
    virtual CipherHandle negate(const CipherHandle& a) const = 0;
    virtual CipherHandle add_plain(const CipherHandle& a, const SlotVector& p) const = 0;
    virtual CipherHandle mult(const CipherHandle& a, const CipherHandle& b,
                              const EvalKeys& keys) const = 0;
    virtual CipherHandle mult_plain(const CipherHandle& a, const SlotVector& p) const = 0;
    /// Left rotation: slot i of the result holds slot (i+k) mod n of the input.
    virtual CipherHandle rotate(const CipherHandle& a, int64_t k, const EvalKeys& keys) const = 0;
    /// Trivial encryption of the zero vector at a chosen level (no key needed).
    virtual CipherHandle zero(int level) const = 0;
    /// Trivial (noiseless, keyless) ciphertext of an arbitrary vector: valid
    /// under any key. Benchmarks use it to measure evaluator noise without
    /// the encryptor's own noise on top.
    virtual CipherHandle trivial_cipher(const SlotVector& v, int level) const = 0;

    /// Full serialized blobs (FHEC / FHEK formats, see docs/formats.md).
    virtual std::vector<uint8_t> serialize_cipher(const CipherHandle& c) const = 0;
    virtual CipherHandle deserialize_cipher(const uint8_t* data, size_t len) const = 0;
    virtual std::vector<uint8_t> serialize_key(const KeyHandle& k, uint32_t rotation_step) const = 0;
    virtual std::pair<KeyHandle, uint32_t> deserialize_key(const uint8_t* data, size_t len) const = 0;

protected:
    void check_operands(const CipherHandle& a, const CipherHandle& b) const {
        if (a.backend_tag != b.backend_tag)
            throw BackendError("mixed backends: " + std::string(backend_name(a.backend_tag)) +
                               " vs " + backend_name(b.backend_tag));
        check_own(a);
        check_own(b);
        if (a.slot_count != b.slot_count)
            throw SizeError("slot counts differ: " + std::to_string(a.slot_count) + " vs " +
                            std::to_string(b.slot_count));
        if (a.scale_bits != b.scale_bits)
            throw ScaleError("scales differ: 2^" + std::to_string(a.scale_bits) + " vs 2^" +
                             std::to_string(b.scale_bits));
    }

    void check_own(const CipherHandle& a) const {
        if (a.backend_tag != tag())
            throw BackendError(std::string("ciphertext belongs to the ") +
                               backend_name(a.backend_tag) + " backend");
        if (a.slot_count != slot_count())
            throw SizeError("ciphertext slot count " + std::to_string(a.slot_count) +
                            " does not match backend n=" + std::to_string(slot_count()));
        if (!a.payload) throw BackendError("empty ciphertext payload");
    }

    void check_mult_depth(const CipherHandle& a) const {
        if (a.level < 1)
            throw DepthExceeded("multiplication at level 0: log q budget of " +
                                std::to_string(params_.log_modulus) + " bits is exhausted");
    }

    void check_plain_size(const SlotVector& p) const {
        if (p.size() != slot_count())
            throw SizeError("plaintext vector length " + std::to_string(p.size()) +
                            " != slot count " + std::to_string(slot_count()));
    }

    HEParams params_;
};

/// Reduce an arbitrary rotation step to [0, n) and expand it into the
/// power-of-two steps the key set carries.
inline std::vector<uint32_t> rotation_steps(int64_t k, uint32_t n) {
    int64_t r = ((k % int64_t(n)) + int64_t(n)) % int64_t(n);
    std::vector<uint32_t> steps;
    for (uint32_t bit = 1; bit < n; bit <<= 1)
        if (r & bit) steps.push_back(bit);
    return steps;
}

std::unique_ptr<Backend> make_backend(BackendTag tag, const HEParams& params);

}  // namespace fhed
