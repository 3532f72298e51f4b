#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "fhed/backend_fwd.hpp"
#include "fhed/errors.hpp"
#include "fhed/params.hpp"

namespace fhed::serial {

// File magics. Every multi-byte integer in these formats is little-endian.
inline constexpr char kCipherMagic[4] = {'F', 'H', 'E', 'C'};
inline constexpr char kKeyMagic[4] = {'F', 'H', 'E', 'K'};
inline constexpr uint8_t kFormatVersion = 1;

struct Writer {
    std::vector<uint8_t> bytes;

    void raw(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
    void u8(uint8_t v) { bytes.push_back(v); }
    void u16(uint16_t v) {
        for (int i = 0; i < 2; ++i) bytes.push_back(uint8_t(v >> (8 * i)));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(uint8_t(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(uint8_t(v >> (8 * i)));
    }
    void f64(double v) {
        uint64_t u;
        std::memcpy(&u, &v, 8);
        u64(u);
    }
    void str(const std::string& s) {
        u32(uint32_t(s.size()));
        raw(s.data(), s.size());
    }
};

struct Reader {
    const uint8_t* p;
    size_t n;
    size_t pos = 0;

    Reader(const uint8_t* data, size_t len) : p(data), n(len) {}

    void need(size_t k) const {
        if (pos + k > n) throw FormatError("truncated blob");
    }
    void raw(void* out, size_t k) {
        need(k);
        std::memcpy(out, p + pos, k);
        pos += k;
    }
    uint8_t u8() {
        need(1);
        return p[pos++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= uint16_t(p[pos + i]) << (8 * i);
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        uint64_t u = u64();
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
    std::string str() {
        uint32_t len = u32();
        need(len);
        std::string s(reinterpret_cast<const char*>(p + pos), len);
        pos += len;
        return s;
    }
    void expect_end() const {
        if (pos != n) throw FormatError("trailing bytes in blob");
    }
};

struct CipherHeader {
    BackendTag backend;
    uint32_t slot_count;
    uint32_t level;
    uint32_t scale_bits;
    uint32_t coeff_bytes;
};

inline void write_cipher_header(Writer& w, BackendTag tag, uint32_t n, uint32_t level,
                                uint32_t scale_bits, uint32_t coeff_bytes) {
    w.raw(kCipherMagic, 4);
    w.u8(kFormatVersion);
    w.u8(uint8_t(tag));
    w.u32(n);
    w.u32(level);
    w.u32(scale_bits);
    w.u32(coeff_bytes);
}

inline CipherHeader read_cipher_header(Reader& r) {
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kCipherMagic, 4) != 0) throw FormatError("bad ciphertext magic");
    if (r.u8() != kFormatVersion) throw FormatError("unsupported ciphertext format version");
    CipherHeader h;
    uint8_t tag = r.u8();
    if (tag > uint8_t(BackendTag::ckks)) throw FormatError("unknown backend tag");
    h.backend = BackendTag(tag);
    h.slot_count = r.u32();
    h.level = r.u32();
    h.scale_bits = r.u32();
    h.coeff_bytes = r.u32();
    if (h.slot_count == 0 || (h.slot_count & (h.slot_count - 1)) != 0)
        throw FormatError("slot count must be a power of two");
    if (h.coeff_bytes == 0 || h.coeff_bytes > 4096) throw FormatError("bad coefficient width");
    return h;
}

struct KeyHeader {
    KeyType type;
    HEParams params;
};

inline void write_key_header(Writer& w, KeyType type, const HEParams& p) {
    w.raw(kKeyMagic, 4);
    w.u8(kFormatVersion);
    w.u8(uint8_t(type));
    w.u32(uint32_t(p.log_slots));
    w.u32(uint32_t(p.log_scale));
    w.u32(uint32_t(p.log_modulus));
}

inline KeyHeader read_key_header(Reader& r) {
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kKeyMagic, 4) != 0) throw FormatError("bad key magic");
    if (r.u8() != kFormatVersion) throw FormatError("unsupported key format version");
    uint8_t tb = r.u8();
    if (tb != uint8_t(KeyType::secret) && tb != uint8_t(KeyType::public_key) &&
        tb != uint8_t(KeyType::relin) && tb != uint8_t(KeyType::rotation))
        throw FormatError("unknown key type byte");
    KeyHeader h;
    h.type = KeyType(tb);
    h.params.log_slots = int(r.u32());
    h.params.log_scale = int(r.u32());
    h.params.log_modulus = int(r.u32());
    return h;
}

/// Peek the key-type byte of a serialized key without full parsing.
inline KeyType key_type_of_blob(const uint8_t* data, size_t len) {
    Reader r(data, len);
    return read_key_header(r).type;
}

}  // namespace fhed::serial
