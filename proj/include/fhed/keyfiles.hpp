#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fhed/backend.hpp"
#include "fhed/serial_util.hpp"

namespace fhed::keyfiles {

inline std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

/// Rotation keys all live in one file: u32 count, then length-prefixed FHEK
/// blobs (each blob carries its own step).
inline std::vector<uint8_t> pack_rotation_keys(const Backend& be, const EvalKeys& eval) {
    serial::Writer w;
    w.u32(uint32_t(eval.rotation.size()));
    for (const auto& [step, key] : eval.rotation) {
        auto blob = be.serialize_key(key, step);
        w.u64(blob.size());
        w.raw(blob.data(), blob.size());
    }
    return std::move(w.bytes);
}

inline std::map<uint32_t, KeyHandle> unpack_rotation_keys(const Backend& be,
                                                          const std::vector<uint8_t>& bytes) {
    serial::Reader r(bytes.data(), bytes.size());
    uint32_t count = r.u32();
    std::map<uint32_t, KeyHandle> keys;
    for (uint32_t i = 0; i < count; ++i) {
        uint64_t len = r.u64();
        r.need(len);
        auto [key, step] = be.deserialize_key(r.p + r.pos, len);
        if (key.type != KeyType::rotation) throw FormatError("non-rotation key in rotation file");
        r.pos += len;
        keys[step] = key;
    }
    r.expect_end();
    return keys;
}

inline void save_keyset(const Backend& be, const KeySet& ks, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir + "/secret.key", be.serialize_key(ks.secret, 0));
    write_file(dir + "/public.key", be.serialize_key(ks.public_key, 0));
    write_file(dir + "/relin.key", be.serialize_key(ks.eval.relin, 0));
    write_file(dir + "/rotation.keys", pack_rotation_keys(be, ks.eval));
}

/// Reads the scheme parameters from a key directory without needing a backend.
inline HEParams peek_params(const std::string& dir) {
    auto bytes = read_file(dir + "/public.key");
    serial::Reader r(bytes.data(), bytes.size());
    return serial::read_key_header(r).params;
}

inline BackendTag peek_backend_tag(const std::string& dir) {
    auto bytes = read_file(dir + "/public.key");
    serial::Reader r(bytes.data(), bytes.size());
    serial::read_key_header(r);
    uint8_t tag = r.u8();
    if (tag > uint8_t(BackendTag::ckks)) throw FormatError("unknown backend tag in key file");
    return BackendTag(tag);
}

inline KeySet load_keyset(const Backend& be, const std::string& dir) {
    KeySet ks;
    ks.params = be.params();
    ks.tag = be.tag();
    auto sk = read_file(dir + "/secret.key");
    ks.secret = be.deserialize_key(sk.data(), sk.size()).first;
    if (ks.secret.type != KeyType::secret) throw FormatError("secret.key has the wrong type byte");
    auto pk = read_file(dir + "/public.key");
    ks.public_key = be.deserialize_key(pk.data(), pk.size()).first;
    auto rk = read_file(dir + "/relin.key");
    ks.eval.relin = be.deserialize_key(rk.data(), rk.size()).first;
    ks.eval.rotation = unpack_rotation_keys(be, read_file(dir + "/rotation.keys"));
    return ks;
}

}  // namespace fhed::keyfiles
