#pragma once

#include <cstdint>
#include <string>

#include "fhed/errors.hpp"

namespace fhed {

enum class BackendTag : uint8_t { clear = 0, ckks = 1 };

inline const char* backend_name(BackendTag t) {
    return t == BackendTag::clear ? "clear" : "ckks";
}

inline BackendTag parse_backend_tag(const std::string& s) {
    if (s == "clear") return BackendTag::clear;
    if (s == "ckks") return BackendTag::ckks;
    throw ConfigError("unknown backend '" + s + "' (expected clear or ckks)");
}

/// Key-type bytes as written to key files and wire blobs. The secret byte is
/// what the network layer screens for.
enum class KeyType : uint8_t {
    secret = 0x53,      // 'S'
    public_key = 0x50,  // 'P'
    relin = 0x52,       // 'R'
    rotation = 0x47,    // 'G'
};

}  // namespace fhed
