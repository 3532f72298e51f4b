#pragma once

#include <cstdint>

#include "fhed/errors.hpp"

namespace fhed {

/// Scheme parameters. log_scale and log_modulus are the bit lengths of the
/// plaintext scale p and the ciphertext modulus q; their ratio fixes how many
/// rescaling multiplications a fresh ciphertext supports.
struct HEParams {
    int log_slots = 10;
    int log_scale = 40;
    int log_modulus = 200;
    double noise_stddev = 0.0;  // clear backend only; 0 = exact arithmetic

    uint32_t slot_count() const { return uint32_t{1} << log_slots; }
    uint32_t ring_degree() const { return uint32_t{2} << log_slots; }

    /// Number of supported rescales: floor((log q - log p) / log p).
    int depth_budget() const { return (log_modulus - log_scale) / log_scale; }

    /// Bit length of the ciphertext modulus at a given level.
    int modulus_bits_at(int level) const {
        return log_modulus - (depth_budget() - level) * log_scale;
    }

    void validate() const {
        if (log_slots < 1 || log_slots > 14)
            throw ConfigError("log_slots must be in [1, 14], got " +
                              std::to_string(log_slots));
        if (log_scale <= 0 || log_scale >= log_modulus)
            throw ConfigError("need 0 < log_scale < log_modulus, got log_scale=" +
                              std::to_string(log_scale) + " log_modulus=" +
                              std::to_string(log_modulus));
        if (depth_budget() < 1)
            throw ConfigError("depth budget (log_modulus - log_scale) / log_scale must be >= 1");
        if (noise_stddev < 0.0)
            throw ConfigError("noise_stddev must be nonnegative");
    }

    bool same_scheme(const HEParams& o) const {
        return log_slots == o.log_slots && log_scale == o.log_scale &&
               log_modulus == o.log_modulus;
    }
};

}  // namespace fhed
