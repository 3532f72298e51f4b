#pragma once

#include "fhed/backend.hpp"
#include "fhed/ckks/ckks_backend.hpp"
#include "fhed/clear_backend.hpp"
#include "fhed/heops.hpp"

namespace fhed {

inline std::unique_ptr<Backend> make_backend(BackendTag tag, const HEParams& params) {
    if (tag == BackendTag::clear) return std::make_unique<ClearBackend>(params);
    return std::make_unique<ckks::CkksBackend>(params);
}

}  // namespace fhed
