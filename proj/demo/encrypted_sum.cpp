// Minimal tour of the backend contract: encrypt a vector, sum its slots two
// ways (rotate-and-add vs the DFT baseline), decrypt, compare.

#include <iostream>

#include "fhed/fhed.hpp"

int main() {
    using namespace fhed;

    HEParams params;
    params.log_slots = 4;     // 16 slots
    params.log_scale = 40;    // ~12 decimal digits of precision
    params.log_modulus = 280; // enough depth for the 5-stage DFT

    ckks::CkksBackend backend(params);
    auto keys = backend.keygen(/*seed=*/42);
    heops::EvalContext ctx{backend, keys.eval};

    std::vector<double> v(16);
    double expect = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        v[i] = 0.1 * double(i) - 0.4;
        expect += v[i];
    }

    auto ct = backend.encrypt(to_slots(v), keys.public_key);

    auto by_rotation = heops::rot_add(ctx, ct, 16);
    auto by_dft = heops::dft_sum(ctx, ct, 16);

    double r = backend.decrypt(by_rotation, keys.secret)[0].real();
    double d = backend.decrypt(by_dft, keys.secret)[0].real();

    std::cout << "plain sum        " << expect << "\n"
              << "rotate-and-add   " << r << "  (level used: 0)\n"
              << "dft baseline     " << d << "  (levels used: " << ct.level - by_dft.level
              << ")\n";
    return 0;
}
