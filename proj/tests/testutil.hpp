#pragma once

#include <complex>
#include <random>
#include <vector>

#include "fhed/slots.hpp"

namespace testutil {

/// Pairwise-halving sum: the association order produced by rotate-and-add,
/// and therefore the right plaintext oracle for exact-equality checks.
inline double pairwise_sum(std::vector<double> v) {
    if (v.empty()) return 0.0;
    size_t len = v.size();
    while (len > 1) {
        size_t half = len / 2;
        for (size_t i = 0; i < half; ++i) v[i] += v[i + half];
        len = half;
    }
    return v[0];
}

inline std::vector<double> random_reals(std::mt19937_64& rng, size_t n, double lo = -1.0,
                                        double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

inline fhed::SlotVector random_slots(std::mt19937_64& rng, size_t n, double lo = -1.0,
                                     double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    fhed::SlotVector v(n);
    for (auto& z : v) z = {dist(rng), dist(rng)};
    return v;
}

/// Straightforward Horner evaluation; independent oracle for the power-basis
/// polynomial evaluator.
inline double horner(const std::vector<double>& coeffs_const_first, double x) {
    double acc = 0.0;
    for (size_t i = coeffs_const_first.size(); i-- > 0;) acc = acc * x + coeffs_const_first[i];
    return acc;
}

}  // namespace testutil
