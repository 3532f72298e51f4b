#pragma once

#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "fhed/backend.hpp"
#include "fhed/clear_backend.hpp"

namespace fhed::heops {

/// Backend plus the evaluation keys every homomorphic op threads through.
struct EvalContext {
    const Backend& backend;
    const EvalKeys& keys;
};

/// Toggles the clear-backend contract scans (zero-tail preconditions).
inline std::atomic<bool>& debug_checks_flag() {
    static std::atomic<bool> f{true};
    return f;
}
inline void set_debug_checks(bool on) { debug_checks_flag().store(on); }
inline bool debug_checks() { return debug_checks_flag().load(); }

/// Real polynomial, constant term first. Trailing zero coefficients are
/// trimmed at construction; degree >= 1 is required.
struct PolyCoeffs {
    std::vector<double> c;

    explicit PolyCoeffs(std::vector<double> coeffs) : c(std::move(coeffs)) {
        while (c.size() > 1 && c.back() == 0.0) c.pop_back();
        if (c.size() < 2) throw ConfigError("polynomial degree must be at least 1");
        for (double v : c)
            if (!std::isfinite(v)) throw ConfigError("polynomial coefficients must be finite");
    }

    int degree() const { return int(c.size()) - 1; }
};

/// Which g_n/f_n pair of the sign-composition tables to use, and how many
/// times each is applied.
struct CompConfig {
    int n_index = 3;
    int d_g = 3;
    int d_f = 3;

    void validate() const {
        if (n_index < 1 || n_index > 4)
            throw ConfigError("comparator n must be in 1..4, got " + std::to_string(n_index));
        if (d_g < 0 || d_f < 0) throw ConfigError("comparator repeat counts must be nonnegative");
    }
};

// -- fixed coefficient tables -------------------------------------------------
// All fractions below are over powers of two, so the doubles are exact.

/// Degree-8 LeakyReLU replacement; valid input domain [-1, 1].
inline const PolyCoeffs& leaky_relu_coeffs() {
    static const PolyCoeffs p(
        {0.02, 0.51, 1.60, 0.28, -4.10, -0.51, 5.32, 0.28, -2.42});
    return p;
}

/// Sign-squashing polynomials g_1..g_4 (coefficients over 2^10).
inline const PolyCoeffs& comp_g(int n) {
    static const PolyCoeffs g1({0.0, 2126.0 / 1024, 0.0, -1359.0 / 1024});
    static const PolyCoeffs g2({0.0, 3334.0 / 1024, 0.0, -6108.0 / 1024, 0.0, 3796.0 / 1024});
    static const PolyCoeffs g3(
        {0.0, 4589.0 / 1024, 0.0, -16577.0 / 1024, 0.0, 25614.0 / 1024, 0.0, -12860.0 / 1024});
    static const PolyCoeffs g4({0.0, 5850.0 / 1024, 0.0, -34974.0 / 1024, 0.0, 97015.0 / 1024,
                                0.0, -113492.0 / 1024, 0.0, 46623.0 / 1024});
    switch (n) {
        case 1: return g1;
        case 2: return g2;
        case 3: return g3;
        case 4: return g4;
        default: throw ConfigError("g_n index out of range");
    }
}

/// Sign-polishing polynomials f_1..f_4 (fixed points at +-1).
inline const PolyCoeffs& comp_f(int n) {
    static const PolyCoeffs f1({0.0, 3.0 / 2, 0.0, -1.0 / 2});
    static const PolyCoeffs f2({0.0, 15.0 / 8, 0.0, -10.0 / 8, 0.0, 3.0 / 8});
    static const PolyCoeffs f3({0.0, 35.0 / 16, 0.0, -35.0 / 16, 0.0, 21.0 / 16, 0.0, -5.0 / 16});
    static const PolyCoeffs f4({0.0, 315.0 / 128, 0.0, -420.0 / 128, 0.0, 378.0 / 128, 0.0,
                                -180.0 / 128, 0.0, 35.0 / 128});
    switch (n) {
        case 1: return f1;
        case 2: return f2;
        case 3: return f3;
        case 4: return f4;
        default: throw ConfigError("f_n index out of range");
    }
}

// -- level-cost model ----------------------------------------------------------

inline int ceil_log2(uint64_t x) {
    int k = 0;
    while ((uint64_t(1) << k) < x) ++k;
    return k;
}

inline bool is_pow2(uint64_t x) { return x != 0 && (x & (x - 1)) == 0; }

inline int poly_eval_depth(int degree) {
    if (degree < 1) throw ConfigError("polynomial degree must be at least 1");
    return ceil_log2(uint64_t(degree)) + 1;
}

inline int comp_b_depth(const CompConfig& cfg) {
    cfg.validate();
    return cfg.d_g * poly_eval_depth(comp_g(cfg.n_index).degree()) +
           cfg.d_f * poly_eval_depth(comp_f(cfg.n_index).degree()) + 1;
}

/// One pipeline step for depth accounting.
struct OpDesc {
    enum class Kind { rot_add, dft_sum, fc_layer, poly_eval, comp_b, relu_approx };
    Kind kind;
    uint32_t size = 0;
    int degree = 0;
    CompConfig cfg{};

    static OpDesc RotAdd() { return {Kind::rot_add}; }
    static OpDesc DftSum(uint32_t size) { return {Kind::dft_sum, size}; }
    static OpDesc FcLayer() { return {Kind::fc_layer}; }
    static OpDesc PolyEval(int degree) { return {Kind::poly_eval, 0, degree}; }
    static OpDesc CompB(CompConfig cfg) { return {Kind::comp_b, 0, 0, cfg}; }
    static OpDesc ReluApprox(CompConfig cfg) { return {Kind::relu_approx, 0, 0, cfg}; }
};

/// Total levels a pipeline consumes. Choosing
/// log_modulus >= log_scale * (estimate + 1) + slack guarantees no
/// DepthExceeded along the way.
inline int depth_estimate(const std::vector<OpDesc>& pipeline) {
    int total = 0;
    for (const auto& op : pipeline) {
        switch (op.kind) {
            case OpDesc::Kind::rot_add: break;
            case OpDesc::Kind::dft_sum:
                if (!is_pow2(op.size)) throw ConfigError("dft_sum size must be a power of two");
                total += ceil_log2(op.size) + 1;
                break;
            case OpDesc::Kind::fc_layer: total += 2; break;
            case OpDesc::Kind::poly_eval: total += poly_eval_depth(op.degree); break;
            case OpDesc::Kind::comp_b: total += comp_b_depth(op.cfg); break;
            case OpDesc::Kind::relu_approx: total += comp_b_depth(op.cfg) + 2; break;
        }
    }
    return total;
}

// -- vector utilities -----------------------------------------------------------

inline std::vector<double> pad_pow2(const std::vector<double>& v, size_t target) {
    if (target < v.size())
        throw SizeError("pad target " + std::to_string(target) + " below vector length " +
                        std::to_string(v.size()));
    if (!is_pow2(target)) throw SizeError("pad target must be a power of two");
    std::vector<double> out = v;
    out.resize(target, 0.0);
    return out;
}

inline SlotVector constant_slots(uint32_t n, double value) {
    return SlotVector(n, {value, 0.0});
}

// -- summation -------------------------------------------------------------------

/// Alg. "rotate and add": log2(size) rounds of c += Rot(c, 2^i), i from k-1
/// down to 0. Consumes no levels. Slot 0 ends up with the sum of the first
/// `size` slots; at size == n the sum is broadcast to every slot. For
/// size < n the caller must keep slots >= size at zero (checked on the clear
/// backend when debug checks are on).
inline CipherHandle rot_add(const EvalContext& ctx, const CipherHandle& c, uint32_t size) {
    const uint32_t n = c.slot_count;
    if (!is_pow2(size) || size > n)
        throw SizeError("rot_add size must be a power of two <= slot count");
    if (size < n && c.backend_tag == BackendTag::clear && debug_checks()) {
        const auto& slots = ClearBackend::peek(c);
        for (uint32_t i = size; i < n; ++i)
            if (slots[i] != std::complex<double>(0.0, 0.0))
                throw ContractViolation("rot_add with size < n requires a zero tail (slot " +
                                        std::to_string(i) + " is nonzero)");
    }
    CipherHandle cur = c;
    for (int i = ceil_log2(size) - 1; i >= 0; --i) {
        CipherHandle rot = ctx.backend.rotate(cur, int64_t(1) << i, ctx.keys);
        cur = ctx.backend.add(cur, rot);
    }
    return cur;
}

/// DFT-based summation baseline: log2(size) radix-2 butterfly stages, each one
/// level (two rotations plus masked twiddle products), then a one-hot mask
/// leaves the total in slot 0 and zeros elsewhere. Costs log2(size)+1 levels.
inline CipherHandle dft_sum(const EvalContext& ctx, const CipherHandle& c, uint32_t size,
                            int radix = 2) {
    if (radix != 2)
        throw ConfigError("dft_sum: only radix 2 is implemented (the radix knob is an "
                          "extension point)");
    const uint32_t n = c.slot_count;
    if (!is_pow2(size) || size > n)
        throw SizeError("dft_sum size must be a power of two <= slot count");
    const int k = ceil_log2(size);
    if (c.level < k + 1)
        throw DepthExceeded("dft_sum at size " + std::to_string(size) + " needs " +
                            std::to_string(k + 1) + " levels, ciphertext has " +
                            std::to_string(c.level));
    const double two_pi = 6.283185307179586476925286766559;
    CipherHandle cur = c;
    for (uint32_t h = size / 2; h >= 1; h /= 2) {
        SlotVector mask_lo(n, {0.0, 0.0});
        SlotVector tw_hi(n, {0.0, 0.0});
        for (uint32_t j = 0; j < size; ++j) {
            uint32_t pos = j % (2 * h);
            if (pos < h) {
                mask_lo[j] = {1.0, 0.0};
            } else {
                double angle = -two_pi * double(pos - h) / double(2 * h);
                tw_hi[j] = {std::cos(angle), std::sin(angle)};
            }
        }
        CipherHandle up = ctx.backend.rotate(cur, h, ctx.keys);
        CipherHandle down = ctx.backend.rotate(cur, int64_t(n) - h, ctx.keys);
        CipherHandle lo = ctx.backend.mult_plain(ctx.backend.add(cur, up), mask_lo);
        CipherHandle hi = ctx.backend.mult_plain(ctx.backend.sub(down, cur), tw_hi);
        cur = ctx.backend.add(lo, hi);
    }
    SlotVector unit(n, {0.0, 0.0});
    unit[0] = {1.0, 0.0};
    return ctx.backend.mult_plain(cur, unit);
}

// -- fully connected layer ---------------------------------------------------------

/// Masked matrix-vector product: each node's row is multiplied in, the
/// products are summed by rotate-and-add, and a one-hot mask drops the sum
/// into the node's slot. Rotation always spans the full slot count so the
/// broadcast covers every mask position (a partial-width rotate-and-add only
/// guarantees slot 0). Costs exactly 2 levels.
inline CipherHandle fc_layer(const EvalContext& ctx, const CipherHandle& c,
                             const std::vector<std::vector<double>>& weights,
                             const std::vector<double>& bias, uint32_t size) {
    const uint32_t n = c.slot_count;
    if (!is_pow2(size) || size > n)
        throw SizeError("fc_layer size must be a power of two <= slot count");
    const size_t m = weights.size();
    if (m == 0 || m > size) throw SizeError("fc_layer needs 1 <= rows <= size");
    for (const auto& row : weights)
        if (row.size() != size)
            throw SizeError("fc_layer weight rows must have length = size (zero-padded)");
    if (bias.size() != m) throw SizeError("fc_layer bias length must equal the row count");
    if (c.level < 2)
        throw DepthExceeded("fc_layer needs 2 levels, ciphertext has " + std::to_string(c.level));

    CipherHandle out;
    for (size_t j = 0; j < m; ++j) {
        SlotVector row(n, {0.0, 0.0});
        for (uint32_t i = 0; i < size; ++i) row[i] = {weights[j][i], 0.0};
        CipherHandle prod = ctx.backend.mult_plain(c, row);
        CipherHandle sum = rot_add(ctx, prod, n);
        SlotVector one_hot(n, {0.0, 0.0});
        one_hot[j] = {1.0, 0.0};
        CipherHandle masked = ctx.backend.mult_plain(sum, one_hot);
        out = j == 0 ? masked : ctx.backend.add(out, masked);
    }
    SlotVector bias_slots(n, {0.0, 0.0});
    for (size_t j = 0; j < m; ++j) bias_slots[j] = {bias[j], 0.0};
    return ctx.backend.add_plain(out, bias_slots);
}

// -- polynomial evaluation -----------------------------------------------------------

namespace detail {

/// Split rule for the binary power basis: x^j = x^hi * x^(j-hi) with hi the
/// largest power of two below j (or j/2 when j is itself a power of two).
/// Shared by the ciphertext evaluator and its scalar mirror so both walk the
/// same multiplication tree.
inline size_t power_split(size_t j) {
    size_t hi = 1;
    while (hi * 2 < j) hi *= 2;
    return hi;
}

inline void collect_powers(size_t j, std::set<size_t>& need) {
    if (j <= 1 || need.count(j)) return;
    need.insert(j);
    size_t hi = power_split(j);
    collect_powers(hi, need);
    collect_powers(j - hi, need);
}

}  // namespace detail

/// Slot-wise polynomial evaluation over the binary power basis:
/// ceil(log2 deg) squaring levels plus one coefficient level.
inline CipherHandle poly_eval(const EvalContext& ctx, const CipherHandle& c,
                              const PolyCoeffs& poly) {
    const int cost = poly_eval_depth(poly.degree());
    if (c.level < cost)
        throw DepthExceeded("poly_eval of degree " + std::to_string(poly.degree()) + " needs " +
                            std::to_string(cost) + " levels, ciphertext has " +
                            std::to_string(c.level));
    const uint32_t n = c.slot_count;
    std::set<size_t> need;
    for (size_t j = 1; j < poly.c.size(); ++j)
        if (poly.c[j] != 0.0) detail::collect_powers(j, need);

    std::map<size_t, CipherHandle> pow;
    pow.emplace(1, c);
    for (size_t j : need) {
        if (j == 1) continue;
        size_t hi = detail::power_split(j);
        pow.emplace(j, ctx.backend.mult(pow.at(hi), pow.at(j - hi), ctx.keys));
    }

    CipherHandle acc;
    bool have = false;
    for (size_t j = 1; j < poly.c.size(); ++j) {
        if (poly.c[j] == 0.0) continue;
        CipherHandle term = ctx.backend.mult_plain(pow.at(j), constant_slots(n, poly.c[j]));
        acc = have ? ctx.backend.add(acc, term) : term;
        have = true;
    }
    if (poly.c[0] != 0.0) acc = ctx.backend.add_plain(acc, constant_slots(n, poly.c[0]));
    return acc;
}

/// Scalar mirror of poly_eval: identical multiplication tree and summation
/// order, so the clear backend at zero noise reproduces it bit for bit.
inline double poly_eval_scalar(double x, const PolyCoeffs& poly) {
    std::set<size_t> need;
    for (size_t j = 1; j < poly.c.size(); ++j)
        if (poly.c[j] != 0.0) detail::collect_powers(j, need);
    std::map<size_t, double> pow;
    pow.emplace(1, x);
    for (size_t j : need) {
        if (j == 1) continue;
        size_t hi = detail::power_split(j);
        pow.emplace(j, pow.at(hi) * pow.at(j - hi));
    }
    double acc = 0.0;
    bool have = false;
    for (size_t j = 1; j < poly.c.size(); ++j) {
        if (poly.c[j] == 0.0) continue;
        double term = pow.at(j) * poly.c[j];
        acc = have ? acc + term : term;
        have = true;
    }
    if (poly.c[0] != 0.0) acc = acc + poly.c[0];
    return acc;
}

// -- activations ------------------------------------------------------------------

/// Fixed degree-8 LeakyReLU replacement (valid on [-1, 1]; the degree-8 term
/// dominates outside).
inline CipherHandle leaky_relu_approx(const EvalContext& ctx, const CipherHandle& c) {
    return poly_eval(ctx, c, leaky_relu_coeffs());
}

inline double leaky_relu_approx_scalar(double x) {
    return poly_eval_scalar(x, leaky_relu_coeffs());
}

/// Sign-composition comparison: squash x = a - b with g_n (d_g times), polish
/// with f_n (d_f times), then map to (x+1)/2. Output tends to 1 where a > b,
/// 0 where a < b, and is exactly 0.5 at a = b (the compositions are odd).
/// Caller must keep a - b within [-1, 1] slot-wise.
inline CipherHandle comp_b(const EvalContext& ctx, const CipherHandle& a, const CipherHandle& b,
                           const CompConfig& cfg) {
    const int cost = comp_b_depth(cfg);
    if (std::min(a.level, b.level) < cost)
        throw DepthExceeded("comp_b needs " + std::to_string(cost) + " levels, inputs have " +
                            std::to_string(std::min(a.level, b.level)));
    const uint32_t n = a.slot_count;
    CipherHandle x = ctx.backend.sub(a, b);
    for (int i = 0; i < cfg.d_g; ++i) x = poly_eval(ctx, x, comp_g(cfg.n_index));
    for (int i = 0; i < cfg.d_f; ++i) x = poly_eval(ctx, x, comp_f(cfg.n_index));
    x = ctx.backend.mult_plain(x, constant_slots(n, 0.5));
    return ctx.backend.add_plain(x, constant_slots(n, 0.5));
}

inline double comp_b_scalar(double a, double b, const CompConfig& cfg) {
    cfg.validate();
    double x = a - b;
    for (int i = 0; i < cfg.d_g; ++i) x = poly_eval_scalar(x, comp_g(cfg.n_index));
    for (int i = 0; i < cfg.d_f; ++i) x = poly_eval_scalar(x, comp_f(cfg.n_index));
    x = x * 0.5;
    return x + 0.5;
}

/// ReLU via the comparator: relu(x) ~= x * comp_b(x/B, 0). The 1/B prescale
/// keeps the comparator input inside [-1, 1]; it cannot flip which slots are
/// active since B > 0. Costs comp_b + 2 levels.
inline CipherHandle relu_approx(const EvalContext& ctx, const CipherHandle& c,
                                const CompConfig& cfg, double bound) {
    if (!(bound > 0.0)) throw ConfigError("relu_approx bound must be positive");
    const int cost = comp_b_depth(cfg) + 2;
    if (c.level < cost)
        throw DepthExceeded("relu_approx needs " + std::to_string(cost) + " levels, input has " +
                            std::to_string(c.level));
    const uint32_t n = c.slot_count;
    CipherHandle scaled = ctx.backend.mult_plain(c, constant_slots(n, 1.0 / bound));
    CipherHandle gate = comp_b(ctx, scaled, ctx.backend.zero(scaled.level), cfg);
    return ctx.backend.mult(c, gate, ctx.keys);
}

inline double relu_approx_scalar(double x, const CompConfig& cfg, double bound) {
    if (!(bound > 0.0)) throw ConfigError("relu_approx bound must be positive");
    double scaled = x * (1.0 / bound);
    double gate = comp_b_scalar(scaled, 0.0, cfg);
    return x * gate;
}

}  // namespace fhed::heops
