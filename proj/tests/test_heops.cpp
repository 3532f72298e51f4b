#include <catch2/catch_amalgamated.hpp>

#include "fhed/fhed.hpp"
#include "testutil.hpp"

using namespace fhed;
using namespace fhed::heops;

namespace {

struct Fixture {
    HEParams params;
    ClearBackend be;
    KeySet ks;

    explicit Fixture(int log_slots, int log_modulus = 2000, double noise = 0.0)
        : params{log_slots, 40, log_modulus, noise}, be(params), ks(be.keygen(7)) {}

    EvalContext ctx() const { return {be, ks.eval}; }

    CipherHandle enc(const std::vector<double>& v) const {
        return be.encrypt(to_slots(v), ks.public_key);
    }
    std::vector<double> dec(const CipherHandle& c) const {
        return real_parts(be.decrypt(c, ks.secret));
    }
};

}  // namespace

TEST_CASE("rot_add broadcasts the total at full size") {
    Fixture f(2);
    auto out = f.dec(rot_add(f.ctx(), f.enc({1, 2, 3, 4}), 4));
    for (double x : out) CHECK(x == 10.0);

    auto zeros = f.dec(rot_add(f.ctx(), f.enc({0, 0, 0, 0}), 4));
    for (double x : zeros) CHECK(x == 0.0);
}

TEST_CASE("rot_add consumes no levels and needs no mult keys") {
    Fixture f(3);
    auto c = f.enc({1, 1, 1, 1, 1, 1, 1, 1});
    auto out = rot_add(f.ctx(), c, 8);
    CHECK(out.level == c.level);
}

TEST_CASE("rot_add partial size sums the prefix into slot 0") {
    Fixture f(3);
    std::vector<double> v{1.5, -2.25, 4.0, 0.5, 0, 0, 0, 0};
    auto out = f.dec(rot_add(f.ctx(), f.enc(v), 4));
    CHECK(out[0] == testutil::pairwise_sum({1.5, -2.25, 4.0, 0.5}));
}

TEST_CASE("rot_add slot 0 equals the pairwise sum for random vectors") {
    std::mt19937_64 rng(2024);
    for (int logn = 3; logn <= 6; ++logn) {
        Fixture f(logn);
        size_t n = size_t(1) << logn;
        for (int t = 0; t < 10; ++t) {
            auto v = testutil::random_reals(rng, n);
            auto out = f.dec(rot_add(f.ctx(), f.enc(v), uint32_t(n)));
            double expect = testutil::pairwise_sum(v);
            for (double x : out) CHECK(x == expect);
        }
    }
}

TEST_CASE("rot_add rejects bad sizes and nonzero tails") {
    Fixture f(3);
    auto c = f.enc({1, 2, 3, 4, 5, 6, 7, 8});
    CHECK_THROWS_AS(rot_add(f.ctx(), c, 3), SizeError);
    CHECK_THROWS_AS(rot_add(f.ctx(), c, 16), SizeError);
    // nonzero tail with size < n violates the documented contract
    CHECK_THROWS_AS(rot_add(f.ctx(), c, 4), ContractViolation);
    set_debug_checks(false);
    CHECK_NOTHROW(rot_add(f.ctx(), c, 4));
    set_debug_checks(true);
}

TEST_CASE("rot_add is linear on exactly representable data") {
    std::mt19937_64 rng(5);
    Fixture f(4);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> a(16), b(16);
        for (auto& x : a) x = double(int(rng() % 17) - 8);
        for (auto& x : b) x = double(int(rng() % 17) - 8);
        double alpha = double(int(rng() % 7) - 3), beta = double(int(rng() % 7) - 3);
        std::vector<double> combo(16);
        for (size_t i = 0; i < 16; ++i) combo[i] = alpha * a[i] + beta * b[i];
        auto lhs = f.dec(rot_add(f.ctx(), f.enc(combo), 16));
        auto ra = f.dec(rot_add(f.ctx(), f.enc(a), 16));
        auto rb = f.dec(rot_add(f.ctx(), f.enc(b), 16));
        for (size_t i = 0; i < 16; ++i) CHECK(lhs[i] == alpha * ra[i] + beta * rb[i]);
    }
}

TEST_CASE("dft_sum leaves the total in slot 0 and zeros elsewhere") {
    Fixture f(2);
    auto out = f.dec(dft_sum(f.ctx(), f.enc({1, 2, 3, 4}), 4));
    CHECK(out[0] == 10.0);
    for (size_t i = 1; i < 4; ++i) CHECK(out[i] == 0.0);

    auto zeros = f.dec(dft_sum(f.ctx(), f.enc({0, 0, 0, 0}), 4));
    for (double x : zeros) CHECK(x == 0.0);
}

TEST_CASE("dft_sum costs log2(size)+1 levels and enforces them") {
    Fixture f(3);
    auto c = f.enc({1, 2, 3, 4, 5, 6, 7, 8});
    auto out = dft_sum(f.ctx(), c, 8);
    CHECK(c.level - out.level == 4);

    HEParams tight{3, 40, 120, 0.0};  // budget 2 < log2(8)+1
    ClearBackend be(tight);
    auto ks = be.keygen(1);
    EvalContext ctx{be, ks.eval};
    auto ct = be.encrypt(to_slots({1, 2, 3, 4, 5, 6, 7, 8}), ks.public_key);
    CHECK_THROWS_AS(dft_sum(ctx, ct, 8), DepthExceeded);
    CHECK_NOTHROW(rot_add(ctx, ct, 8));
    CHECK_THROWS_AS(dft_sum(ctx, ct, 8, 4), ConfigError);  // only radix 2
}

TEST_CASE("dft_sum agrees with rot_add slot 0 on random data") {
    std::mt19937_64 rng(77);
    for (int logn = 3; logn <= 5; ++logn) {
        Fixture f(logn);
        size_t n = size_t(1) << logn;
        for (int t = 0; t < 5; ++t) {
            auto v = testutil::random_reals(rng, n);
            auto a = f.dec(rot_add(f.ctx(), f.enc(v), uint32_t(n)));
            auto d = f.dec(dft_sum(f.ctx(), f.enc(v), uint32_t(n)));
            CHECK(std::abs(d[0] - a[0]) < 1e-12);
            for (size_t i = 1; i < n; ++i) CHECK(d[i] == 0.0);
        }
    }
}

TEST_CASE("fc_layer identity and hand-checked example") {
    Fixture f(2);
    std::vector<std::vector<double>> eye{
        {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
    auto out = f.dec(fc_layer(f.ctx(), f.enc({3, 1, 4, 1.5}), eye, {0, 0, 0, 0}, 4));
    CHECK(out == std::vector<double>{3, 1, 4, 1.5});

    std::vector<std::vector<double>> w{{1, 1, 0, 0}, {2, 0, 0, 0}};
    auto out2 = f.dec(fc_layer(f.ctx(), f.enc({3, 5, 0, 0}), w, {0, 1}, 4));
    CHECK(out2 == std::vector<double>{8, 7, 0, 0});
}

TEST_CASE("fc_layer consumes exactly two levels") {
    Fixture f(2);
    auto c = f.enc({1, 2, 3, 4});
    std::vector<std::vector<double>> w{{1, 2, 3, 4}};
    auto out = fc_layer(f.ctx(), c, w, {0}, 4);
    CHECK(c.level - out.level == 2);
}

TEST_CASE("fc_layer equals the plaintext matrix product exactly") {
    std::mt19937_64 rng(31337);
    for (int logn : {4, 6}) {
        Fixture f(logn);
        size_t n = size_t(1) << logn;
        for (int t = 0; t < 4; ++t) {
            size_t m = 1 + rng() % n;
            std::vector<std::vector<double>> w(m);
            for (auto& row : w) row = testutil::random_reals(rng, n);
            auto bias = testutil::random_reals(rng, m);
            auto x = testutil::random_reals(rng, n);
            auto out = f.dec(fc_layer(f.ctx(), f.enc(x), w, bias, uint32_t(n)));
            for (size_t j = 0; j < m; ++j) {
                std::vector<double> prod(n);
                for (size_t i = 0; i < n; ++i) prod[i] = w[j][i] * x[i];
                CHECK(out[j] == testutil::pairwise_sum(prod) + bias[j]);
            }
            for (size_t j = m; j < n; ++j) CHECK(out[j] == 0.0);
        }
    }
}

TEST_CASE("fc_layer validates dimensions and depth") {
    Fixture f(2);
    auto c = f.enc({1, 2, 3, 4});
    CHECK_THROWS_AS(fc_layer(f.ctx(), c, {{1, 2, 3}}, {0}, 4), SizeError);
    CHECK_THROWS_AS(fc_layer(f.ctx(), c, {}, {}, 4), SizeError);
    CHECK_THROWS_AS(fc_layer(f.ctx(), c, {{1, 2, 3, 4}}, {0, 0}, 4), SizeError);

    HEParams tight{2, 40, 80, 0.0};  // budget 1 < 2
    ClearBackend be(tight);
    auto ks = be.keygen(1);
    EvalContext ctx{be, ks.eval};
    auto ct = be.encrypt(to_slots({1, 2, 3, 4}), ks.public_key);
    CHECK_THROWS_AS(fc_layer(ctx, ct, {{1, 2, 3, 4}}, {0}, 4), DepthExceeded);
}

TEST_CASE("poly_eval identity costs one level") {
    Fixture f(2);
    auto c = f.enc({0.5, -0.25, 1, 0});
    auto out = poly_eval(f.ctx(), c, PolyCoeffs({0, 1}));
    CHECK(c.level - out.level == 1);
    CHECK(f.dec(out) == std::vector<double>{0.5, -0.25, 1, 0});
}

TEST_CASE("leaky relu polynomial hits the printed endpoints") {
    Fixture f(2);
    auto at0 = f.dec(leaky_relu_approx(f.ctx(), f.enc({0, 0, 0, 0})));
    CHECK(at0[0] == 0.02);

    // direct scalar summation of the printed coefficients at x = 1
    const auto& lk = leaky_relu_coeffs().c;
    double expect = 0.0;
    for (size_t j = 1; j < lk.size(); ++j) expect += lk[j];
    expect += lk[0];
    auto at1 = f.dec(leaky_relu_approx(f.ctx(), f.enc({1, 1, 1, 1})));
    CHECK(at1[0] == expect);
    CHECK(std::abs(at1[0] - 0.98) < 1e-12);
}

TEST_CASE("poly_eval matches Horner within 1e-9 and the scalar mirror exactly") {
    Fixture f(2);
    std::mt19937_64 rng(4242);
    const auto& poly = leaky_relu_coeffs();
    for (int t = 0; t < 250; ++t) {
        auto xs = testutil::random_reals(rng, 4);
        auto out = f.dec(poly_eval(f.ctx(), f.enc(xs), poly));
        for (size_t i = 0; i < 4; ++i) {
            CHECK(out[i] == poly_eval_scalar(xs[i], poly));
            CHECK(std::abs(out[i] - testutil::horner(poly.c, xs[i])) < 1e-9);
        }
    }
}

TEST_CASE("poly_eval level accounting matches the estimate") {
    Fixture f(2);
    for (int deg : {1, 2, 3, 5, 7, 8, 9}) {
        std::vector<double> coeffs(deg + 1, 0.0);
        coeffs[deg] = 1.0;
        coeffs[0] = 0.25;
        auto c = f.enc({0.5, 0.5, 0.5, 0.5});
        auto out = poly_eval(f.ctx(), c, PolyCoeffs(coeffs));
        CHECK(c.level - out.level == poly_eval_depth(deg));
        CHECK(c.level - out.level ==
              depth_estimate({OpDesc::PolyEval(deg)}));
    }
}

TEST_CASE("comparator table values from the printed fractions") {
    CHECK(poly_eval_scalar(1.0, comp_g(1)) == 767.0 / 1024.0);
    CHECK(poly_eval_scalar(1.0, comp_f(1)) == 1.0);
    CHECK(poly_eval_scalar(0.0, comp_g(3)) == 0.0);
}

TEST_CASE("comp_b ties are exactly one half on the clear backend") {
    Fixture f(2);
    CompConfig cfg{3, 3, 3};
    for (double v : {0.0, 0.35, -0.9}) {
        auto a = f.enc({v, v, v, v});
        auto out = f.dec(comp_b(f.ctx(), a, a, cfg));
        for (double x : out) CHECK(x == 0.5);
    }
}

TEST_CASE("comp_b antisymmetry within 1e-9") {
    Fixture f(2);
    CompConfig cfg{3, 2, 2};
    std::mt19937_64 rng(11);
    for (int t = 0; t < 25; ++t) {
        auto av = testutil::random_reals(rng, 4, -0.5, 0.5);
        auto bv = testutil::random_reals(rng, 4, -0.5, 0.5);
        auto ab = f.dec(comp_b(f.ctx(), f.enc(av), f.enc(bv), cfg));
        auto ba = f.dec(comp_b(f.ctx(), f.enc(bv), f.enc(av), cfg));
        for (size_t i = 0; i < 4; ++i) CHECK(std::abs(ab[i] + ba[i] - 1.0) < 1e-9);
    }
}

TEST_CASE("comp_b scalar sweep meets the 0.01 bound on the separated grid") {
    CompConfig cfg{3, 3, 3};
    double worst = 0.0;
    for (double x = 0.05; x <= 1.0; x += 1.0 / 512) {
        worst = std::max(worst, std::abs(comp_b_scalar(x, 0.0, cfg) - 1.0));
        worst = std::max(worst, std::abs(comp_b_scalar(0.0, x, cfg) - 0.0));
    }
    CHECK(worst <= 0.01);
    CHECK(worst <= 1e-9);  // measured headroom of the (3,3,3) composition
}

TEST_CASE("comp_b error is monotone in d_f at fixed n and d_g") {
    double prev = 1.0;
    for (int df = 1; df <= 5; ++df) {
        CompConfig cfg{3, 3, df};
        double worst = 0.0;
        for (double x = 0.05; x <= 1.0; x += 1.0 / 256)
            worst = std::max(worst, std::abs(comp_b_scalar(x, 0.0, cfg) - 1.0));
        CHECK(worst <= prev + 1e-15);
        prev = worst;
    }
}

TEST_CASE("comp_b matches its scalar mirror bit for bit on clear") {
    Fixture f(2);
    CompConfig cfg{2, 2, 2};
    std::mt19937_64 rng(8);
    auto av = testutil::random_reals(rng, 4, -0.5, 0.5);
    auto bv = testutil::random_reals(rng, 4, -0.5, 0.5);
    auto out = f.dec(comp_b(f.ctx(), f.enc(av), f.enc(bv), cfg));
    for (size_t i = 0; i < 4; ++i) CHECK(out[i] == comp_b_scalar(av[i], bv[i], cfg));
}

TEST_CASE("comp_b validates config and depth") {
    Fixture f(2);
    auto a = f.enc({0, 0, 0, 0});
    CHECK_THROWS_AS(comp_b(f.ctx(), a, a, CompConfig{5, 1, 1}), ConfigError);

    HEParams tight{2, 40, 200, 0.0};
    ClearBackend be(tight);
    auto ks = be.keygen(1);
    EvalContext ctx{be, ks.eval};
    auto ct = be.encrypt(SlotVector(4, {0.0, 0.0}), ks.public_key);
    CHECK_THROWS_AS(comp_b(ctx, ct, ct, CompConfig{3, 3, 3}), DepthExceeded);
}

TEST_CASE("relu_approx gates like relu") {
    Fixture f(2);
    CompConfig cfg{3, 3, 3};
    const double bound = 8.0;

    auto at0 = f.dec(relu_approx(f.ctx(), f.enc({0, 0, 0, 0}), cfg, bound));
    CHECK(at0[0] == 0.0);

    auto atB = f.dec(relu_approx(f.ctx(), f.enc({8, 8, 8, 8}), cfg, bound));
    CHECK(std::abs(atB[0] - bound) < 1e-6);

    std::mt19937_64 rng(99);
    double worst = 0.0;
    for (int t = 0; t < 250; ++t) {
        auto xs = testutil::random_reals(rng, 4, -bound, bound);
        auto out = f.dec(relu_approx(f.ctx(), f.enc(xs), cfg, bound));
        for (size_t i = 0; i < 4; ++i) {
            CHECK(out[i] == relu_approx_scalar(xs[i], cfg, bound));
            worst = std::max(worst, std::abs(out[i] - std::max(0.0, xs[i])));
        }
    }
    // frozen regression bound from the dense scalar sweep (worst ~1.2e-3 at B=8)
    CHECK(worst <= 2e-3);

    CHECK_THROWS_AS(relu_approx(f.ctx(), f.enc({0, 0, 0, 0}), cfg, 0.0), ConfigError);
}

TEST_CASE("relu_approx consumes comp_b + 2 levels") {
    Fixture f(2);
    CompConfig cfg{1, 1, 1};
    auto c = f.enc({1, -1, 0.5, 0});
    auto out = relu_approx(f.ctx(), c, cfg, 2.0);
    CHECK(c.level - out.level == comp_b_depth(cfg) + 2);
    CHECK(c.level - out.level == depth_estimate({OpDesc::ReluApprox(cfg)}));
}

TEST_CASE("depth_estimate matches the documented costs") {
    CHECK(depth_estimate({OpDesc::RotAdd()}) == 0);
    CHECK(depth_estimate({OpDesc::FcLayer(), OpDesc::FcLayer()}) == 4);
    CHECK(depth_estimate({OpDesc::DftSum(512)}) == 10);
    CHECK(depth_estimate({OpDesc::PolyEval(8)}) == 4);
    CHECK(depth_estimate({OpDesc::CompB(CompConfig{3, 3, 3})}) == 25);
    CHECK(depth_estimate({OpDesc::ReluApprox(CompConfig{3, 3, 3})}) == 27);
    CHECK_THROWS_AS(depth_estimate({OpDesc::DftSum(3)}), ConfigError);
    CHECK_THROWS_AS(depth_estimate({OpDesc::PolyEval(0)}), ConfigError);
}

TEST_CASE("pad_pow2") {
    std::vector<double> v(266, 1.0);
    auto padded = heops::pad_pow2(v, 512);
    CHECK(padded.size() == 512);
    for (size_t i = 266; i < 512; ++i) CHECK(padded[i] == 0.0);

    CHECK(heops::pad_pow2({1, 2, 3, 4}, 4) == std::vector<double>{1, 2, 3, 4});
    CHECK(heops::pad_pow2({1, 2, 3}, 8) == std::vector<double>{1, 2, 3, 0, 0, 0, 0, 0});
    CHECK_THROWS_AS(heops::pad_pow2(v, 256), SizeError);
    CHECK_THROWS_AS(heops::pad_pow2({1, 2, 3}, 6), SizeError);
}
