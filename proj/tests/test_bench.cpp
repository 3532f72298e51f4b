#include <catch2/catch_amalgamated.hpp>
#include <sstream>

#include "fhed/bench.hpp"
#include "fhed/fhed.hpp"

using namespace fhed;
using namespace fhed::bench;

TEST_CASE("report formulas match the caption definitions") {
    CHECK(relative_pct(2.0, 1.0) == 100.0);
    CHECK(relative_pct(1.0, 2.0) == -50.0);
    CHECK(relative_pct(0.0, 0.0) == 0.0);
    CHECK(std::isinf(relative_pct(1.0, 0.0)));
}

TEST_CASE("clear backend at zero noise sums exactly") {
    HEParams p{5, 40, 40 * 7, 0.0};
    ClearBackend be(p);
    auto ks = be.keygen(3);
    auto records = bench_sum(be, ks, {8, 16, 32}, 10, 99);
    REQUIRE(records.size() == 6);
    for (const auto& r : records) {
        CHECK_FALSE(r.depth_exceeded);
        if (r.method == "rot_add") CHECK(r.max_abs_error == 0.0);
        CHECK(r.trials == 10);
    }
}

TEST_CASE("error columns are deterministic under a fixed seed") {
    HEParams p{4, 40, 40 * 6, 1e-7};
    ClearBackend be1(p), be2(p);
    auto k1 = be1.keygen(4);
    auto k2 = be2.keygen(4);
    auto r1 = bench_sum(be1, k1, {8, 16}, 10, 1234);
    auto r2 = bench_sum(be2, k2, {8, 16}, 10, 1234);
    REQUIRE(r1.size() == r2.size());
    for (size_t i = 0; i < r1.size(); ++i) {
        CHECK(r1[i].max_abs_error == r2[i].max_abs_error);
        CHECK(r1[i].mean_abs_error == r2[i].mean_abs_error);
        // timing columns are exempt from determinism
    }
}

TEST_CASE("depth exhaustion is recorded per cell, not thrown") {
    HEParams p{4, 40, 120, 0.0};  // budget 2: dft at 16 needs 5 levels
    ClearBackend be(p);
    auto ks = be.keygen(5);
    auto records = bench_sum(be, ks, {16}, 10, 7);
    REQUIRE(records.size() == 2);
    CHECK_FALSE(records[0].depth_exceeded);  // rot_add
    CHECK(records[1].depth_exceeded);        // dft_sum

    std::ostringstream csv;
    write_sum_csv(records, csv);
    CHECK(csv.str().find("depth_exceeded") != std::string::npos);

    auto rows = derive_sum_report(records);
    CHECK(rows.empty());  // no comparable pair
}

TEST_CASE("csv layouts") {
    HEParams p{3, 40, 200, 0.0};
    ClearBackend be(p);
    auto ks = be.keygen(6);
    auto records = bench_sum(be, ks, {8}, 10, 42);
    std::ostringstream csv;
    write_sum_csv(records, csv);
    CHECK(csv.str().rfind("method,size,trials,max_abs_error,mean_abs_error,mean_time_s,"
                          "log_slots,log_scale,log_modulus,seed\n", 0) == 0);

    auto rows = derive_sum_report(records);
    std::ostringstream rep;
    write_report_csv(rows, rep);
    CHECK(rep.str().rfind("size,relative_error_pct,relative_speedup_pct\n", 0) == 0);
}

TEST_CASE("identical activation pairs have zero MAE, mismatched pairs do not") {
    auto spec = model::synth_net(21, {10, 8, 5});
    auto data = model::synth_dataset(spec, 21, 15);
    auto rows = bench_mae(spec, data);
    REQUIRE(rows.size() == 4);

    using AK = model::ActivationKind;
    CHECK(rows[1].train == AK::leaky_relu_poly);
    CHECK(rows[1].mae == 0.0);
    CHECK(rows[3].train == AK::relu_approx);
    CHECK(rows[3].mae == 0.0);
    CHECK(rows[0].mae > 0.0);
    CHECK(rows[2].mae > 0.0);

    // independent scalar-oracle recomputation of the (relu_exact, relu_approx) row
    double total = 0.0;
    size_t count = 0;
    for (const auto& s : data) {
        auto x = model::encode_symptoms(s.response, spec);
        std::vector<double> cur(x.begin(), x.begin() + 10);
        const auto& lay = spec.layers[0];
        std::vector<double> next(lay.rows);
        for (size_t j = 0; j < lay.rows; ++j) {
            double pre = lay.bias[j];
            for (size_t i = 0; i < lay.cols; ++i) pre += lay.w(j, i) * cur[i];
            double relu = pre > 0 ? pre : 0.0;
            double approx = heops::relu_approx_scalar(pre, lay.activation.cfg, lay.activation.bound);
            total += std::abs(relu - approx);
            ++count;
            next[j] = relu;
        }
    }
    CHECK(rows[2].mae == total / double(count));

    std::ostringstream csv;
    write_mae_csv(rows, csv);
    CHECK(csv.str().find("relu_exact,relu_approx,") != std::string::npos);
}

TEST_CASE("agreement is exact on the noiseless clear backend") {
    auto spec = model::synth_net(31, {12, 8, 5});
    int need = heops::depth_estimate(model::pipeline_of(spec));
    HEParams p{heops::ceil_log2(spec.padded_size), 40, 40 * (need + 1), 0.0};
    ClearBackend be(p);
    auto ks = be.keygen(8);
    auto data = model::synth_dataset(spec, 31, 12);
    auto rep = bench_agreement(be, ks, spec, data);
    CHECK(rep.samples == 12);
    CHECK(rep.failures == 0);
    CHECK(rep.agreed == 12);
    CHECK(rep.agreement_pct() == 100.0);
    CHECK(rep.max_logit_dev == 0.0);
}

TEST_CASE("agreement never improves as injected noise grows") {
    auto spec = model::synth_net(37, {12, 8, 5});
    int need = heops::depth_estimate(model::pipeline_of(spec));
    auto data = model::synth_dataset(spec, 37, 30);

    double prev = 101.0;
    for (double noise : {0.0, 1e-7, 1e-5, 1e-3, 1e-1}) {
        HEParams p{heops::ceil_log2(spec.padded_size), 40, 40 * (need + 1), noise};
        ClearBackend be(p);
        auto ks = be.keygen(9);
        auto rep = bench_agreement(be, ks, spec, data);
        INFO("noise " << noise << " -> agreement " << rep.agreement_pct());
        CHECK(rep.agreement_pct() <= prev);
        prev = rep.agreement_pct();
    }
    CHECK(prev < 100.0);  // the top noise level must actually disturb the argmax
}
