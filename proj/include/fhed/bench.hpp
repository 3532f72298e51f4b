#pragma once

#include <limits>

#include <chrono>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "fhed/heops.hpp"
#include "fhed/model.hpp"

namespace fhed::bench {

/// One (method, size) measurement cell. Errors are measured against the
/// plaintext pairwise summation oracle, never against the other method.
struct BenchRecord {
    std::string method;  // "rot_add" or "dft_sum"
    uint32_t size = 0;
    int trials = 0;
    double max_abs_error = 0.0;
    double mean_abs_error = 0.0;
    double mean_time_s = 0.0;
    HEParams params;
    uint64_t seed = 0;
    bool depth_exceeded = false;
};

struct SumReportRow {
    uint32_t size = 0;
    double relative_error_pct = 0.0;    // (err_DFT - err_RA) / err_RA * 100
    double relative_speedup_pct = 0.0;  // (T_DFT - T_RA) / T_RA * 100
};

inline double relative_pct(double dft, double rot) {
    if (rot == 0.0) return dft == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return (dft - rot) / rot * 100.0;
}

/// Pairwise-halving sum over the first `size` entries: the association order
/// rotate-and-add produces, hence the exact-arithmetic oracle.
inline double summation_oracle(const std::vector<double>& v, size_t size) {
    std::vector<double> w(v.begin(), v.begin() + long(size));
    size_t len = size;
    while (len > 1) {
        size_t half = len / 2;
        for (size_t i = 0; i < half; ++i) w[i] += w[i + half];
        len = half;
    }
    return w[0];
}

/// Error/timing study of the two summation methods. Per size: `trials`
/// uniform [-1,1] vectors, each fed to BOTH methods from the same input
/// ciphertext (a paired design). Inputs are trivial (noiseless) ciphertexts
/// so the recorded error is the summation method's own, not the encryptor's;
/// end-to-end error under real encryption is the precision criterion's job.
/// Timing covers evaluation only, single-threaded, two warm-up runs dropped.
inline std::vector<BenchRecord> bench_sum(const Backend& backend, const KeySet& keys,
                                          const std::vector<uint32_t>& sizes, int trials,
                                          uint64_t seed) {
    if (trials < 10) throw ConfigError("bench_sum needs at least 10 trials");
    const uint32_t n = backend.slot_count();
    heops::EvalContext ctx{backend, keys.eval};
    std::vector<BenchRecord> records;

    bool saved_checks = heops::debug_checks();
    heops::set_debug_checks(false);  // keep tail scans out of the timed path
    for (uint32_t size : sizes) {
        if (size > n) throw SizeError("bench size exceeds slot count");
        BenchRecord ra, dft;
        ra.method = "rot_add";
        dft.method = "dft_sum";
        for (BenchRecord* r : {&ra, &dft}) {
            r->size = size;
            r->trials = trials;
            r->params = backend.params();
            r->seed = seed;
        }
        std::mt19937_64 rng(rng::mix(seed, size));
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        double ra_time = 0.0, ra_err = 0.0, dft_time = 0.0, dft_err = 0.0;
        for (int t = -2; t < trials; ++t) {  // t < 0: warm-up
            std::vector<double> v(n, 0.0);
            for (uint32_t i = 0; i < size; ++i) v[i] = dist(rng);
            auto ct = backend.trivial_cipher(to_slots(v), backend.params().depth_budget());
            double expect = summation_oracle(v, size);

            auto t0 = std::chrono::steady_clock::now();
            auto sum_ra = heops::rot_add(ctx, ct, size);
            auto t1 = std::chrono::steady_clock::now();
            if (t >= 0) {
                ra_time += std::chrono::duration<double>(t1 - t0).count();
                double err = std::abs(backend.decrypt(sum_ra, keys.secret)[0] -
                                      std::complex<double>(expect, 0.0));
                ra_err += err;
                ra.max_abs_error = std::max(ra.max_abs_error, err);
            }

            if (dft.depth_exceeded) continue;
            try {
                auto t2 = std::chrono::steady_clock::now();
                auto sum_dft = heops::dft_sum(ctx, ct, size);
                auto t3 = std::chrono::steady_clock::now();
                if (t >= 0) {
                    dft_time += std::chrono::duration<double>(t3 - t2).count();
                    double err = std::abs(backend.decrypt(sum_dft, keys.secret)[0] -
                                          std::complex<double>(expect, 0.0));
                    dft_err += err;
                    dft.max_abs_error = std::max(dft.max_abs_error, err);
                }
            } catch (const DepthExceeded&) {
                dft.depth_exceeded = true;  // reported per record, not fatal
            }
        }
        ra.mean_abs_error = ra_err / trials;
        ra.mean_time_s = ra_time / trials;
        if (!dft.depth_exceeded) {
            dft.mean_abs_error = dft_err / trials;
            dft.mean_time_s = dft_time / trials;
        }
        records.push_back(std::move(ra));
        records.push_back(std::move(dft));
    }
    heops::set_debug_checks(saved_checks);
    return records;
}

inline std::vector<SumReportRow> derive_sum_report(const std::vector<BenchRecord>& records) {
    std::vector<SumReportRow> rows;
    for (size_t i = 0; i + 1 < records.size(); i += 2) {
        const BenchRecord& ra = records[i];
        const BenchRecord& dft = records[i + 1];
        if (ra.method != "rot_add" || dft.method != "dft_sum" || ra.size != dft.size)
            throw ConfigError("bench records out of order");
        if (ra.depth_exceeded || dft.depth_exceeded) continue;
        SumReportRow row;
        row.size = ra.size;
        row.relative_error_pct = relative_pct(dft.max_abs_error, ra.max_abs_error);
        row.relative_speedup_pct = relative_pct(dft.mean_time_s, ra.mean_time_s);
        rows.push_back(row);
    }
    return rows;
}

inline void write_sum_csv(const std::vector<BenchRecord>& records, std::ostream& out) {
    out << "method,size,trials,max_abs_error,mean_abs_error,mean_time_s,log_slots,log_scale,"
           "log_modulus,seed\n";
    for (const auto& r : records) {
        if (r.depth_exceeded) {
            out << r.method << ',' << r.size << ',' << r.trials << ",depth_exceeded,depth_exceeded,"
                << "depth_exceeded," << r.params.log_slots << ',' << r.params.log_scale << ','
                << r.params.log_modulus << ',' << r.seed << '\n';
            continue;
        }
        out << r.method << ',' << r.size << ',' << r.trials << ',' << r.max_abs_error << ','
            << r.mean_abs_error << ',' << r.mean_time_s << ',' << r.params.log_slots << ','
            << r.params.log_scale << ',' << r.params.log_modulus << ',' << r.seed << '\n';
    }
}

inline void write_report_csv(const std::vector<SumReportRow>& rows, std::ostream& out) {
    out << "size,relative_error_pct,relative_speedup_pct\n";
    for (const auto& r : rows)
        out << r.size << ',' << r.relative_error_pct << ',' << r.relative_speedup_pct << '\n';
}

// -- activation MAE (training-vs-inference activation mismatch) -----------------

struct MaeRow {
    model::ActivationKind train;
    model::ActivationKind infer;
    double mae = 0.0;
    size_t samples = 0;
};

/// Propagate each sample with the train-time activation and accumulate the
/// mean absolute difference against the inference-time approximation at every
/// activation site.
inline MaeRow bench_mae_pair(const model::NetworkSpec& spec,
                             const std::vector<model::Sample>& dataset,
                             model::ActivationKind train, model::ActivationKind infer) {
    MaeRow row{train, infer, 0.0, 0};
    double total = 0.0;
    size_t count = 0;
    for (const auto& s : dataset) {
        auto x = model::encode_symptoms(s.response, spec);
        std::vector<double> cur(x.begin(), x.begin() + long(spec.input_dim()));
        for (size_t l = 0; l + 1 < spec.layers.size(); ++l) {
            const auto& lay = spec.layers[l];
            model::ActivationSpec train_act = lay.activation;
            train_act.kind = train;
            model::ActivationSpec infer_act = lay.activation;
            infer_act.kind = infer;
            std::vector<double> next(lay.rows);
            for (size_t j = 0; j < lay.rows; ++j) {
                double pre = lay.bias[j];
                for (size_t i = 0; i < lay.cols; ++i) pre += lay.w(j, i) * cur[i];
                double t = train == model::ActivationKind::relu_exact ||
                                   train == model::ActivationKind::leaky_relu_exact
                               ? model::detail::exact_activation(pre, train_act)
                               : model::detail::approx_activation(pre, train_act);
                double v = infer == model::ActivationKind::relu_exact ||
                                   infer == model::ActivationKind::leaky_relu_exact
                               ? model::detail::exact_activation(pre, infer_act)
                               : model::detail::approx_activation(pre, infer_act);
                total += std::abs(t - v);
                ++count;
                next[j] = t;  // propagate the train-time value
            }
            cur = std::move(next);
        }
    }
    row.mae = count ? total / double(count) : 0.0;
    row.samples = dataset.size();
    return row;
}

/// The four-row table: every train/infer activation pairing of the leaky and
/// comparator ReLU families.
inline std::vector<MaeRow> bench_mae(const model::NetworkSpec& spec,
                                     const std::vector<model::Sample>& dataset) {
    using AK = model::ActivationKind;
    return {
        bench_mae_pair(spec, dataset, AK::leaky_relu_exact, AK::leaky_relu_poly),
        bench_mae_pair(spec, dataset, AK::leaky_relu_poly, AK::leaky_relu_poly),
        bench_mae_pair(spec, dataset, AK::relu_exact, AK::relu_approx),
        bench_mae_pair(spec, dataset, AK::relu_approx, AK::relu_approx),
    };
}

inline void write_mae_csv(const std::vector<MaeRow>& rows, std::ostream& out) {
    out << "train_activation,inference_activation,mae,samples\n";
    for (const auto& r : rows)
        out << model::activation_name(r.train) << ',' << model::activation_name(r.infer) << ','
            << r.mae << ',' << r.samples << '\n';
}

// -- encrypted-vs-plaintext argmax agreement -------------------------------------

struct AgreementReport {
    size_t samples = 0;
    size_t agreed = 0;
    size_t failures = 0;  // samples that raised instead of producing logits
    double max_logit_dev = 0.0;
    double mean_logit_dev = 0.0;

    double agreement_pct() const {
        return samples ? 100.0 * double(agreed) / double(samples) : 0.0;
    }
};

/// Runs the encrypted pipeline against the approx-mode plaintext oracle and
/// reports argmax agreement plus the logit deviation distribution.
inline AgreementReport bench_agreement(const Backend& backend, const KeySet& keys,
                                       const model::NetworkSpec& spec,
                                       const std::vector<model::Sample>& dataset) {
    heops::EvalContext ctx{backend, keys.eval};
    AgreementReport rep;
    double dev_total = 0.0;
    for (const auto& s : dataset) {
        ++rep.samples;
        try {
            auto x = model::encode_symptoms(s.response, spec);
            auto ct = backend.encrypt(to_slots(x), keys.public_key);
            auto out = backend.decrypt(model::encrypted_infer(ctx, spec, ct), keys.secret);
            std::vector<double> logits(spec.output_dim());
            for (size_t j = 0; j < logits.size(); ++j) logits[j] = out[j].real();
            auto enc_pred = model::to_prediction(std::move(logits), spec.output_labels);
            auto ora_pred = model::plaintext_infer(spec, x, model::InferMode::approx);
            if (enc_pred.argmax_index == ora_pred.argmax_index) ++rep.agreed;
            double dev = 0.0;
            for (size_t j = 0; j < spec.output_dim(); ++j)
                dev = std::max(dev, std::abs(enc_pred.logits[j] - ora_pred.logits[j]));
            rep.max_logit_dev = std::max(rep.max_logit_dev, dev);
            dev_total += dev;
        } catch (const Error&) {
            ++rep.failures;
        }
    }
    size_t ok = rep.samples - rep.failures;
    rep.mean_logit_dev = ok ? dev_total / double(ok) : 0.0;
    return rep;
}

}  // namespace fhed::bench
