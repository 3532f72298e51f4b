#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fhed/heops.hpp"

namespace fhed::model {

enum class ActivationKind { none, relu_exact, relu_approx, leaky_relu_exact, leaky_relu_poly };

inline const char* activation_name(ActivationKind k) {
    switch (k) {
        case ActivationKind::none: return "none";
        case ActivationKind::relu_exact: return "relu_exact";
        case ActivationKind::relu_approx: return "relu_approx";
        case ActivationKind::leaky_relu_exact: return "leaky_relu_exact";
        case ActivationKind::leaky_relu_poly: return "leaky_relu_poly";
    }
    return "?";
}

inline ActivationKind parse_activation(const std::string& s) {
    if (s == "none") return ActivationKind::none;
    if (s == "relu_exact") return ActivationKind::relu_exact;
    if (s == "relu_approx") return ActivationKind::relu_approx;
    if (s == "leaky_relu_exact") return ActivationKind::leaky_relu_exact;
    if (s == "leaky_relu_poly") return ActivationKind::leaky_relu_poly;
    throw ConfigError("unknown activation tag '" + s + "'");
}

struct ActivationSpec {
    ActivationKind kind = ActivationKind::none;
    heops::CompConfig cfg{3, 3, 3};  // relu_approx only
    double bound = 1.0;              // relu_approx: |pre-activation| <= bound
    double slope = 0.1;              // leaky kinds: negative-side slope

    void validate() const {
        if (kind == ActivationKind::relu_approx) {
            cfg.validate();
            if (!(bound > 0.0)) throw ConfigError("relu_approx bound must be positive");
        }
        if ((kind == ActivationKind::leaky_relu_exact || kind == ActivationKind::leaky_relu_poly) &&
            !(slope >= 0.0 && slope < 1.0))
            throw ConfigError("leaky slope must be in [0, 1)");
    }
};

struct LayerSpec {
    size_t rows = 0, cols = 0;
    std::vector<double> weights;  // row-major rows x cols
    std::vector<double> bias;     // rows
    ActivationSpec activation;

    double w(size_t r, size_t c) const { return weights[r * cols + c]; }
};

struct NetworkSpec {
    int version = 1;
    size_t padded_size = 0;
    std::vector<std::string> input_labels;
    std::vector<std::string> output_labels;
    std::vector<LayerSpec> layers;

    size_t input_dim() const { return layers.front().cols; }
    size_t output_dim() const { return layers.back().rows; }

    void validate() const {
        if (layers.empty()) throw ConfigError("network needs at least one layer");
        size_t max_dim = 0;
        for (size_t l = 0; l < layers.size(); ++l) {
            const auto& lay = layers[l];
            if (lay.rows == 0 || lay.cols == 0) throw SizeError("layer with zero dimension");
            if (lay.weights.size() != lay.rows * lay.cols)
                throw SizeError("layer " + std::to_string(l) + ": weights has " +
                                std::to_string(lay.weights.size()) + " entries, expected " +
                                std::to_string(lay.rows * lay.cols));
            if (lay.bias.size() != lay.rows)
                throw SizeError("layer " + std::to_string(l) + ": bias length mismatch");
            for (double v : lay.weights)
                if (!std::isfinite(v)) throw ConfigError("non-finite weight");
            for (double v : lay.bias)
                if (!std::isfinite(v)) throw ConfigError("non-finite bias");
            if (l + 1 < layers.size() && layers[l + 1].cols != lay.rows)
                throw SizeError("dimension chain broken between layers " + std::to_string(l) +
                                " and " + std::to_string(l + 1) + ": " + std::to_string(lay.rows) +
                                " -> " + std::to_string(layers[l + 1].cols));
            lay.activation.validate();
            max_dim = std::max(max_dim, std::max(lay.rows, lay.cols));
        }
        if (layers.back().activation.kind != ActivationKind::none)
            throw ConfigError("last layer must have no activation (argmax on logits)");
        size_t want = 1;
        while (want < max_dim) want <<= 1;
        if (padded_size != want)
            throw SizeError("padded_size must be the smallest power of two covering the widest "
                            "layer (" + std::to_string(want) + "), got " +
                            std::to_string(padded_size));
        if (input_labels.size() != input_dim())
            throw LabelCountError("expected " + std::to_string(input_dim()) +
                                  " input labels, got " + std::to_string(input_labels.size()));
        if (output_labels.size() != output_dim())
            throw LabelCountError("expected " + std::to_string(output_dim()) +
                                  " output labels, got " + std::to_string(output_labels.size()));
        std::map<std::string, int> seen;
        for (const auto& s : input_labels)
            if (++seen[s] > 1) throw LabelCountError("duplicate input label '" + s + "'");
    }
};

struct SymptomResponse {
    std::map<std::string, bool> answers;
};

struct Prediction {
    std::vector<double> logits;
    size_t argmax_index = 0;
    std::string disease_name;
};

/// Argmax with ties broken toward the lowest index.
inline Prediction to_prediction(std::vector<double> logits,
                                const std::vector<std::string>& labels) {
    if (logits.empty()) throw SizeError("empty logits");
    Prediction p;
    p.argmax_index = size_t(std::max_element(logits.begin(), logits.end()) - logits.begin());
    p.disease_name = p.argmax_index < labels.size() ? labels[p.argmax_index] : "";
    p.logits = std::move(logits);
    return p;
}

// -- weights file (JSON) -------------------------------------------------------

inline nlohmann::ordered_json to_json(const NetworkSpec& spec) {
    nlohmann::ordered_json j;
    j["version"] = spec.version;
    j["padded_size"] = spec.padded_size;
    j["input_labels"] = spec.input_labels;
    j["output_labels"] = spec.output_labels;
    j["layers"] = nlohmann::ordered_json::array();
    for (const auto& lay : spec.layers) {
        nlohmann::ordered_json jl;
        jl["rows"] = lay.rows;
        jl["cols"] = lay.cols;
        jl["weights"] = lay.weights;
        jl["bias"] = lay.bias;
        nlohmann::ordered_json ja;
        ja["kind"] = activation_name(lay.activation.kind);
        if (lay.activation.kind == ActivationKind::relu_approx) {
            ja["n"] = lay.activation.cfg.n_index;
            ja["dg"] = lay.activation.cfg.d_g;
            ja["df"] = lay.activation.cfg.d_f;
            ja["bound"] = lay.activation.bound;
        }
        if (lay.activation.kind == ActivationKind::leaky_relu_exact ||
            lay.activation.kind == ActivationKind::leaky_relu_poly)
            ja["slope"] = lay.activation.slope;
        jl["activation"] = ja;
        j["layers"].push_back(jl);
    }
    return j;
}

inline NetworkSpec parse_weights(const nlohmann::json& j) {
    NetworkSpec spec;
    try {
        spec.version = j.at("version").get<int>();
        spec.padded_size = j.at("padded_size").get<size_t>();
        spec.input_labels = j.at("input_labels").get<std::vector<std::string>>();
        spec.output_labels = j.at("output_labels").get<std::vector<std::string>>();
        for (const auto& jl : j.at("layers")) {
            LayerSpec lay;
            lay.rows = jl.at("rows").get<size_t>();
            lay.cols = jl.at("cols").get<size_t>();
            lay.weights = jl.at("weights").get<std::vector<double>>();
            lay.bias = jl.at("bias").get<std::vector<double>>();
            const auto& ja = jl.at("activation");
            lay.activation.kind = parse_activation(ja.at("kind").get<std::string>());
            if (lay.activation.kind == ActivationKind::relu_approx) {
                lay.activation.cfg.n_index = ja.at("n").get<int>();
                lay.activation.cfg.d_g = ja.at("dg").get<int>();
                lay.activation.cfg.d_f = ja.at("df").get<int>();
                lay.activation.bound = ja.at("bound").get<double>();
            }
            if (ja.contains("slope")) lay.activation.slope = ja.at("slope").get<double>();
            spec.layers.push_back(std::move(lay));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("weights file: ") + e.what());
    }
    spec.validate();
    return spec;
}

inline std::string dump_weights(const NetworkSpec& spec) { return to_json(spec).dump() + "\n"; }

inline NetworkSpec load_weights(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open weights file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("weights file " + path + ": " + e.what());
    }
    return parse_weights(j);
}

inline void save_weights(const NetworkSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write weights file " + path);
    out << dump_weights(spec);
}

// -- symptom encoding ------------------------------------------------------------

/// 1.0/0.0 per answer in label order, zero-padded to padded_size. Missing and
/// unknown symptom names are rejected by name.
inline std::vector<double> encode_symptoms(const SymptomResponse& r, const NetworkSpec& spec) {
    std::vector<double> v(spec.input_labels.size());
    size_t used = 0;
    for (size_t i = 0; i < spec.input_labels.size(); ++i) {
        auto it = r.answers.find(spec.input_labels[i]);
        if (it == r.answers.end())
            throw InputError("missing answer for symptom '" + spec.input_labels[i] + "'");
        v[i] = it->second ? 1.0 : 0.0;
        ++used;
    }
    if (used != r.answers.size()) {
        for (const auto& [name, _] : r.answers)
            if (std::find(spec.input_labels.begin(), spec.input_labels.end(), name) ==
                spec.input_labels.end())
                throw InputError("unknown symptom '" + name + "'");
    }
    return heops::pad_pow2(v, spec.padded_size);
}

// -- inference -------------------------------------------------------------------

enum class InferMode { exact, approx };

namespace detail {

inline double exact_activation(double x, const ActivationSpec& a) {
    switch (a.kind) {
        case ActivationKind::none: return x;
        case ActivationKind::relu_exact:
        case ActivationKind::relu_approx: return x > 0.0 ? x : 0.0;
        case ActivationKind::leaky_relu_exact:
        case ActivationKind::leaky_relu_poly: return x > 0.0 ? x : a.slope * x;
    }
    return x;
}

inline double approx_activation(double x, const ActivationSpec& a) {
    switch (a.kind) {
        case ActivationKind::none: return x;
        case ActivationKind::relu_approx: return heops::relu_approx_scalar(x, a.cfg, a.bound);
        case ActivationKind::leaky_relu_poly: return heops::leaky_relu_approx_scalar(x);
        case ActivationKind::relu_exact:
        case ActivationKind::leaky_relu_exact:
            throw ConfigError(std::string("activation '") + activation_name(a.kind) +
                              "' has no homomorphic form; retag it as an approximation");
    }
    return x;
}

/// Slot-level mirror of the masked fully-connected layer: same elementwise
/// products, same rotate-and-add association order, same mask/accumulate
/// sequence. This is what makes the clear backend reproduce approx-mode
/// plaintext inference bit for bit.
inline std::vector<double> fc_slots(const std::vector<double>& x, const LayerSpec& lay) {
    const size_t n = x.size();
    std::vector<double> out;
    std::vector<double> work(n), next(n);
    for (size_t j = 0; j < lay.rows; ++j) {
        for (size_t i = 0; i < n; ++i) work[i] = x[i] * (i < lay.cols ? lay.w(j, i) : 0.0);
        for (size_t s = n / 2; s >= 1; s /= 2) {
            for (size_t t = 0; t < n; ++t) next[t] = work[t] + work[(t + s) % n];
            std::swap(work, next);
        }
        if (j == 0) {
            out.resize(n);
            for (size_t t = 0; t < n; ++t) out[t] = work[t] * (t == 0 ? 1.0 : 0.0);
        } else {
            for (size_t t = 0; t < n; ++t) out[t] = out[t] + work[t] * (t == j ? 1.0 : 0.0);
        }
    }
    for (size_t t = 0; t < n; ++t) out[t] = out[t] + (t < lay.rows ? lay.bias[t] : 0.0);
    return out;
}

}  // namespace detail

/// Reference inference. `exact` runs plain dot products with the true
/// activations; `approx` mirrors the homomorphic evaluator's arithmetic (same
/// summation trees and scalar polynomial paths) and is the agreement oracle
/// for the encrypted pipeline.
inline Prediction plaintext_infer(const NetworkSpec& spec, const std::vector<double>& x,
                                  InferMode mode) {
    if (x.size() != spec.padded_size)
        throw SizeError("input length " + std::to_string(x.size()) + " != padded size " +
                        std::to_string(spec.padded_size));
    if (mode == InferMode::exact) {
        std::vector<double> cur(x.begin(), x.begin() + long(spec.input_dim()));
        for (const auto& lay : spec.layers) {
            std::vector<double> next(lay.rows);
            for (size_t j = 0; j < lay.rows; ++j) {
                double acc = 0.0;
                for (size_t i = 0; i < lay.cols; ++i) acc += lay.w(j, i) * cur[i];
                next[j] = detail::exact_activation(acc + lay.bias[j], lay.activation);
            }
            cur = std::move(next);
        }
        return to_prediction(std::move(cur), spec.output_labels);
    }
    std::vector<double> cur = x;
    for (const auto& lay : spec.layers) {
        cur = detail::fc_slots(cur, lay);
        if (lay.activation.kind != ActivationKind::none)
            for (auto& v : cur) v = detail::approx_activation(v, lay.activation);
    }
    return to_prediction(std::vector<double>(cur.begin(), cur.begin() + long(spec.output_dim())),
                         spec.output_labels);
}

/// Level costs of the network as a heops pipeline.
inline std::vector<heops::OpDesc> pipeline_of(const NetworkSpec& spec) {
    std::vector<heops::OpDesc> ops;
    for (const auto& lay : spec.layers) {
        ops.push_back(heops::OpDesc::FcLayer());
        switch (lay.activation.kind) {
            case ActivationKind::none: break;
            case ActivationKind::relu_approx:
                ops.push_back(heops::OpDesc::ReluApprox(lay.activation.cfg));
                break;
            case ActivationKind::leaky_relu_poly:
                ops.push_back(heops::OpDesc::PolyEval(heops::leaky_relu_coeffs().degree()));
                break;
            default:
                throw ConfigError(std::string("activation '") +
                                  activation_name(lay.activation.kind) +
                                  "' cannot run under encryption");
        }
    }
    return ops;
}

/// Blind evaluation: fc layers with masked accumulation plus polynomial
/// activations. Logits land in slots 0..output_dim-1; the caller decrypts
/// and takes the argmax.
inline CipherHandle encrypted_infer(const heops::EvalContext& ctx, const NetworkSpec& spec,
                                    const CipherHandle& ct) {
    if (ct.slot_count != spec.padded_size)
        throw ConfigError("ciphertext has " + std::to_string(ct.slot_count) +
                          " slots; the network needs exactly " +
                          std::to_string(spec.padded_size));
    int need = heops::depth_estimate(pipeline_of(spec));
    if (ct.level < need)
        throw DepthExceeded(
            "network needs " + std::to_string(need) + " levels but the ciphertext has " +
            std::to_string(ct.level) + "; raise log_modulus to at least log_scale*" +
            std::to_string(need + 1));
    CipherHandle cur = ct;
    for (const auto& lay : spec.layers) {
        std::vector<std::vector<double>> rows(lay.rows);
        for (size_t j = 0; j < lay.rows; ++j) {
            rows[j].assign(spec.padded_size, 0.0);
            for (size_t i = 0; i < lay.cols; ++i) rows[j][i] = lay.w(j, i);
        }
        cur = heops::fc_layer(ctx, cur, rows, lay.bias, uint32_t(spec.padded_size));
        switch (lay.activation.kind) {
            case ActivationKind::none: break;
            case ActivationKind::relu_approx:
                cur = heops::relu_approx(ctx, cur, lay.activation.cfg, lay.activation.bound);
                break;
            case ActivationKind::leaky_relu_poly:
                cur = heops::leaky_relu_approx(ctx, cur);
                break;
            default:
                throw ConfigError("exact activations cannot run under encryption");
        }
    }
    return cur;
}

// -- synthetic data ----------------------------------------------------------------

/// Canonical questionnaire labels. The six names every deployment shares sit
/// first; the rest are synthetic placeholders (the real survey is not
/// redistributable).
inline std::vector<std::string> default_symptom_labels(size_t count = 266) {
    static const char* known[] = {"Skin Rash",
                                  "Neck Pain",
                                  "Anxiety and Nervousness",
                                  "Depression or Psychotic Symptoms",
                                  "Abnormal Involuntary Movements",
                                  "Eye Redness"};
    std::vector<std::string> labels;
    labels.reserve(count);
    if (count == 266)
        for (const char* k : known) labels.emplace_back(k);
    char buf[32];
    for (size_t i = labels.size(); i < count; ++i) {
        std::snprintf(buf, sizeof buf, "Symptom %03zu", i + 1);
        labels.emplace_back(buf);
    }
    return labels;
}

inline std::vector<std::string> default_disease_labels(size_t count = 90) {
    std::vector<std::string> labels;
    labels.reserve(count);
    char buf[32];
    for (size_t i = 0; i < count; ++i) {
        std::snprintf(buf, sizeof buf, "Disease %02zu", i + 1);
        labels.emplace_back(buf);
    }
    return labels;
}

struct Sample {
    SymptomResponse response;
    size_t disease_index = 0;
};

namespace detail {

inline constexpr uint64_t kProtoStream = 0x70726f746fULL;    // "proto"
inline constexpr uint64_t kWeightStream = 0x77656967ULL;     // "weig"
inline constexpr uint64_t kSampleStream = 0x73616d70ULL;     // "samp"

/// One boolean prototype per class; the same (seed, dims) always yields the
/// same prototypes, which is what ties synth_net and synth_dataset together.
inline std::vector<std::vector<uint8_t>> prototypes(uint64_t seed, size_t classes,
                                                    size_t features) {
    std::mt19937_64 rng(rng::mix(seed, kProtoStream));
    double density = features <= 64 ? 0.3 : 0.08;
    std::vector<std::vector<uint8_t>> protos(classes, std::vector<uint8_t>(features, 0));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& p : protos) {
        size_t active = 0;
        for (auto& b : p) {
            b = u(rng) < density ? 1 : 0;
            active += b;
        }
        if (active == 0) p[rng() % features] = 1;
    }
    return protos;
}

}  // namespace detail

/// Synthetic network: random-projection hidden layers with comparator ReLU,
/// and a final matched-filter layer built from the class prototypes pushed
/// through those hidden layers. Per-layer activation bounds come from
/// interval arithmetic over the input domain, so the comparator's [-1, 1]
/// precondition holds for every admissible input, not just calibration
/// samples (the degree-9 compositions diverge once the bound is exceeded).
inline NetworkSpec synth_net(uint64_t seed, const std::vector<size_t>& dims,
                             heops::CompConfig cfg = {3, 3, 3}) {
    if (dims.size() < 2) throw ConfigError("synth_net needs at least input and output dims");
    const size_t in_dim = dims.front(), out_dim = dims.back();
    auto protos = detail::prototypes(seed, out_dim, in_dim);
    std::mt19937_64 rng(rng::mix(seed, detail::kWeightStream));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    NetworkSpec spec;
    std::vector<std::vector<double>> proto_feats(out_dim);
    for (size_t d = 0; d < out_dim; ++d) {
        proto_feats[d].resize(in_dim);
        for (size_t i = 0; i < in_dim; ++i) proto_feats[d][i] = protos[d][i];
    }
    std::vector<double> lo(in_dim, 0.0), hi(in_dim, 1.0);  // binary symptom inputs

    for (size_t l = 0; l + 2 < dims.size(); ++l) {
        size_t rows = dims[l + 1], cols = dims[l];
        LayerSpec lay;
        lay.rows = rows;
        lay.cols = cols;
        lay.weights.resize(rows * cols);
        double scale = 1.0 / std::sqrt(double(cols));
        for (auto& w : lay.weights) w = gauss(rng) * scale;
        lay.bias.resize(rows);
        for (auto& b : lay.bias) b = 0.1 * (u(rng) - 0.5);

        std::vector<double> pre_lo(rows), pre_hi(rows);
        double bound = 0.0;
        for (size_t j = 0; j < rows; ++j) {
            double a = lay.bias[j], b = lay.bias[j];
            for (size_t i = 0; i < cols; ++i) {
                double w = lay.weights[j * cols + i];
                a += w * (w > 0 ? lo[i] : hi[i]);
                b += w * (w > 0 ? hi[i] : lo[i]);
            }
            pre_lo[j] = a;
            pre_hi[j] = b;
            bound = std::max(bound, std::max(std::abs(a), std::abs(b)));
        }
        lay.activation.kind = ActivationKind::relu_approx;
        lay.activation.cfg = cfg;
        lay.activation.bound = bound * 1.05;  // headroom for injected backend noise

        // post-activation interval: the comparator gate sits in [0, 1] with a
        // small undershoot around zero
        lo.assign(rows, 0.0);
        hi.assign(rows, 0.0);
        for (size_t j = 0; j < rows; ++j) {
            lo[j] = std::min(0.0, std::max(pre_lo[j], -0.05 * lay.activation.bound) * 0.5);
            hi[j] = std::max(0.0, pre_hi[j]) * 1.01;
        }

        auto forward = [&](const std::vector<double>& x) {
            std::vector<double> y(rows);
            for (size_t j = 0; j < rows; ++j) {
                double acc = lay.bias[j];
                for (size_t i = 0; i < cols; ++i) acc += lay.weights[j * cols + i] * x[i];
                y[j] = acc > 0.0 ? acc : 0.0;
            }
            return y;
        };
        for (size_t d = 0; d < out_dim; ++d) proto_feats[d] = forward(proto_feats[d]);
        spec.layers.push_back(std::move(lay));
    }

    // matched-filter output layer over the last hidden representation
    LayerSpec outl;
    outl.rows = out_dim;
    outl.cols = dims[dims.size() - 2];
    outl.weights.resize(outl.rows * outl.cols);
    outl.bias.assign(out_dim, 0.0);
    for (size_t d = 0; d < out_dim; ++d) {
        double norm = 0.0;
        for (double v : proto_feats[d]) norm += v * v;
        norm = std::sqrt(norm);
        double inv = norm > 1e-9 ? 1.0 / norm : 0.0;
        for (size_t i = 0; i < outl.cols; ++i) outl.weights[d * outl.cols + i] = proto_feats[d][i] * inv;
    }
    spec.layers.push_back(std::move(outl));

    size_t max_dim = 0;
    for (size_t d : dims) max_dim = std::max(max_dim, d);
    size_t padded = 1;
    while (padded < max_dim) padded <<= 1;
    spec.padded_size = padded;
    spec.input_labels = default_symptom_labels(in_dim);
    spec.output_labels = default_disease_labels(out_dim);
    spec.validate();
    return spec;
}

/// The desk-scale stand-in for the paper's classifier: 266 symptoms padded to
/// 512, one hidden layer, 90 diseases.
inline NetworkSpec synth_weights(uint64_t seed) { return synth_net(seed, {266, 256, 90}); }

inline std::vector<Sample> synth_dataset(const NetworkSpec& spec, uint64_t seed, size_t n_samples,
                                         double flip_prob = 0.02) {
    const size_t in_dim = spec.input_dim(), out_dim = spec.output_dim();
    auto protos = detail::prototypes(seed, out_dim, in_dim);
    std::mt19937_64 rng(rng::mix(seed, detail::kSampleStream));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Sample> out;
    out.reserve(n_samples);
    for (size_t k = 0; k < n_samples; ++k) {
        Sample s;
        s.disease_index = rng() % out_dim;
        for (size_t i = 0; i < in_dim; ++i) {
            bool bit = protos[s.disease_index][i] != 0;
            if (u(rng) < flip_prob) bit = !bit;
            s.response.answers[spec.input_labels[i]] = bit;
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace fhed::model
