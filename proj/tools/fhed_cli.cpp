// fhed: encrypted disease-classifier toolkit.
// Local pipeline (keygen/encrypt/infer/decrypt), blind-evaluation service
// (serve/submit), benchmarks (bench-sum/bench-mae/bench-agreement), and
// synthetic model/dataset generation (synth).

#include <CLI11.hpp>
#include <csignal>
#include <filesystem>
#include <iostream>

#include "fhed/bench.hpp"
#include "fhed/fhed.hpp"
#include "fhed/keyfiles.hpp"
#include "fhed/model.hpp"
#include "fhed/netsvc.hpp"

using namespace fhed;
namespace fs = std::filesystem;

namespace {

constexpr const char* kDisclaimer =
    "note: desk-scale CKKS parameters; this build targets correctness studies, not "
    "production security.";

struct Address {
    std::string host = "127.0.0.1";
    uint16_t port = 0;
};

Address parse_address(const std::string& s) {
    auto pos = s.rfind(':');
    if (pos == std::string::npos) throw ConfigError("address must be host:port, got '" + s + "'");
    Address a;
    a.host = s.substr(0, pos);
    if (a.host.empty()) a.host = "127.0.0.1";
    int port = std::stoi(s.substr(pos + 1));
    if (port < 1 || port > 65535) throw ConfigError("port out of range");
    a.port = uint16_t(port);
    return a;
}

std::pair<int, int> parse_size_range(const std::string& s) {
    auto pos = s.find("..");
    if (pos == std::string::npos) {
        int k = std::stoi(s);
        return {k, k};
    }
    return {std::stoi(s.substr(0, pos)), std::stoi(s.substr(pos + 2))};
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    return j;
}

model::SymptomResponse parse_response(const nlohmann::json& j) {
    model::SymptomResponse r;
    for (const auto& [name, val] : j.at("answers").items()) {
        if (!val.is_boolean()) throw InputError("answer for '" + name + "' must be true/false");
        r.answers[name] = val.get<bool>();
    }
    return r;
}

std::unique_ptr<Backend> backend_from_keys(const std::string& dir, double noise) {
    HEParams params = keyfiles::peek_params(dir);
    params.noise_stddev = noise;
    return make_backend(keyfiles::peek_backend_tag(dir), params);
}

void print_prediction(const model::Prediction& pred, size_t top) {
    if (pred.disease_name.empty())
        std::cout << "prediction: index " << pred.argmax_index << "\n";
    else
        std::cout << "prediction: " << pred.disease_name << " (index " << pred.argmax_index
                  << ")\n";
    std::vector<size_t> order(pred.logits.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return pred.logits[a] > pred.logits[b]; });
    top = std::min(top, order.size());
    for (size_t k = 0; k < top; ++k)
        std::cout << "  #" << k + 1 << "  logit " << pred.logits[order[k]] << "  index "
                  << order[k] << "\n";
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    return out;
}

std::function<void()> g_stop_server;
void handle_sigint(int) {
    if (g_stop_server) g_stop_server();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fhed: fully homomorphic encrypted disease classifier"};
    app.require_subcommand(1);

    // ---- keygen ----
    auto* keygen = app.add_subcommand("keygen", "generate a key set into a directory");
    std::string kg_out, kg_backend = "ckks";
    int kg_logn = 9, kg_logp = 40, kg_logq = 200;
    uint64_t kg_seed = 1;
    double kg_noise = 0.0;
    keygen->add_option("--out", kg_out, "output directory")->required();
    keygen->add_option("--logn", kg_logn, "log2 slot count")->required();
    keygen->add_option("--logp", kg_logp, "log2 scale (precision)")->required();
    keygen->add_option("--logq", kg_logq, "log2 ciphertext modulus (depth budget)")->required();
    keygen->add_option("--seed", kg_seed, "key generation seed");
    keygen->add_option("--backend", kg_backend, "clear|ckks");
    keygen->add_option("--noise", kg_noise, "clear-backend per-op noise stddev");

    // ---- encrypt ----
    auto* encrypt = app.add_subcommand("encrypt", "encrypt a symptom response or raw slot vector");
    std::string en_keys, en_input, en_out, en_weights;
    encrypt->add_option("--keys", en_keys, "key directory")->required();
    encrypt->add_option("--input", en_input, "input JSON (answers or slots)")->required();
    encrypt->add_option("--out", en_out, "ciphertext output file")->required();
    encrypt->add_option("--weights", en_weights,
                        "weights file (label order; needed for answers input)");

    // ---- decrypt ----
    auto* decrypt = app.add_subcommand("decrypt", "decrypt a ciphertext file");
    std::string de_keys, de_in, de_weights;
    size_t de_top = 5;
    decrypt->add_option("--keys", de_keys, "key directory")->required();
    decrypt->add_option("--in", de_in, "ciphertext file")->required();
    decrypt->add_option("--top", de_top, "print the top K slots");
    decrypt->add_option("--weights", de_weights, "weights file (names the outputs)");

    // ---- infer ----
    auto* infer = app.add_subcommand("infer", "local encrypted inference");
    std::string in_weights, in_input, in_keys, in_backend = "clear";
    double in_noise = 0.0;
    infer->add_option("--weights", in_weights, "weights file")->required();
    infer->add_option("--in", in_input, "symptom response JSON")->required();
    infer->add_option("--keys", in_keys, "key directory")->required();
    infer->add_option("--backend", in_backend, "clear|ckks");
    infer->add_option("--noise", in_noise, "clear-backend per-op noise stddev");

    // ---- serve ----
    auto* serve = app.add_subcommand("serve", "run the blind evaluation server");
    std::string sv_weights, sv_bind = "127.0.0.1:7788", sv_backend = "clear";
    int sv_logp = 40, sv_logq = 0;
    serve->add_option("--weights", sv_weights, "weights file")->required();
    serve->add_option("--bind", sv_bind, "host:port");
    serve->add_option("--backend", sv_backend, "clear|ckks");
    serve->add_option("--logp", sv_logp, "log2 scale");
    serve->add_option("--logq", sv_logq, "log2 modulus (default: sized from the network depth)");

    // ---- submit ----
    auto* submit = app.add_subcommand("submit", "submit an encrypted query to a server");
    std::string sb_addr, sb_keys, sb_input, sb_labels;
    submit->add_option("--addr", sb_addr, "server host:port")->required();
    submit->add_option("--keys", sb_keys, "key directory")->required();
    submit->add_option("--input", sb_input, "symptom response JSON")->required();
    submit->add_option("--labels", sb_labels,
                       "labels JSON (questionnaire order; from synth --out)");

    // ---- bench-sum ----
    auto* bsum = app.add_subcommand("bench-sum", "rotate-and-add vs DFT summation study");
    std::string bs_sizes = "3..10", bs_backend = "clear", bs_csv, bs_report;
    int bs_trials = 10, bs_logp = 40, bs_logq = 0, bs_logn = 0;
    uint64_t bs_seed = 1;
    double bs_noise = 0.0;
    bsum->add_option("--sizes", bs_sizes, "log2 size range, e.g. 3..12");
    bsum->add_option("--trials", bs_trials, "trials per cell (>= 10)");
    bsum->add_option("--backend", bs_backend, "clear|ckks");
    bsum->add_option("--csv", bs_csv, "records CSV path")->required();
    bsum->add_option("--report", bs_report, "derived report CSV path");
    bsum->add_option("--logp", bs_logp, "log2 scale");
    bsum->add_option("--logq", bs_logq, "log2 modulus (default: covers the deepest DFT)");
    bsum->add_option("--logn", bs_logn, "log2 slots (default: the largest size)");
    bsum->add_option("--seed", bs_seed, "rng seed");
    bsum->add_option("--noise", bs_noise, "clear-backend per-op noise stddev");

    // ---- bench-mae ----
    auto* bmae = app.add_subcommand("bench-mae", "train-vs-inference activation MAE table");
    std::string bm_weights, bm_csv;
    size_t bm_samples = 200;
    uint64_t bm_seed = 1;
    bmae->add_option("--weights", bm_weights, "weights file (default: synth from seed)");
    bmae->add_option("--samples", bm_samples, "dataset size");
    bmae->add_option("--seed", bm_seed, "dataset seed");
    bmae->add_option("--csv", bm_csv, "output CSV path");

    // ---- bench-agreement ----
    auto* bagr = app.add_subcommand("bench-agreement",
                                    "encrypted vs plaintext argmax agreement");
    std::string ba_weights, ba_backend = "clear", ba_csv;
    size_t ba_samples = 100;
    uint64_t ba_seed = 1;
    int ba_logp = 40, ba_logq = 0;
    double ba_noise = 0.0;
    bagr->add_option("--weights", ba_weights, "weights file (default: synth from seed)");
    bagr->add_option("--samples", ba_samples, "dataset size");
    bagr->add_option("--backend", ba_backend, "clear|ckks");
    bagr->add_option("--seed", ba_seed, "dataset/key seed");
    bagr->add_option("--logp", ba_logp, "log2 scale");
    bagr->add_option("--logq", ba_logq, "log2 modulus (default: sized from the network)");
    bagr->add_option("--noise", ba_noise, "clear-backend per-op noise stddev");
    bagr->add_option("--csv", ba_csv, "output CSV path");

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate synthetic weights and dataset");
    std::string sy_out, sy_dims = "266,256,90";
    size_t sy_samples = 50;
    uint64_t sy_seed = 1;
    double sy_flip = 0.02;
    synth->add_option("--out", sy_out, "output directory")->required();
    synth->add_option("--seed", sy_seed, "generation seed");
    synth->add_option("--samples", sy_samples, "number of samples");
    synth->add_option("--dims", sy_dims, "layer dims, e.g. 266,256,90");
    synth->add_option("--flip", sy_flip, "symptom flip probability");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*keygen) {
            HEParams params{kg_logn, kg_logp, kg_logq, kg_noise};
            params.validate();
            auto tag = parse_backend_tag(kg_backend);
            if (tag == BackendTag::ckks) std::cerr << kDisclaimer << "\n";
            auto be = make_backend(tag, params);
            auto ks = be->keygen(kg_seed);
            keyfiles::save_keyset(*be, ks, kg_out);
            std::cout << "wrote keys to " << kg_out << " (backend " << kg_backend << ", n="
                      << params.slot_count() << ", depth budget " << params.depth_budget()
                      << ")\n";
        } else if (*encrypt) {
            auto be = backend_from_keys(en_keys, 0.0);
            auto ks = keyfiles::load_keyset(*be, en_keys);
            auto j = read_json(en_input);
            std::vector<double> v;
            if (j.contains("answers")) {
                if (en_weights.empty())
                    throw ConfigError("answers input needs --weights for the label order");
                auto spec = model::load_weights(en_weights);
                v = model::encode_symptoms(parse_response(j), spec);
                if (v.size() != be->slot_count())
                    throw SizeError("weights pad to " + std::to_string(v.size()) +
                                    " but the keys have " + std::to_string(be->slot_count()) +
                                    " slots");
            } else if (j.contains("slots")) {
                v = j.at("slots").get<std::vector<double>>();
                v = heops::pad_pow2(v, be->slot_count());
            } else {
                throw InputError("input JSON needs an 'answers' or 'slots' field");
            }
            auto ct = be->encrypt(to_slots(v), ks.public_key);
            keyfiles::write_file(en_out, be->serialize_cipher(ct));
            std::cout << "wrote ciphertext " << en_out << "\n";
        } else if (*decrypt) {
            auto be = backend_from_keys(de_keys, 0.0);
            auto ks = keyfiles::load_keyset(*be, de_keys);
            auto blob = keyfiles::read_file(de_in);
            auto ct = be->deserialize_cipher(blob.data(), blob.size());
            auto slots = be->decrypt(ct, ks.secret);
            std::vector<std::string> labels;
            if (!de_weights.empty()) labels = model::load_weights(de_weights).output_labels;
            std::vector<double> vals(labels.empty() ? slots.size() : labels.size());
            for (size_t i = 0; i < vals.size(); ++i) vals[i] = slots[i].real();
            auto pred = model::to_prediction(vals, labels);
            print_prediction(pred, de_top);
        } else if (*infer) {
            auto spec = model::load_weights(in_weights);
            auto tag = parse_backend_tag(in_backend);
            int need = heops::depth_estimate(model::pipeline_of(spec));
            HEParams params = keyfiles::peek_params(in_keys);
            params.noise_stddev = in_noise;
            if (keyfiles::peek_backend_tag(in_keys) != tag)
                throw ConfigError("key directory was generated for the other backend");
            if (tag == BackendTag::ckks) std::cerr << kDisclaimer << "\n";
            auto be = make_backend(tag, params);
            auto ks = keyfiles::load_keyset(*be, in_keys);
            if (be->slot_count() != spec.padded_size)
                throw ConfigError("keys have " + std::to_string(be->slot_count()) +
                                  " slots; network needs " + std::to_string(spec.padded_size));
            if (params.depth_budget() < need)
                throw DepthExceeded("network needs " + std::to_string(need) +
                                    " levels; regenerate keys with --logq >= " +
                                    std::to_string(params.log_scale * (need + 1)));
            auto x = model::encode_symptoms(parse_response(read_json(in_input)), spec);
            heops::EvalContext ctx{*be, ks.eval};
            auto ct = be->encrypt(to_slots(x), ks.public_key);
            auto out = be->decrypt(model::encrypted_infer(ctx, spec, ct), ks.secret);
            std::vector<double> logits(spec.output_dim());
            for (size_t j2 = 0; j2 < logits.size(); ++j2) logits[j2] = out[j2].real();
            print_prediction(model::to_prediction(logits, spec.output_labels), 5);
        } else if (*serve) {
            auto spec = model::load_weights(sv_weights);
            auto tag = parse_backend_tag(sv_backend);
            int need = heops::depth_estimate(model::pipeline_of(spec));
            HEParams params;
            params.log_slots = heops::ceil_log2(spec.padded_size);
            params.log_scale = sv_logp;
            params.log_modulus = sv_logq > 0 ? sv_logq : sv_logp * (need + 1);
            params.validate();
            if (tag == BackendTag::ckks) std::cerr << kDisclaimer << "\n";
            auto be = make_backend(tag, params);
            netsvc::Server server(spec, *be);
            auto addr = parse_address(sv_bind);
            uint16_t port = server.start(addr.host, addr.port);
            std::cout << "serving " << sv_weights << " on " << addr.host << ":" << port
                      << " (backend " << sv_backend << ", log_slots=" << params.log_slots
                      << ", log_scale=" << params.log_scale
                      << ", log_modulus=" << params.log_modulus << ")\n"
                      << "clients must keygen with exactly these parameters\n";
            g_stop_server = [&server] { server.request_stop(); };
            std::signal(SIGINT, handle_sigint);
            std::signal(SIGTERM, handle_sigint);
            server.wait();
        } else if (*submit) {
            auto addr = parse_address(sb_addr);
            auto be = backend_from_keys(sb_keys, 0.0);
            auto ks = keyfiles::load_keyset(*be, sb_keys);
            auto j = read_json(sb_input);
            if (j.contains("slots")) {
                auto v = j.at("slots").get<std::vector<double>>();
                v = heops::pad_pow2(v, be->slot_count());
                auto res = netsvc::client_submit_vector(addr.host, addr.port, *be, ks, v);
                auto pred = model::to_prediction(res.logits, {});
                print_prediction(pred, 5);
            } else {
                if (sb_labels.empty())
                    throw ConfigError("answers input needs --labels (questionnaire order)");
                auto lj = read_json(sb_labels);
                netsvc::ClientModelInfo info;
                info.input_labels = lj.at("input_labels").get<std::vector<std::string>>();
                info.output_labels = lj.at("output_labels").get<std::vector<std::string>>();
                auto pred = netsvc::client_submit(addr.host, addr.port, *be, ks,
                                                  parse_response(j), info);
                print_prediction(pred, 5);
            }
        } else if (*bsum) {
            auto [k_lo, k_hi] = parse_size_range(bs_sizes);
            if (k_lo < 1 || k_hi < k_lo) throw ConfigError("bad size range");
            int logn = bs_logn > 0 ? bs_logn : k_hi;
            int logq = bs_logq > 0 ? bs_logq : bs_logp * (k_hi + 3);
            HEParams params{logn, bs_logp, logq, bs_noise};
            params.validate();
            auto tag = parse_backend_tag(bs_backend);
            auto be = make_backend(tag, params);
            auto ks = be->keygen(bs_seed);
            std::vector<uint32_t> sizes;
            for (int k = k_lo; k <= k_hi; ++k) sizes.push_back(uint32_t(1) << k);
            auto records = bench::bench_sum(*be, ks, sizes, bs_trials, bs_seed);
            auto csv = open_out(bs_csv);
            bench::write_sum_csv(records, csv);
            std::cout << "wrote " << bs_csv << "\n";
            auto rows = bench::derive_sum_report(records);
            if (!bs_report.empty()) {
                auto rep = open_out(bs_report);
                bench::write_report_csv(rows, rep);
                std::cout << "wrote " << bs_report << "\n";
            }
            for (const auto& r : rows)
                std::cout << "size 2^" << heops::ceil_log2(r.size)
                          << "  relative_error_pct=" << r.relative_error_pct
                          << "  relative_speedup_pct=" << r.relative_speedup_pct << "\n";
        } else if (*bmae) {
            auto spec = bm_weights.empty() ? model::synth_weights(bm_seed)
                                           : model::load_weights(bm_weights);
            auto data = model::synth_dataset(spec, bm_seed, bm_samples);
            auto rows = bench::bench_mae(spec, data);
            if (!bm_csv.empty()) {
                auto csv = open_out(bm_csv);
                bench::write_mae_csv(rows, csv);
                std::cout << "wrote " << bm_csv << "\n";
            }
            for (const auto& r : rows)
                std::cout << model::activation_name(r.train) << " -> "
                          << model::activation_name(r.infer) << "  MAE " << r.mae << "\n";
        } else if (*bagr) {
            auto spec = ba_weights.empty() ? model::synth_weights(ba_seed)
                                           : model::load_weights(ba_weights);
            int need = heops::depth_estimate(model::pipeline_of(spec));
            HEParams params;
            params.log_slots = heops::ceil_log2(spec.padded_size);
            params.log_scale = ba_logp;
            params.log_modulus = ba_logq > 0 ? ba_logq : ba_logp * (need + 1);
            params.noise_stddev = ba_noise;
            params.validate();
            auto tag = parse_backend_tag(ba_backend);
            if (tag == BackendTag::ckks) std::cerr << kDisclaimer << "\n";
            auto be = make_backend(tag, params);
            auto ks = be->keygen(ba_seed);
            auto data = model::synth_dataset(spec, ba_seed, ba_samples);
            auto rep = bench::bench_agreement(*be, ks, spec, data);
            std::cout << "agreement " << rep.agreement_pct() << "% (" << rep.agreed << "/"
                      << rep.samples << ", failures " << rep.failures << ")\n"
                      << "logit deviation mean " << rep.mean_logit_dev << " max "
                      << rep.max_logit_dev << "\n";
            if (!ba_csv.empty()) {
                auto csv = open_out(ba_csv);
                csv << "samples,agreed,failures,agreement_pct,mean_logit_dev,max_logit_dev\n"
                    << rep.samples << ',' << rep.agreed << ',' << rep.failures << ','
                    << rep.agreement_pct() << ',' << rep.mean_logit_dev << ','
                    << rep.max_logit_dev << "\n";
                std::cout << "wrote " << ba_csv << "\n";
            }
        } else if (*synth) {
            std::vector<size_t> dims;
            std::stringstream ss(sy_dims);
            std::string tok;
            while (std::getline(ss, tok, ',')) dims.push_back(size_t(std::stoul(tok)));
            auto spec = model::synth_net(sy_seed, dims, heops::CompConfig{3, 3, 3});
            fs::create_directories(sy_out);
            fs::create_directories(sy_out + "/samples");
            model::save_weights(spec, sy_out + "/weights.json");
            nlohmann::ordered_json labels;
            labels["input_labels"] = spec.input_labels;
            labels["output_labels"] = spec.output_labels;
            open_out(sy_out + "/labels.json") << labels.dump(1) << "\n";
            auto data = model::synth_dataset(spec, sy_seed, sy_samples, sy_flip);
            auto manifest = open_out(sy_out + "/samples.csv");
            manifest << "file,disease_index,disease_name\n";
            for (size_t i = 0; i < data.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof name, "samples/%04zu.json", i);
                nlohmann::ordered_json js;
                js["answers"] = data[i].response.answers;
                open_out(sy_out + "/" + name) << js.dump() << "\n";
                manifest << name << ',' << data[i].disease_index << ','
                         << spec.output_labels[data[i].disease_index] << "\n";
            }
            std::cout << "wrote " << sy_out << " (weights.json, labels.json, " << data.size()
                      << " samples)\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
