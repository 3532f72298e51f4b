#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <optional>
#include <random>
#include <thread>

#include "fhed/model.hpp"
#include "fhed/serial_util.hpp"

namespace fhed::netsvc {

// Framed binary protocol over plain TCP. FHE is the confidentiality layer
// under test, so no transport encryption is added on top; see the README.
inline constexpr char kFrameMagic[4] = {'F', 'H', 'E', 'D'};
inline constexpr uint8_t kProtocolVersion = 1;

enum MsgType : uint8_t {
    kHello = 1,
    kHelloAck = 2,
    kEvalKeys = 3,
    kInferReq = 4,
    kInferResp = 5,
    kError = 6,
};

enum ErrorCode : uint16_t {
    kErrParamMismatch = 1,
    kErrMissingEvalKeys = 2,
    kErrDepthExceeded = 3,
    kErrMalformedBlob = 4,
    kErrInternal = 5,
};

inline uint64_t max_frame_bytes() {
    if (const char* env = std::getenv("FHED_MAX_FRAME")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0' && v > 0) return v;
    }
    return 256ull << 20;  // 256 MiB
}

struct Frame {
    uint8_t msg_type = 0;
    std::vector<uint8_t> payload;
};

/// Closable stream socket handle.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            close_fd();
            fd_ = o.fd_;
            o.fd_ = -1;
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close_fd(); }

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }

    void shutdown_both() {
        if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
    }

    void read_exact(void* buf, size_t len) const {
        auto* p = static_cast<uint8_t*>(buf);
        while (len > 0) {
            ssize_t r = ::recv(fd_, p, len, 0);
            if (r == 0) throw ProtocolError("connection closed by peer");
            if (r < 0) throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
            p += r;
            len -= size_t(r);
        }
    }

    void write_all(const void* buf, size_t len) const {
        const auto* p = static_cast<const uint8_t*>(buf);
        while (len > 0) {
            ssize_t w = ::send(fd_, p, len, MSG_NOSIGNAL);
            if (w <= 0) throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
            p += w;
            len -= size_t(w);
        }
    }

private:
    void close_fd() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    int fd_ = -1;
};

inline void write_frame(const Socket& s, uint8_t type, const std::vector<uint8_t>& payload) {
    serial::Writer w;
    w.raw(kFrameMagic, 4);
    w.u8(kProtocolVersion);
    w.u8(type);
    w.u64(payload.size());
    s.write_all(w.bytes.data(), w.bytes.size());
    if (!payload.empty()) s.write_all(payload.data(), payload.size());
}

/// Reads one frame; FormatError means the framing itself is broken and the
/// connection cannot be trusted further.
inline Frame read_frame(const Socket& s) {
    uint8_t header[14];
    s.read_exact(header, sizeof header);
    if (std::memcmp(header, kFrameMagic, 4) != 0) throw FormatError("bad frame magic");
    if (header[4] != kProtocolVersion) throw FormatError("unsupported protocol version");
    Frame f;
    f.msg_type = header[5];
    uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= uint64_t(header[6 + i]) << (8 * i);
    if (len > max_frame_bytes()) throw FormatError("frame exceeds the configured maximum");
    f.payload.resize(len);
    if (len > 0) s.read_exact(f.payload.data(), len);
    return f;
}

inline void send_error(const Socket& s, uint16_t code, const std::string& msg) {
    serial::Writer w;
    w.u16(code);
    w.str(msg);
    write_frame(s, kError, w.bytes);
}

[[noreturn]] inline void throw_remote_error(const Frame& f) {
    serial::Reader r(f.payload.data(), f.payload.size());
    uint16_t code = r.u16();
    std::string msg = r.str();
    throw ProtocolError(code, "server error " + std::to_string(code) + ": " + msg);
}

// -- message payloads ------------------------------------------------------------

inline std::vector<uint8_t> encode_hello(BackendTag tag, const HEParams& p) {
    serial::Writer w;
    w.u8(uint8_t(tag));
    w.u32(uint32_t(p.log_slots));
    w.u32(uint32_t(p.log_scale));
    w.u32(uint32_t(p.log_modulus));
    w.f64(p.noise_stddev);
    return std::move(w.bytes);
}

struct HelloMsg {
    BackendTag tag;
    HEParams params;
};

inline HelloMsg decode_hello(const std::vector<uint8_t>& payload) {
    serial::Reader r(payload.data(), payload.size());
    HelloMsg m;
    m.tag = BackendTag(r.u8());
    m.params.log_slots = int(r.u32());
    m.params.log_scale = int(r.u32());
    m.params.log_modulus = int(r.u32());
    m.params.noise_stddev = r.f64();
    r.expect_end();
    return m;
}

struct HelloAck {
    std::string model_id;
    uint32_t padded_size = 0;
    uint32_t n_outputs = 0;
};

inline std::vector<uint8_t> encode_hello_ack(const HelloAck& a) {
    serial::Writer w;
    w.str(a.model_id);
    w.u32(a.padded_size);
    w.u32(a.n_outputs);
    return std::move(w.bytes);
}

inline HelloAck decode_hello_ack(const std::vector<uint8_t>& payload) {
    serial::Reader r(payload.data(), payload.size());
    HelloAck a;
    a.model_id = r.str();
    a.padded_size = r.u32();
    a.n_outputs = r.u32();
    r.expect_end();
    return a;
}

/// EvalKeys carries no secret member, and the serializer still refuses any
/// blob whose type byte is the secret marker. The receiving side re-checks.
inline std::vector<uint8_t> encode_eval_keys(const Backend& be, const EvalKeys& eval) {
    serial::Writer w;
    w.u32(uint32_t(1 + eval.rotation.size()));
    auto push = [&](const std::vector<uint8_t>& blob) {
        if (serial::key_type_of_blob(blob.data(), blob.size()) == KeyType::secret)
            throw ProtocolError("refusing to transmit secret key material");
        w.u64(blob.size());
        w.raw(blob.data(), blob.size());
    };
    push(be.serialize_key(eval.relin, 0));
    for (const auto& [step, key] : eval.rotation) push(be.serialize_key(key, step));
    return std::move(w.bytes);
}

inline EvalKeys decode_eval_keys(const Backend& be, const std::vector<uint8_t>& payload) {
    serial::Reader r(payload.data(), payload.size());
    uint32_t count = r.u32();
    EvalKeys eval;
    for (uint32_t i = 0; i < count; ++i) {
        uint64_t len = r.u64();
        r.need(len);
        if (serial::key_type_of_blob(r.p + r.pos, len) == KeyType::secret)
            throw ProtocolError("secret key material refused");
        auto [key, step] = be.deserialize_key(r.p + r.pos, len);
        r.pos += len;
        if (key.type == KeyType::relin)
            eval.relin = key;
        else if (key.type == KeyType::rotation)
            eval.rotation[step] = key;
        else
            throw FormatError("unexpected key type in EVAL_KEYS");
    }
    r.expect_end();
    return eval;
}

inline std::vector<uint8_t> encode_infer(uint64_t request_id, const std::vector<uint8_t>& blob) {
    serial::Writer w;
    w.u64(request_id);
    w.u64(blob.size());
    w.raw(blob.data(), blob.size());
    return std::move(w.bytes);
}

inline std::pair<uint64_t, std::vector<uint8_t>> decode_infer(const std::vector<uint8_t>& payload) {
    serial::Reader r(payload.data(), payload.size());
    uint64_t id = r.u64();
    uint64_t len = r.u64();
    r.need(len);
    std::vector<uint8_t> blob(r.p + r.pos, r.p + r.pos + len);
    r.pos += len;
    r.expect_end();
    return {id, std::move(blob)};
}

// -- server -----------------------------------------------------------------------

/// Blind evaluation server: holds the model and whatever evaluation keys each
/// connection uploads; never sees a secret key or a plaintext.
class Server {
public:
    Server(model::NetworkSpec spec, const Backend& backend, std::string model_id = "default")
        : spec_(std::move(spec)), backend_(backend), model_id_(std::move(model_id)) {
        int need = heops::depth_estimate(model::pipeline_of(spec_));
        int have = backend_.params().depth_budget();
        if (need > have)
            throw ConfigError("refusing to start: the network needs " + std::to_string(need) +
                              " levels but the parameters provide " + std::to_string(have) +
                              "; set log_modulus >= " +
                              std::to_string(backend_.params().log_scale * (need + 1)));
        if (backend_.slot_count() != spec_.padded_size)
            throw ConfigError("log_slots does not match the network's padded size " +
                              std::to_string(spec_.padded_size));
    }

    ~Server() { stop(); }

    /// Binds and starts the accept loop; returns the bound port (useful with
    /// port 0).
    uint16_t start(const std::string& host, uint16_t port) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw ProtocolError("socket() failed");
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
            ::close(fd);
            throw ConfigError("bad bind address '" + host + "'");
        }
        if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            ::close(fd);
            throw ProtocolError("bind failed: " + std::string(std::strerror(errno)));
        }
        if (::listen(fd, 16) != 0) {
            ::close(fd);
            throw ProtocolError("listen failed");
        }
        socklen_t len = sizeof addr;
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
        listen_ = Socket(fd);
        running_ = true;
        accept_thread_ = std::thread([this] { accept_loop(); });
        return ntohs(addr.sin_port);
    }

    /// Async-signal-safe shutdown request: unblocks the accept loop so wait()
    /// returns; full cleanup happens in stop() / the destructor.
    void request_stop() {
        running_.store(false);
        listen_.shutdown_both();
    }

    void stop() {
        bool was = running_.exchange(false);
        listen_.shutdown_both();
        if (!was && !accept_thread_.joinable()) return;
        {
            std::lock_guard<std::mutex> lk(conn_mutex_);
            for (auto& c : connections_) c->shutdown_both();
        }
        if (accept_thread_.joinable()) accept_thread_.join();
        for (auto& t : conn_threads_)
            if (t.joinable()) t.join();
        listen_ = Socket();
    }

    void wait() {
        if (accept_thread_.joinable()) accept_thread_.join();
    }

    const model::NetworkSpec& spec() const { return spec_; }

private:
    void accept_loop() {
        while (running_) {
            int cfd = ::accept(listen_.fd(), nullptr, nullptr);
            if (cfd < 0) {
                if (!running_) break;
                continue;
            }
            auto sock = std::make_shared<Socket>(cfd);
            {
                std::lock_guard<std::mutex> lk(conn_mutex_);
                connections_.push_back(sock);
                conn_threads_.emplace_back([this, sock] {
                    handle_connection(*sock);
                    // drop the socket so the fd closes as soon as the
                    // conversation ends, not at server shutdown
                    std::lock_guard<std::mutex> lk2(conn_mutex_);
                    std::erase(connections_, sock);
                });
            }
        }
    }

    void handle_connection(Socket& sock) {
        bool greeted = false;
        std::optional<EvalKeys> eval;
        while (running_) {
            Frame f;
            try {
                f = read_frame(sock);
            } catch (const FormatError& e) {
                // framing violation: report and drop the connection
                try {
                    send_error(sock, kErrMalformedBlob, e.what());
                } catch (...) {
                }
                return;
            } catch (const ProtocolError&) {
                return;  // peer went away
            }
            try {
                switch (f.msg_type) {
                    case kHello: {
                        auto hello = decode_hello(f.payload);
                        if (hello.tag != backend_.tag() ||
                            !hello.params.same_scheme(backend_.params())) {
                            send_error(sock, kErrParamMismatch,
                                       "parameter mismatch: server runs " +
                                           std::string(backend_name(backend_.tag())) +
                                           " log_slots=" + std::to_string(backend_.params().log_slots) +
                                           " log_scale=" + std::to_string(backend_.params().log_scale) +
                                           " log_modulus=" +
                                           std::to_string(backend_.params().log_modulus));
                            break;
                        }
                        greeted = true;
                        HelloAck ack{model_id_, uint32_t(spec_.padded_size),
                                     uint32_t(spec_.output_dim())};
                        write_frame(sock, kHelloAck, encode_hello_ack(ack));
                        break;
                    }
                    case kEvalKeys: {
                        if (!greeted) {
                            send_error(sock, kErrInternal, "HELLO required first");
                            break;
                        }
                        if (eval) {
                            send_error(sock, kErrInternal, "eval keys already received");
                            break;
                        }
                        try {
                            eval = decode_eval_keys(backend_, f.payload);
                        } catch (const ProtocolError& e) {
                            send_error(sock, kErrMalformedBlob, e.what());
                            break;
                        } catch (const Error& e) {
                            send_error(sock, kErrMalformedBlob, e.what());
                            break;
                        }
                        break;
                    }
                    case kInferReq: {
                        if (!eval) {
                            send_error(sock, kErrMissingEvalKeys,
                                       "EVAL_KEYS must be uploaded before inference");
                            break;
                        }
                        uint64_t id = 0;
                        try {
                            auto [rid, blob] = decode_infer(f.payload);
                            id = rid;
                            auto ct = backend_.deserialize_cipher(blob.data(), blob.size());
                            heops::EvalContext ctx{backend_, *eval};
                            auto out = model::encrypted_infer(ctx, spec_, ct);
                            write_frame(sock, kInferResp,
                                        encode_infer(id, backend_.serialize_cipher(out)));
                        } catch (const DepthExceeded& e) {
                            send_error(sock, kErrDepthExceeded, e.what());
                        } catch (const FormatError& e) {
                            send_error(sock, kErrMalformedBlob, e.what());
                        } catch (const SizeError& e) {
                            send_error(sock, kErrMalformedBlob, e.what());
                        }
                        break;
                    }
                    case kError:
                        break;  // client-side report; nothing to do
                    default:
                        send_error(sock, kErrInternal,
                                   "unknown message type " + std::to_string(f.msg_type));
                        break;  // connection survives unknown types
                }
            } catch (const ProtocolError&) {
                return;  // write failed; peer is gone
            } catch (const Error& e) {
                try {
                    send_error(sock, kErrInternal, e.what());
                } catch (...) {
                    return;
                }
            }
        }
    }

    model::NetworkSpec spec_;
    const Backend& backend_;
    std::string model_id_;
    Socket listen_;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::mutex conn_mutex_;
    std::vector<std::shared_ptr<Socket>> connections_;
    std::vector<std::thread> conn_threads_;
};

// -- client -----------------------------------------------------------------------

inline Socket connect_to(const std::string& host, uint16_t port, int timeout_s) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ProtocolError("socket() failed");
    timeval tv{timeout_s, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw ConfigError("bad address '" + host + "'");
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        int err = errno;
        ::close(fd);
        throw ProtocolError("cannot connect to " + host + ":" + std::to_string(port) + ": " +
                            std::strerror(err));
    }
    return Socket(fd);
}

struct SubmitResult {
    HelloAck ack;
    std::vector<double> logits;
};

/// Full client exchange for an already-encoded input vector: HELLO,
/// EVAL_KEYS, INFER_REQ, decrypt INFER_RESP. The secret key never leaves
/// this process.
inline SubmitResult client_submit_vector(const std::string& host, uint16_t port,
                                         const Backend& backend, const KeySet& keys,
                                         const std::vector<double>& padded_input,
                                         int timeout_s = 60) {
    Socket sock = connect_to(host, port, timeout_s);
    write_frame(sock, kHello, encode_hello(backend.tag(), backend.params()));
    Frame f = read_frame(sock);
    if (f.msg_type == kError) throw_remote_error(f);
    if (f.msg_type != kHelloAck) throw ProtocolError("expected HELLO_ACK");
    SubmitResult result;
    result.ack = decode_hello_ack(f.payload);
    if (result.ack.padded_size != padded_input.size())
        throw SizeError("server expects inputs padded to " + std::to_string(result.ack.padded_size) +
                        ", got " + std::to_string(padded_input.size()));

    write_frame(sock, kEvalKeys, encode_eval_keys(backend, keys.eval));

    std::mt19937_64 rng(std::random_device{}());
    uint64_t request_id = rng();
    auto ct = backend.encrypt(to_slots(padded_input), keys.public_key);
    write_frame(sock, kInferReq, encode_infer(request_id, backend.serialize_cipher(ct)));

    f = read_frame(sock);
    if (f.msg_type == kError) throw_remote_error(f);
    if (f.msg_type != kInferResp) throw ProtocolError("expected INFER_RESP");
    auto [rid, blob] = decode_infer(f.payload);
    if (rid != request_id)
        throw ProtocolError("response id " + std::to_string(rid) + " does not match request " +
                            std::to_string(request_id));
    auto out = backend.deserialize_cipher(blob.data(), blob.size());
    auto slots = backend.decrypt(out, keys.secret);
    result.logits.resize(result.ack.n_outputs);
    for (size_t j = 0; j < result.logits.size(); ++j) result.logits[j] = slots[j].real();
    return result;
}

/// Questionnaire metadata a client needs: the label order for encoding and
/// the output names for the verdict. Distributed alongside the survey, not
/// part of the server's weights.
struct ClientModelInfo {
    std::vector<std::string> input_labels;
    std::vector<std::string> output_labels;
};

inline model::Prediction client_submit(const std::string& host, uint16_t port,
                                       const Backend& backend, const KeySet& keys,
                                       const model::SymptomResponse& response,
                                       const ClientModelInfo& info, int timeout_s = 60) {
    Socket probe = connect_to(host, port, timeout_s);
    write_frame(probe, kHello, encode_hello(backend.tag(), backend.params()));
    Frame f = read_frame(probe);
    if (f.msg_type == kError) throw_remote_error(f);
    HelloAck ack = decode_hello_ack(f.payload);
    probe = Socket();  // keep the data exchange on a fresh connection

    std::vector<double> v(info.input_labels.size());
    for (size_t i = 0; i < info.input_labels.size(); ++i) {
        auto it = response.answers.find(info.input_labels[i]);
        if (it == response.answers.end())
            throw InputError("missing answer for symptom '" + info.input_labels[i] + "'");
        v[i] = it->second ? 1.0 : 0.0;
    }
    for (const auto& [name, _] : response.answers)
        if (std::find(info.input_labels.begin(), info.input_labels.end(), name) ==
            info.input_labels.end())
            throw InputError("unknown symptom '" + name + "'");
    auto padded = heops::pad_pow2(v, ack.padded_size);

    auto result = client_submit_vector(host, port, backend, keys, padded, timeout_s);
    return model::to_prediction(std::move(result.logits), info.output_labels);
}

}  // namespace fhed::netsvc
