#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fedflow/common.hpp"
#include "fedflow/fedcore.hpp"
#include "fedflow/wire.hpp"

namespace fedflow::net {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

inline Endpoint parse_endpoint(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos || colon + 1 == s.size())
        throw std::invalid_argument("endpoint must be host:port, got: " + s);
    Endpoint ep;
    ep.host = s.substr(0, colon);
    const long port = std::stol(s.substr(colon + 1));
    if (port < 1 || port > 65535) throw std::invalid_argument("endpoint port out of range: " + s);
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

// Move-only blocking TCP connection.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            close();
            fd_ = o.fd_;
            o.fd_ = -1;
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close(); }

    bool valid() const { return fd_ >= 0; }

    void close() {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

    void send_all(const std::uint8_t* data, std::size_t len) {
        std::size_t sent = 0;
        while (sent < len) {
            const ssize_t n = ::send(fd_, data + sent, len - sent, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw std::runtime_error(std::string("send failed: ") + std::strerror(errno));
            }
            sent += static_cast<std::size_t>(n);
        }
    }

    void recv_exact(std::uint8_t* data, std::size_t len) {
        std::size_t got = 0;
        while (got < len) {
            const ssize_t n = ::recv(fd_, data + got, len - got, 0);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw std::runtime_error(std::string("recv failed: ") + std::strerror(errno));
            }
            if (n == 0) throw protocol_error("peer closed the connection mid-frame");
            got += static_cast<std::size_t>(n);
        }
    }

private:
    int fd_ = -1;
};

inline void send_frame(Socket& s, const wire::Frame& f) {
    const auto bytes = wire::encode_frame(f);
    s.send_all(bytes.data(), bytes.size());
}

inline wire::Frame recv_frame(Socket& s) {
    std::vector<std::uint8_t> buf(wire::frame_header_size);
    s.recv_exact(buf.data(), buf.size());
    const std::uint64_t plen = wire::payload_length(buf.data(), buf.size());
    buf.resize(wire::frame_header_size + plen + 4);
    s.recv_exact(buf.data() + wire::frame_header_size, plen + 4);
    return wire::decode_frame(buf.data(), buf.size());
}

class Listener {
public:
    explicit Listener(const Endpoint& ep) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw std::runtime_error("socket() failed");
        const int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(ep.port);
        if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1)
            throw std::invalid_argument("listen address must be an IPv4 literal: " + ep.host);
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0)
            throw std::runtime_error("bind failed on " + ep.host + ":" +
                                     std::to_string(ep.port) + ": " + std::strerror(errno));
        if (::listen(fd_, 64) < 0) throw std::runtime_error("listen failed");
    }

    ~Listener() {
        if (fd_ >= 0) ::close(fd_);
    }
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    // bound port (useful when constructed with port 0)
    std::uint16_t port() const {
        sockaddr_in addr{};
        socklen_t len = sizeof addr;
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        return ntohs(addr.sin_port);
    }

    Socket accept_within(int timeout_ms) {
        pollfd pfd{fd_, POLLIN, 0};
        const int r = ::poll(&pfd, 1, timeout_ms);
        if (r < 0) throw std::runtime_error(std::string("poll failed: ") + std::strerror(errno));
        if (r == 0) throw std::runtime_error("timed out waiting for a client connection");
        const int cfd = ::accept(fd_, nullptr, nullptr);
        if (cfd < 0) throw std::runtime_error("accept failed");
        return Socket(cfd);
    }

private:
    int fd_ = -1;
};

inline Socket connect_with_retry(const Endpoint& ep, int total_timeout_ms = 10000) {
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(total_timeout_ms);
    for (;;) {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw std::runtime_error("socket() failed");
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(ep.port);
        if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
            ::close(fd);
            throw std::invalid_argument("connect address must be an IPv4 literal: " + ep.host);
        }
        if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) return Socket(fd);
        ::close(fd);
        if (std::chrono::steady_clock::now() >= deadline)
            throw std::runtime_error("could not connect to " + ep.host + ":" +
                                     std::to_string(ep.port));
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
}

// Server side of federated training over sockets. Waits for HELLO frames
// from all K clients, then drives the shared run_federated loop with an
// executor that broadcasts GLOBAL_PARAMS and collects CLIENT_UPDATE frames.
// Stale-round frames are logged and dropped; malformed frames abort the
// round (synchronous semantics). Returns the final model and history.
inline std::pair<nn::ModelParams, fed::TrainingHistory> serve_federated(
    const nn::ArchitectureSpec& arch, const fed::FedConfig& cfg, const Matrix& train_pooled,
    const Matrix& validation, Listener& listener, int accept_timeout_ms = 60000,
    std::ostream& log = std::cerr) {
    std::map<int, Socket> conns;
    while (conns.size() < static_cast<std::size_t>(cfg.clients)) {
        Socket s = listener.accept_within(accept_timeout_ms);
        wire::Frame hello = recv_frame(s);
        if (hello.type != wire::MsgType::hello)
            throw protocol_error("expected HELLO as the first frame");
        const int id = static_cast<int>(hello.client_id);
        if (id < 0 || id >= cfg.clients)
            throw protocol_error("HELLO from out-of-range client " + std::to_string(id));
        if (conns.count(id)) throw protocol_error("duplicate HELLO from client " + std::to_string(id));
        conns.emplace(id, std::move(s));
        log << "server: client " << id << " joined (" << conns.size() << "/" << cfg.clients
            << ")\n";
    }

    auto executor = [&](const nn::ModelParams& w, int round,
                        const std::vector<int>& selected) -> std::vector<fed::RoundUpdate> {
        wire::Frame bcast;
        bcast.type = wire::MsgType::global_params;
        bcast.round = static_cast<std::uint32_t>(round);
        bcast.payload = wire::encode_params_payload(w, 0);
        for (int id : selected) {
            bcast.client_id = static_cast<std::uint32_t>(id);
            send_frame(conns.at(id), bcast);
        }
        wire::RoundCollector collector(static_cast<std::uint32_t>(round), selected);
        for (int id : selected) {
            while (true) {
                const wire::Frame f = recv_frame(conns.at(id));
                if (collector.offer(f) == wire::RoundCollector::Accept::stale) {
                    log << "server: dropped stale frame (round " << f.round << " != " << round
                        << ") from client " << f.client_id << "\n";
                    continue;
                }
                break;
            }
        }
        wire::Frame done;
        done.type = wire::MsgType::round_done;
        done.round = static_cast<std::uint32_t>(round);
        for (int id : selected) {
            done.client_id = static_cast<std::uint32_t>(id);
            send_frame(conns.at(id), done);
        }
        return collector.take();
    };

    auto result = fed::run_federated(arch, cfg, executor, train_pooled, validation);

    wire::Frame bye;
    bye.type = wire::MsgType::shutdown;
    bye.round = static_cast<std::uint32_t>(cfg.rounds);
    for (auto& [id, conn] : conns) {
        bye.client_id = static_cast<std::uint32_t>(id);
        send_frame(conn, bye);
    }
    return result;
}

// Client side: announce with HELLO, then answer every GLOBAL_PARAMS with a
// locally trained CLIENT_UPDATE until SHUTDOWN. Optimizer state persists in
// this process across rounds. Returns the number of rounds served.
inline int run_federated_client(const Endpoint& server, const data::ClientShard& shard,
                                const fed::FedConfig& cfg, int connect_timeout_ms = 30000) {
    Socket s = connect_with_retry(server, connect_timeout_ms);
    wire::Frame hello;
    hello.type = wire::MsgType::hello;
    hello.client_id = static_cast<std::uint32_t>(shard.client_id);
    send_frame(s, hello);

    nn::OptimizerState opt = cfg.make_optimizer_state();
    int rounds_served = 0;
    for (;;) {
        const wire::Frame f = recv_frame(s);
        switch (f.type) {
            case wire::MsgType::global_params: {
                auto [params, n_k] = wire::decode_params_payload(f.payload.data(),
                                                                 f.payload.size());
                (void)n_k;
                const fed::RoundUpdate up = fed::client_update(
                    params, shard, cfg, opt,
                    derive_seed(cfg.seed, f.round, static_cast<std::uint64_t>(shard.client_id)));
                wire::Frame reply;
                reply.type = wire::MsgType::client_update;
                reply.round = f.round;
                reply.client_id = static_cast<std::uint32_t>(shard.client_id);
                reply.payload = wire::encode_params_payload(up.params_local, up.n_k);
                send_frame(s, reply);
                ++rounds_served;
                break;
            }
            case wire::MsgType::round_done:
                break;
            case wire::MsgType::shutdown:
                return rounds_served;
            case wire::MsgType::error:
                throw protocol_error("server reported a protocol error");
            default:
                throw protocol_error("unexpected message type from server");
        }
    }
}

}  // namespace fedflow::net
