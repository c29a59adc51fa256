#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <thread>
#include <vector>

#include "fedflow/common.hpp"
#include "fedflow/datastore.hpp"
#include "fedflow/fedcore.hpp"
#include "fedflow/transport.hpp"

using namespace fedflow;
using namespace fedflow::net;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (auto& x : m.data) x = rng.next_symmetric();
    return m;
}

nn::ArchitectureSpec tiny_arch() {
    nn::ArchitectureSpec arch;
    arch.input_dim = 6;
    arch.latent_dim = 2;
    arch.hidden_dims = {4};
    return arch;
}

}  // namespace

TEST_CASE("endpoint parsing") {
    const Endpoint ep = parse_endpoint("127.0.0.1:9710");
    CHECK(ep.host == "127.0.0.1");
    CHECK(ep.port == 9710);
    CHECK_THROWS_AS(parse_endpoint("localhost"), std::invalid_argument);
    CHECK_THROWS_AS(parse_endpoint("1.2.3.4:"), std::invalid_argument);
    CHECK_THROWS_AS(parse_endpoint("1.2.3.4:99999"), std::invalid_argument);
}

TEST_CASE("frames survive a loopback socket") {
    Listener listener(Endpoint{"127.0.0.1", 0});
    const Endpoint ep{"127.0.0.1", listener.port()};

    wire::Frame sent;
    sent.type = wire::MsgType::global_params;
    sent.round = 3;
    sent.client_id = 1;
    sent.payload = wire::encode_params_payload(nn::init_params(tiny_arch(), 9), 0);

    std::thread client([&] {
        Socket s = connect_with_retry(ep, 5000);
        send_frame(s, sent);
    });
    Socket server_side = listener.accept_within(5000);
    const wire::Frame got = recv_frame(server_side);
    client.join();
    CHECK(got.round == sent.round);
    CHECK(got.payload == sent.payload);
}

TEST_CASE("socket federated training matches the in-process result bit for bit") {
    const auto arch = tiny_arch();
    const Matrix train = random_matrix(36, 6, 31);
    const Matrix val = random_matrix(12, 6, 32);

    fed::FedConfig cfg;
    cfg.clients = 3;
    cfg.local_epochs = 1;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    cfg.rounds = 6;
    cfg.optimizer = nn::OptimizerKind::adam;
    cfg.seed = 77;
    cfg.deterministic = true;

    auto shards = data::partition(train, cfg.clients, data::PartitionScheme::strided);
    const auto [w_inproc, hist_inproc] =
        fed::train_federated(arch, cfg, shards, train, val);

    Listener listener(Endpoint{"127.0.0.1", 0});
    const Endpoint ep{"127.0.0.1", listener.port()};
    std::vector<std::thread> clients;
    for (int c = 0; c < cfg.clients; ++c)
        clients.emplace_back([&, c] {
            run_federated_client(ep, shards[static_cast<std::size_t>(c)], cfg);
        });
    std::ostringstream sink;
    const auto [w_socket, hist_socket] =
        serve_federated(arch, cfg, train, val, listener, 10000, sink);
    for (auto& t : clients) t.join();

    CHECK(w_socket.values == w_inproc.values);
    REQUIRE(hist_socket.size() == hist_inproc.size());
    for (std::size_t i = 0; i < hist_socket.size(); ++i) {
        CHECK(hist_socket[i].val_loss == hist_inproc[i].val_loss);
        CHECK(hist_socket[i].train_loss == hist_inproc[i].train_loss);
    }
}

TEST_CASE("the server drops a stale frame and still completes the round") {
    const auto arch = tiny_arch();
    const Matrix train = random_matrix(8, 6, 41);
    const Matrix val = random_matrix(4, 6, 42);

    fed::FedConfig cfg;
    cfg.clients = 1;
    cfg.local_epochs = 1;
    cfg.batch_size = 8;
    cfg.rounds = 1;
    cfg.optimizer = nn::OptimizerKind::sgd;
    cfg.seed = 5;

    auto shards = data::partition(train, 1, data::PartitionScheme::contiguous);

    Listener listener(Endpoint{"127.0.0.1", 0});
    const Endpoint ep{"127.0.0.1", listener.port()};

    std::thread rogue([&] {
        Socket s = connect_with_retry(ep, 5000);
        wire::Frame hello;
        hello.type = wire::MsgType::hello;
        hello.client_id = 0;
        send_frame(s, hello);

        // wait for the round-1 broadcast, then answer with a stale round first
        // (no Catch assertions in here; they are not thread-safe)
        const wire::Frame bcast = recv_frame(s);
        if (bcast.type != wire::MsgType::global_params) return;
        auto [w, n_k] = wire::decode_params_payload(bcast.payload.data(), bcast.payload.size());
        (void)n_k;

        nn::OptimizerState opt = cfg.make_optimizer_state();
        const fed::RoundUpdate up =
            fed::client_update(w, shards[0], cfg, opt, derive_seed(cfg.seed, bcast.round, 0));

        wire::Frame stale;
        stale.type = wire::MsgType::client_update;
        stale.round = 99;  // not the current round
        stale.client_id = 0;
        stale.payload = wire::encode_params_payload(up.params_local, up.n_k);
        send_frame(s, stale);

        wire::Frame fresh = stale;
        fresh.round = bcast.round;
        send_frame(s, fresh);

        while (recv_frame(s).type != wire::MsgType::shutdown) {
        }
    });

    std::ostringstream log;
    const auto [w, hist] = serve_federated(arch, cfg, train, val, listener, 10000, log);
    rogue.join();
    CHECK(hist.size() == 1);
    CHECK(log.str().find("stale") != std::string::npos);

    // the accepted update is the fresh one: it must equal a local replay
    nn::OptimizerState opt = cfg.make_optimizer_state();
    const fed::RoundUpdate expect = fed::client_update(
        nn::init_params(arch, cfg.seed), shards[0], cfg, opt, derive_seed(cfg.seed, 1, 0));
    CHECK(w.values == fed::aggregate({expect}).values);
}

TEST_CASE("a malformed frame aborts the round with a protocol error") {
    const auto arch = tiny_arch();
    const Matrix train = random_matrix(8, 6, 51);
    const Matrix val = random_matrix(4, 6, 52);

    fed::FedConfig cfg;
    cfg.clients = 1;
    cfg.rounds = 1;
    cfg.batch_size = 8;
    cfg.seed = 6;

    Listener listener(Endpoint{"127.0.0.1", 0});
    const Endpoint ep{"127.0.0.1", listener.port()};

    std::thread rogue([&] {
        Socket s = connect_with_retry(ep, 5000);
        wire::Frame hello;
        hello.type = wire::MsgType::hello;
        hello.client_id = 0;
        send_frame(s, hello);
        recv_frame(s);  // round-1 broadcast
        auto bytes = wire::encode_frame(wire::Frame{wire::MsgType::client_update, 1, 0, {}});
        bytes.back() ^= 0xff;  // break the CRC
        s.send_all(bytes.data(), bytes.size());
    });

    std::ostringstream log;
    CHECK_THROWS_AS(serve_federated(arch, cfg, train, val, listener, 10000, log),
                    std::runtime_error);
    rogue.join();
}
