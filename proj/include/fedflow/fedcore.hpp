#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fedflow/common.hpp"
#include "fedflow/datastore.hpp"
#include "fedflow/matrix.hpp"
#include "fedflow/neuralnet.hpp"

namespace fedflow::fed {

struct FedConfig {
    int clients = 10;              // K
    int local_epochs = 1;          // E
    std::size_t batch_size = 32;   // B, local minibatch size
    double learning_rate = 1e-3;   // alpha
    int rounds = 500;              // T
    nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
    std::uint64_t seed = 0;
    bool deterministic = true;     // fixed aggregation order, zeroed wall times
    double participation = 1.0;    // fraction of clients per round

    void validate() const {
        if (clients < 1) throw std::invalid_argument("FedConfig: clients must be >= 1");
        if (local_epochs < 0) throw std::invalid_argument("FedConfig: local_epochs must be >= 0");
        if (batch_size < 1) throw std::invalid_argument("FedConfig: batch_size must be >= 1");
        if (rounds < 1) throw std::invalid_argument("FedConfig: rounds must be >= 1");
        if (!(participation > 0.0) || participation > 1.0)
            throw std::invalid_argument("FedConfig: participation must be in (0, 1]");
    }

    nn::OptimizerState make_optimizer_state() const {
        return optimizer == nn::OptimizerKind::sgd ? nn::OptimizerState::sgd(learning_rate)
                                                   : nn::OptimizerState::adam(learning_rate);
    }
};

// One client's contribution to a round: its locally updated parameters and
// the shard cardinality that weights them.
struct RoundUpdate {
    int client_id = 0;
    nn::ModelParams params_local;
    std::size_t n_k = 0;
    double local_train_loss = 0.0;
};

struct RoundRecord {
    int round = 0;           // 1-based, contiguous
    double train_loss = 0.0; // pooled-train loss of the aggregated model
    double val_loss = 0.0;
    std::int64_t wall_ms = 0;
};

using TrainingHistory = std::vector<RoundRecord>;

// Local pass of one communication round: starting from the broadcast global
// parameters, run E epochs of minibatch steps over the shard (reshuffled per
// epoch from `shuffle_seed`) and report the updated parameters together with
// n_k. Optimizer state persists across rounds on the caller's side and never
// crosses the wire. With E = 0 the parameters pass through untouched.
inline RoundUpdate client_update(const nn::ModelParams& w_global,
                                 const data::ClientShard& shard, const FedConfig& cfg,
                                 nn::OptimizerState& opt, std::uint64_t shuffle_seed) {
    if (shard.data.rows == 0) throw std::invalid_argument("client_update: empty shard");
    RoundUpdate up;
    up.client_id = shard.client_id;
    up.n_k = shard.data.rows;
    up.params_local = w_global;

    if (cfg.local_epochs == 0) {
        up.local_train_loss = nn::loss_mse(nn::forward(w_global, shard.data), shard.data);
        return up;
    }

    Rng rng(shuffle_seed);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    std::vector<std::size_t> idx(shard.data.rows);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        rng.shuffle(idx);
        for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, idx.size());
            const Matrix batch = shard.data.gather_rows(
                std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                         idx.begin() + static_cast<std::ptrdiff_t>(stop)));
            nn::ForwardCache cache;
            const Matrix pred = nn::forward(up.params_local, batch, &cache);
            loss_sum += nn::loss_mse(pred, batch);
            const std::vector<double> grad = nn::backward(up.params_local, cache, batch);
            nn::optimizer_step(up.params_local, grad, opt);
            ++steps;
        }
    }
    up.local_train_loss = loss_sum / static_cast<double>(steps);
    return up;
}

namespace detail {

// error-free transforms for the compensated weighted mean
inline void two_sum(double& s, double& e, double x) {
    const double t = s + x;
    const double z = t - s;
    e += (s - (t - z)) + (x - z);
    s = t;
}

}  // namespace detail

// n_k/n-weighted mean of the client parameters. Accumulation uses a
// compensated dot product (TwoProd/TwoSum) with a compensated final
// division, so aggregating identical parameter vectors returns that vector
// bit-exactly and reordering clients moves the result by at most one
// rounding. With `deterministic_order`, updates are summed in ascending
// client_id regardless of arrival order.
inline nn::ModelParams aggregate(const std::vector<RoundUpdate>& updates,
                                 bool deterministic_order = true) {
    if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
    std::vector<const RoundUpdate*> order;
    order.reserve(updates.size());
    for (const auto& u : updates) order.push_back(&u);
    if (deterministic_order)
        std::stable_sort(order.begin(), order.end(),
                         [](const RoundUpdate* a, const RoundUpdate* b) {
                             return a->client_id < b->client_id;
                         });

    const nn::ModelParams& first = order.front()->params_local;
    const std::size_t len = first.values.size();
    double total = 0.0;
    for (const auto* u : order) {
        if (u->params_local.shapes != first.shapes || u->params_local.values.size() != len)
            throw std::invalid_argument("aggregate: parameter layout mismatch");
        total += static_cast<double>(u->n_k);
    }
    if (total <= 0.0) throw std::invalid_argument("aggregate: zero total sample count");

    std::vector<double> hi(len, 0.0), lo(len, 0.0);
    for (const auto* u : order) {
        const double w = static_cast<double>(u->n_k);
        const std::vector<double>& v = u->params_local.values;
        for (std::size_t i = 0; i < len; ++i) {
            const double ph = w * v[i];
            const double pl = std::fma(w, v[i], -ph);
            detail::two_sum(hi[i], lo[i], ph);
            lo[i] += pl;
        }
    }
    nn::ModelParams out;
    out.shapes = first.shapes;
    out.values.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
        const double q1 = hi[i] / total;
        const double r = std::fma(-q1, total, hi[i]) + lo[i];
        out.values[i] = q1 + r / total;
    }
    return out;
}

// Executes the local work of one round for the selected clients and returns
// their updates. The in-process executor calls client_update directly; the
// socket transport substitutes one that round-trips the wire protocol.
using RoundExecutor = std::function<std::vector<RoundUpdate>(
    const nn::ModelParams& w_global, int round, const std::vector<int>& selected)>;

// Synchronous FedAvg driver shared by the in-process and socket paths. Runs
// T rounds from a seeded initialization, aggregating after every round and
// recording pooled-train and validation losses of the aggregated model.
inline std::pair<nn::ModelParams, TrainingHistory> run_federated(
    const nn::ArchitectureSpec& arch, const FedConfig& cfg, const RoundExecutor& execute,
    const Matrix& train_pooled, const Matrix& validation) {
    cfg.validate();
    nn::ModelParams w = nn::init_params(arch, cfg.seed);
    TrainingHistory history;
    history.reserve(static_cast<std::size_t>(cfg.rounds));

    const int k = cfg.clients;
    const int per_round =
        std::min(k, static_cast<int>(std::ceil(cfg.participation * static_cast<double>(k))));

    for (int round = 1; round <= cfg.rounds; ++round) {
        const auto start = std::chrono::steady_clock::now();
        std::vector<int> selected(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) selected[static_cast<std::size_t>(c)] = c;
        if (per_round < k) {
            Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(round), 0xfedfULL));
            rng.shuffle(selected);
            selected.resize(static_cast<std::size_t>(per_round));
            std::sort(selected.begin(), selected.end());
        }
        std::vector<RoundUpdate> updates;
        try {
            updates = execute(w, round, selected);
        } catch (const std::exception& e) {
            throw std::runtime_error("round " + std::to_string(round) + " failed: " + e.what());
        }
        if (updates.size() != selected.size())
            throw std::runtime_error("round " + std::to_string(round) +
                                     " failed: missing client updates");
        w = aggregate(updates, cfg.deterministic);
        RoundRecord rec;
        rec.round = round;
        rec.train_loss = nn::loss_mse(nn::forward(w, train_pooled), train_pooled);
        rec.val_loss = nn::loss_mse(nn::forward(w, validation), validation);
        const auto stop = std::chrono::steady_clock::now();
        rec.wall_ms =
            cfg.deterministic
                ? 0
                : std::chrono::duration_cast<std::chrono::milliseconds>(stop - start).count();
        history.push_back(rec);
    }
    return {std::move(w), std::move(history)};
}

// In-process executor over local shards. Per-client optimizer state (Adam
// moments) lives in `states` and persists across rounds; only the model
// parameters pass through aggregation, mirroring the wire protocol.
class LocalClientPool {
public:
    LocalClientPool(std::vector<data::ClientShard> shards, const FedConfig& cfg)
        : shards_(std::move(shards)), cfg_(cfg),
          states_(shards_.size(), cfg.make_optimizer_state()) {
        if (static_cast<int>(shards_.size()) != cfg.clients)
            throw std::invalid_argument("LocalClientPool: shard count does not match K");
    }

    std::vector<RoundUpdate> operator()(const nn::ModelParams& w, int round,
                                        const std::vector<int>& selected) {
        std::vector<RoundUpdate> updates;
        updates.reserve(selected.size());
        for (int c : selected) {
            const auto ci = static_cast<std::size_t>(c);
            updates.push_back(client_update(
                w, shards_[ci], cfg_, states_[ci],
                derive_seed(cfg_.seed, static_cast<std::uint64_t>(round),
                            static_cast<std::uint64_t>(c))));
        }
        return updates;
    }

private:
    std::vector<data::ClientShard> shards_;
    FedConfig cfg_;
    std::vector<nn::OptimizerState> states_;
};

inline std::pair<nn::ModelParams, TrainingHistory> train_federated(
    const nn::ArchitectureSpec& arch, const FedConfig& cfg,
    std::vector<data::ClientShard> shards, const Matrix& train_pooled,
    const Matrix& validation) {
    LocalClientPool pool(std::move(shards), cfg);
    return run_federated(arch, cfg, std::ref(pool), train_pooled, validation);
}

// Centralized baseline: plain minibatch training on the pooled data, one
// history record per epoch. cfg.rounds counts epochs and cfg.batch_size is
// the (larger) central batch.
inline std::pair<nn::ModelParams, TrainingHistory> train_centralized(
    const nn::ArchitectureSpec& arch, const FedConfig& cfg, const Matrix& train,
    const Matrix& validation) {
    cfg.validate();
    if (train.rows == 0) throw std::invalid_argument("train_centralized: empty training data");
    nn::ModelParams w = nn::init_params(arch, cfg.seed);
    nn::OptimizerState opt = cfg.make_optimizer_state();
    TrainingHistory history;
    history.reserve(static_cast<std::size_t>(cfg.rounds));
    std::vector<std::size_t> idx(train.rows);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int epoch = 1; epoch <= cfg.rounds; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), 0));
        rng.shuffle(idx);
        for (std::size_t begin = 0; begin < idx.size(); begin += cfg.batch_size) {
            const std::size_t stop = std::min(begin + cfg.batch_size, idx.size());
            const Matrix batch = train.gather_rows(
                std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                         idx.begin() + static_cast<std::ptrdiff_t>(stop)));
            nn::ForwardCache cache;
            nn::forward(w, batch, &cache);
            const std::vector<double> grad = nn::backward(w, cache, batch);
            nn::optimizer_step(w, grad, opt);
        }
        RoundRecord rec;
        rec.round = epoch;
        rec.train_loss = nn::loss_mse(nn::forward(w, train), train);
        rec.val_loss = nn::loss_mse(nn::forward(w, validation), validation);
        const auto stop_t = std::chrono::steady_clock::now();
        rec.wall_ms =
            cfg.deterministic
                ? 0
                : std::chrono::duration_cast<std::chrono::milliseconds>(stop_t - start).count();
        history.push_back(rec);
    }
    return {std::move(w), std::move(history)};
}

}  // namespace fedflow::fed
