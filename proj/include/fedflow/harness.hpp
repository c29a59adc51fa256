#pragma once

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "fedflow/config.hpp"
#include "fedflow/datastore.hpp"
#include "fedflow/fedcore.hpp"
#include "fedflow/kssolver.hpp"
#include "fedflow/neuralnet.hpp"
#include "fedflow/pod.hpp"
#include "fedflow/transport.hpp"

namespace fedflow::harness {

namespace detail {

// shortest round-trip decimal representation
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) {
        for (int prec = 1; prec <= 16; ++prec) {
            char shorter[40];
            std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
            std::sscanf(shorter, "%lf", &back);
            if (back == v) return shorter;
        }
    }
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    const std::size_t n = std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
    if (n != text.size()) throw std::runtime_error("short write: " + path);
}

}  // namespace detail

inline std::string history_csv(const fed::TrainingHistory& history) {
    std::string out = "round,train_loss,val_loss,wall_ms\n";
    for (const auto& rec : history) {
        out += std::to_string(rec.round) + "," + detail::fmt_double(rec.train_loss) + "," +
               detail::fmt_double(rec.val_loss) + "," + std::to_string(rec.wall_ms) + "\n";
    }
    return out;
}

inline std::string mode_name(cfg::TrainMode m) {
    return m == cfg::TrainMode::central ? "central" : "federated";
}

inline std::string checkpoint_path(const cfg::ExperimentConfig& c, cfg::TrainMode mode,
                                   std::size_t latent) {
    return c.output_dir + "/ae_" + mode_name(mode) + "_R" + std::to_string(latent) + ".fwts";
}

inline std::string history_path(const cfg::ExperimentConfig& c, cfg::TrainMode mode,
                                std::size_t latent) {
    return c.output_dir + "/history_" + mode_name(mode) + "_R" + std::to_string(latent) + ".csv";
}

// Run the paper's data protocol: integrate the transient from a seeded
// random field, continue through the production window (split into train
// and validation), continue again for the test window, fit the scaler on
// the training split, and persist everything as one KSDS file.
inline data::DatasetSplits generate_dataset(const cfg::ExperimentConfig& c,
                                            std::ostream& log = std::cout) {
    c.validate();
    ks::Solver solver(c.ks);
    const std::vector<double> u_init = solver.random_initial_condition();

    const ks::Trajectory transient = solver.simulate(u_init, c.ks.transient_start, 0.0);
    std::vector<double> u0(transient.snapshots.cols);
    for (std::size_t j = 0; j < u0.size(); ++j)
        u0[j] = transient.snapshots(transient.snapshots.rows - 1, j);

    const ks::Trajectory production = solver.simulate(u0, 0.0, c.t_production_end);
    std::vector<double> u1(production.snapshots.cols);
    for (std::size_t j = 0; j < u1.size(); ++j)
        u1[j] = production.snapshots(production.snapshots.rows - 1, j);
    const ks::Trajectory test = solver.simulate(u1, c.t_production_end, c.t_test_end);

    data::DatasetSplits splits;
    auto [train, validation] = data::split(production, c.train_fraction);
    splits.train = std::move(train);
    splits.validation = std::move(validation);
    splits.test = test.snapshots;
    splits.scaler = data::fit_scaler(splits.train);

    log << "generated " << production.snapshots.rows << " production samples ("
        << splits.train.rows << " train, " << splits.validation.rows << " validation) and "
        << splits.test.rows << " test samples\n";
    return splits;
}

inline void cmd_generate(const cfg::ExperimentConfig& c, std::ostream& log = std::cout) {
    std::filesystem::create_directories(c.output_dir);
    const data::DatasetSplits splits = generate_dataset(c, log);
    data::save_dataset(c.dataset_path(), splits);
    log << "wrote " << c.dataset_path() << "\n";
}

// POD baseline sweep: one CSV row per requested latent dimension with the
// per-entry reconstruction MSE on the training and test splits, both in
// physical units.
inline std::string cmd_pod(const cfg::ExperimentConfig& c, std::ostream& log = std::cout) {
    const data::DatasetSplits splits = data::load_dataset(c.dataset_path());
    const pod::PODBasis basis = pod::compute_pod(splits.train);
    std::string csv = "R,train_mse,test_mse\n";
    for (std::size_t r : c.r_sweep) {
        const double train_mse = pod::reconstruction_mse(basis, splits.train, r);
        const double test_mse = pod::reconstruction_mse(basis, splits.test, r);
        csv += std::to_string(r) + "," + detail::fmt_double(train_mse) + "," +
               detail::fmt_double(test_mse) + "\n";
    }
    std::filesystem::create_directories(c.output_dir);
    const std::string path = c.output_dir + "/pod_mse.csv";
    detail::write_text_file(path, csv);
    log << "wrote " << path << "\n";
    return csv;
}

// Shared by `train` and `serve`. Central mode trains on the pooled scaled
// data; federated mode partitions it into shards and runs FedAvg, either
// in-process or over the socket transport.
inline std::pair<nn::ModelParams, fed::TrainingHistory> train_model(
    const cfg::ExperimentConfig& c, std::ostream& log = std::cout) {
    c.validate();
    const data::DatasetSplits splits = data::load_dataset(c.dataset_path());
    const Matrix train_scaled = data::apply(splits.scaler, splits.train);
    const Matrix val_scaled = data::apply(splits.scaler, splits.validation);
    nn::ArchitectureSpec arch = c.arch;
    arch.input_dim = splits.train.cols;

    if (c.mode == cfg::TrainMode::central) {
        fed::FedConfig central = c.fed;
        central.batch_size = c.central_batch_size;
        return fed::train_centralized(arch, central, train_scaled, val_scaled);
    }
    std::vector<data::ClientShard> shards =
        data::partition(train_scaled, c.fed.clients, c.partition, c.fed.seed);
    if (c.transport == cfg::Transport::inproc)
        return fed::train_federated(arch, c.fed, std::move(shards), train_scaled, val_scaled);

    net::Listener listener(net::parse_endpoint(c.listen));
    log << "serving federated training on " << c.listen << ", waiting for " << c.fed.clients
        << " clients\n";
    return net::serve_federated(arch, c.fed, train_scaled, val_scaled, listener);
}

inline void cmd_train(const cfg::ExperimentConfig& c, std::ostream& log = std::cout) {
    auto [params, history] = train_model(c, log);
    std::filesystem::create_directories(c.output_dir);
    const std::string ckpt = checkpoint_path(c, c.mode, c.arch.latent_dim);
    const std::string hist = history_path(c, c.mode, c.arch.latent_dim);
    nn::save_checkpoint(ckpt, params);
    detail::write_text_file(hist, history_csv(history));
    log << "wrote " << ckpt << " and " << hist << "\n";
    if (!history.empty())
        log << "final train_loss " << history.back().train_loss << ", val_loss "
            << history.back().val_loss << "\n";
}

// One federated client process: derive this client's shard from the shared
// dataset file exactly as the server does, then serve rounds until SHUTDOWN.
inline void cmd_client(const cfg::ExperimentConfig& c, const std::string& connect_to,
                       int shard_index, std::ostream& log = std::cout) {
    c.validate();
    if (shard_index < 0 || shard_index >= c.fed.clients)
        throw std::invalid_argument("client: shard index out of range");
    const data::DatasetSplits splits = data::load_dataset(c.dataset_path());
    const Matrix train_scaled = data::apply(splits.scaler, splits.train);
    std::vector<data::ClientShard> shards =
        data::partition(train_scaled, c.fed.clients, c.partition, c.fed.seed);
    const int rounds = net::run_federated_client(
        net::parse_endpoint(connect_to), shards[static_cast<std::size_t>(shard_index)], c.fed);
    log << "client " << shard_index << " served " << rounds << " rounds\n";
}

// Physical-unit test MSE of a scaled-space autoencoder checkpoint.
inline double autoencoder_test_mse(const nn::ModelParams& params, const Matrix& test,
                                   const data::Scaler& scaler) {
    const Matrix pred_scaled = nn::forward(params, data::apply(scaler, test));
    return mean_squared_error(data::invert(scaler, pred_scaled), test);
}

inline Matrix absolute_error_field(const Matrix& truth, const Matrix& pred) {
    Matrix err = truth;
    for (std::size_t i = 0; i < err.data.size(); ++i)
        err.data[i] = std::abs(truth.data[i] - pred.data[i]);
    return err;
}

// Evaluation report: per-R physical test MSE for POD and for whichever
// autoencoder checkpoints exist, plus |true - predicted| error fields on the
// test trajectory at the configured latent dimension.
inline std::string cmd_evaluate(const cfg::ExperimentConfig& c, std::ostream& log = std::cout) {
    const data::DatasetSplits splits = data::load_dataset(c.dataset_path());
    const pod::PODBasis basis = pod::compute_pod(splits.train);
    std::string csv = "method,R,test_mse_physical\n";
    for (std::size_t r : c.r_sweep) {
        csv += "pod," + std::to_string(r) + "," +
               detail::fmt_double(pod::reconstruction_mse(basis, splits.test, r)) + "\n";
        for (cfg::TrainMode mode : {cfg::TrainMode::central, cfg::TrainMode::federated}) {
            const std::string ckpt = checkpoint_path(c, mode, r);
            if (!std::filesystem::exists(ckpt)) continue;
            const nn::ModelParams params = nn::load_checkpoint(ckpt);
            csv += "ae_" + mode_name(mode) + "," + std::to_string(r) + "," +
                   detail::fmt_double(autoencoder_test_mse(params, splits.test, splits.scaler)) +
                   "\n";
        }
    }
    std::filesystem::create_directories(c.output_dir);
    detail::write_text_file(c.output_dir + "/report.csv", csv);
    log << "wrote " << c.output_dir << "/report.csv\n";

    const std::size_t r_field = c.arch.latent_dim;
    {
        const Matrix pod_pred =
            pod::reconstruct(basis, pod::project(basis, splits.test, r_field), r_field);
        data::save_matrix(c.output_dir + "/error_pod_R" + std::to_string(r_field) + ".ksds",
                          absolute_error_field(splits.test, pod_pred));
    }
    for (cfg::TrainMode mode : {cfg::TrainMode::central, cfg::TrainMode::federated}) {
        const std::string ckpt = checkpoint_path(c, mode, r_field);
        if (!std::filesystem::exists(ckpt)) continue;
        const nn::ModelParams params = nn::load_checkpoint(ckpt);
        const Matrix pred =
            data::invert(splits.scaler, nn::forward(params, data::apply(splits.scaler, splits.test)));
        data::save_matrix(
            c.output_dir + "/error_ae_" + mode_name(mode) + "_R" + std::to_string(r_field) + ".ksds",
            absolute_error_field(splits.test, pred));
        log << "wrote error field for ae_" << mode_name(mode) << " at R=" << r_field << "\n";
    }
    return csv;
}

}  // namespace fedflow::harness
