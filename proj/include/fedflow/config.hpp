#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedflow/datastore.hpp"
#include "fedflow/fedcore.hpp"
#include "fedflow/kssolver.hpp"
#include "fedflow/neuralnet.hpp"

namespace fedflow::cfg {

enum class TrainMode { central, federated };
enum class Transport { inproc, socket };

// Complete experiment configuration. Defaults reproduce the full-scale run;
// the "desk" preset shrinks the production window and round count for a
// laptop-sized pass over the same pipeline.
struct ExperimentConfig {
    ks::KSParams ks;                       // L=22, N=64, dt=2.5e-3, ...
    double t_production_end = 2500.0;
    double t_test_end = 3750.0;
    double train_fraction = 0.8;
    data::PartitionScheme partition = data::PartitionScheme::contiguous;

    fed::FedConfig fed;                    // K=10, E=1, B=32, adam 1e-3
    std::size_t central_batch_size = 320;  // 10x the client batch

    nn::ArchitectureSpec arch;             // 64 -> 32 -> 16 -> R and mirror

    std::vector<std::size_t> r_sweep = {1, 2, 4, 8, 12, 16, 32, 64};
    std::string output_dir = "out";
    std::string dataset;                   // defaults to <output_dir>/ks.ksds
    TrainMode mode = TrainMode::central;
    Transport transport = Transport::inproc;
    std::string listen = "127.0.0.1:9710";

    std::string dataset_path() const {
        return dataset.empty() ? output_dir + "/ks.ksds" : dataset;
    }

    void validate() const {
        ks.validate();
        fed.validate();
        arch.validate();
        if (t_production_end <= 0.0 || t_test_end <= t_production_end)
            throw std::invalid_argument("config: need 0 < t_production_end < t_test_end");
        if (!(train_fraction > 0.0) || train_fraction > 1.0)
            throw std::invalid_argument("config: train_fraction must be in (0, 1]");
        if (central_batch_size < 1) throw std::invalid_argument("config: central_batch_size >= 1");
        for (std::size_t r : r_sweep)
            if (r < 1 || r > ks.grid_size)
                throw std::invalid_argument("config: r_sweep entries must lie in [1, N]");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("expected a boolean, got: " + v);
}

inline std::vector<std::size_t> parse_size_list(const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<std::size_t>(std::stoull(item)));
    }
    if (out.empty()) throw std::invalid_argument("expected a comma-separated list, got: " + v);
    return out;
}

}  // namespace detail

// Registry of every settable key; shared by the config-file reader and the
// CLI so both accept the same names.
struct KeyInfo {
    const char* name;
    const char* help;
};

inline const std::vector<KeyInfo>& config_keys() {
    static const std::vector<KeyInfo> keys = {
        {"L", "domain length of the periodic KS domain"},
        {"N", "grid size (power of two)"},
        {"dt", "integrator time step"},
        {"transient_start", "start time of the discarded transient"},
        {"sample_interval", "sampling period of the snapshots"},
        {"contour_points", "points on the ETDRK4 coefficient contour (>= 16)"},
        {"seed", "global RNG seed"},
        {"dealias", "apply the 2/3 rule before squaring (true/false)"},
        {"t_production_end", "end time of the train/validation window"},
        {"t_test_end", "end time of the test window"},
        {"train_fraction", "leading fraction of production samples used for training"},
        {"partition", "client partition scheme: contiguous or strided"},
        {"clients", "number of federated clients K"},
        {"local_epochs", "local epochs per round E"},
        {"batch_size", "client minibatch size B"},
        {"central_batch_size", "batch size of the centralized baseline"},
        {"learning_rate", "optimizer learning rate"},
        {"rounds", "communication rounds (or central epochs)"},
        {"optimizer", "adam or sgd"},
        {"deterministic", "fixed aggregation order and zeroed wall times"},
        {"participation", "fraction of clients selected per round"},
        {"hidden_dims", "encoder hidden widths, comma separated"},
        {"latent_dim", "latent dimension R"},
        {"r_sweep", "latent dimensions to evaluate, comma separated"},
        {"output_dir", "directory for generated artifacts"},
        {"dataset", "dataset file path (default <output_dir>/ks.ksds)"},
        {"mode", "training mode: central or federated"},
        {"transport", "federated transport: inproc or socket"},
        {"listen", "host:port the federated server binds"},
    };
    return keys;
}

inline void apply_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    const std::string v = detail::trim(value);
    try {
        if (key == "L") c.ks.domain_length = std::stod(v);
        else if (key == "N") c.ks.grid_size = static_cast<std::size_t>(std::stoull(v));
        else if (key == "dt") c.ks.dt = std::stod(v);
        else if (key == "transient_start") c.ks.transient_start = std::stod(v);
        else if (key == "sample_interval") c.ks.sample_interval = std::stod(v);
        else if (key == "contour_points") c.ks.contour_points = std::stoi(v);
        else if (key == "seed") {
            c.ks.seed = std::stoull(v);
            c.fed.seed = c.ks.seed;
        } else if (key == "dealias") c.ks.dealias = detail::parse_bool(v);
        else if (key == "t_production_end") c.t_production_end = std::stod(v);
        else if (key == "t_test_end") c.t_test_end = std::stod(v);
        else if (key == "train_fraction") c.train_fraction = std::stod(v);
        else if (key == "partition") c.partition = data::parse_partition_scheme(v);
        else if (key == "clients") c.fed.clients = std::stoi(v);
        else if (key == "local_epochs") c.fed.local_epochs = std::stoi(v);
        else if (key == "batch_size") c.fed.batch_size = std::stoull(v);
        else if (key == "central_batch_size") c.central_batch_size = std::stoull(v);
        else if (key == "learning_rate") c.fed.learning_rate = std::stod(v);
        else if (key == "rounds") c.fed.rounds = std::stoi(v);
        else if (key == "optimizer") c.fed.optimizer = nn::parse_optimizer(v);
        else if (key == "deterministic") c.fed.deterministic = detail::parse_bool(v);
        else if (key == "participation") c.fed.participation = std::stod(v);
        else if (key == "hidden_dims") c.arch.hidden_dims = detail::parse_size_list(v);
        else if (key == "latent_dim") c.arch.latent_dim = std::stoull(v);
        else if (key == "r_sweep") c.r_sweep = detail::parse_size_list(v);
        else if (key == "output_dir") c.output_dir = v;
        else if (key == "dataset") c.dataset = v;
        else if (key == "mode") {
            if (v == "central") c.mode = TrainMode::central;
            else if (v == "federated") c.mode = TrainMode::federated;
            else throw std::invalid_argument("mode must be central or federated");
        } else if (key == "transport") {
            if (v == "inproc") c.transport = Transport::inproc;
            else if (v == "socket") c.transport = Transport::socket;
            else throw std::invalid_argument("transport must be inproc or socket");
        } else if (key == "listen") c.listen = v;
        else throw std::invalid_argument("unknown configuration key: " + key);
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad value for " + key + ": " + v);
    }
}

// Flat "key = value" file; '#' starts a comment, blank lines are skipped.
inline std::vector<std::pair<std::string, std::string>> parse_config_file(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        entries.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return entries;
}

inline void apply_config_file(ExperimentConfig& c, const std::string& path) {
    for (const auto& [key, value] : parse_config_file(path)) apply_key(c, key, value);
}

// The desk preset reproduces the pipeline at laptop scale: 2,500 production
// samples (2,000 train / 500 validation at the default split), 1,000 test
// samples, 200 rounds. The short round budget gets a faster learning rate;
// the paper preset keeps the defaults and relies on its 2.5x longer run.
inline void apply_preset(ExperimentConfig& c, const std::string& name) {
    if (name == "paper") {
        c.t_production_end = 2500.0;
        c.t_test_end = 3750.0;
        c.fed.rounds = 500;
    } else if (name == "desk") {
        c.t_production_end = 625.0;
        c.t_test_end = 875.0;
        c.fed.rounds = 200;
        c.fed.learning_rate = 5e-3;
    } else {
        throw std::invalid_argument("unknown preset: " + name + " (try desk or paper)");
    }
}

}  // namespace fedflow::cfg
