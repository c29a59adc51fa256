// Command-line front end for the KS federated-autoencoder pipeline.
// Configuration precedence: built-in defaults < --preset < --config file <
// explicit flags. Every config key doubles as a flag of the same name.

#include <exception>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "fedflow/config.hpp"
#include "fedflow/harness.hpp"

namespace {

struct CliState {
    std::string preset;
    std::string config_file;
    std::map<std::string, std::string> flag_values;  // key -> raw value, flags win
    std::string connect = "127.0.0.1:9710";
    int shard_index = 0;
};

void register_key_flags(CLI::App* cmd, CliState& state) {
    for (const auto& key : fedflow::cfg::config_keys()) {
        const std::string name = std::string("--") + key.name;
        cmd->add_option_function<std::string>(
            name, [&state, key = std::string(key.name)](const std::string& v) {
                state.flag_values[key] = v;
            },
            key.help);
    }
}

fedflow::cfg::ExperimentConfig resolve_config(const CliState& state) {
    fedflow::cfg::ExperimentConfig c;
    if (!state.preset.empty()) fedflow::cfg::apply_preset(c, state.preset);
    if (!state.config_file.empty()) fedflow::cfg::apply_config_file(c, state.config_file);
    for (const auto& [key, value] : state.flag_values) fedflow::cfg::apply_key(c, key, value);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kuramoto-Sivashinsky data generation, POD baseline, and "
                 "centralized/federated autoencoder training"};
    app.require_subcommand(1);

    CliState state;
    app.add_option("--preset", state.preset, "parameter preset: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--config", state.config_file, "flat key = value configuration file");

    CLI::App* generate =
        app.add_subcommand("generate", "integrate the KS system and write the dataset file");
    CLI::App* pod = app.add_subcommand("pod", "POD reconstruction-MSE sweep over r_sweep");
    CLI::App* train =
        app.add_subcommand("train", "train the autoencoder (central or federated)");
    CLI::App* serve =
        app.add_subcommand("serve", "run the federated server over the socket transport");
    CLI::App* client = app.add_subcommand("client", "run one federated client process");
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "write the per-R test MSE report and error fields");

    for (CLI::App* cmd : {generate, pod, train, serve, client, evaluate}) {
        register_key_flags(cmd, state);
        cmd->fallthrough();  // let --preset/--config appear after the subcommand
    }
    client->add_option("--connect", state.connect, "server endpoint host:port");
    client->add_option("--shard", state.shard_index, "client shard index in [0, K)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        fedflow::cfg::ExperimentConfig config = resolve_config(state);
        if (generate->parsed()) {
            fedflow::harness::cmd_generate(config);
        } else if (pod->parsed()) {
            fedflow::harness::cmd_pod(config);
        } else if (train->parsed()) {
            fedflow::harness::cmd_train(config);
        } else if (serve->parsed()) {
            config.mode = fedflow::cfg::TrainMode::federated;
            config.transport = fedflow::cfg::Transport::socket;
            fedflow::harness::cmd_train(config);
        } else if (client->parsed()) {
            fedflow::harness::cmd_client(config, state.connect, state.shard_index);
        } else if (evaluate->parsed()) {
            fedflow::harness::cmd_evaluate(config);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
