// pbit: train, sample and benchmark sparse p-bit networks.
//
//   pbit <command> [--config FILE] [--key value ...]
//
// Every config key is also a flag (--learning-rate or --learning_rate).
// Flags override the config file, which overrides the defaults.

#include <algorithm>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "experiment.hpp"
#include "pbit/error.hpp"
#include "pbit/trainer.hpp"

namespace {

std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace pbit;
    CLI::App app{"Sparse p-bit network trainer and sampler"};
    app.set_help_flag("-h,--help", "Show help");

    std::string command;
    std::string config_path;
    app.add_option("command", command, "train | classify | generate | complete | bench | mix | validate")
        ->check(CLI::IsMember(cli::kCommands));
    app.add_option("--config", config_path, "key = value file");

    std::map<std::string, std::string> overrides;
    std::map<std::string, std::string> flag_values;
    for (const auto& key : cli::experiment_keys()) {
        if (key == "command") continue;
        std::string names = "--" + key;
        if (dashed(key) != key) names += ",--" + dashed(key);
        if (key == "master_seed") names += ",--seed";
        app.add_option(names, flag_values[key], "config key " + key);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        std::map<std::string, std::string> file_keys;
        if (!config_path.empty()) {
            try {
                file_keys = read_key_values(config_path);
            } catch (const ParseError& e) {
                throw ConfigError(e.what());
            }
        }
        for (const auto& key : cli::experiment_keys())
            if (key != "command" && app.count("--" + key)) overrides[key] = flag_values[key];
        if (!command.empty()) overrides["command"] = command;
        const auto config = cli::resolve(file_keys, overrides);
        return cli::run(config, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "pbit: " << cli::failure_class(e) << " error: " << e.what() << '\n';
        return cli::exit_code_for(e);
    }
}
