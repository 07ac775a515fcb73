#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pbit/sampler.hpp"
#include "pbit/trainer.hpp"

namespace pbit::cli {

inline const std::vector<std::string> kCommands = {"train", "classify", "generate", "complete",
                                                   "bench", "mix",      "validate"};

/// Everything a command needs. Training fields live in `train`; the rest are
/// graph, role, data, schedule and per-command settings.
struct ExperimentConfig {
    std::string command;
    std::filesystem::path out = "out";

    std::string graph = "random_regular:2000:12:1";
    std::filesystem::path roles;
    std::size_t n_classes = 10;
    std::size_t n_replicas = 5;
    std::uint64_t role_seed = 1;
    bool randomize_roles = true;

    std::filesystem::path data_dir = "data/mnist5k";
    std::size_t per_class = 0;
    double threshold = 0.5;
    std::size_t image_rows = 28;
    std::size_t image_cols = 28;

    TrainConfig train;
    AnnealSchedule schedule;

    std::filesystem::path model;
    std::string split = "test";
    std::size_t images = 0;
    std::size_t sweeps = 1000;
    std::size_t class_id = 0;
    std::size_t samples = 10;
    std::size_t grid_cols = 10;
    std::size_t image_index = 0;
    std::string mask = "bottom";
    bool mask_label = true;

    std::string sizes = "1000,2000,4000";
    std::size_t degree = 12;
    std::size_t bench_sweeps = 200;
    std::size_t repetitions = 20;
    std::string cd_values = "100,1000,10000";
    std::size_t nodes = 10;
    std::size_t validate_sweeps = 1000000;
    bool gnuplot = false;
};

/// Every key accepted in config files and as --key flags (underscores may be
/// written as dashes on the command line).
const std::vector<std::string>& experiment_keys();

/// Throws ConfigError on an unknown key or a bad value.
void set_key(ExperimentConfig& config, const std::string& key, const std::string& value);
std::vector<std::pair<std::string, std::string>> entries(const ExperimentConfig& config);

/// Defaults, then the file's keys, then the overrides. Worker count defaults
/// to $PBIT_WORKERS when neither source sets it.
ExperimentConfig resolve(const std::map<std::string, std::string>& file_keys,
                         const std::map<std::string, std::string>& overrides);

/// Effective config as a re-runnable key = value file.
void write_config(const std::filesystem::path& path, const ExperimentConfig& config);

/// Runs config.command, writing artifacts under config.out and a short report
/// to `log`. Returns 0 on success and 1 when a check (validate) fails; other
/// failures are thrown as the library's error types.
int run(const ExperimentConfig& config, std::ostream& log);

/// Exit code for an exception escaping run(): 2 config, 3 I/O, 4 dimension,
/// 5 resource, 1 otherwise.
int exit_code_for(const std::exception& e);
std::string failure_class(const std::exception& e);

}  // namespace pbit::cli
