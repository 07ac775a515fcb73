#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pbit/model.hpp"
#include "pbit/sampler.hpp"
#include "pbit/trainer.hpp"

namespace pbit {

inline constexpr std::size_t kMaxEnumerationNodes = 20;

/// Exact Boltzmann law over all 2^n states; state s has node i on iff bit i
/// of s is set.
struct ExactDistribution {
    std::size_t node_count = 0;
    double beta = 1.0;
    double log_z = 0.0;
    std::vector<double> probabilities;
};

/// exp(-beta E) / Z for bipolar models. Binary models use exp(-2 beta E),
/// the law their (1 + tanh(beta I)) / 2 p-bits sample.
/// Throws ResourceError above kMaxEnumerationNodes.
ExactDistribution enumerate_boltzmann(const Model& model, double beta);

/// Bit-packed index of a state (bit i = node i on).
std::uint64_t state_index(std::span<const std::int8_t> state);

/// Empirical distribution of the rows of a block over all 2^n states.
std::vector<double> state_histogram(const SampleBlock& block);

/// ½ Σ |p - q|. Throws DimensionError on size mismatch.
double tvd(std::span<const double> p, std::span<const double> q);
double tvd(std::span<const double> empirical, const ExactDistribution& exact);

struct MagnetizationCurve {
    Engine engine = Engine::sequential;
    /// Entry k is the ensemble after k sweeps (entry 0 is the all +1 start).
    std::vector<double> mean;
    std::vector<double> std_error;
};

/// M chains per engine from the all +1 state, each seeded by (seed, chain).
/// Records <m> = Σ m_i / N after every sweep.
std::vector<MagnetizationCurve> magnetization_relaxation(const Model& model, std::span<const Engine> engines,
                                                         std::size_t repetitions, std::uint64_t sweeps,
                                                         std::uint64_t seed, unsigned workers = 1);

/// Fraction of recorded sweeps where |a - b| <= z * sqrt(se_a^2 + se_b^2).
double curve_agreement(const MagnetizationCurve& a, const MagnetizationCurve& b, double z = 3.0,
                       std::size_t first = 1);

struct ThroughputReport {
    std::size_t graph_size = 0;
    Engine engine = Engine::chromatic;
    unsigned workers = 1;
    std::uint64_t attempted_flips = 0;
    double elapsed = 0.0;
    double flips_per_ns = 0.0;
    std::size_t repetitions = 0;
    /// Standard error of the per-repetition flips/ns.
    double std_error = 0.0;
};

struct ThroughputOptions {
    std::size_t degree = 12;
    Engine engine = Engine::chromatic;
    unsigned workers = 1;
    std::uint64_t sweeps_per_repetition = 200;
    std::size_t repetitions = 20;
    std::uint64_t seed = 1;
};

/// Random regular graphs of each size with random couplings; attempted flips
/// are read from the chain's update counters.
std::vector<ThroughputReport> throughput_bench(std::span<const std::size_t> graph_sizes,
                                               const ThroughputOptions& options);

/// One trained model per CD-n: n negative sweeps per update and n / B
/// positive sweeps per image. Returns the metrics log of each run.
struct MixingRow {
    std::size_t cd_sweeps = 0;
    std::vector<EpochMetrics> log;
    [[nodiscard]] double final_train_acc() const;
};
using ModelFactory = std::function<Model()>;
std::vector<MixingRow> mixing_study(const ModelFactory& model_factory, const RoleAssignment& roles,
                                    const std::vector<TrainingExample>& train_set,
                                    std::span<const std::size_t> cd_values, TrainConfig base);

/// Delimiter-separated table. With gnuplot=true the header line is prefixed
/// by '#' and columns are space separated.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};
void write_table(const std::filesystem::path& path, const Table& table, bool gnuplot = false);
std::string format_table(const Table& table, bool gnuplot = false);

Table throughput_table(const std::vector<ThroughputReport>& reports);
Table magnetization_table(const std::vector<MagnetizationCurve>& curves);
Table mixing_table(const std::vector<MixingRow>& rows);

}  // namespace pbit
