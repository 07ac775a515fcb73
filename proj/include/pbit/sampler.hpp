#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbit/model.hpp"
#include "pbit/rng.hpp"

namespace pbit {

enum class Engine { sequential, chromatic };

/// P(m = +1) = (1 + tanh(x)) / 2 for x = beta * I, evaluated in the
/// equivalent logistic form 1 / (1 + exp(-2x)).
inline double fire_probability(double x) noexcept { return 1.0 / (1.0 + std::exp(-2.0 * x)); }

Engine parse_engine(const std::string& name);
std::string to_string(Engine engine);

/// Per-node chain state. Every node owns an RNG stream derived from
/// (master_seed, node id), so the draws a node sees do not depend on the
/// order or thread in which nodes are updated.
struct ChainState {
    std::vector<std::int8_t> m;
    std::vector<std::uint8_t> clamp_mask;
    std::vector<std::int8_t> clamp_values;
    double beta = 1.0;
    Representation representation = Representation::bipolar;
    std::vector<Xoshiro256> rng_streams;
    /// Attempted updates per node since construction.
    std::vector<std::uint64_t> update_counts;
    std::uint64_t master_seed = 0;
    /// Source for random initial states; separate from the node streams.
    Xoshiro256 init_rng;

    ChainState() = default;
    /// All nodes free and set to +1.
    ChainState(std::size_t node_count, std::uint64_t master_seed,
               Representation representation = Representation::bipolar, double beta = 1.0);

    [[nodiscard]] std::size_t size() const noexcept { return m.size(); }
    [[nodiscard]] std::int8_t on_value() const noexcept { return 1; }
    [[nodiscard]] std::int8_t off_value() const noexcept {
        return representation == Representation::bipolar ? std::int8_t{-1} : std::int8_t{0};
    }
    [[nodiscard]] std::int8_t from_bit(bool on) const noexcept { return on ? on_value() : off_value(); }

    /// Pins node `i` to `value` (which must be a valid state value).
    void clamp(NodeId i, std::int8_t value);
    void unclamp(NodeId i);
    void unclamp_all();
    /// Sets every free node to `value`.
    void fill_free(std::int8_t value);
    /// Uniform random values on free nodes, drawn from init_rng.
    void randomize_free();
    [[nodiscard]] std::uint64_t total_updates() const noexcept;
};

/// Recorded snapshots: one row of node states per recorded sweep.
struct SampleBlock {
    std::size_t node_count = 0;
    std::size_t stride = 1;
    /// 1-based count of sweeps completed when each row was taken.
    std::vector<std::uint64_t> sweeps;
    std::vector<std::int8_t> states;

    [[nodiscard]] std::size_t size() const noexcept { return sweeps.size(); }
    [[nodiscard]] bool empty() const noexcept { return sweeps.empty(); }
    [[nodiscard]] std::span<const std::int8_t> row(std::size_t r) const {
        return {states.data() + r * node_count, node_count};
    }
    void append(std::uint64_t sweep, std::span<const std::int8_t> state);
};

/// Packed-bit export: `path` holds ceil(node_count/8) bytes per row, bit i of
/// the row set when node i is on (LSB first). `path`.sweeps is the sidecar:
/// "<rows> <node_count> <stride> <bipolar|binary>" then one sweep index per line.
void write_sample_block(const std::filesystem::path& path, const SampleBlock& block,
                        Representation representation = Representation::bipolar);
SampleBlock read_sample_block(const std::filesystem::path& path);

/// Inverse-temperature ladder from beta_start to beta_end (both included).
struct AnnealSchedule {
    double beta_start = 0.0;
    double beta_end = 5.0;
    double beta_step = 0.125;
    std::size_t sweeps_per_step = 100;

    /// Throws ConfigError on a step whose sign disagrees with end - start.
    [[nodiscard]] std::vector<double> betas() const;
};

/// Table-driven tanh over [-range, range], saturating outside, for
/// hardware-fidelity studies. Entries are evenly spaced; lookup rounds to the
/// nearest entry.
class TanhLut {
public:
    TanhLut(double range, std::size_t entries);
    [[nodiscard]] double operator()(double x) const noexcept;
    [[nodiscard]] double range() const noexcept { return range_; }
    [[nodiscard]] std::size_t entries() const noexcept { return table_.size(); }

private:
    double range_;
    double scale_;
    std::vector<double> table_;
};

struct SamplerOptions {
    Engine engine = Engine::chromatic;
    /// Worker threads for the chromatic engine (1 runs inline).
    unsigned workers = 1;
    std::optional<TanhLut> tanh_lut;
};

/// Called after every completed sweep with the 1-based sweep count of the
/// current run and the committed state. Runs while workers are parked at the
/// sweep barrier, so the state is stable during the call.
using SweepObserver = std::function<void(std::uint64_t sweep, std::span<const std::int8_t> state)>;

/// Called after every sweep of an anneal with the beta step index, the beta
/// value and the 1-based sweep count within that step.
using AnnealObserver = std::function<void(std::size_t step, double beta, std::uint64_t sweep_in_step,
                                          std::span<const std::int8_t> state)>;

class ChromaticPool;

/// p-bit Gibbs engine bound to one graph. Weights are compiled into a flat
/// per-slot coupling array; load() pushes new weights without rebuilding the
/// worker pool.
class Sampler {
public:
    explicit Sampler(const Model& model, SamplerOptions options = {});
    ~Sampler();
    Sampler(const Sampler&) = delete;
    Sampler& operator=(const Sampler&) = delete;
    Sampler(Sampler&&) noexcept;
    Sampler& operator=(Sampler&&) noexcept;

    /// Replaces couplings and biases. The model must share the graph shape.
    void load(const Model& model);

    [[nodiscard]] const Model& model() const noexcept { return model_; }
    [[nodiscard]] Engine engine() const noexcept { return options_.engine; }
    [[nodiscard]] unsigned workers() const noexcept { return options_.workers; }
    /// Barrier-separated update rounds executed by the chromatic engine.
    [[nodiscard]] std::uint64_t color_rounds() const noexcept { return color_rounds_; }

    void sweep(ChainState& state);
    /// n_sweeps sweeps, calling `observe` (if set) after each.
    void run(ChainState& state, std::uint64_t n_sweeps, const SweepObserver& observe = {});
    /// Records a row every `stride` sweeps. Throws std::invalid_argument if stride == 0.
    SampleBlock run_chain(ChainState& state, std::uint64_t n_sweeps, std::uint64_t stride);
    /// sweeps_per_step sweeps at each beta; records the final state at each beta.
    SampleBlock anneal(ChainState& state, const AnnealSchedule& schedule, const AnnealObserver& observe = {});

    // Inner kernel, exposed for ChromaticPool.
    void update_range(ChainState& state, std::span<const NodeId> nodes) const noexcept;

private:
    void check_state(const ChainState& state) const;
    [[nodiscard]] bool fires(double x, double u) const noexcept;

    Model model_;
    SamplerOptions options_;
    std::vector<double> slot_weights_;
    // Floating copy of the chain being run, so the field sum avoids int8
    // conversions. Synced from ChainState::m at the start of every run.
    mutable std::vector<double> mirror_;
    std::unique_ptr<ChromaticPool> pool_;
    std::vector<NodeId> sequential_order_;
    std::uint64_t color_rounds_ = 0;
};

/// sum_j J_ij m_j + h_i over the current neighbor states.
double effective_field(const Model& model, const ChainState& state, NodeId i);

/// One p-bit update: +1 with probability (1 + tanh(beta I)) / 2, consuming one
/// uniform draw from node i's stream. Clamped nodes are left alone and draw
/// nothing. Writes and returns the new value.
std::int8_t update_pbit(const Model& model, ChainState& state, NodeId i);

/// One sweep in ascending node order, each node seeing the latest neighbors.
void sweep_sequential(const Model& model, ChainState& state);

/// One sweep by color groups; nodes of a group update concurrently on
/// `workers` threads and a barrier separates groups.
/// Throws std::invalid_argument if the graph is not colored.
void sweep_chromatic(const Model& model, ChainState& state, unsigned workers = 1);

SampleBlock run_chain(const Model& model, ChainState& state, std::uint64_t n_sweeps, std::uint64_t stride,
                      Engine engine, unsigned workers = 1);

SampleBlock anneal(const Model& model, ChainState& state, const AnnealSchedule& schedule, Engine engine,
                   unsigned workers = 1);

/// Worker count from $PBIT_WORKERS, else 1.
unsigned default_workers();

}  // namespace pbit
