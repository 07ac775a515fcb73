#include "pbit/sampler.hpp"

#include <algorithm>
#include <barrier>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "pbit/error.hpp"

namespace pbit {

Engine parse_engine(const std::string& name) {
    if (name == "sequential") return Engine::sequential;
    if (name == "chromatic") return Engine::chromatic;
    throw ConfigError("engine must be 'sequential' or 'chromatic', got '" + name + "'");
}

std::string to_string(Engine engine) {
    return engine == Engine::sequential ? "sequential" : "chromatic";
}

unsigned default_workers() {
    if (const char* env = std::getenv("PBIT_WORKERS")) {
        const int n = std::atoi(env);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    return 1;
}

// ---------------------------------------------------------------------------
// ChainState

ChainState::ChainState(std::size_t node_count, std::uint64_t seed, Representation rep, double b)
    : m(node_count, 1),
      clamp_mask(node_count, 0),
      clamp_values(node_count, 0),
      beta(b),
      representation(rep),
      update_counts(node_count, 0),
      master_seed(seed),
      init_rng(Xoshiro256::stream(seed, ~std::uint64_t{0})) {
    rng_streams.reserve(node_count);
    for (std::size_t i = 0; i < node_count; ++i) rng_streams.push_back(Xoshiro256::stream(seed, i));
}

void ChainState::clamp(NodeId i, std::int8_t value) {
    if (value != on_value() && value != off_value())
        throw std::invalid_argument(fmt::format("invalid state value {} for node {}", value, i));
    clamp_mask.at(i) = 1;
    clamp_values[i] = value;
    m[i] = value;
}

void ChainState::unclamp(NodeId i) { clamp_mask.at(i) = 0; }

void ChainState::unclamp_all() { std::fill(clamp_mask.begin(), clamp_mask.end(), std::uint8_t{0}); }

void ChainState::fill_free(std::int8_t value) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!clamp_mask[i]) m[i] = value;
}

void ChainState::randomize_free() {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!clamp_mask[i]) m[i] = from_bit((init_rng() >> 63) != 0);
}

std::uint64_t ChainState::total_updates() const noexcept {
    std::uint64_t total = 0;
    for (auto c : update_counts) total += c;
    return total;
}

// ---------------------------------------------------------------------------
// SampleBlock

void SampleBlock::append(std::uint64_t sweep, std::span<const std::int8_t> state) {
    if (state.size() != node_count) throw DimensionError("sample row size mismatch");
    sweeps.push_back(sweep);
    states.insert(states.end(), state.begin(), state.end());
}

void write_sample_block(const std::filesystem::path& path, const SampleBlock& block, Representation rep) {
    const std::size_t row_bytes = (block.node_count + 7) / 8;
    std::vector<unsigned char> packed(row_bytes * block.size(), 0);
    for (std::size_t r = 0; r < block.size(); ++r) {
        const auto row = block.row(r);
        for (std::size_t i = 0; i < row.size(); ++i)
            if (row[i] == 1) packed[r * row_bytes + i / 8] |= static_cast<unsigned char>(1u << (i % 8));
    }
    std::ofstream bits(path, std::ios::binary);
    if (!bits) throw IoError("cannot write " + path.string());
    bits.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));

    std::ofstream side(path.string() + ".sweeps");
    if (!side) throw IoError("cannot write sidecar for " + path.string());
    side << block.size() << ' ' << block.node_count << ' ' << block.stride << ' '
         << (rep == Representation::bipolar ? "bipolar" : "binary") << '\n';
    for (auto s : block.sweeps) side << s << '\n';
}

SampleBlock read_sample_block(const std::filesystem::path& path) {
    std::ifstream side(path.string() + ".sweeps");
    if (!side) throw IoError("cannot open sidecar for " + path.string());
    SampleBlock block;
    std::size_t rows = 0;
    std::string rep;
    if (!(side >> rows >> block.node_count >> block.stride >> rep) || (rep != "bipolar" && rep != "binary"))
        throw ParseError("bad sample sidecar header", 1);
    const std::int8_t off = rep == "bipolar" ? -1 : 0;
    block.sweeps.resize(rows);
    for (std::size_t r = 0; r < rows; ++r)
        if (!(side >> block.sweeps[r])) throw ParseError("truncated sweep list", r + 2);

    const std::size_t row_bytes = (block.node_count + 7) / 8;
    std::vector<unsigned char> packed(row_bytes * rows);
    std::ifstream bits(path, std::ios::binary);
    if (!bits || !bits.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size())))
        throw IoError("truncated sample block " + path.string());
    block.states.resize(rows * block.node_count);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < block.node_count; ++i)
            block.states[r * block.node_count + i] =
                (packed[r * row_bytes + i / 8] >> (i % 8)) & 1u ? std::int8_t{1} : off;
    return block;
}

// ---------------------------------------------------------------------------
// AnnealSchedule, TanhLut

std::vector<double> AnnealSchedule::betas() const {
    if (sweeps_per_step == 0) throw ConfigError("anneal needs sweeps_per_step >= 1");
    if (beta_start < 0 || beta_end < 0) throw ConfigError("beta must be non-negative");
    if (beta_start == beta_end) return {beta_start};
    const double span = beta_end - beta_start;
    if (beta_step == 0 || (span > 0) != (beta_step > 0))
        throw ConfigError(fmt::format("beta step {} cannot reach {} from {}", beta_step, beta_end, beta_start));
    const double tol = 1e-9 * std::max(1.0, std::abs(beta_end));
    const auto n = static_cast<std::size_t>(std::floor(span / beta_step + 1e-9));
    std::vector<double> out;
    out.reserve(n + 2);
    for (std::size_t k = 0; k <= n; ++k) out.push_back(beta_start + static_cast<double>(k) * beta_step);
    if (std::abs(out.back() - beta_end) <= tol)
        out.back() = beta_end;
    else
        out.push_back(beta_end);
    return out;
}

TanhLut::TanhLut(double range, std::size_t entries) : range_(range) {
    if (!(range > 0) || entries < 2) throw ConfigError("tanh LUT needs range > 0 and >= 2 entries");
    scale_ = static_cast<double>(entries - 1) / (2.0 * range);
    table_.resize(entries);
    for (std::size_t k = 0; k < entries; ++k) table_[k] = std::tanh(-range + static_cast<double>(k) / scale_);
}

double TanhLut::operator()(double x) const noexcept {
    if (x <= -range_) return table_.front();
    if (x >= range_) return table_.back();
    const auto k = static_cast<std::size_t>(std::lround((x + range_) * scale_));
    return table_[std::min(k, table_.size() - 1)];
}

// ---------------------------------------------------------------------------
// ChromaticPool: persistent workers stepping through color groups in lock
// step. The calling thread acts as worker 0.

class ChromaticPool {
public:
    ChromaticPool(const Sampler* sampler, const SparseGraph& graph, unsigned workers)
        : sampler_(sampler),
          start_(workers),
          end_(workers),
          phase_(workers, Completion{this}) {
        for (const auto& group : graph.color_schedule()) {
            std::vector<std::span<const NodeId>> parts;
            const std::size_t n = group.size();
            for (unsigned w = 0; w < workers; ++w) {
                const std::size_t lo = n * w / workers;
                const std::size_t hi = n * (w + 1) / workers;
                parts.emplace_back(group.data() + lo, hi - lo);
            }
            chunks_.push_back(std::move(parts));
        }
        for (unsigned w = 1; w < workers; ++w) threads_.emplace_back([this, w] { worker_loop(w); });
    }

    ~ChromaticPool() {
        stop_ = true;
        start_.arrive_and_wait();
        for (auto& t : threads_) t.join();
    }

    ChromaticPool(const ChromaticPool&) = delete;
    ChromaticPool& operator=(const ChromaticPool&) = delete;

    void rebind(const Sampler* sampler) noexcept { sampler_ = sampler; }

    /// Returns the number of barrier rounds executed.
    std::uint64_t run(ChainState& state, std::uint64_t n_sweeps, const std::function<void(std::uint64_t)>& on_sweep) {
        state_ = &state;
        n_sweeps_ = n_sweeps;
        on_sweep_ = on_sweep ? &on_sweep : nullptr;
        color_ = 0;
        sweep_ = 0;
        rounds_ = 0;
        abort_ = false;
        error_ = nullptr;

        start_.arrive_and_wait();
        run_job(0);
        end_.arrive_and_wait();

        if (error_) std::rethrow_exception(error_);
        return rounds_;
    }

private:
    struct Completion {
        ChromaticPool* pool;
        void operator()() noexcept { pool->on_phase_complete(); }
    };

    void on_phase_complete() noexcept {
        ++rounds_;
        if (++color_ < chunks_.size()) return;
        color_ = 0;
        ++sweep_;
        if (on_sweep_) {
            try {
                (*on_sweep_)(sweep_);
            } catch (...) {
                error_ = std::current_exception();
                abort_ = true;
            }
        }
    }

    void run_job(unsigned w) {
        const std::size_t n_colors = chunks_.size();
        for (std::uint64_t s = 0; s < n_sweeps_ && !abort_; ++s) {
            for (std::size_t c = 0; c < n_colors; ++c) {
                sampler_->update_range(*state_, chunks_[c][w]);
                phase_.arrive_and_wait();
            }
        }
    }

    void worker_loop(unsigned w) {
        for (;;) {
            start_.arrive_and_wait();
            if (stop_) return;
            run_job(w);
            end_.arrive_and_wait();
        }
    }

    const Sampler* sampler_;
    std::vector<std::vector<std::span<const NodeId>>> chunks_;
    std::barrier<> start_;
    std::barrier<> end_;
    std::barrier<Completion> phase_;
    std::vector<std::thread> threads_;

    // Job fields: written by the caller before start_, read by workers after it.
    ChainState* state_ = nullptr;
    std::uint64_t n_sweeps_ = 0;
    const std::function<void(std::uint64_t)>* on_sweep_ = nullptr;
    std::size_t color_ = 0;
    std::uint64_t sweep_ = 0;
    std::uint64_t rounds_ = 0;
    bool stop_ = false;
    bool abort_ = false;
    std::exception_ptr error_;
};

// ---------------------------------------------------------------------------
// Sampler

Sampler::Sampler(const Model& model, SamplerOptions options) : model_(model), options_(std::move(options)) {
    if (options_.workers == 0) throw ConfigError("workers must be >= 1");
    if (options_.engine == Engine::chromatic && !model_.graph->is_colored())
        throw std::invalid_argument("chromatic engine needs a colored graph");
    load(model);
    sequential_order_.resize(model_.node_count());
    for (NodeId i = 0; i < sequential_order_.size(); ++i) sequential_order_[i] = i;
    if (options_.engine == Engine::chromatic && options_.workers > 1)
        pool_ = std::make_unique<ChromaticPool>(this, *model_.graph, options_.workers);
}

Sampler::~Sampler() = default;

Sampler::Sampler(Sampler&& other) noexcept
    : model_(std::move(other.model_)),
      options_(std::move(other.options_)),
      slot_weights_(std::move(other.slot_weights_)),
      pool_(std::move(other.pool_)),
      sequential_order_(std::move(other.sequential_order_)),
      color_rounds_(other.color_rounds_) {
    if (pool_) pool_->rebind(this);
}

Sampler& Sampler::operator=(Sampler&& other) noexcept {
    if (this != &other) {
        pool_.reset();
        model_ = std::move(other.model_);
        options_ = std::move(other.options_);
        slot_weights_ = std::move(other.slot_weights_);
        pool_ = std::move(other.pool_);
        sequential_order_ = std::move(other.sequential_order_);
        color_rounds_ = other.color_rounds_;
        if (pool_) pool_->rebind(this);
    }
    return *this;
}

void Sampler::load(const Model& model) {
    const auto& g = *model_.graph;
    if (model.graph != model_.graph &&
        (model.graph->node_count() != g.node_count() || model.graph->edge_count() != g.edge_count() ||
         !std::equal(g.edges().begin(), g.edges().end(), model.graph->edges().begin())))
        throw DimensionError("sampler load: model graph differs from the sampler's graph");
    if (model.couplings.size() != g.edge_count() || model.biases.size() != g.node_count())
        throw DimensionError("sampler load: weight vector sizes do not match the graph");
    model_.couplings = model.couplings;
    model_.biases = model.biases;
    model_.precision = model.precision;
    model_.representation = model.representation;
    const auto slot_edge = g.csr_edges();
    slot_weights_.resize(slot_edge.size());
    for (std::size_t k = 0; k < slot_edge.size(); ++k) slot_weights_[k] = model_.couplings[slot_edge[k]];
}

void Sampler::check_state(const ChainState& state) const {
    if (state.size() != model_.node_count())
        throw DimensionError(fmt::format("chain has {} nodes, model has {}", state.size(), model_.node_count()));
    if (state.representation != model_.representation)
        throw std::invalid_argument("chain and model use different state representations");
}

bool Sampler::fires(double x, double u) const noexcept {
    if (options_.tanh_lut) return 0.5 * (1.0 + (*options_.tanh_lut)(x)) >= u;
    return fire_probability(x) >= u;
}

void Sampler::update_range(ChainState& state, std::span<const NodeId> nodes) const noexcept {
    const std::uint32_t* off = model_.graph->csr_offsets().data();
    const NodeId* nbr = model_.graph->csr_neighbors().data();
    const double* w = slot_weights_.data();
    const double* h = model_.biases.data();
    std::int8_t* m = state.m.data();
    double* mf = mirror_.data();
    const std::uint8_t* clamped = state.clamp_mask.data();
    const double beta = state.beta;
    const std::int8_t off_value = state.off_value();

    for (const NodeId i : nodes) {
        if (clamped[i]) continue;
        double field = h[i];
        for (std::uint32_t k = off[i]; k < off[i + 1]; ++k) field += w[k] * mf[nbr[k]];
        const double x = beta == 0.0 ? 0.0 : beta * field;
        const bool on = fires(x, state.rng_streams[i].uniform());
        m[i] = on ? std::int8_t{1} : off_value;
        mf[i] = on ? 1.0 : static_cast<double>(off_value);
        ++state.update_counts[i];
    }
}

void Sampler::sweep(ChainState& state) { run(state, 1); }

void Sampler::run(ChainState& state, std::uint64_t n_sweeps, const SweepObserver& observe) {
    check_state(state);
    mirror_.assign(state.m.begin(), state.m.end());
    if (options_.engine == Engine::sequential) {
        for (std::uint64_t s = 1; s <= n_sweeps; ++s) {
            update_range(state, sequential_order_);
            if (observe) observe(s, state.m);
        }
        return;
    }
    if (pool_) {
        std::function<void(std::uint64_t)> on_sweep;
        if (observe) on_sweep = [&](std::uint64_t s) { observe(s, state.m); };
        color_rounds_ += pool_->run(state, n_sweeps, on_sweep);
        return;
    }
    const auto& schedule = model_.graph->color_schedule();
    for (std::uint64_t s = 1; s <= n_sweeps; ++s) {
        for (const auto& group : schedule) {
            update_range(state, group);
            ++color_rounds_;
        }
        if (observe) observe(s, state.m);
    }
}

SampleBlock Sampler::run_chain(ChainState& state, std::uint64_t n_sweeps, std::uint64_t stride) {
    if (stride == 0) throw std::invalid_argument("stride must be >= 1");
    SampleBlock block;
    block.node_count = state.size();
    block.stride = stride;
    run(state, n_sweeps, [&](std::uint64_t s, std::span<const std::int8_t> m) {
        if (s % stride == 0) block.append(s, m);
    });
    return block;
}

SampleBlock Sampler::anneal(ChainState& state, const AnnealSchedule& schedule, const AnnealObserver& observe) {
    const auto betas = schedule.betas();
    SampleBlock block;
    block.node_count = state.size();
    block.stride = schedule.sweeps_per_step;
    std::uint64_t total = 0;
    for (std::size_t step = 0; step < betas.size(); ++step) {
        state.beta = betas[step];
        if (observe) {
            run(state, schedule.sweeps_per_step, [&](std::uint64_t s, std::span<const std::int8_t> m) {
                observe(step, betas[step], s, m);
            });
        } else {
            run(state, schedule.sweeps_per_step);
        }
        total += schedule.sweeps_per_step;
        block.append(total, state.m);
    }
    return block;
}

// ---------------------------------------------------------------------------
// Model-level helpers (slow path, no compiled weights)

double effective_field(const Model& model, const ChainState& state, NodeId i) {
    const auto nbrs = model.graph->neighbors(i);
    const auto eids = model.graph->neighbor_edges(i);
    double field = model.biases.at(i);
    for (std::size_t k = 0; k < nbrs.size(); ++k) field += model.couplings[eids[k]] * state.m[nbrs[k]];
    return field;
}

std::int8_t update_pbit(const Model& model, ChainState& state, NodeId i) {
    if (state.clamp_mask.at(i)) return state.m[i];
    const double field = effective_field(model, state, i);
    const double x = state.beta == 0.0 ? 0.0 : state.beta * field;
    // sgn(tanh(x) - r) with r uniform on [-1, 1) is +1 iff u <= (1 + tanh x) / 2.
    const bool on = fire_probability(x) >= state.rng_streams[i].uniform();
    state.m[i] = on ? std::int8_t{1} : state.off_value();
    ++state.update_counts[i];
    return state.m[i];
}

void sweep_sequential(const Model& model, ChainState& state) {
    Sampler sampler(model, {Engine::sequential, 1, std::nullopt});
    sampler.sweep(state);
}

void sweep_chromatic(const Model& model, ChainState& state, unsigned workers) {
    Sampler sampler(model, {Engine::chromatic, workers, std::nullopt});
    sampler.sweep(state);
}

SampleBlock run_chain(const Model& model, ChainState& state, std::uint64_t n_sweeps, std::uint64_t stride,
                      Engine engine, unsigned workers) {
    Sampler sampler(model, {engine, workers, std::nullopt});
    return sampler.run_chain(state, n_sweeps, stride);
}

SampleBlock anneal(const Model& model, ChainState& state, const AnnealSchedule& schedule, Engine engine,
                   unsigned workers) {
    Sampler sampler(model, {engine, workers, std::nullopt});
    return sampler.anneal(state, schedule);
}

}  // namespace pbit
