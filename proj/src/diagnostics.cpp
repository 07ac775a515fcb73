#include "pbit/diagnostics.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "pbit/error.hpp"

namespace pbit {

ExactDistribution enumerate_boltzmann(const Model& model, double beta) {
    const std::size_t n = model.node_count();
    if (n > kMaxEnumerationNodes)
        throw ResourceError(fmt::format("enumeration over {} nodes exceeds the cap of {}", n, kMaxEnumerationNodes));
    const double scale = model.representation == Representation::binary ? 2.0 : 1.0;
    const std::uint64_t count = std::uint64_t{1} << n;

    ExactDistribution out;
    out.node_count = n;
    out.beta = beta;
    out.probabilities.resize(count);
    std::vector<std::int8_t> state(n);
    double top = -INFINITY;
    for (std::uint64_t s = 0; s < count; ++s) {
        for (std::size_t i = 0; i < n; ++i) state[i] = (s >> i) & 1u ? std::int8_t{1} : model.off_value();
        const double logw = -scale * beta * energy(model, state);
        out.probabilities[s] = logw;
        top = std::max(top, logw);
    }
    // Shift by the largest log-weight before exponentiating.
    double z = 0.0;
    for (auto& p : out.probabilities) z += (p = std::exp(p - top));
    for (auto& p : out.probabilities) p /= z;
    out.log_z = top + std::log(z);
    return out;
}

std::uint64_t state_index(std::span<const std::int8_t> state) {
    if (state.size() > 64) throw DimensionError("state too large to index");
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < state.size(); ++i)
        if (state[i] == 1) s |= std::uint64_t{1} << i;
    return s;
}

std::vector<double> state_histogram(const SampleBlock& block) {
    if (block.node_count > kMaxEnumerationNodes)
        throw ResourceError(fmt::format("histogram over {} nodes exceeds the cap of {}", block.node_count,
                                        kMaxEnumerationNodes));
    std::vector<double> h(std::size_t{1} << block.node_count, 0.0);
    if (block.empty()) return h;
    for (std::size_t r = 0; r < block.size(); ++r) h[state_index(block.row(r))] += 1.0;
    for (auto& v : h) v /= static_cast<double>(block.size());
    return h;
}

double tvd(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw DimensionError(fmt::format("tvd over {} vs {} states", p.size(), q.size()));
    double t = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) t += std::abs(p[i] - q[i]);
    return 0.5 * t;
}

double tvd(std::span<const double> empirical, const ExactDistribution& exact) {
    return tvd(empirical, exact.probabilities);
}

std::vector<MagnetizationCurve> magnetization_relaxation(const Model& model, std::span<const Engine> engines,
                                                         std::size_t repetitions, std::uint64_t sweeps,
                                                         std::uint64_t seed, unsigned workers) {
    if (repetitions < 2) throw ConfigError("magnetization study needs at least two repetitions");
    const double n = static_cast<double>(model.node_count());
    std::vector<MagnetizationCurve> curves;
    for (std::size_t e = 0; e < engines.size(); ++e) {
        Sampler sampler(model, {engines[e], engines[e] == Engine::chromatic ? workers : 1u, std::nullopt});
        std::vector<double> sum(sweeps + 1, 0.0), sumsq(sweeps + 1, 0.0);
        for (std::size_t r = 0; r < repetitions; ++r) {
            // Distinct streams per engine keep the two ensembles independent.
            ChainState state(model.node_count(), mix_seed(seed, (std::uint64_t{e} << 32) | r), model.representation);
            sum[0] += 1.0;
            sumsq[0] += 1.0;
            sampler.run(state, sweeps, [&](std::uint64_t s, std::span<const std::int8_t> m) {
                long total = 0;
                for (auto v : m) total += v;
                const double mag = static_cast<double>(total) / n;
                sum[s] += mag;
                sumsq[s] += mag * mag;
            });
        }
        MagnetizationCurve c;
        c.engine = engines[e];
        const double reps = static_cast<double>(repetitions);
        for (std::uint64_t s = 0; s <= sweeps; ++s) {
            const double mean = sum[s] / reps;
            const double var = std::max(0.0, (sumsq[s] - reps * mean * mean) / (reps - 1.0));
            c.mean.push_back(mean);
            c.std_error.push_back(std::sqrt(var / reps));
        }
        curves.push_back(std::move(c));
    }
    return curves;
}

double curve_agreement(const MagnetizationCurve& a, const MagnetizationCurve& b, double z, std::size_t first) {
    if (a.mean.size() != b.mean.size()) throw DimensionError("curves have different lengths");
    if (first >= a.mean.size()) return 1.0;
    std::size_t ok = 0;
    for (std::size_t k = first; k < a.mean.size(); ++k) {
        const double se = std::hypot(a.std_error[k], b.std_error[k]);
        ok += std::abs(a.mean[k] - b.mean[k]) <= z * se;
    }
    return static_cast<double>(ok) / static_cast<double>(a.mean.size() - first);
}

std::vector<ThroughputReport> throughput_bench(std::span<const std::size_t> graph_sizes,
                                               const ThroughputOptions& options) {
    if (options.repetitions == 0 || options.sweeps_per_repetition == 0)
        throw ConfigError("throughput bench needs repetitions and sweeps >= 1");
    using clock = std::chrono::steady_clock;
    std::vector<ThroughputReport> out;
    for (const std::size_t n : graph_sizes) {
        auto graph = std::make_shared<const SparseGraph>(color_dsatur(random_regular(n, options.degree, options.seed)));
        Model model(graph);
        Xoshiro256 rng(mix_seed(options.seed, n));
        for (auto& j : model.couplings) j = 0.2 * (rng.uniform() - 0.5);
        Sampler sampler(model, {options.engine, options.workers, std::nullopt});
        ChainState state(n, options.seed);
        sampler.run(state, options.sweeps_per_repetition);  // warm-up

        ThroughputReport rep;
        rep.graph_size = n;
        rep.engine = options.engine;
        rep.workers = options.workers;
        rep.repetitions = options.repetitions;
        std::vector<double> rates;
        for (std::size_t r = 0; r < options.repetitions; ++r) {
            const auto before = state.total_updates();
            const auto t0 = clock::now();
            sampler.run(state, options.sweeps_per_repetition);
            const double dt = std::chrono::duration<double>(clock::now() - t0).count();
            const auto flips = state.total_updates() - before;
            rep.attempted_flips += flips;
            rep.elapsed += dt;
            rates.push_back(static_cast<double>(flips) / (dt * 1e9));
        }
        rep.flips_per_ns = static_cast<double>(rep.attempted_flips) / (rep.elapsed * 1e9);
        if (rates.size() > 1) {
            double mean = 0.0, var = 0.0;
            for (double x : rates) mean += x / static_cast<double>(rates.size());
            for (double x : rates) var += (x - mean) * (x - mean) / static_cast<double>(rates.size() - 1);
            rep.std_error = std::sqrt(var / static_cast<double>(rates.size()));
        }
        out.push_back(rep);
    }
    return out;
}

double MixingRow::final_train_acc() const {
    for (auto it = log.rbegin(); it != log.rend(); ++it)
        if (it->train_acc) return *it->train_acc;
    return NAN;
}

std::vector<MixingRow> mixing_study(const ModelFactory& model_factory, const RoleAssignment& roles,
                                    const std::vector<TrainingExample>& train_set,
                                    std::span<const std::size_t> cd_values, TrainConfig base) {
    std::vector<MixingRow> rows;
    for (const std::size_t n : cd_values) {
        if (n == 0) throw ConfigError("CD-n needs n >= 1");
        TrainConfig cfg = base;
        cfg.negative_sweeps = n;
        cfg.sweeps_per_image = std::max<std::size_t>(1, n / cfg.batch_size);
        const auto result = train(model_factory(), roles, train_set, {}, cfg);
        rows.push_back({n, result.log});
    }
    return rows;
}

std::string format_table(const Table& table, bool gnuplot) {
    const char* sep = gnuplot ? " " : "\t";
    std::string out = gnuplot ? "# " : "";
    for (std::size_t c = 0; c < table.columns.size(); ++c) out += (c ? sep : "") + table.columns[c];
    out += '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) throw DimensionError("table row width differs from header");
        for (std::size_t c = 0; c < row.size(); ++c) out += fmt::format("{}{}", c ? sep : "", row[c]);
        out += '\n';
    }
    return out;
}

void write_table(const std::filesystem::path& path, const Table& table, bool gnuplot) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << format_table(table, gnuplot);
    if (!out) throw IoError("write failed for " + path.string());
}

Table throughput_table(const std::vector<ThroughputReport>& reports) {
    Table t{{"graph_size", "workers", "attempted_flips", "elapsed_s", "flips_per_ns", "std_error", "repetitions"}, {}};
    for (const auto& r : reports)
        t.rows.push_back({static_cast<double>(r.graph_size), static_cast<double>(r.workers),
                          static_cast<double>(r.attempted_flips), r.elapsed, r.flips_per_ns, r.std_error,
                          static_cast<double>(r.repetitions)});
    return t;
}

Table magnetization_table(const std::vector<MagnetizationCurve>& curves) {
    Table t;
    t.columns.push_back("sweep");
    for (const auto& c : curves) {
        t.columns.push_back(to_string(c.engine) + "_mean");
        t.columns.push_back(to_string(c.engine) + "_se");
    }
    const std::size_t len = curves.empty() ? 0 : curves.front().mean.size();
    for (std::size_t k = 0; k < len; ++k) {
        std::vector<double> row{static_cast<double>(k)};
        for (const auto& c : curves) {
            row.push_back(c.mean.at(k));
            row.push_back(c.std_error.at(k));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table mixing_table(const std::vector<MixingRow>& rows) {
    Table t{{"cd_sweeps", "epoch", "train_acc", "mean_abs_dJ"}, {}};
    for (const auto& r : rows)
        for (const auto& m : r.log)
            t.rows.push_back({static_cast<double>(r.cd_sweeps), static_cast<double>(m.epoch),
                              m.train_acc.value_or(NAN), m.mean_abs_dj});
    return t;
}

}  // namespace pbit
