#include "pbit/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "pbit/diagnostics.hpp"
#include "pbit/error.hpp"
#include "pbit/tasks.hpp"

namespace pbit {

CdMode parse_cd_mode(const std::string& text) {
    if (text == "CD" || text == "cd") return CdMode::cd;
    if (text == "PCD" || text == "pcd") return CdMode::pcd;
    throw ConfigError("cd_mode must be CD or PCD, got '" + text + "'");
}

std::string to_string(CdMode mode) { return mode == CdMode::cd ? "CD" : "PCD"; }

void TrainConfig::validate() const {
    if (batch_size == 0 || sweeps_per_image == 0 || eval_every == 0 || eval_sweeps == 0)
        throw ConfigError("batch_size, sweeps_per_image, eval_every and eval_sweeps must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
    if (workers == 0) throw ConfigError("workers must be positive");
    if (!(init_sigma >= 0.0)) throw ConfigError("init_sigma must be non-negative");
    if (!(clip_delta > 0.0 && clip_delta < 0.5)) throw ConfigError("clip_delta must lie in (0, 0.5)");
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) throw ConfigError(fmt::format("bad value '{}' for key '{}'", text, key));
    return value;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string number(double v) { return fmt::format("{}", v); }

}  // namespace

const std::vector<std::string>& train_config_keys() {
    static const std::vector<std::string> keys = {
        "epochs",        "batch_size",  "n_batches",   "sweeps_per_image",  "negative_sweeps",
        "learning_rate", "momentum",    "weight_decay", "cd_mode",          "engine",
        "workers",       "beta",        "master_seed", "precision",         "init_sigma",
        "clip_delta",    "eval_every",  "eval_sweeps", "eval_train_images", "eval_test_images"};
    return keys;
}

void set_train_key(TrainConfig& c, const std::string& key, const std::string& value) {
    using sz = std::size_t;
    if (key == "epochs") c.epochs = parse_number<sz>(key, value);
    else if (key == "batch_size") c.batch_size = parse_number<sz>(key, value);
    else if (key == "n_batches") c.n_batches = parse_number<sz>(key, value);
    else if (key == "sweeps_per_image") c.sweeps_per_image = parse_number<sz>(key, value);
    else if (key == "negative_sweeps") c.negative_sweeps = parse_number<sz>(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
    else if (key == "momentum") c.momentum = parse_number<double>(key, value);
    else if (key == "weight_decay") c.weight_decay = parse_number<double>(key, value);
    else if (key == "cd_mode") c.cd_mode = parse_cd_mode(value);
    else if (key == "engine") c.engine = parse_engine(value);
    else if (key == "workers") c.workers = parse_number<unsigned>(key, value);
    else if (key == "beta") c.beta = parse_number<double>(key, value);
    else if (key == "master_seed") c.master_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "precision") c.precision = PrecisionSpec::parse(value);
    else if (key == "init_sigma") c.init_sigma = parse_number<double>(key, value);
    else if (key == "clip_delta") c.clip_delta = parse_number<double>(key, value);
    else if (key == "eval_every") c.eval_every = parse_number<sz>(key, value);
    else if (key == "eval_sweeps") c.eval_sweeps = parse_number<sz>(key, value);
    else if (key == "eval_train_images") c.eval_train_images = parse_number<sz>(key, value);
    else if (key == "eval_test_images") c.eval_test_images = parse_number<sz>(key, value);
    else throw ConfigError("unknown training key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> train_config_entries(const TrainConfig& c) {
    return {{"epochs", std::to_string(c.epochs)},
            {"batch_size", std::to_string(c.batch_size)},
            {"n_batches", std::to_string(c.n_batches)},
            {"sweeps_per_image", std::to_string(c.sweeps_per_image)},
            {"negative_sweeps", std::to_string(c.negative_sweeps)},
            {"learning_rate", number(c.learning_rate)},
            {"momentum", number(c.momentum)},
            {"weight_decay", number(c.weight_decay)},
            {"cd_mode", to_string(c.cd_mode)},
            {"engine", to_string(c.engine)},
            {"workers", std::to_string(c.workers)},
            {"beta", number(c.beta)},
            {"master_seed", std::to_string(c.master_seed)},
            {"precision", c.precision.to_string()},
            {"init_sigma", number(c.init_sigma)},
            {"clip_delta", number(c.clip_delta)},
            {"eval_every", std::to_string(c.eval_every)},
            {"eval_sweeps", std::to_string(c.eval_sweeps)},
            {"eval_train_images", std::to_string(c.eval_train_images)},
            {"eval_test_images", std::to_string(c.eval_test_images)}};
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
    std::map<std::string, std::string> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto content = trim(line);
        if (content.empty()) continue;
        const auto eq = content.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
        auto key = trim(std::string_view(content).substr(0, eq));
        auto value = trim(std::string_view(content).substr(eq + 1));
        if (key.empty()) throw ParseError("empty key", line_no);
        if (!out.emplace(key, value).second) throw ParseError("repeated key '" + key + "'", line_no);
    }
    return out;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str());
}

DatasetStats dataset_stats(const Dataset& train) {
    return {pixel_on_proportion(train), class_frequencies(train)};
}

Model init_model(std::shared_ptr<const SparseGraph> graph, const RoleAssignment& roles, const DatasetStats& stats,
                 std::uint64_t seed, double sigma, double delta) {
    if (stats.pixel_on.size() != roles.visible_ids.size())
        throw DimensionError(fmt::format("{} pixel statistics for {} visible nodes", stats.pixel_on.size(),
                                         roles.visible_ids.size()));
    if (stats.class_freq.size() != roles.n_classes)
        throw DimensionError("class frequency count differs from the label layout");
    if (roles.node_count() != graph->node_count()) throw DimensionError("role assignment does not cover the graph");

    Model model(std::move(graph));
    Xoshiro256 rng(mix_seed(seed, 0x696e6974));
    std::normal_distribution<double> normal(0.0, sigma);
    for (auto& j : model.couplings) j = sigma > 0 ? normal(rng) : 0.0;

    auto logit = [delta](double p) {
        const double q = std::clamp(p, delta, 1.0 - delta);
        if (!(q > 0.0 && q < 1.0)) throw ConfigError("on-proportion outside (0,1) after clipping");
        return std::log(q / (1.0 - q));
    };
    for (std::size_t p = 0; p < roles.visible_ids.size(); ++p) model.biases[roles.visible_ids[p]] = logit(stats.pixel_on[p]);
    for (std::size_t r = 0; r < roles.n_replicas; ++r)
        for (std::size_t c = 0; c < roles.n_classes; ++c) model.biases[roles.label_node(r, c)] = logit(stats.class_freq[c]);
    return model;
}

CorrelationAccumulator::CorrelationAccumulator(const SparseGraph& graph)
    : pair_(graph.edge_count(), 0), single_(graph.node_count(), 0) {
    eu_.reserve(graph.edge_count());
    ev_.reserve(graph.edge_count());
    for (const auto& e : graph.edges()) {
        eu_.push_back(e.u);
        ev_.push_back(e.v);
    }
}

void CorrelationAccumulator::add(std::span<const std::int8_t> m) {
    const std::size_t n_edges = pair_.size();
    for (std::size_t k = 0; k < n_edges; ++k) pair_[k] += m[eu_[k]] * m[ev_[k]];
    for (std::size_t i = 0; i < single_.size(); ++i) single_[i] += m[i];
    ++samples_;
}

void CorrelationAccumulator::reset() {
    std::fill(pair_.begin(), pair_.end(), 0);
    std::fill(single_.begin(), single_.end(), 0);
    samples_ = 0;
}

PhaseStats CorrelationAccumulator::stats() const {
    PhaseStats s;
    s.samples = samples_;
    const double inv = samples_ ? 1.0 / static_cast<double>(samples_) : 0.0;
    s.corr.resize(pair_.size());
    s.mean.resize(single_.size());
    for (std::size_t k = 0; k < pair_.size(); ++k) s.corr[k] = static_cast<double>(pair_[k]) * inv;
    for (std::size_t i = 0; i < single_.size(); ++i) s.mean[i] = static_cast<double>(single_[i]) * inv;
    return s;
}

PhaseStats positive_phase(Sampler& sampler, const RoleAssignment& roles, std::span<const TrainingExample> batch,
                          const TrainConfig& config, std::uint64_t seed) {
    const auto& model = sampler.model();
    CorrelationAccumulator acc(*model.graph);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& ex = batch[b];
        if (ex.bits.size() != roles.visible_ids.size())
            throw DimensionError(fmt::format("image has {} pixels, network has {} visible nodes", ex.bits.size(),
                                             roles.visible_ids.size()));
        if (ex.label >= roles.n_classes) throw std::invalid_argument(fmt::format("label {} out of range", ex.label));
        ChainState state(model.node_count(), mix_seed(seed, b), model.representation, config.beta);
        for (std::size_t p = 0; p < ex.bits.size(); ++p) {
            if (ex.bits[p] > 1) throw std::invalid_argument("training images must be binary");
            state.clamp(roles.visible_ids[p], state.from_bit(ex.bits[p] != 0));
        }
        for (std::size_t r = 0; r < roles.n_replicas; ++r)
            for (std::size_t c = 0; c < roles.n_classes; ++c)
                state.clamp(roles.label_node(r, c), state.from_bit(c == ex.label));
        state.randomize_free();
        sampler.run(state, config.sweeps_per_image, [&](std::uint64_t, std::span<const std::int8_t> m) { acc.add(m); });
    }
    return acc.stats();
}

PhaseStats negative_phase(Sampler& sampler, const TrainConfig& config, std::uint64_t seed, ChainState* persistent) {
    const auto& model = sampler.model();
    CorrelationAccumulator acc(*model.graph);
    auto observe = [&](std::uint64_t, std::span<const std::int8_t> m) { acc.add(m); };
    if (config.cd_mode == CdMode::pcd) {
        if (!persistent) throw std::invalid_argument("PCD needs a persistent chain");
        persistent->beta = config.beta;
        sampler.run(*persistent, config.effective_negative_sweeps(), observe);
    } else {
        ChainState state(model.node_count(), seed, model.representation, config.beta);
        state.randomize_free();
        sampler.run(state, config.effective_negative_sweeps(), observe);
    }
    return acc.stats();
}

double apply_update(Model& model, const PhaseStats& data, const PhaseStats& free, const TrainConfig& config,
                    MomentumState& momentum) {
    if (data.corr.size() != model.edge_count() || free.corr.size() != model.edge_count() ||
        data.mean.size() != model.node_count() || free.mean.size() != model.node_count())
        throw DimensionError("gradient dimensions do not match the model");
    momentum.delta_j.resize(model.edge_count(), 0.0);
    momentum.delta_h.resize(model.node_count(), 0.0);
    const double eps = config.learning_rate;
    const double alpha = config.momentum;
    const double decay = config.weight_decay;

    double abs_sum = 0.0;
    for (std::size_t k = 0; k < model.edge_count(); ++k) {
        double d = eps * (data.corr[k] - free.corr[k]) + alpha * momentum.delta_j[k];
        if (decay > 0.0) d -= eps * decay * model.couplings[k];
        model.couplings[k] += d;
        momentum.delta_j[k] = d;
        abs_sum += std::abs(d);
    }
    for (std::size_t i = 0; i < model.node_count(); ++i) {
        const double d = eps * (data.mean[i] - free.mean[i]) + alpha * momentum.delta_h[i];
        model.biases[i] += d;
        momentum.delta_h[i] = d;
    }
    return model.edge_count() ? abs_sum / static_cast<double>(model.edge_count()) : 0.0;
}

std::vector<TrainingExample> make_examples(const Dataset& ds) {
    std::vector<TrainingExample> out;
    out.reserve(ds.size());
    for (std::size_t k = 0; k < ds.size(); ++k) out.push_back({image_bits(ds, k), ds.labels[k]});
    return out;
}

void write_metrics(const std::filesystem::path& path, const std::vector<EpochMetrics>& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    auto acc = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string("nan"); };
    out << "epoch\ttrain_acc\ttest_acc\tmean_abs_dJ\twallclock_s\n";
    for (const auto& m : log)
        out << fmt::format("{}\t{}\t{}\t{}\t{:.3f}\n", m.epoch, acc(m.train_acc), acc(m.test_acc), m.mean_abs_dj,
                           m.wallclock_s);
    if (!out) throw IoError("write failed for " + path.string());
}

namespace {

std::optional<double> monitor_accuracy(Sampler& sampler, const RoleAssignment& roles,
                                       const std::vector<TrainingExample>& set, std::size_t limit,
                                       std::uint64_t sweeps, std::uint64_t seed) {
    const std::size_t n = std::min(limit, set.size());
    if (n == 0) return std::nullopt;
    std::size_t correct = 0;
    for (std::size_t k = 0; k < n; ++k)
        correct += classify(sampler, roles, set[k].bits, sweeps, mix_seed(seed, k)).predicted == set[k].label;
    return static_cast<double>(correct) / static_cast<double>(n);
}

// Stream tags keep the seeds of different chain roles apart.
constexpr std::uint64_t kPositiveTag = 0x706f73;
constexpr std::uint64_t kNegativeTag = 0x6e6567;
constexpr std::uint64_t kShuffleTag = 0x736875;
constexpr std::uint64_t kEvalTag = 0x6576616c;
constexpr std::uint64_t kPersistentTag = 0x706364;

}  // namespace

TrainResult train(const Model& initial, const RoleAssignment& roles, const std::vector<TrainingExample>& train_set,
                  const std::vector<TrainingExample>& test_set, const TrainConfig& config,
                  const std::filesystem::path& checkpoint_dir, const TrainCallbacks& callbacks) {
    config.validate();
    if (initial.representation != Representation::bipolar) throw std::invalid_argument("training expects a bipolar model");
    const std::size_t n_batches = config.n_batches ? config.n_batches : train_set.size() / config.batch_size;
    if (config.epochs > 0 && n_batches == 0) throw ConfigError("training set smaller than one batch");
    if (n_batches * config.batch_size > train_set.size())
        throw ConfigError(fmt::format("{} batches of {} need {} images, have {}", n_batches, config.batch_size,
                                      n_batches * config.batch_size, train_set.size()));
    if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    TrainResult result;
    result.model = initial;
    result.model.precision = PrecisionSpec::float64();
    Model& master = result.model;
    Sampler sampler(quantized(master, config.precision), {config.engine, config.workers, std::nullopt});
    MomentumState momentum;
    ChainState persistent;
    if (config.cd_mode == CdMode::pcd) {
        persistent = ChainState(master.node_count(), mix_seed(config.master_seed, kPersistentTag),
                                Representation::bipolar, config.beta);
        persistent.randomize_free();
    }

    auto record = [&](std::size_t epoch, double mean_abs_dj) {
        EpochMetrics m;
        m.epoch = epoch;
        m.mean_abs_dj = mean_abs_dj;
        if (epoch % config.eval_every == 0 || epoch == config.epochs) {
            const auto seed = mix_seed(config.master_seed, kEvalTag + epoch);
            m.train_acc = monitor_accuracy(sampler, roles, train_set, config.eval_train_images, config.eval_sweeps, seed);
            m.test_acc = monitor_accuracy(sampler, roles, test_set, config.eval_test_images, config.eval_sweeps, seed);
        }
        m.wallclock_s = std::chrono::duration<double>(clock::now() - t0).count();
        result.log.push_back(m);
        if (!checkpoint_dir.empty()) {
            save_model(checkpoint_dir / fmt::format("epoch_{}.pbm", epoch), sampler.model());
            write_metrics(checkpoint_dir / "metrics.tsv", result.log);
        }
        if (callbacks.on_epoch) callbacks.on_epoch(m, sampler.model());
    };
    record(0, 0.0);

    std::vector<std::size_t> order(train_set.size());
    std::vector<TrainingExample> batch(config.batch_size);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        Xoshiro256 shuffle_rng(mix_seed(config.master_seed, kShuffleTag + epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double dj_sum = 0.0;
        for (std::size_t b = 0; b < n_batches; ++b) {
            for (std::size_t k = 0; k < config.batch_size; ++k) batch[k] = train_set[order[b * config.batch_size + k]];
            const std::uint64_t update = result.weight_updates;
            const auto data = positive_phase(sampler, roles, batch, config,
                                             mix_seed(mix_seed(config.master_seed, kPositiveTag), update));
            const auto free = negative_phase(sampler, config, mix_seed(mix_seed(config.master_seed, kNegativeTag), update),
                                             &persistent);
            dj_sum += apply_update(master, data, free, config, momentum);
            sampler.load(quantized(master, config.precision));
            ++result.weight_updates;
        }
        record(epoch, dj_sum / static_cast<double>(n_batches));
    }
    if (!checkpoint_dir.empty()) save_model(checkpoint_dir / "final.pbm", sampler.model());
    return result;
}

KlGradient exact_kl_gradient(const Model& model, std::span<const double> data, double beta) {
    if (model.representation != Representation::bipolar) throw std::invalid_argument("KL gradient expects a bipolar model");
    const auto exact = enumerate_boltzmann(model, beta);
    if (data.size() != exact.probabilities.size())
        throw DimensionError(fmt::format("data distribution has {} entries, model has {} states", data.size(),
                                         exact.probabilities.size()));
    const auto edges = model.graph->edges();
    KlGradient g;
    g.d_j.assign(edges.size(), 0.0);
    g.d_h.assign(model.node_count(), 0.0);
    auto spin = [](std::uint64_t s, std::size_t i) { return (s >> i) & 1u ? 1.0 : -1.0; };
    for (std::uint64_t s = 0; s < data.size(); ++s) {
        const double w = data[s] - exact.probabilities[s];
        if (w == 0.0) continue;
        for (std::size_t k = 0; k < edges.size(); ++k) g.d_j[k] += w * spin(s, edges[k].u) * spin(s, edges[k].v);
        for (std::size_t i = 0; i < model.node_count(); ++i) g.d_h[i] += w * spin(s, i);
    }
    for (auto& v : g.d_j) v *= beta;
    for (auto& v : g.d_h) v *= beta;
    return g;
}

double kl_divergence(const Model& model, std::span<const double> data, double beta) {
    const auto exact = enumerate_boltzmann(model, beta);
    if (data.size() != exact.probabilities.size()) throw DimensionError("data distribution size mismatch");
    // log q(s) = -beta E(s) - log Z, kept in log space for small q.
    std::vector<std::int8_t> state(model.node_count());
    double kl = 0.0;
    for (std::uint64_t s = 0; s < data.size(); ++s) {
        if (data[s] <= 0.0) continue;
        for (std::size_t i = 0; i < state.size(); ++i) state[i] = (s >> i) & 1u ? std::int8_t{1} : std::int8_t{-1};
        kl += data[s] * (std::log(data[s]) + beta * energy(model, state) + exact.log_z);
    }
    return kl;
}

}  // namespace pbit
