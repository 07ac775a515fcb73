#include "experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "pbit/data.hpp"
#include "pbit/diagnostics.hpp"
#include "pbit/error.hpp"
#include "pbit/tasks.hpp"

namespace pbit::cli {

namespace {

template <class T>
T number(const std::string& key, const std::string& value) {
    T v{};
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc{} || ptr != end || value.empty())
        throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, value));
    return v;
}

bool boolean(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, value));
}

std::string fmt_double(double x) { return fmt::format("{}", x); }

struct Field {
    std::string key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field sized(const std::string& key, T ExperimentConfig::*member) {
    return {key, [=](ExperimentConfig& c, const std::string& v) { c.*member = number<T>(key, v); },
            [=](const ExperimentConfig& c) { return fmt::format("{}", c.*member); }};
}

Field text(const std::string& key, std::string ExperimentConfig::*member) {
    return {key, [=](ExperimentConfig& c, const std::string& v) { c.*member = v; },
            [=](const ExperimentConfig& c) { return c.*member; }};
}

Field path(const std::string& key, std::filesystem::path ExperimentConfig::*member) {
    return {key, [=](ExperimentConfig& c, const std::string& v) { c.*member = v; },
            [=](const ExperimentConfig& c) { return (c.*member).string(); }};
}

Field flag(const std::string& key, bool ExperimentConfig::*member) {
    return {key, [=](ExperimentConfig& c, const std::string& v) { c.*member = boolean(key, v); },
            [=](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f = {
            {"command",
             [](ExperimentConfig& c, const std::string& v) {
                 if (std::find(kCommands.begin(), kCommands.end(), v) == kCommands.end())
                     throw ConfigError(fmt::format("unknown command '{}'", v));
                 c.command = v;
             },
             [](const ExperimentConfig& c) { return c.command; }},
            path("out", &ExperimentConfig::out),
            text("graph", &ExperimentConfig::graph),
            path("roles", &ExperimentConfig::roles),
            sized("n_classes", &ExperimentConfig::n_classes),
            sized("n_replicas", &ExperimentConfig::n_replicas),
            sized("role_seed", &ExperimentConfig::role_seed),
            flag("randomize_roles", &ExperimentConfig::randomize_roles),
            path("data_dir", &ExperimentConfig::data_dir),
            sized("per_class", &ExperimentConfig::per_class),
            sized("threshold", &ExperimentConfig::threshold),
            sized("image_rows", &ExperimentConfig::image_rows),
            sized("image_cols", &ExperimentConfig::image_cols),
            path("model", &ExperimentConfig::model),
            text("split", &ExperimentConfig::split),
            sized("images", &ExperimentConfig::images),
            sized("sweeps", &ExperimentConfig::sweeps),
            sized("class", &ExperimentConfig::class_id),
            sized("samples", &ExperimentConfig::samples),
            sized("grid_cols", &ExperimentConfig::grid_cols),
            sized("image_index", &ExperimentConfig::image_index),
            text("mask", &ExperimentConfig::mask),
            flag("mask_label", &ExperimentConfig::mask_label),
            text("sizes", &ExperimentConfig::sizes),
            sized("degree", &ExperimentConfig::degree),
            sized("bench_sweeps", &ExperimentConfig::bench_sweeps),
            sized("repetitions", &ExperimentConfig::repetitions),
            text("cd_values", &ExperimentConfig::cd_values),
            sized("nodes", &ExperimentConfig::nodes),
            sized("validate_sweeps", &ExperimentConfig::validate_sweeps),
            flag("gnuplot", &ExperimentConfig::gnuplot),
        };
        auto sched = [&](const std::string& key, auto member) {
            using T = std::remove_reference_t<decltype(AnnealSchedule{}.*member)>;
            f.push_back({key, [=](ExperimentConfig& c, const std::string& v) { c.schedule.*member = number<T>(key, v); },
                         [=](const ExperimentConfig& c) { return fmt::format("{}", c.schedule.*member); }});
        };
        sched("beta_start", &AnnealSchedule::beta_start);
        sched("beta_end", &AnnealSchedule::beta_end);
        sched("beta_step", &AnnealSchedule::beta_step);
        sched("sweeps_per_step", &AnnealSchedule::sweeps_per_step);
        for (const auto& key : train_config_keys()) {
            f.push_back({key, [key](ExperimentConfig& c, const std::string& v) { set_train_key(c.train, key, v); },
                         [key](const ExperimentConfig& c) {
                             for (const auto& [k, v] : train_config_entries(c.train))
                                 if (k == key) return v;
                             return std::string{};
                         }});
        }
        return f;
    }();
    return table;
}

std::vector<std::size_t> size_list(const std::string& key, const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    for (std::string tok; std::getline(ss, tok, ',');) out.push_back(number<std::size_t>(key, tok));
    if (out.empty()) throw ConfigError(key + " is empty");
    return out;
}

// ---------------------------------------------------------------------------
// Shared setup

struct Task {
    std::shared_ptr<const SparseGraph> graph;
    RoleAssignment roles;
};

Dataset load_split(const ExperimentConfig& c, Split split) {
    const std::string prefix = split == Split::train ? "train" : "test";
    auto ds = load_idx(c.data_dir / (prefix + "-images-idx3-ubyte.gz"), c.data_dir / (prefix + "-labels-idx1-ubyte.gz"),
                       split);
    if (c.per_class) ds = subset(ds, c.per_class, c.role_seed);
    return binarize(ds, c.threshold);
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ConfigError("split must be train or test, got '" + s + "'");
}

RoleAssignment roles_for(const ExperimentConfig& c, const SparseGraph& g) {
    if (!c.roles.empty()) return read_roles(c.roles);
    return assign_roles(g, c.image_rows * c.image_cols, c.n_classes, c.n_replicas, c.role_seed, c.randomize_roles);
}

Model load_trained(const ExperimentConfig& c) {
    if (c.model.empty()) throw ConfigError(c.command + " needs model = <checkpoint>");
    return load_model(c.model);
}

void check_roles(const RoleAssignment& roles, const Model& m, std::size_t pixels) {
    if (roles.node_count() != m.node_count())
        throw DimensionError(fmt::format("roles cover {} nodes, model has {}", roles.node_count(), m.node_count()));
    if (roles.visible_ids.size() != pixels)
        throw DimensionError(fmt::format("{} visible units for {}-pixel images", roles.visible_ids.size(), pixels));
}

Sampler make_sampler(const ExperimentConfig& c, const Model& m) {
    return Sampler(m, {c.train.engine, c.train.workers, std::nullopt});
}

void write_grid(const std::filesystem::path& p, const ExperimentConfig& c, const std::vector<std::vector<float>>& imgs) {
    const auto grid = compose_grid(imgs, c.image_rows, c.image_cols, std::max<std::size_t>(1, c.grid_cols));
    write_pgm(p, grid.rows, grid.cols, grid.pixels);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_train(const ExperimentConfig& c, std::ostream& log) {
    const auto train_set = load_split(c, Split::train);
    if (train_set.pixel_count() != c.image_rows * c.image_cols)
        throw DimensionError(fmt::format("images are {}x{}, config says {}x{}", train_set.rows, train_set.cols,
                                         c.image_rows, c.image_cols));
    const auto test_set = c.train.eval_test_images ? load_split(c, Split::test) : Dataset{};
    auto graph = std::make_shared<const SparseGraph>(color_dsatur(make_graph(c.graph)));
    const auto roles = roles_for(c, *graph);
    write_roles(c.out / "roles.txt", roles);
    write_edge_list(c.out / "graph.edges", *graph);

    const auto initial = init_model(graph, roles, dataset_stats(train_set), c.train.master_seed, c.train.init_sigma,
                                    c.train.clip_delta);
    log << fmt::format("graph: {} nodes, {} edges, {} colors; {} train images\n", graph->node_count(),
                       graph->edge_count(), graph->color_count(), train_set.size());
    TrainCallbacks cb;
    cb.on_epoch = [&](const EpochMetrics& m, const Model&) {
        auto acc = [](const std::optional<double>& a) { return a ? fmt::format("{:.4f}", *a) : std::string("-"); };
        log << fmt::format("epoch {} train_acc {} test_acc {} mean_abs_dJ {:.3g}\n", m.epoch, acc(m.train_acc),
                           acc(m.test_acc), m.mean_abs_dj)
            << std::flush;
    };
    train(initial, roles, make_examples(train_set), make_examples(test_set), c.train, c.out, cb);
    return 0;
}

int cmd_classify(const ExperimentConfig& c, std::ostream& log) {
    const auto model = load_trained(c);
    const auto roles = roles_for(c, *model.graph);
    const auto ds = load_split(c, parse_split(c.split));
    check_roles(roles, model, ds.pixel_count());
    auto sampler = make_sampler(c, model);
    const std::size_t n = c.images ? std::min(c.images, ds.size()) : ds.size();

    std::ofstream out(c.out / "predictions.tsv");
    if (!out) throw IoError("cannot write predictions.tsv");
    out << "index\tlabel\tpredicted";
    for (std::size_t k = 0; k < roles.n_classes; ++k) out << "\tscore_" << k;
    out << '\n';
    std::size_t correct = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto res = classify(sampler, roles, image_bits(ds, k), c.sweeps, mix_seed(c.train.master_seed, k));
        correct += res.predicted == ds.labels[k];
        out << k << '\t' << int{ds.labels[k]} << '\t' << res.predicted;
        for (double s : res.class_scores) out << '\t' << s;
        out << '\n';
    }
    log << fmt::format("accuracy {:.4f} over {} {} images\n", n ? double(correct) / double(n) : 0.0, n, c.split);
    return 0;
}

int cmd_generate(const ExperimentConfig& c, std::ostream& log) {
    const auto model = load_trained(c);
    const auto roles = roles_for(c, *model.graph);
    check_roles(roles, model, c.image_rows * c.image_cols);
    auto sampler = make_sampler(c, model);
    std::vector<std::vector<float>> imgs;
    std::ofstream out(c.out / fmt::format("energies_class{}.tsv", c.class_id));
    if (!out) throw IoError("cannot write energy table");
    out << "sample\tenergy_initial\tenergy_final\n";
    for (std::size_t s = 0; s < c.samples; ++s) {
        auto res = generate(sampler, roles, c.class_id, c.schedule, mix_seed(c.train.master_seed, s));
        out << s << '\t' << res.energy_initial << '\t' << res.energy_final << '\n';
        imgs.push_back(std::move(res.pixels));
    }
    const auto grid_path = c.out / fmt::format("generate_class{}.pgm", c.class_id);
    write_grid(grid_path, c, imgs);
    log << fmt::format("wrote {} samples of class {} to {}\n", c.samples, c.class_id, grid_path.string());
    return 0;
}

std::vector<std::uint8_t> make_mask(const std::string& kind, std::size_t rows, std::size_t cols) {
    std::vector<std::uint8_t> known(rows * cols, 1);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t col = 0; col < cols; ++col) {
            bool hidden = false;
            if (kind == "bottom") hidden = r >= rows / 2;
            else if (kind == "top") hidden = r < rows / 2;
            else if (kind == "left") hidden = col < cols / 2;
            else if (kind == "right") hidden = col >= cols / 2;
            else if (kind == "none") hidden = false;
            else throw ConfigError("mask must be top, bottom, left, right or none, got '" + kind + "'");
            known[r * cols + col] = hidden ? 0 : 1;
        }
    return known;
}

int cmd_complete(const ExperimentConfig& c, std::ostream& log) {
    const auto model = load_trained(c);
    const auto roles = roles_for(c, *model.graph);
    const auto ds = load_split(c, parse_split(c.split));
    check_roles(roles, model, ds.pixel_count());
    if (c.image_index >= ds.size())
        throw ConfigError(fmt::format("image_index {} out of range ({} images)", c.image_index, ds.size()));
    auto sampler = make_sampler(c, model);
    const auto bits = image_bits(ds, c.image_index);
    const auto known = make_mask(c.mask, ds.rows, ds.cols);
    const std::optional<std::size_t> label =
        c.mask_label ? std::optional<std::size_t>(ds.labels[c.image_index]) : std::nullopt;
    const auto res = complete(sampler, roles, bits, known, label, c.schedule, c.train.master_seed);

    std::vector<float> original(bits.begin(), bits.end()), masked(bits.size());
    for (std::size_t p = 0; p < bits.size(); ++p) masked[p] = known[p] ? original[p] : 0.5f;
    write_grid(c.out / "complete.pgm", c, {masked, res.pixels, original});
    log << fmt::format("completed image {} (label {}) with mask '{}'\n", c.image_index, int{ds.labels[c.image_index]},
                       c.mask);
    return 0;
}

int cmd_bench(const ExperimentConfig& c, std::ostream& log) {
    ThroughputOptions opt;
    opt.degree = c.degree;
    opt.engine = c.train.engine;
    opt.workers = c.train.workers;
    opt.sweeps_per_repetition = c.bench_sweeps;
    opt.repetitions = c.repetitions;
    opt.seed = c.train.master_seed;
    const auto sizes = size_list("sizes", c.sizes);
    const auto table = throughput_table(throughput_bench(sizes, opt));
    write_table(c.out / "throughput.tsv", table, c.gnuplot);
    log << format_table(table);
    return 0;
}

int cmd_mix(const ExperimentConfig& c, std::ostream& log) {
    const auto train_set = load_split(c, Split::train);
    auto graph = std::make_shared<const SparseGraph>(color_dsatur(make_graph(c.graph)));
    const auto roles = roles_for(c, *graph);
    const auto stats = dataset_stats(train_set);
    const auto cds = size_list("cd_values", c.cd_values);
    const auto rows = mixing_study(
        [&] { return init_model(graph, roles, stats, c.train.master_seed, c.train.init_sigma, c.train.clip_delta); },
        roles, make_examples(train_set), cds, c.train);
    const auto table = mixing_table(rows);
    write_table(c.out / "mixing.tsv", table, c.gnuplot);
    for (const auto& r : rows) log << fmt::format("CD-{} final train_acc {:.4f}\n", r.cd_sweeps, r.final_train_acc());
    return 0;
}

int cmd_validate(const ExperimentConfig& c, std::ostream& log) {
    if (c.nodes > kMaxEnumerationNodes)
        throw ResourceError(fmt::format("validate enumerates 2^{} states; cap is {} nodes", c.nodes,
                                        kMaxEnumerationNodes));
    const std::size_t degree = std::min(c.degree, c.nodes - 1);
    auto graph = std::make_shared<const SparseGraph>(
        color_dsatur(random_regular(c.nodes, degree, c.train.master_seed)));
    Model model(graph);
    Xoshiro256 rng(mix_seed(c.train.master_seed, 0x76616c));
    for (auto& j : model.couplings) j = 2.0 * rng.uniform() - 1.0;
    for (auto& h : model.biases) h = rng.uniform() - 0.5;

    const auto exact = enumerate_boltzmann(model, c.train.beta);
    ChainState state(c.nodes, c.train.master_seed, Representation::bipolar, c.train.beta);
    state.randomize_free();
    const auto block = run_chain(model, state, c.validate_sweeps, 1, c.train.engine, c.train.workers);
    const double d = tvd(state_histogram(block), exact);
    log << fmt::format("nodes {} edges {} sweeps {} engine {} tvd {:.5f}\n", c.nodes, graph->edge_count(),
                       c.validate_sweeps, to_string(c.train.engine), d);
    std::ofstream(c.out / "validate.tsv") << "nodes\tsweeps\ttvd\n" << c.nodes << '\t' << c.validate_sweeps << '\t' << d << '\n';
    return d < 0.02 ? 0 : 1;
}

}  // namespace

const std::vector<std::string>& experiment_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& f : fields()) k.push_back(f.key);
        return k;
    }();
    return keys;
}

void set_key(ExperimentConfig& config, const std::string& key, const std::string& value) {
    for (const auto& f : fields())
        if (f.key == key) return f.set(config, value);
    throw ConfigError(fmt::format("unknown config key '{}'", key));
}

std::vector<std::pair<std::string, std::string>> entries(const ExperimentConfig& config) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields()) out.emplace_back(f.key, f.get(config));
    return out;
}

ExperimentConfig resolve(const std::map<std::string, std::string>& file_keys,
                         const std::map<std::string, std::string>& overrides) {
    ExperimentConfig c;
    c.train.workers = default_workers();
    for (const auto& [k, v] : file_keys) set_key(c, k, v);
    for (const auto& [k, v] : overrides) set_key(c, k, v);
    if (c.command.empty()) throw ConfigError("no command given");
    c.train.validate();
    (void)c.schedule.betas();
    return c;
}

void write_config(const std::filesystem::path& path, const ExperimentConfig& config) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& [k, v] : entries(config)) out << k << " = " << v << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

int run(const ExperimentConfig& config, std::ostream& log) {
    std::error_code ec;
    std::filesystem::create_directories(config.out, ec);
    if (ec) throw IoError("cannot create " + config.out.string() + ": " + ec.message());
    write_config(config.out / "config.txt", config);
    const auto& cmd = config.command;
    if (cmd == "train") return cmd_train(config, log);
    if (cmd == "classify") return cmd_classify(config, log);
    if (cmd == "generate") return cmd_generate(config, log);
    if (cmd == "complete") return cmd_complete(config, log);
    if (cmd == "bench") return cmd_bench(config, log);
    if (cmd == "mix") return cmd_mix(config, log);
    if (cmd == "validate") return cmd_validate(config, log);
    throw ConfigError("unknown command '" + cmd + "'");
}

std::string failure_class(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
    if (dynamic_cast<const ResourceError*>(&e)) return "resource";
    if (dynamic_cast<const IoError*>(&e)) return "io";
    return "error";
}

int exit_code_for(const std::exception& e) {
    const auto cls = failure_class(e);
    if (cls == "config") return 2;
    if (cls == "io") return 3;
    if (cls == "dimension") return 4;
    if (cls == "resource") return 5;
    return 1;
}

}  // namespace pbit::cli
