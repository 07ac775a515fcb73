// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
// Trained models are cached under --work keyed by their full run description,
// so a second invocation only re-evaluates. Delete the directory to retrain.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "pbit/data.hpp"
#include "pbit/diagnostics.hpp"
#include "pbit/tasks.hpp"
#include "pbit/trainer.hpp"

using namespace pbit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

fs::path g_work;
unsigned g_workers = 1;

void note(const std::string& msg) {
    std::fprintf(stderr, "  %s\n", msg.c_str());
    std::fflush(stderr);
}

double uniform(Xoshiro256& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

std::shared_ptr<const SparseGraph> colored(SparseGraph g) {
    return std::make_shared<const SparseGraph>(color_dsatur(g));
}

oracle::Dense dense_of(const Model& m) {
    oracle::Dense d(m.node_count());
    const auto edges = m.graph->edges();
    for (std::size_t k = 0; k < edges.size(); ++k) d.set(edges[k].u, edges[k].v, m.couplings[k]);
    d.h = m.biases;
    return d;
}

// ---------------------------------------------------------------------------
// MNIST/100 training runs

struct Mnist100 {
    Dataset images;  // 10 per class, binarized
    std::vector<TrainingExample> examples;
    std::vector<std::vector<std::uint8_t>> bits;
    DatasetStats stats;
};

const Mnist100& mnist100() {
    static const Mnist100 data = [] {
        const fs::path dir = fs::path(PBIT_DATA_DIR) / "mnist5k";
        Mnist100 d;
        d.images = binarize(subset(load_idx(dir / "train-images-idx3-ubyte.gz", dir / "train-labels-idx1-ubyte.gz"),
                                   10, 1));
        d.examples = make_examples(d.images);
        for (std::size_t k = 0; k < d.images.size(); ++k) d.bits.push_back(image_bits(d.images, k));
        d.stats = dataset_stats(d.images);
        return d;
    }();
    return data;
}

struct Net {
    std::string graph;  // make_graph source
    bool randomize_roles = true;
};

struct Trained {
    Model deployed;
    RoleAssignment roles;
    double seconds = 0.0;
    bool cached = false;
};

TrainConfig mnist100_config(std::size_t cd, std::uint64_t seed, const std::string& precision) {
    TrainConfig c;
    c.epochs = 300;
    c.batch_size = 10;
    c.negative_sweeps = cd;
    c.sweeps_per_image = std::max<std::size_t>(1, cd / c.batch_size);
    c.learning_rate = 0.003;
    c.momentum = 0.6;
    c.engine = Engine::chromatic;
    c.workers = g_workers;
    c.master_seed = seed;
    c.precision = PrecisionSpec::parse(precision);
    c.eval_every = 50;
    c.eval_sweeps = 1000;
    c.eval_train_images = 100;
    return c;
}

std::string run_key(const Net& net, const TrainConfig& c) {
    std::string key = fmt::format("graph={}\nrandomize_roles={}\nsubset=mnist5k/10-per-class/seed1\n", net.graph,
                                  net.randomize_roles);
    for (const auto& [k, v] : train_config_entries(c))
        if (k != "workers") key += k + "=" + v + "\n";
    return key;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Trained train_cached(const std::string& name, const Net& net, const TrainConfig& config) {
    const auto& data = mnist100();
    auto graph = colored(make_graph(net.graph));
    Trained t;
    t.roles = assign_roles(*graph, data.images.pixel_count(), 10, 5, 1, net.randomize_roles);
    const fs::path dir = g_work / name;
    const std::string key = run_key(net, config);
    if (fs::exists(dir / "key.txt") && slurp(dir / "key.txt") == key && fs::exists(dir / "deployed.pbm")) {
        t.deployed = load_model(dir / "deployed.pbm");
        t.cached = true;
        return t;
    }
    fs::create_directories(dir);
    note(fmt::format("training {} ({} nodes, {} edges, CD-{}, {} epochs)", name, graph->node_count(),
                     graph->edge_count(), config.effective_negative_sweeps(), config.epochs));
    const auto initial = init_model(graph, t.roles, data.stats, config.master_seed);
    TrainCallbacks cb;
    cb.on_epoch = [&](const EpochMetrics& m, const Model&) {
        if (m.train_acc)
            note(fmt::format("{} epoch {} train_acc {:.3f} ({:.0f} s)", name, m.epoch, *m.train_acc, m.wallclock_s));
    };
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = train(initial, t.roles, data.examples, {}, config, {}, cb);
    t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    t.deployed = quantized(result.model, config.precision);
    save_model(dir / "deployed.pbm", t.deployed);
    write_metrics(dir / "metrics.tsv", result.log);
    std::ofstream(dir / "key.txt") << key;
    return t;
}

double train_accuracy(const Trained& t) {
    const auto& data = mnist100();
    Sampler sampler(t.deployed, {Engine::chromatic, g_workers, std::nullopt});
    return accuracy(sampler, t.roles, data.bits, data.images.labels, 1000, 0xacc);
}

const Net kSparse{"random_regular:2000:12:1", true};

Trained mnist_run(std::size_t cd, std::uint64_t seed, const std::string& precision) {
    const auto name = fmt::format("mnist100_cd{}_seed{}_{}", cd, seed, precision == "float64" ? "f64" : precision);
    return train_cached(name, kSparse, mnist100_config(cd, seed, precision));
}

std::map<std::string, double> g_acc;
double cached_accuracy(std::size_t cd, std::uint64_t seed, const std::string& precision) {
    const auto key = fmt::format("{}/{}/{}", cd, seed, precision);
    if (!g_acc.count(key)) {
        const auto t = mnist_run(cd, seed, precision);
        g_acc[key] = train_accuracy(t);
        note(fmt::format("MNIST/100 CD-{} seed {} {}: train accuracy {:.3f}{}", cd, seed, precision, g_acc[key],
                         t.cached ? " (cached model)" : fmt::format(" (trained in {:.0f} s)", t.seconds)));
    }
    return g_acc[key];
}

// ---------------------------------------------------------------------------
// Criteria

Outcome criterion1() {
    Xoshiro256 rng(mix_seed(1, 1));
    double worst = 0.0;
    std::size_t failures = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 8 + rng() % 5;
        std::vector<std::pair<NodeId, NodeId>> pairs;
        for (NodeId u = 0; u < n; ++u)
            for (NodeId v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
        std::shuffle(pairs.begin(), pairs.end(), rng);
        std::vector<std::size_t> deg(n, 0);
        std::vector<Edge> edges;
        for (auto [u, v] : pairs)
            if (rng.uniform() < 0.5 && deg[u] < 6 && deg[v] < 6) {
                edges.push_back({u, v});
                ++deg[u];
                ++deg[v];
            }
        Model m(colored(SparseGraph::from_edges(n, edges)));
        for (auto& j : m.couplings) j = uniform(rng, -2.0, 2.0);
        for (auto& h : m.biases) h = uniform(rng, -1.0, 1.0);

        const auto exact = oracle::boltzmann(dense_of(m), 1.0);
        ChainState state(n, mix_seed(7, trial));
        state.randomize_free();
        const auto block = run_chain(m, state, 1000000, 1, Engine::sequential);
        const double d = tvd(state_histogram(block), exact);
        worst = std::max(worst, d);
        failures += d >= 0.02;
    }
    return {failures == 0, fmt::format("20 models, worst TVD {:.4f} (< 0.02 required), {} over", worst, failures)};
}

Outcome criterion2() {
    // ~1000-node network trained briefly on the MNIST subset.
    const Net net{"random_regular:1000:12:1", true};
    auto cfg = mnist100_config(1000, 1, "float64");
    cfg.epochs = 50;
    const auto t = train_cached("chromatic_equivalence_model", net, cfg);
    const std::vector<Engine> engines{Engine::sequential, Engine::chromatic};
    const auto curves = magnetization_relaxation(t.deployed, engines, 100, 10000, 0x6d6167, g_workers);
    write_table(g_work / "magnetization.tsv", magnetization_table(curves), true);
    const double agree = curve_agreement(curves[0], curves[1], 3.0, 1);
    return {agree >= 0.99, fmt::format("{} nodes, 100 chains x 10^4 sweeps: {:.2f}% of sweeps within 3 SE (>= 99%)",
                                       t.deployed.node_count(), 100 * agree)};
}

Outcome criterion3() {
    Xoshiro256 rng(mix_seed(3, 3));
    double worst_fd = 0.0;
    double worst_z = 0.0;
    std::size_t edges_checked = 0, outside = 0;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Edge> edges;
        for (NodeId u = 0; u < 8; ++u)
            for (NodeId v = u + 1; v < 8; ++v)
                if (rng.uniform() < 0.4) edges.push_back({u, v});
        Model m(colored(SparseGraph::from_edges(8, edges)));
        for (auto& j : m.couplings) j = uniform(rng, -1.0, 1.0);
        for (auto& h : m.biases) h = uniform(rng, -0.5, 0.5);
        std::vector<double> p(256, 0.0);
        for (int k = 0; k < 20; ++k) p[rng() % 256] += rng.uniform();
        const double total = std::accumulate(p.begin(), p.end(), 0.0);
        for (auto& x : p) x /= total;

        const auto g = exact_kl_gradient(m, p);
        const double h = 1e-4;
        auto fd = [&](double& param, double exact_value) {
            const double keep = param;
            param = keep + h;
            const double up = kl_divergence(m, p);
            param = keep - h;
            const double down = kl_divergence(m, p);
            param = keep;
            worst_fd = std::max(worst_fd, std::abs(-(up - down) / (2 * h) - exact_value));
        };
        for (std::size_t k = 0; k < m.edge_count(); ++k) fd(m.couplings[k], g.d_j[k]);
        for (std::size_t i = 0; i < 8; ++i) fd(m.biases[i], g.d_h[i]);

        // Sampled gradient: exact data term minus the free-chain term, one
        // persistent chain of 10^6 sweeps read out in 100 batches for the SE.
        std::vector<double> data_corr(m.edge_count(), 0.0);
        const auto es = m.graph->edges();
        for (std::size_t s = 0; s < 256; ++s)
            for (std::size_t k = 0; k < es.size(); ++k)
                data_corr[k] += p[s] * oracle::spin(s, es[k].u) * oracle::spin(s, es[k].v);
        Sampler sampler(m, {Engine::chromatic, 1, std::nullopt});
        TrainConfig cfg;
        cfg.cd_mode = CdMode::pcd;
        cfg.negative_sweeps = 10000;
        ChainState chain(8, mix_seed(33, trial));
        chain.randomize_free();
        std::vector<double> sum(es.size(), 0.0), sumsq(es.size(), 0.0);
        const int batches = 100;
        for (int b = 0; b < batches; ++b) {
            const auto free = negative_phase(sampler, cfg, 0, &chain);
            for (std::size_t k = 0; k < es.size(); ++k) {
                const double grad = data_corr[k] - free.corr[k];
                sum[k] += grad;
                sumsq[k] += grad * grad;
            }
        }
        for (std::size_t k = 0; k < es.size(); ++k) {
            const double mean = sum[k] / batches;
            const double var = (sumsq[k] - batches * mean * mean) / (batches - 1);
            const double se = std::sqrt(std::max(var, 0.0) / batches);
            const double z = std::abs(mean - g.d_j[k]) / std::max(se, 1e-300);
            worst_z = std::max(worst_z, z);
            outside += z > 3.0;
            ++edges_checked;
        }
    }
    const bool pass = worst_fd < 1e-6 && outside == 0;
    return {pass, fmt::format("max |FD - exact| {:.2e} (< 1e-6); sampled vs exact over {} edges: max {:.2f} SE, {} "
                              "beyond 3 SE",
                              worst_fd, edges_checked, worst_z, outside)};
}

Outcome criterion4() {
    const double acc = cached_accuracy(10000, 1, "float64");
    return {acc >= 0.90, fmt::format("CD-10^4, 300 epochs: training accuracy {:.1f}% (>= 90%)", 100 * acc)};
}

Outcome criterion5() {
    bool pass = true;
    std::string detail;
    for (std::uint64_t seed : {1, 2}) {
        const double lo = cached_accuracy(100, seed, "float64");
        const double hi = cached_accuracy(10000, seed, "float64");
        pass = pass && (hi - lo) * 100 >= 5.0;
        detail += fmt::format("{}seed {}: CD-10^2 {:.1f}% vs CD-10^4 {:.1f}%", detail.empty() ? "" : "; ", seed,
                              100 * lo, 100 * hi);
    }
    return {pass, detail + " (gap >= 5 points each)"};
}

Outcome criterion6() {
    const double f64 = cached_accuracy(10000, 1, "float64");
    const double s63 = cached_accuracy(10000, 1, "s{6}{3}");
    const double s32 = cached_accuracy(10000, 1, "s{3}{2}");
    const bool pass = std::abs(s63 - f64) * 100 <= 2.0 && (s63 - s32) * 100 >= 3.0;
    return {pass, fmt::format("float64 {:.1f}%, s{{6}}{{3}} {:.1f}% (within 2), s{{3}}{{2}} {:.1f}% (>= 3 below s{{6}}{{3}})",
                              100 * f64, 100 * s63, 100 * s32)};
}

Outcome criterion7() {
    ThroughputOptions opt;
    opt.degree = 12;
    opt.engine = Engine::chromatic;
    opt.workers = std::max(4u, g_workers);
    opt.sweeps_per_repetition = 200;
    opt.repetitions = 20;
    const std::vector<std::size_t> sizes{1000, 2000, 4000};
    const auto reports = throughput_bench(sizes, opt);
    write_table(g_work / "throughput.tsv", throughput_table(reports), true);
    const double r2 = reports[1].flips_per_ns / reports[0].flips_per_ns;
    const double r4 = reports[2].flips_per_ns / reports[0].flips_per_ns;
    return {r2 >= 1.6 && r4 >= 2.5,
            fmt::format("{} workers, {} hardware threads: {:.4f} / {:.4f} / {:.4f} flips/ns at N=1000/2000/4000; "
                        "ratios {:.2f} (>= 1.6) and {:.2f} (>= 2.5)",
                        opt.workers, std::thread::hardware_concurrency(), reports[0].flips_per_ns,
                        reports[1].flips_per_ns, reports[2].flips_per_ns, r2, r4)};
}

struct GenerationScore {
    double agreement = 0.0;
    std::size_t classes_energy_ok = 0;
    std::vector<double> per_class;
};

GenerationScore generation_score(const Trained& t, const std::string& tag) {
    // Class centroids of the whole bundled training split.
    const fs::path dir = fs::path(PBIT_DATA_DIR) / "mnist5k";
    const auto train_set =
        binarize(load_idx(dir / "train-images-idx3-ubyte.gz", dir / "train-labels-idx1-ubyte.gz"));
    const std::size_t px = train_set.pixel_count();
    std::vector<std::vector<double>> centroid(10, std::vector<double>(px, 0.0));
    std::vector<double> count(10, 0.0);
    for (std::size_t k = 0; k < train_set.size(); ++k) {
        const auto img = train_set.image(k);
        for (std::size_t p = 0; p < px; ++p) centroid[train_set.labels[k]][p] += img[p];
        count[train_set.labels[k]] += 1.0;
    }
    for (std::size_t c = 0; c < 10; ++c)
        for (auto& v : centroid[c]) v /= count[c];

    Sampler sampler(t.deployed, {Engine::chromatic, g_workers, std::nullopt});
    const AnnealSchedule schedule{0.0, 5.0, 0.125, 100};
    GenerationScore score;
    std::size_t hits = 0;
    std::vector<std::vector<float>> grid;
    for (std::size_t c = 0; c < 10; ++c) {
        double e0 = 0.0, e1 = 0.0;
        std::size_t class_hits = 0;
        for (std::size_t s = 0; s < 20; ++s) {
            const auto res = generate(sampler, t.roles, c, schedule, mix_seed(0x67656e + c, s));
            e0 += res.energy_initial / 20;
            e1 += res.energy_final / 20;
            std::size_t best = 0;
            double best_d = INFINITY;
            for (std::size_t k = 0; k < 10; ++k) {
                double d = 0.0;
                for (std::size_t p = 0; p < px; ++p) d += std::pow(res.pixels[p] - centroid[k][p], 2);
                if (d < best_d) best_d = d, best = k;
            }
            class_hits += best == c;
            if (s < 10) grid.push_back(res.pixels);
        }
        hits += class_hits;
        score.classes_energy_ok += e1 < e0;
        score.per_class.push_back(class_hits / 20.0);
    }
    score.agreement = hits / 200.0;
    const auto img = compose_grid(grid, 28, 28, 10);
    write_pgm(g_work / ("generated_" + tag + ".pgm"), img.rows, img.cols, img.pixels);
    return score;
}

Outcome criterion8() {
    const auto dbm = mnist_run(10000, 1, "float64");
    // Complete bipartite RBM over the 834 visible and label units with about
    // the same number of parameters (edges + biases) as the sparse network.
    const auto& sparse_graph = *dbm.deployed.graph;
    const std::size_t params = sparse_graph.edge_count() + sparse_graph.node_count();
    const std::size_t n_vis = 784 + 50;
    const auto hidden = static_cast<std::size_t>(std::lround(static_cast<double>(params - n_vis) / (n_vis + 1)));
    const auto rbm = train_cached(fmt::format("mnist100_rbm_h{}", hidden),
                                  Net{fmt::format("bipartite_full:{}:{}", n_vis, hidden), false},
                                  mnist100_config(10000, 1, "float64"));
    const auto a = generation_score(dbm, "sparse");
    const auto b = generation_score(rbm, "rbm");
    std::string per;
    for (double x : a.per_class) per += fmt::format("{:.0f} ", 100 * x);
    note("sparse per-class agreement %: " + per);
    per.clear();
    for (double x : b.per_class) per += fmt::format("{:.0f} ", 100 * x);
    note("rbm per-class agreement %: " + per);
    const double worst = *std::min_element(a.per_class.begin(), a.per_class.end());
    const bool pass = a.classes_energy_ok == 10 && worst >= 0.60 && b.agreement < a.agreement;
    return {pass, fmt::format("sparse: energy drop in {}/10 classes, centroid agreement {:.1f}% overall, worst class "
                              "{:.0f}% (>= 60% each); RBM ({} hidden, {} params vs {}): {:.1f}% (must be lower)",
                              a.classes_energy_ok, 100 * a.agreement, 100 * worst, hidden,
                              rbm.deployed.edge_count() + rbm.deployed.node_count(), params, 100 * b.agreement)};
}

Outcome criterion9() {
    Xoshiro256 rng(mix_seed(9, 9));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Model m(colored(parse_edge_list("0 1\n0 2\n1 2\n")));
        for (auto& j : m.couplings) j = uniform(rng, -2.0, 2.0);
        for (auto& h : m.biases) h = uniform(rng, -2.0, 2.0);
        const double beta = uniform(rng, 0.1, 3.0);
        const auto bip = enumerate_boltzmann(m, beta).probabilities;
        const auto bin_model = to_binary_model(m);
        // Binary law from the converted weights, evaluated by the dense oracle
        // with 0/1 states.
        oracle::Dense d = dense_of(bin_model);
        const auto bin = oracle::boltzmann(d, beta, true, 2.0);
        const auto bin_lib = enumerate_boltzmann(bin_model, beta).probabilities;
        for (std::size_t s = 0; s < 8; ++s)
            worst = std::max({worst, std::abs(bip[s] - bin[s]), std::abs(bip[s] - bin_lib[s])});
    }
    return {worst <= 1e-12, fmt::format("100 random 3-node models: max |P_bipolar - P_binary| {:.2e} (<= 1e-12)", worst)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string work = "acceptance_work";
    std::vector<int> only;
    app.add_option("--work", work, "Directory for cached models and reports");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);
    g_work = work;
    fs::create_directories(g_work);
    g_workers = default_workers();

    const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                         criterion6, criterion7, criterion8, criterion9};
    const std::set<int> selected(only.begin(), only.end());
    std::ofstream report(g_work / "report.txt", std::ios::app);
    bool all = true;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k + 1);
        if (!selected.empty() && !selected.count(id)) continue;
        std::fprintf(stderr, "criterion %d: running\n", id);
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k]();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto line = fmt::format("criterion {}: {} {} [{:.0f} s]", id, o.pass ? "PASS" : "FAIL", o.detail, dt);
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        report << line << '\n';
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
