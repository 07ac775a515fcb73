#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "pbit/diagnostics.hpp"
#include "pbit/error.hpp"

using namespace pbit;

namespace {

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

Model random_model(std::size_t n, std::size_t degree, std::uint64_t seed, double scale) {
    Model m(colored(random_regular(n, degree, seed)));
    Xoshiro256 rng(seed * 31 + 1);
    for (auto& j : m.couplings) j = scale * (rng.uniform() - 0.5);
    for (auto& h : m.biases) h = scale * (rng.uniform() - 0.5);
    return m;
}

}  // namespace

TEST_CASE("exact enumeration") {
    SUBCASE("single free spin") {
        Model m(colored(SparseGraph::from_edges(1, {})));
        const auto d = enumerate_boltzmann(m, 1.0);
        CHECK(d.probabilities == std::vector<double>{0.5, 0.5});
        CHECK(d.log_z == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("two ferromagnetic spins") {
        Model m(colored(parse_edge_list("0 1\n")));
        m.couplings[0] = 1.0;
        const auto d = enumerate_boltzmann(m, 1.0);
        const double aligned = std::exp(1.0) / (2 * std::exp(1.0) + 2 * std::exp(-1.0));
        CHECK(d.probabilities[0] == doctest::Approx(aligned));
        CHECK(d.probabilities[3] == doctest::Approx(0.4404).epsilon(1e-3));
        CHECK(d.probabilities[1] == doctest::Approx(0.5 - aligned));
    }
    SUBCASE("zero beta is uniform") {
        const auto m = random_model(10, 3, 2, 3.0);
        const auto d = enumerate_boltzmann(m, 0.0);
        for (double p : d.probabilities) CHECK(p == doctest::Approx(1.0 / 1024));
    }
    SUBCASE("matches the dense oracle and normalizes") {
        for (std::uint64_t seed = 1; seed <= 4; ++seed) {
            const auto m = random_model(12, 3, seed, 2.0);
            const auto d = enumerate_boltzmann(m, 0.8);
            const auto o = oracle::boltzmann(dense_of(m), 0.8);
            CHECK(std::accumulate(d.probabilities.begin(), d.probabilities.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(tvd(d.probabilities, o) < 1e-12);
        }
    }
    SUBCASE("large energies stay finite") {
        // Weights of a few hundred would overflow a naive exp; the law must not change.
        auto m = random_model(8, 3, 5, 1.0);
        auto big = m;
        for (auto& j : big.couplings) j *= 400.0;
        for (auto& h : big.biases) h *= 400.0;
        const auto a = enumerate_boltzmann(big, 1.0);
        const auto b = enumerate_boltzmann(m, 400.0);
        CHECK(std::isfinite(a.log_z));
        CHECK(tvd(a.probabilities, b.probabilities) < 1e-9);
        CHECK(std::accumulate(a.probabilities.begin(), a.probabilities.end(), 0.0) == doctest::Approx(1.0));
    }
    SUBCASE("binary conversion samples the same law") {
        const auto m = random_model(10, 3, 9, 1.5);
        const auto bin = to_binary_model(m);
        CHECK(tvd(enumerate_boltzmann(m, 1.0).probabilities, enumerate_boltzmann(bin, 1.0).probabilities) < 1e-12);
    }
    SUBCASE("size cap") {
        Model m(colored(random_regular(22, 3, 1)));
        CHECK_THROWS_AS((void)enumerate_boltzmann(m, 1.0), ResourceError);
    }
}

TEST_CASE("total variation distance") {
    const std::vector<double> p{0.5, 0.5, 0.0}, q{0.0, 0.0, 1.0}, r{0.2, 0.3, 0.5};
    CHECK(tvd(p, p) == 0.0);
    CHECK(tvd(p, q) == 1.0);
    CHECK(tvd(p, r) == tvd(r, p));
    CHECK(tvd(p, q) <= tvd(p, r) + tvd(r, q));
    CHECK(tvd(p, r) == doctest::Approx(0.5));
    CHECK_THROWS_AS((void)tvd(p, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("state histogram") {
    SampleBlock block;
    block.node_count = 2;
    block.stride = 1;
    block.states = {1, 1, -1, 1, 1, 1, -1, -1};
    block.sweeps = {1, 2, 3, 4};
    const auto h = state_histogram(block);
    CHECK(h == std::vector<double>{0.25, 0.0, 0.25, 0.5});
    CHECK(state_index(std::vector<std::int8_t>{1, -1, 1}) == 5);
    CHECK(state_index(std::vector<std::int8_t>{0, 1, 1}) == 6);
}

TEST_CASE("sampled chains converge to the exact law") {
    const auto m = random_model(10, 4, 3, 1.0);
    const auto exact = enumerate_boltzmann(m, 1.0);
    for (Engine e : {Engine::sequential, Engine::chromatic}) {
        ChainState state(10, 77);
        state.randomize_free();
        const auto block = run_chain(m, state, 400000, 1, e, 1);
        CHECK(tvd(state_histogram(block), exact) < 0.02);
    }
}

TEST_CASE("magnetization relaxation") {
    const std::vector<Engine> engines{Engine::sequential, Engine::chromatic};
    SUBCASE("zero model relaxes in one sweep") {
        Model m(colored(random_regular(200, 4, 1)));
        const auto curves = magnetization_relaxation(m, engines, 50, 5, 2);
        REQUIRE(curves.size() == 2);
        for (const auto& c : curves) {
            CHECK(c.mean[0] == 1.0);
            CHECK(c.std_error[0] == 0.0);
            CHECK(c.mean.size() == 6);
            // Per-sweep magnetization of 200 fair coins has sd 1/sqrt(200); mean over 50 chains.
            for (std::size_t k = 1; k < c.mean.size(); ++k) CHECK(std::abs(c.mean[k]) < 4 / std::sqrt(200.0 * 50));
        }
        CHECK(curve_agreement(curves[0], curves[1]) >= 0.8);
    }
    SUBCASE("ferromagnet relaxes the same way under both engines") {
        Model m(colored(random_regular(300, 4, 2)));
        for (auto& j : m.couplings) j = 0.2;
        const auto curves = magnetization_relaxation(m, engines, 60, 30, 5);
        CHECK(curves[0].mean[30] < 0.2);
        CHECK(curve_agreement(curves[0], curves[1]) >= 0.9);
        const auto t = magnetization_table(curves);
        CHECK(t.columns == std::vector<std::string>{"sweep", "sequential_mean", "sequential_se", "chromatic_mean", "chromatic_se"});
        CHECK(t.rows.size() == 31);
    }
    SUBCASE("needs repetitions") {
        Model m(colored(random_regular(20, 4, 1)));
        CHECK_THROWS_AS((void)magnetization_relaxation(m, engines, 1, 5, 2), ConfigError);
    }
}

TEST_CASE("throughput bench") {
    ThroughputOptions opt;
    opt.sweeps_per_repetition = 5;
    opt.repetitions = 3;
    const std::vector<std::size_t> sizes{100, 300};
    const auto reports = throughput_bench(sizes, opt);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].attempted_flips == 100 * 5 * 3);
    CHECK(reports[1].attempted_flips == 300 * 5 * 3);
    for (const auto& r : reports) {
        CHECK(r.flips_per_ns > 0.0);
        CHECK(r.elapsed > 0.0);
        CHECK(r.repetitions == 3);
    }
    const auto t = throughput_table(reports);
    CHECK(t.rows.size() == 2);
    CHECK(t.rows[1][0] == 300.0);
    opt.repetitions = 0;
    CHECK_THROWS_AS((void)throughput_bench(sizes, opt), ConfigError);
}

TEST_CASE("table formatting") {
    Table t{{"a", "b"}, {{1, 2.5}, {3, 4}}};
    CHECK(format_table(t) == "a\tb\n1\t2.5\n3\t4\n");
    CHECK(format_table(t, true) == "# a b\n1 2.5\n3 4\n");
    t.rows.push_back({1});
    CHECK_THROWS_AS((void)format_table(t), DimensionError);
}

TEST_CASE("mixing study") {
    auto g = colored(random_regular(40, 4, 3));
    const auto roles = assign_roles(*g, 8, 2, 1, 0, false);
    std::vector<TrainingExample> data;
    for (std::size_t k = 0; k < 4; ++k)
        data.push_back({std::vector<std::uint8_t>(8, static_cast<std::uint8_t>(k % 2)), k % 2});
    TrainConfig base;
    base.epochs = 1;
    base.batch_size = 2;
    base.eval_sweeps = 10;
    base.eval_train_images = 4;
    const std::vector<std::size_t> cds{10, 40};
    const auto rows = mixing_study([&] { return Model(g); }, roles, data, cds, base);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].cd_sweeps == 10);
    CHECK(rows[1].log.size() == 2);
    CHECK(std::isfinite(rows[1].final_train_acc()));
    CHECK(mixing_table(rows).rows.size() == 4);
    const std::vector<std::size_t> zero{0};
    CHECK_THROWS_AS((void)mixing_study([&] { return Model(g); }, roles, data, zero, base), ConfigError);
}
