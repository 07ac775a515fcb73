#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "pbit/error.hpp"
#include "pbit/graph.hpp"
#include "pbit/rng.hpp"

using namespace pbit;

namespace {

const std::filesystem::path kData = PBIT_DATA_DIR;

bool coloring_is_proper(const SparseGraph& g) {
    const auto colors = g.coloring();
    return std::none_of(g.edges().begin(), g.edges().end(),
                        [&](const Edge& e) { return colors[e.u] == colors[e.v]; });
}

SparseGraph random_sparse(std::size_t n, double p, std::uint64_t seed) {
    Xoshiro256 rng(seed);
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            if (rng.uniform() < p) edges.push_back({u, v});
    return SparseGraph::from_edges(n, edges);
}

}  // namespace

TEST_CASE("edge list parsing") {
    SUBCASE("simple path") {
        const auto g = parse_edge_list("0 1\n1 2");
        CHECK(g.node_count() == 3);
        CHECK(g.edge_count() == 2);
        CHECK(g.edges()[0] == Edge{0, 1});
        CHECK(g.edges()[1] == Edge{1, 2});
    }
    SUBCASE("reversed duplicates merge") {
        const auto g = parse_edge_list("0 1\n1 0");
        CHECK(g.node_count() == 2);
        CHECK(g.edge_count() == 1);
    }
    SUBCASE("comments and blank lines") {
        const auto g = parse_edge_list("# header\n\n3 1\n  # indented comment\n1 3\n");
        CHECK(g.node_count() == 4);
        CHECK(g.edge_count() == 1);
    }
    SUBCASE("errors carry line numbers") {
        try {
            (void)parse_edge_list("0 1\n1 x\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 2);
        }
        try {
            (void)parse_edge_list("0 1\n# c\n2 2\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 3);
            CHECK(std::string(e.what()).find("self-loop") != std::string::npos);
        }
        CHECK_THROWS_AS((void)parse_edge_list("# nothing\n"), ParseError);
        CHECK_THROWS_AS((void)parse_edge_list(""), ParseError);
        CHECK_THROWS_AS((void)parse_edge_list("0 1 2\n"), ParseError);
        CHECK_THROWS_AS((void)parse_edge_list("-1 2\n"), ParseError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS((void)load_edge_list("/nonexistent/graph.edges"), IoError);
    }
}

TEST_CASE("adjacency is sorted, symmetric and indexes edges") {
    const auto g = random_sparse(40, 0.2, 3);
    for (NodeId u = 0; u < g.node_count(); ++u) {
        const auto nbrs = g.neighbors(u);
        CHECK(std::is_sorted(nbrs.begin(), nbrs.end()));
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            const NodeId v = nbrs[k];
            const auto back = g.neighbors(v);
            CHECK(std::binary_search(back.begin(), back.end(), u));
            const Edge e = g.edges()[g.neighbor_edges(u)[k]];
            CHECK(e == Edge{std::min(u, v), std::max(u, v)});
            CHECK(g.find_edge(u, v) == g.neighbor_edges(u)[k]);
        }
    }
    CHECK_FALSE(g.find_edge(0, 0).has_value());
}

TEST_CASE("generators") {
    SUBCASE("grid2d(2,2)") {
        const auto g = grid2d(2, 2);
        CHECK(g.node_count() == 4);
        CHECK(g.edge_count() == 4);
    }
    SUBCASE("bipartite_full(3,2)") {
        const auto g = color_dsatur(bipartite_full(3, 2));
        CHECK(g.edge_count() == 6);
        CHECK(g.color_count() == 2);
        for (const auto& e : g.edges()) CHECK((e.u < 3 && e.v >= 3));
    }
    SUBCASE("random_regular degree census") {
        const auto g = random_regular(100, 4, 7);
        CHECK(g.node_count() == 100);
        CHECK(g.edge_count() == 200);
        for (NodeId i = 0; i < 100; ++i) CHECK(g.degree(i) == 4);
        const auto again = random_regular(100, 4, 7);
        CHECK(std::equal(g.edges().begin(), g.edges().end(), again.edges().begin(), again.edges().end()));
        const auto other = random_regular(100, 4, 8);
        CHECK_FALSE(std::equal(g.edges().begin(), g.edges().end(), other.edges().begin(), other.edges().end()));
    }
    SUBCASE("random_regular at the desk-scale training size") {
        const auto g = random_regular(2000, 12, 1);
        for (NodeId i = 0; i < 2000; ++i) REQUIRE(g.degree(i) == 12);
    }
    SUBCASE("infeasible parameters") {
        CHECK_THROWS_AS((void)random_regular(5, 3, 1), std::invalid_argument);
        CHECK_THROWS_AS((void)random_regular(4, 4, 1), std::invalid_argument);
        CHECK_THROWS_AS((void)grid2d(0, 3), std::invalid_argument);
        CHECK_THROWS_AS((void)bipartite_full(0, 3), std::invalid_argument);
    }
    SUBCASE("make_graph sources") {
        CHECK(make_graph("grid2d:3:4").node_count() == 12);
        CHECK(make_graph("random_regular:20:3:5").edge_count() == 30);
        CHECK(make_graph("bipartite_full:4:2").edge_count() == 8);
        CHECK_THROWS_AS((void)make_graph("grid2d:3"), std::exception);
        CHECK_THROWS_AS((void)make_graph("random_regular:5:3"), ConfigError);
    }
}

TEST_CASE("DSatur coloring") {
    SUBCASE("triangle needs three colors") {
        const auto g = color_dsatur(parse_edge_list("0 1\n1 2\n0 2\n"));
        CHECK(g.color_count() == 3);
        CHECK(coloring_is_proper(g));
    }
    SUBCASE("path of three is 2-colorable") {
        const auto g = color_dsatur(parse_edge_list("0 1\n1 2\n"));
        CHECK(g.color_count() == 2);
    }
    SUBCASE("deterministic tie-breaking") {
        // Equal saturation and degree everywhere: lowest id goes first.
        const auto g = color_dsatur(parse_edge_list("0 1\n1 2\n2 3\n3 0\n"));
        CHECK(g.coloring()[0] == 0);
        CHECK(g.coloring()[1] == 1);
        CHECK(g.coloring()[3] == 1);
        CHECK(g.coloring()[2] == 0);
    }
    SUBCASE("property: proper, bounded, schedule partitions nodes") {
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            const auto g = color_dsatur(random_sparse(30 + seed * 3, 0.05 + 0.01 * static_cast<double>(seed % 7), seed));
            CHECK(coloring_is_proper(g));
            CHECK(g.color_count() <= g.max_degree() + 1);
            std::vector<int> seen(g.node_count(), 0);
            for (std::size_t c = 0; c < g.color_schedule().size(); ++c)
                for (NodeId i : g.color_schedule()[c]) {
                    ++seen[i];
                    CHECK(g.coloring()[i] == static_cast<int>(c));
                }
            CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
        }
    }
    SUBCASE("improper coloring is rejected") {
        const auto g = parse_edge_list("0 1\n");
        CHECK_THROWS_AS((void)g.with_coloring({0, 0}), std::invalid_argument);
    }
}

TEST_CASE("Pegasus 4264 topology") {
    const auto g = color_dsatur(load_edge_list(kData / "graphs/pegasus_4264.edges"));
    CHECK(g.node_count() == 4264);
    CHECK(g.edge_count() == 30404);
    CHECK(g.max_degree() == 15);
    CHECK(g.color_count() == 4);
    CHECK(coloring_is_proper(g));
    CHECK(graph_density(g) == doctest::Approx(0.0033).epsilon(0.02));

    const auto roles = assign_roles(g, 784, 10, 5, 11, true);
    CHECK(roles.visible_ids.size() + roles.label_ids.size() == 834);
    CHECK(roles.hidden_ids.size() == 3430);
}

TEST_CASE("Zephyr 3360 topology") {
    const auto g = color_dsatur(load_edge_list(kData / "graphs/zephyr_3360.edges"));
    CHECK(g.node_count() == 3360);
    CHECK(g.max_degree() == 20);
    CHECK(coloring_is_proper(g));
    CHECK(graph_density(g) == doctest::Approx(0.0056).epsilon(0.02));
}

TEST_CASE("graph density") {
    CHECK(graph_density(parse_edge_list("0 1\n1 2\n0 2\n")) == 1.0);
    CHECK(graph_density(parse_edge_list("0 1\n1 2\n2 3\n")) == 0.5);
    CHECK_THROWS_AS((void)graph_density(SparseGraph::from_edges(1, {})), std::invalid_argument);

    // Relabeling nodes leaves density unchanged.
    const auto g = random_sparse(25, 0.3, 9);
    std::vector<NodeId> perm(25);
    for (NodeId i = 0; i < 25; ++i) perm[i] = (i * 7 + 3) % 25;
    std::vector<Edge> relabeled;
    for (const auto& e : g.edges()) relabeled.push_back({perm[e.u], perm[e.v]});
    CHECK(graph_density(SparseGraph::from_edges(25, relabeled)) == graph_density(g));
}

TEST_CASE("role assignment") {
    const auto g = random_regular(1000, 6, 2);
    SUBCASE("serial layout") {
        const auto roles = assign_roles(g, 784, 10, 5, 0, false);
        for (NodeId i = 0; i < 784; ++i) CHECK(roles.visible_ids[i] == i);
        CHECK(roles.label_node(0, 0) == 784);
        CHECK(roles.label_node(4, 9) == 833);
        CHECK(roles.hidden_ids.front() == 834);
    }
    SUBCASE("seeded permutation is deterministic and a partition") {
        const auto a = assign_roles(g, 784, 10, 5, 42, true);
        const auto b = assign_roles(g, 784, 10, 5, 42, true);
        const auto c = assign_roles(g, 784, 10, 5, 43, true);
        CHECK(a.visible_ids == b.visible_ids);
        CHECK(a.label_ids == b.label_ids);
        CHECK(a.visible_ids != c.visible_ids);
        std::set<NodeId> all;
        for (auto* ids : {&a.visible_ids, &a.label_ids, &a.hidden_ids}) all.insert(ids->begin(), ids->end());
        CHECK(all.size() == 1000);
        CHECK(a.node_count() == 1000);
        CHECK(a.label_ids.size() == 50);
    }
    SUBCASE("insufficient nodes") {
        CHECK_THROWS_AS((void)assign_roles(grid2d(3, 3), 8, 2, 1, 0, false), std::invalid_argument);
    }
    SUBCASE("roles file round trip") {
        const auto a = assign_roles(g, 100, 10, 3, 5, true);
        const auto path = std::filesystem::temp_directory_path() / "pbit_roles_test.txt";
        write_roles(path, a);
        const auto b = read_roles(path);
        CHECK(b.visible_ids == a.visible_ids);
        CHECK(b.label_ids == a.label_ids);
        CHECK(b.hidden_ids == a.hidden_ids);
        CHECK(b.n_classes == 10);
        CHECK(b.n_replicas == 3);
        CHECK(b.permutation_seed == 5);
        std::filesystem::remove(path);
    }
}
