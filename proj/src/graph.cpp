#include "pbit/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pbit/error.hpp"
#include "pbit/rng.hpp"

namespace pbit {

SparseGraph SparseGraph::from_edges(std::size_t node_count, std::vector<Edge> edges) {
    for (auto& e : edges) {
        if (e.u == e.v) throw std::invalid_argument("self-loop on node " + std::to_string(e.u));
        if (e.u >= node_count || e.v >= node_count)
            throw std::invalid_argument("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                        ") out of range for " + std::to_string(node_count) + " nodes");
        if (e.u > e.v) std::swap(e.u, e.v);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    SparseGraph g;
    g.node_count_ = node_count;
    g.edges_ = std::move(edges);

    std::vector<std::uint32_t> deg(node_count, 0);
    for (const auto& e : g.edges_) {
        ++deg[e.u];
        ++deg[e.v];
    }
    g.offsets_.assign(node_count + 1, 0);
    for (std::size_t i = 0; i < node_count; ++i) g.offsets_[i + 1] = g.offsets_[i] + deg[i];
    g.neighbors_.resize(g.offsets_.back());
    g.slot_edge_.resize(g.offsets_.back());

    // Edges are sorted by (u, v), so filling in edge order leaves every
    // neighbor list ascending: for node x, partners below x arrive as the
    // "v" side in increasing u, partners above x as the "u" side in increasing v.
    std::vector<std::uint32_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
    std::vector<std::vector<std::pair<NodeId, std::uint32_t>>> lower(node_count);
    for (std::uint32_t k = 0; k < g.edges_.size(); ++k) {
        const auto [u, v] = g.edges_[k];
        lower[v].emplace_back(u, k);
    }
    for (NodeId x = 0; x < node_count; ++x) {
        for (const auto& [u, k] : lower[x]) {
            g.neighbors_[fill[x]] = u;
            g.slot_edge_[fill[x]++] = k;
        }
    }
    for (std::uint32_t k = 0; k < g.edges_.size(); ++k) {
        const auto [u, v] = g.edges_[k];
        g.neighbors_[fill[u]] = v;
        g.slot_edge_[fill[u]++] = k;
    }
    return g;
}

SparseGraph SparseGraph::with_coloring(std::vector<int> colors) const {
    if (colors.size() != node_count_) throw std::invalid_argument("coloring size does not match node count");
    int n_colors = 0;
    for (int c : colors) {
        if (c < 0) throw std::invalid_argument("negative color id");
        n_colors = std::max(n_colors, c + 1);
    }
    for (const auto& e : edges_) {
        if (colors[e.u] == colors[e.v])
            throw std::invalid_argument("monochromatic edge (" + std::to_string(e.u) + "," +
                                        std::to_string(e.v) + ")");
    }
    SparseGraph g = *this;
    g.schedule_.assign(static_cast<std::size_t>(n_colors), {});
    for (NodeId i = 0; i < node_count_; ++i) g.schedule_[static_cast<std::size_t>(colors[i])].push_back(i);
    std::erase_if(g.schedule_, [](const auto& group) { return group.empty(); });
    g.coloring_ = std::move(colors);
    return g;
}

std::size_t SparseGraph::max_degree() const noexcept {
    std::size_t best = 0;
    for (NodeId i = 0; i < node_count_; ++i) best = std::max(best, degree(i));
    return best;
}

std::optional<std::size_t> SparseGraph::find_edge(NodeId u, NodeId v) const noexcept {
    if (u >= node_count_ || v >= node_count_) return std::nullopt;
    const auto nbrs = neighbors(u);
    const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), v);
    if (it == nbrs.end() || *it != v) return std::nullopt;
    return neighbor_edges(u)[static_cast<std::size_t>(it - nbrs.begin())];
}

// ---------------------------------------------------------------------------
// Edge-list I/O

namespace {

bool parse_uint(std::string_view tok, std::uint64_t& out) {
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

}  // namespace

SparseGraph parse_edge_list(std::string_view text) {
    std::vector<Edge> edges;
    std::uint64_t max_id = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;

        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string_view::npos || line[first] == '#') {
            if (nl == text.size()) break;
            continue;
        }
        std::istringstream in{std::string(line)};
        std::string a, b, extra;
        in >> a >> b;
        std::uint64_t u = 0, v = 0;
        if (b.empty() || (in >> extra) || !parse_uint(a, u) || !parse_uint(b, v))
            throw ParseError("expected two non-negative integers 'u v'", line_no);
        if (u == v) throw ParseError("self-loop on node " + std::to_string(u), line_no);
        if (std::max(u, v) > std::numeric_limits<NodeId>::max() - 1)
            throw ParseError("node id too large", line_no);
        max_id = std::max({max_id, u, v});
        edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
        if (nl == text.size()) break;
    }
    if (edges.empty()) throw ParseError("edge list is empty", 0);
    return SparseGraph::from_edges(static_cast<std::size_t>(max_id) + 1, std::move(edges));
}

SparseGraph load_edge_list(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open edge list " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_edge_list(buf.str());
}

void write_edge_list(const std::filesystem::path& path, const SparseGraph& g) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "# " << g.node_count() << " nodes, " << g.edge_count() << " edges\n";
    for (const auto& e : g.edges()) out << e.u << ' ' << e.v << '\n';
}

// ---------------------------------------------------------------------------
// Generators

SparseGraph grid2d(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("grid2d needs rows, cols >= 1");
    std::vector<Edge> edges;
    auto id = [cols](std::size_t r, std::size_t c) { return static_cast<NodeId>(r * cols + c); };
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c + 1 < cols) edges.push_back({id(r, c), id(r, c + 1)});
            if (r + 1 < rows) edges.push_back({id(r, c), id(r + 1, c)});
        }
    }
    return SparseGraph::from_edges(rows * cols, std::move(edges));
}

SparseGraph random_regular(std::size_t n, std::size_t d, std::uint64_t seed) {
    if (d >= n || (n * d) % 2 != 0)
        throw std::invalid_argument("random_regular needs d < n and n*d even");
    if (d == 0) return SparseGraph::from_edges(n, {});

    // Random pairing of stubs, rejecting loops and repeated pairs as they are
    // drawn; restart when the leftover stubs cannot be completed.
    Xoshiro256 rng(mix_seed(seed, 0x7265677261706801ULL));
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<NodeId> stubs;
        stubs.reserve(n * d);
        for (NodeId i = 0; i < n; ++i) stubs.insert(stubs.end(), d, i);
        std::set<std::pair<NodeId, NodeId>> seen;
        std::vector<Edge> edges;
        edges.reserve(n * d / 2);

        bool stuck = false;
        while (!stubs.empty() && !stuck) {
            std::size_t failures = 0;
            for (;;) {
                std::uniform_int_distribution<std::size_t> pick(0, stubs.size() - 1);
                const std::size_t a = pick(rng);
                const std::size_t b = pick(rng);
                const NodeId u = std::min(stubs[a], stubs[b]);
                const NodeId v = std::max(stubs[a], stubs[b]);
                if (a != b && u != v && !seen.contains({u, v})) {
                    seen.insert({u, v});
                    edges.push_back({u, v});
                    const std::size_t hi = std::max(a, b), lo = std::min(a, b);
                    stubs[hi] = stubs.back();
                    stubs.pop_back();
                    stubs[lo] = stubs.back();
                    stubs.pop_back();
                    break;
                }
                if (++failures > 50 * stubs.size() + 100) {
                    stuck = true;
                    break;
                }
            }
        }
        if (!stuck) return SparseGraph::from_edges(n, std::move(edges));
    }
    throw std::invalid_argument("random_regular failed to complete a simple pairing");
}

SparseGraph bipartite_full(std::size_t n_visible, std::size_t n_hidden) {
    if (n_visible == 0 || n_hidden == 0) throw std::invalid_argument("bipartite_full needs both sides non-empty");
    std::vector<Edge> edges;
    edges.reserve(n_visible * n_hidden);
    for (std::size_t v = 0; v < n_visible; ++v)
        for (std::size_t h = 0; h < n_hidden; ++h)
            edges.push_back({static_cast<NodeId>(v), static_cast<NodeId>(n_visible + h)});
    return SparseGraph::from_edges(n_visible + n_hidden, std::move(edges));
}

SparseGraph make_graph(const std::string& source) {
    std::vector<std::string> parts;
    std::stringstream ss(source);
    for (std::string tok; std::getline(ss, tok, ':');) parts.push_back(tok);
    auto num = [&](std::size_t i) -> std::uint64_t {
        std::uint64_t v = 0;
        if (i >= parts.size() || !parse_uint(parts[i], v))
            throw ConfigError("bad graph source '" + source + "'");
        return v;
    };
    try {
        if (parts[0] == "grid2d" && parts.size() == 3) return grid2d(num(1), num(2));
        if (parts[0] == "random_regular" && (parts.size() == 3 || parts.size() == 4))
            return random_regular(num(1), num(2), parts.size() == 4 ? num(3) : 0);
        if (parts[0] == "bipartite_full" && parts.size() == 3) return bipartite_full(num(1), num(2));
    } catch (const std::invalid_argument& e) {
        if (dynamic_cast<const ConfigError*>(&e)) throw;
        throw ConfigError(std::string("graph '") + source + "': " + e.what());
    }
    return load_edge_list(source);
}

// ---------------------------------------------------------------------------
// Coloring

SparseGraph color_dsatur(const SparseGraph& g) {
    const std::size_t n = g.node_count();
    std::vector<int> color(n, -1);
    std::vector<int> sat(n, 0);
    std::vector<std::vector<char>> seen_colors(n);

    struct Key {
        int sat;
        std::size_t deg;
        NodeId id;
        bool operator<(const Key& o) const {
            if (sat != o.sat) return sat > o.sat;
            if (deg != o.deg) return deg > o.deg;
            return id < o.id;
        }
    };
    std::set<Key> queue;
    for (NodeId i = 0; i < n; ++i) queue.insert({0, g.degree(i), i});

    std::vector<char> used;
    while (!queue.empty()) {
        const NodeId u = queue.begin()->id;
        queue.erase(queue.begin());

        used.assign(g.degree(u) + 1, 0);
        for (NodeId w : g.neighbors(u)) {
            const int c = color[w];
            if (c >= 0 && static_cast<std::size_t>(c) < used.size()) used[static_cast<std::size_t>(c)] = 1;
        }
        int c = 0;
        while (used[static_cast<std::size_t>(c)]) ++c;
        color[u] = c;

        for (NodeId w : g.neighbors(u)) {
            if (color[w] >= 0) continue;
            auto& mine = seen_colors[w];
            if (mine.size() <= static_cast<std::size_t>(c)) mine.resize(static_cast<std::size_t>(c) + 1, 0);
            if (!mine[static_cast<std::size_t>(c)]) {
                queue.erase({sat[w], g.degree(w), w});
                mine[static_cast<std::size_t>(c)] = 1;
                ++sat[w];
                queue.insert({sat[w], g.degree(w), w});
            }
        }
    }
    return g.with_coloring(std::move(color));
}

double graph_density(const SparseGraph& g) {
    const double v = static_cast<double>(g.node_count());
    if (g.node_count() < 2) throw std::invalid_argument("graph density needs at least 2 nodes");
    return 2.0 * static_cast<double>(g.edge_count()) / (v * v - v);
}

// ---------------------------------------------------------------------------
// Roles

RoleAssignment assign_roles(const SparseGraph& g, std::size_t n_visible, std::size_t n_classes,
                            std::size_t n_replicas, std::uint64_t permutation_seed, bool randomize) {
    const std::size_t n_labels = n_classes * n_replicas;
    if (n_visible + n_labels > g.node_count())
        throw std::invalid_argument("graph has " + std::to_string(g.node_count()) + " nodes, roles need " +
                                    std::to_string(n_visible + n_labels));
    std::vector<NodeId> perm(g.node_count());
    std::iota(perm.begin(), perm.end(), NodeId{0});
    if (randomize) {
        Xoshiro256 rng(mix_seed(permutation_seed, 0x726f6c6573ULL));
        std::shuffle(perm.begin(), perm.end(), rng);
    }
    RoleAssignment roles;
    roles.n_classes = n_classes;
    roles.n_replicas = n_replicas;
    roles.permutation_seed = permutation_seed;
    roles.visible_ids.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_visible));
    roles.label_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_visible),
                           perm.begin() + static_cast<std::ptrdiff_t>(n_visible + n_labels));
    roles.hidden_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_visible + n_labels), perm.end());
    std::sort(roles.hidden_ids.begin(), roles.hidden_ids.end());
    return roles;
}

void write_roles(const std::filesystem::path& path, const RoleAssignment& roles) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "# roles " << roles.visible_ids.size() << ' ' << roles.n_classes << ' ' << roles.n_replicas << ' '
        << roles.permutation_seed << '\n';
    std::vector<std::pair<std::string, long>> by_node(roles.node_count(), {"", -1});
    for (std::size_t i = 0; i < roles.visible_ids.size(); ++i)
        by_node.at(roles.visible_ids[i]) = {"visible", static_cast<long>(i)};
    for (std::size_t i = 0; i < roles.label_ids.size(); ++i)
        by_node.at(roles.label_ids[i]) = {"label", static_cast<long>(i)};
    for (NodeId id : roles.hidden_ids) by_node.at(id) = {"hidden", -1};
    for (std::size_t id = 0; id < by_node.size(); ++id)
        out << id << ' ' << by_node[id].first << ' ' << by_node[id].second << '\n';
}

RoleAssignment read_roles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open roles file " + path.string());
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ParseError("empty roles file", 1);
    std::istringstream head(line);
    std::string hash, tag;
    std::size_t n_visible = 0;
    RoleAssignment roles;
    if (!(head >> hash >> tag >> n_visible >> roles.n_classes >> roles.n_replicas >> roles.permutation_seed) ||
        hash != "#" || tag != "roles")
        throw ParseError("bad roles header", 1);
    roles.visible_ids.assign(n_visible, 0);
    roles.label_ids.assign(roles.n_classes * roles.n_replicas, 0);
    std::size_t seen_visible = 0, seen_labels = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream row(line);
        std::size_t id = 0;
        std::string role;
        long slot = 0;
        if (!(row >> id >> role >> slot)) throw ParseError("expected 'node_id role slot'", line_no);
        if (role == "visible" && slot >= 0 && static_cast<std::size_t>(slot) < n_visible) {
            roles.visible_ids[static_cast<std::size_t>(slot)] = static_cast<NodeId>(id);
            ++seen_visible;
        } else if (role == "label" && slot >= 0 && static_cast<std::size_t>(slot) < roles.label_ids.size()) {
            roles.label_ids[static_cast<std::size_t>(slot)] = static_cast<NodeId>(id);
            ++seen_labels;
        } else if (role == "hidden") {
            roles.hidden_ids.push_back(static_cast<NodeId>(id));
        } else {
            throw ParseError("bad role entry", line_no);
        }
    }
    if (seen_visible != n_visible || seen_labels != roles.label_ids.size())
        throw ParseError("roles file is missing visible or label entries", 0);
    return roles;
}

}  // namespace pbit
