#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pbit {

using NodeId = std::uint32_t;

/// Unordered edge, stored with u < v.
struct Edge {
    NodeId u;
    NodeId v;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Immutable simple undirected graph in CSR form, optionally carrying a
/// proper vertex coloring and the per-color update schedule.
///
/// Neighbor lists are sorted ascending. Each adjacency slot also records the
/// index of the edge it belongs to, so per-edge data (couplings, correlation
/// sums) can be gathered from either endpoint.
class SparseGraph {
public:
    SparseGraph() = default;

    /// Builds from an edge list. Reversed and repeated pairs are merged.
    /// Throws std::invalid_argument on self-loops or ids >= node_count.
    static SparseGraph from_edges(std::size_t node_count, std::vector<Edge> edges);

    /// Returns a copy carrying `colors`. Throws if the coloring is improper.
    [[nodiscard]] SparseGraph with_coloring(std::vector<int> colors) const;

    [[nodiscard]] std::size_t node_count() const noexcept { return node_count_; }
    [[nodiscard]] std::size_t edge_count() const noexcept { return edges_.size(); }
    [[nodiscard]] std::span<const Edge> edges() const noexcept { return edges_; }

    [[nodiscard]] std::span<const NodeId> neighbors(NodeId i) const noexcept {
        return {neighbors_.data() + offsets_[i], neighbors_.data() + offsets_[i + 1]};
    }
    /// Edge index for each entry of neighbors(i).
    [[nodiscard]] std::span<const std::uint32_t> neighbor_edges(NodeId i) const noexcept {
        return {slot_edge_.data() + offsets_[i], slot_edge_.data() + offsets_[i + 1]};
    }
    [[nodiscard]] std::size_t degree(NodeId i) const noexcept { return offsets_[i + 1] - offsets_[i]; }
    [[nodiscard]] std::size_t max_degree() const noexcept;

    // Raw CSR arrays for the sampler's inner loop.
    [[nodiscard]] std::span<const std::uint32_t> csr_offsets() const noexcept { return offsets_; }
    [[nodiscard]] std::span<const NodeId> csr_neighbors() const noexcept { return neighbors_; }
    [[nodiscard]] std::span<const std::uint32_t> csr_edges() const noexcept { return slot_edge_; }

    [[nodiscard]] std::optional<std::size_t> find_edge(NodeId u, NodeId v) const noexcept;

    [[nodiscard]] bool is_colored() const noexcept { return !coloring_.empty() || node_count_ == 0; }
    [[nodiscard]] std::span<const int> coloring() const noexcept { return coloring_; }
    [[nodiscard]] std::size_t color_count() const noexcept { return schedule_.size(); }
    /// One node group per color, in color order; each group sorted ascending.
    [[nodiscard]] const std::vector<std::vector<NodeId>>& color_schedule() const noexcept { return schedule_; }

private:
    std::size_t node_count_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::uint32_t> offsets_{0};
    std::vector<NodeId> neighbors_;
    std::vector<std::uint32_t> slot_edge_;
    std::vector<int> coloring_;
    std::vector<std::vector<NodeId>> schedule_;
};

/// Parses a whitespace-separated "u v" edge list. Lines starting with '#' and
/// blank lines are skipped. node_count = 1 + max id.
/// Throws ParseError (with line number) on malformed lines, self-loops, or an
/// empty edge set.
SparseGraph load_edge_list(const std::filesystem::path& path);
SparseGraph parse_edge_list(std::string_view text);
void write_edge_list(const std::filesystem::path& path, const SparseGraph& g);

SparseGraph grid2d(std::size_t rows, std::size_t cols);
/// Uniformly-paired random d-regular simple graph; deterministic in `seed`.
SparseGraph random_regular(std::size_t n, std::size_t d, std::uint64_t seed);
/// Nodes [0, n_visible) form one side, [n_visible, n_visible + n_hidden) the other.
SparseGraph bipartite_full(std::size_t n_visible, std::size_t n_hidden);

/// Builds a graph from a compact description:
///   grid2d:R:C | random_regular:N:D[:SEED] | bipartite_full:V:H | <edge-list path>
SparseGraph make_graph(const std::string& source);

/// DSatur coloring. Picks the uncolored node of highest saturation, breaking
/// ties by higher degree and then by lower id; assigns the smallest free color.
SparseGraph color_dsatur(const SparseGraph& g);

/// 2|E| / (|V|^2 - |V|). Throws std::invalid_argument if |V| < 2.
double graph_density(const SparseGraph& g);

/// Placement of visible (pixel), label, and hidden units on graph nodes.
/// Label replica r of class c sits at label_ids[r * n_classes + c].
struct RoleAssignment {
    std::vector<NodeId> visible_ids;
    std::vector<NodeId> label_ids;
    std::vector<NodeId> hidden_ids;
    std::size_t n_classes = 0;
    std::size_t n_replicas = 0;
    std::uint64_t permutation_seed = 0;

    [[nodiscard]] NodeId label_node(std::size_t replica, std::size_t cls) const {
        return label_ids.at(replica * n_classes + cls);
    }
    [[nodiscard]] std::size_t node_count() const noexcept {
        return visible_ids.size() + label_ids.size() + hidden_ids.size();
    }
};

/// With randomize=true, roles follow a seeded uniform permutation of node ids;
/// otherwise ids are laid out serially (visible, labels, hidden).
/// Throws std::invalid_argument if the graph has too few nodes.
RoleAssignment assign_roles(const SparseGraph& g, std::size_t n_visible, std::size_t n_classes,
                            std::size_t n_replicas, std::uint64_t permutation_seed, bool randomize);

/// "node_id role slot" per line; slot is the pixel index, the label index, or -1.
void write_roles(const std::filesystem::path& path, const RoleAssignment& roles);
RoleAssignment read_roles(const std::filesystem::path& path);

}  // namespace pbit
