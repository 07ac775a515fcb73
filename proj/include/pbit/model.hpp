#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "pbit/graph.hpp"
#include "pbit/precision.hpp"

namespace pbit {

/// State encoding: bipolar m in {-1,+1} or binary m in {0,1}.
enum class Representation { bipolar, binary };

/// Sparse Ising model E = -(sum_{i<j} J_ij m_i m_j + sum_i h_i m_i).
/// One coupling per graph edge (indexed like graph->edges()), one bias per node.
struct Model {
    std::shared_ptr<const SparseGraph> graph;
    std::vector<double> couplings;
    std::vector<double> biases;
    PrecisionSpec precision;
    Representation representation = Representation::bipolar;

    Model() = default;
    /// Zero couplings and biases on `g`.
    explicit Model(std::shared_ptr<const SparseGraph> g, PrecisionSpec p = {},
                   Representation r = Representation::bipolar);

    [[nodiscard]] std::size_t node_count() const noexcept { return biases.size(); }
    [[nodiscard]] std::size_t edge_count() const noexcept { return couplings.size(); }

    /// J_uv, or 0 when (u, v) is not an edge.
    [[nodiscard]] double coupling(NodeId u, NodeId v) const;
    /// Throws std::invalid_argument if (u, v) is not an edge.
    void set_coupling(NodeId u, NodeId v, double value);

    /// The "+1" state value: +1 in both encodings; "off" is -1 or 0.
    [[nodiscard]] std::int8_t off_value() const noexcept {
        return representation == Representation::bipolar ? std::int8_t{-1} : std::int8_t{0};
    }
};

/// Copy with every coupling and bias rounded to `spec`.
Model quantized(const Model& model, const PrecisionSpec& spec);

/// Bipolar to binary: J_bin = 2 J, h_bin = h - J*1 (row sums of J).
/// Binary p-bits fire with probability (1 + tanh(beta I)) / 2, so the pair
/// (bipolar at beta, binary at beta) sample the same distribution under
/// m_bin = (m_bip + 1) / 2.
Model to_binary_model(const Model& bipolar);

/// -(sum_{i<j} J_ij m_i m_j + sum_i h_i m_i), evaluated literally in the
/// model's representation.
double energy(const Model& model, std::span<const std::int8_t> state);

/// Text persistence:
///   PBM1 <node_count> <edge_count> <float64|fixed> <int_bits> <frac_bits>
///   u v J_uv      (edge_count lines)
///   u h_u         (node_count lines)
/// Values are written in shortest round-trip decimal form. The loaded graph
/// is DSatur-colored.
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace pbit
