#include "pbit/model.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/os.h>

#include "pbit/error.hpp"

namespace pbit {

Model::Model(std::shared_ptr<const SparseGraph> g, PrecisionSpec p, Representation r)
    : graph(std::move(g)), precision(p), representation(r) {
    if (!graph) throw std::invalid_argument("model needs a graph");
    couplings.assign(graph->edge_count(), 0.0);
    biases.assign(graph->node_count(), 0.0);
}

double Model::coupling(NodeId u, NodeId v) const {
    const auto k = graph->find_edge(u, v);
    return k ? couplings[*k] : 0.0;
}

void Model::set_coupling(NodeId u, NodeId v, double value) {
    const auto k = graph->find_edge(u, v);
    if (!k) throw std::invalid_argument(fmt::format("({},{}) is not an edge", u, v));
    couplings[*k] = value;
}

Model quantized(const Model& model, const PrecisionSpec& spec) {
    Model out = model;
    out.precision = spec;
    for (auto& j : out.couplings) j = quantize(j, spec);
    for (auto& h : out.biases) h = quantize(h, spec);
    return out;
}

Model to_binary_model(const Model& bipolar) {
    if (bipolar.representation != Representation::bipolar)
        throw std::invalid_argument("to_binary_model expects a bipolar model");
    Model out = bipolar;
    out.representation = Representation::binary;
    const auto edges = bipolar.graph->edges();
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const double j = bipolar.couplings[k];
        out.couplings[k] = 2.0 * j;
        out.biases[edges[k].u] -= j;
        out.biases[edges[k].v] -= j;
    }
    return out;
}

double energy(const Model& model, std::span<const std::int8_t> state) {
    if (state.size() != model.node_count())
        throw DimensionError(fmt::format("state has {} entries, model has {} nodes", state.size(), model.node_count()));
    double pair = 0.0;
    const auto edges = model.graph->edges();
    for (std::size_t k = 0; k < edges.size(); ++k)
        pair += model.couplings[k] * state[edges[k].u] * state[edges[k].v];
    double field = 0.0;
    for (std::size_t i = 0; i < state.size(); ++i) field += model.biases[i] * state[i];
    return -(pair + field);
}

void save_model(const std::filesystem::path& path, const Model& model) {
    if (model.representation != Representation::bipolar)
        throw std::invalid_argument("only bipolar models are persisted");
    std::string text;
    auto out = std::back_inserter(text);
    fmt::format_to(out, "PBM1 {} {} {} {} {}\n", model.node_count(), model.edge_count(),
                   model.precision.is_fixed() ? "fixed" : "float64", model.precision.int_bits,
                   model.precision.frac_bits);
    const auto edges = model.graph->edges();
    for (std::size_t k = 0; k < edges.size(); ++k)
        fmt::format_to(out, "{} {} {}\n", edges[k].u, edges[k].v, model.couplings[k]);
    for (std::size_t i = 0; i < model.node_count(); ++i) fmt::format_to(out, "{} {}\n", i, model.biases[i]);

    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot write " + path.string());
    file << text;
    if (!file) throw IoError("write failed for " + path.string());
}

namespace {

template <class T>
T parse_field(std::string_view tok, std::size_t line_no) {
    T value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw ParseError("bad number '" + std::string(tok) + "'", line_no);
    return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

}  // namespace

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model " + path.string());
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ParseError("empty model file", 1);
    const auto head = split_ws(line);
    if (head.size() != 6 || head[0] != "PBM1") throw ParseError("expected 'PBM1' header", 1);
    const auto n = parse_field<std::size_t>(head[1], 1);
    const auto n_edges = parse_field<std::size_t>(head[2], 1);
    PrecisionSpec precision;
    if (head[3] == "fixed") {
        precision = PrecisionSpec::fixed(parse_field<int>(head[4], 1), parse_field<int>(head[5], 1));
    } else if (head[3] != "float64") {
        throw ParseError("unknown precision mode", 1);
    }

    std::vector<Edge> edges;
    std::vector<double> values;
    edges.reserve(n_edges);
    values.reserve(n_edges);
    for (std::size_t k = 0; k < n_edges; ++k) {
        ++line_no;
        if (!std::getline(in, line)) throw ParseError("truncated edge section", line_no);
        const auto f = split_ws(line);
        if (f.size() != 3) throw ParseError("expected 'u v J'", line_no);
        edges.push_back({parse_field<NodeId>(f[0], line_no), parse_field<NodeId>(f[1], line_no)});
        values.push_back(parse_field<double>(f[2], line_no));
    }
    std::vector<double> biases(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        ++line_no;
        if (!std::getline(in, line)) throw ParseError("truncated bias section", line_no);
        const auto f = split_ws(line);
        if (f.size() != 2) throw ParseError("expected 'u h'", line_no);
        const auto id = parse_field<std::size_t>(f[0], line_no);
        if (id >= n) throw ParseError("bias node id out of range", line_no);
        biases[id] = parse_field<double>(f[1], line_no);
    }

    auto graph = std::make_shared<const SparseGraph>(color_dsatur(SparseGraph::from_edges(n, edges)));
    if (graph->edge_count() != n_edges) throw ParseError("duplicate edges in model file", 0);
    Model model(graph, precision);
    for (std::size_t k = 0; k < n_edges; ++k) model.set_coupling(edges[k].u, edges[k].v, values[k]);
    model.biases = std::move(biases);
    return model;
}

}  // namespace pbit
