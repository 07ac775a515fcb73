#include "pbit/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "pbit/error.hpp"

namespace pbit {

namespace {

void check_image(const RoleAssignment& roles, std::size_t size) {
    if (size != roles.visible_ids.size())
        throw DimensionError(fmt::format("image has {} pixels, network has {} visible nodes", size,
                                         roles.visible_ids.size()));
}

void clamp_labels(ChainState& state, const RoleAssignment& roles, std::size_t class_id) {
    for (std::size_t r = 0; r < roles.n_replicas; ++r)
        for (std::size_t c = 0; c < roles.n_classes; ++c) state.clamp(roles.label_node(r, c), state.from_bit(c == class_id));
}

// Runs the anneal and averages visible activity over the tail of the last step.
GenerationResult anneal_visible(Sampler& sampler, ChainState& state, const RoleAssignment& roles,
                                const AnnealSchedule& schedule) {
    const auto n_steps = schedule.betas().size();
    const std::uint64_t spp = schedule.sweeps_per_step;
    const std::uint64_t tail = (spp + 3) / 4;
    std::vector<std::uint32_t> on(roles.visible_ids.size(), 0);
    const auto block = sampler.anneal(state, schedule,
                                      [&](std::size_t step, double, std::uint64_t s, std::span<const std::int8_t> m) {
                                          if (step + 1 != n_steps || s + tail <= spp) return;
                                          for (std::size_t p = 0; p < on.size(); ++p) on[p] += m[roles.visible_ids[p]] == 1;
                                      });
    GenerationResult out;
    out.pixels.resize(on.size());
    for (std::size_t p = 0; p < on.size(); ++p) out.pixels[p] = static_cast<float>(on[p]) / static_cast<float>(tail);
    out.energy_initial = energy(sampler.model(), block.row(0));
    out.energy_final = energy(sampler.model(), block.row(block.size() - 1));
    out.final_state = state.m;
    return out;
}

}  // namespace

std::size_t argmax(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("argmax of an empty score list");
    return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

ClassificationResult classify(Sampler& sampler, const RoleAssignment& roles, std::span<const std::uint8_t> image_bits,
                              std::uint64_t n_sweeps, std::uint64_t seed) {
    check_image(roles, image_bits.size());
    if (n_sweeps == 0) throw ConfigError("classification needs at least one sweep");
    ChainState state(sampler.model().node_count(), seed, sampler.model().representation);
    for (std::size_t p = 0; p < image_bits.size(); ++p) state.clamp(roles.visible_ids[p], state.from_bit(image_bits[p] != 0));
    state.randomize_free();

    std::vector<std::uint64_t> on(roles.label_ids.size(), 0);
    sampler.run(state, n_sweeps, [&](std::uint64_t, std::span<const std::int8_t> m) {
        for (std::size_t k = 0; k < on.size(); ++k) on[k] += m[roles.label_ids[k]] == 1;
    });

    ClassificationResult out;
    out.class_scores.assign(roles.n_classes, 0.0);
    for (std::size_t r = 0; r < roles.n_replicas; ++r)
        for (std::size_t c = 0; c < roles.n_classes; ++c) out.class_scores[c] += static_cast<double>(on[r * roles.n_classes + c]);
    for (auto& s : out.class_scores) s /= static_cast<double>(n_sweeps * roles.n_replicas);
    out.predicted = argmax(out.class_scores);
    return out;
}

ClassificationResult classify_gray(Sampler& sampler, const RoleAssignment& roles, std::span<const float> gray,
                                   std::size_t n_samples, std::uint64_t n_sweeps, std::uint64_t seed) {
    check_image(roles, gray.size());
    const auto samples = grayscale_encode(gray, n_samples, seed);
    ClassificationResult out;
    out.class_scores.assign(roles.n_classes, 0.0);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto r = classify(sampler, roles, samples[k], n_sweeps, mix_seed(seed, k + 1));
        for (std::size_t c = 0; c < roles.n_classes; ++c) out.class_scores[c] += r.class_scores[c] / static_cast<double>(n_samples);
    }
    out.predicted = argmax(out.class_scores);
    return out;
}

double accuracy(Sampler& sampler, const RoleAssignment& roles, const std::vector<std::vector<std::uint8_t>>& images,
                std::span<const std::uint8_t> labels, std::uint64_t n_sweeps, std::uint64_t seed) {
    if (images.size() != labels.size()) throw DimensionError("image and label counts differ");
    if (images.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t k = 0; k < images.size(); ++k)
        correct += classify(sampler, roles, images[k], n_sweeps, mix_seed(seed, k)).predicted == labels[k];
    return static_cast<double>(correct) / static_cast<double>(images.size());
}

GenerationResult generate(Sampler& sampler, const RoleAssignment& roles, std::size_t class_id,
                          const AnnealSchedule& schedule, std::uint64_t seed) {
    if (class_id >= roles.n_classes)
        throw std::invalid_argument(fmt::format("class {} out of range (have {})", class_id, roles.n_classes));
    ChainState state(sampler.model().node_count(), seed, sampler.model().representation);
    clamp_labels(state, roles, class_id);
    state.randomize_free();
    return anneal_visible(sampler, state, roles, schedule);
}

GenerationResult complete(Sampler& sampler, const RoleAssignment& roles, std::span<const std::uint8_t> image_bits,
                          std::span<const std::uint8_t> known_mask, std::optional<std::size_t> class_id,
                          const AnnealSchedule& schedule, std::uint64_t seed) {
    check_image(roles, image_bits.size());
    check_image(roles, known_mask.size());
    if (class_id && *class_id >= roles.n_classes)
        throw std::invalid_argument(fmt::format("class {} out of range (have {})", *class_id, roles.n_classes));
    ChainState state(sampler.model().node_count(), seed, sampler.model().representation);
    for (std::size_t p = 0; p < image_bits.size(); ++p)
        if (known_mask[p]) state.clamp(roles.visible_ids[p], state.from_bit(image_bits[p] != 0));
    if (class_id) clamp_labels(state, roles, *class_id);
    state.randomize_free();
    auto out = anneal_visible(sampler, state, roles, schedule);
    for (std::size_t p = 0; p < image_bits.size(); ++p)
        if (known_mask[p]) out.pixels[p] = image_bits[p] ? 1.0f : 0.0f;
    return out;
}

std::vector<std::vector<std::uint8_t>> grayscale_encode(std::span<const float> gray, std::size_t n_samples,
                                                        std::uint64_t seed) {
    for (float g : gray)
        if (!(g >= 0.0f && g <= 1.0f)) throw std::invalid_argument(fmt::format("pixel value {} outside [0,1]", g));
    Xoshiro256 rng(mix_seed(seed, 0x67726179));
    std::vector<std::vector<std::uint8_t>> out(n_samples, std::vector<std::uint8_t>(gray.size()));
    for (auto& img : out)
        for (std::size_t p = 0; p < gray.size(); ++p) img[p] = rng.uniform() < gray[p] ? 1 : 0;
    return out;
}

void write_pgm(const std::filesystem::path& path, std::size_t rows, std::size_t cols, std::span<const float> pixels,
               bool binary) {
    if (pixels.size() != rows * cols) throw DimensionError("PGM pixel count does not match rows x cols");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << (binary ? "P5" : "P2") << '\n' << cols << ' ' << rows << "\n255\n";
    for (std::size_t k = 0; k < pixels.size(); ++k) {
        const auto v = static_cast<int>(std::lround(std::clamp(pixels[k], 0.0f, 1.0f) * 255.0f));
        if (binary)
            out.put(static_cast<char>(v));
        else
            out << v << ((k + 1) % cols ? ' ' : '\n');
    }
    if (!out) throw IoError("write failed for " + path.string());
}

void write_pbm(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
               std::span<const std::uint8_t> bits) {
    if (bits.size() != rows * cols) throw DimensionError("PBM bit count does not match rows x cols");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P1\n" << cols << ' ' << rows << '\n';
    for (std::size_t k = 0; k < bits.size(); ++k) out << (bits[k] ? '1' : '0') << ((k + 1) % cols ? ' ' : '\n');
    if (!out) throw IoError("write failed for " + path.string());
}

GridImage compose_grid(const std::vector<std::vector<float>>& images, std::size_t rows, std::size_t cols,
                       std::size_t grid_cols, std::size_t pad, float background) {
    if (grid_cols == 0) throw std::invalid_argument("grid needs at least one column");
    const std::size_t n = images.size();
    const std::size_t grid_rows = (n + grid_cols - 1) / grid_cols;
    GridImage g;
    g.rows = grid_rows * rows + (grid_rows + 1) * pad;
    g.cols = grid_cols * cols + (grid_cols + 1) * pad;
    g.pixels.assign(g.rows * g.cols, background);
    for (std::size_t k = 0; k < n; ++k) {
        if (images[k].size() != rows * cols) throw DimensionError("grid tiles must share one size");
        const std::size_t top = pad + (k / grid_cols) * (rows + pad);
        const std::size_t left = pad + (k % grid_cols) * (cols + pad);
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(images[k].begin() + static_cast<std::ptrdiff_t>(r * cols), cols,
                        g.pixels.begin() + static_cast<std::ptrdiff_t>((top + r) * g.cols + left));
    }
    return g;
}

}  // namespace pbit
