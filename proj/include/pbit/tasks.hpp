#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "pbit/graph.hpp"
#include "pbit/sampler.hpp"

namespace pbit {

struct ClassificationResult {
    /// Label activation per class, averaged over sweeps and replicas.
    std::vector<double> class_scores;
    std::size_t predicted = 0;
};

/// Index of the largest score; ties go to the lowest index.
std::size_t argmax(std::span<const double> scores);

/// Clamps visible nodes to `image_bits` (0/1 per visible id), leaves labels
/// and hidden nodes free from a random start, runs n_sweeps and reads out the
/// fraction of sweeps each label node spent on.
/// Throws DimensionError if the image size differs from the visible count.
ClassificationResult classify(Sampler& sampler, const RoleAssignment& roles, std::span<const std::uint8_t> image_bits,
                              std::uint64_t n_sweeps, std::uint64_t seed);

/// Grayscale input: draws n_samples Bernoulli images, classifies each and
/// averages the label activations.
ClassificationResult classify_gray(Sampler& sampler, const RoleAssignment& roles, std::span<const float> gray,
                                   std::size_t n_samples, std::uint64_t n_sweeps, std::uint64_t seed);

/// Fraction of `images` (bits, one per row) whose prediction equals `labels`.
double accuracy(Sampler& sampler, const RoleAssignment& roles, const std::vector<std::vector<std::uint8_t>>& images,
                std::span<const std::uint8_t> labels, std::uint64_t n_sweeps, std::uint64_t seed);

struct GenerationResult {
    /// Visible activations in [0,1], averaged over the last quarter of the
    /// sweeps at the final beta.
    std::vector<float> pixels;
    /// Energy of the state at the end of the first beta step and at the end
    /// of the anneal.
    double energy_initial = 0.0;
    double energy_final = 0.0;
    std::vector<std::int8_t> final_state;
};

/// Clamps every replica of `class_id` on and the other label nodes off, then
/// anneals the free nodes from a random start.
/// Throws std::invalid_argument on a bad class id.
GenerationResult generate(Sampler& sampler, const RoleAssignment& roles, std::size_t class_id,
                          const AnnealSchedule& schedule, std::uint64_t seed);

/// Clamps the pixels where known_mask is 1 (and the labels of `class_id`, if
/// given), anneals, and returns the input on known pixels with time-averaged
/// activations elsewhere. Throws DimensionError on size mismatch.
GenerationResult complete(Sampler& sampler, const RoleAssignment& roles, std::span<const std::uint8_t> image_bits,
                          std::span<const std::uint8_t> known_mask, std::optional<std::size_t> class_id,
                          const AnnealSchedule& schedule, std::uint64_t seed);

/// n_samples independent Bernoulli(pixel) binary images.
/// Throws std::invalid_argument if a pixel lies outside [0,1].
std::vector<std::vector<std::uint8_t>> grayscale_encode(std::span<const float> gray, std::size_t n_samples,
                                                        std::uint64_t seed);

/// Images in [0,1]; P2 writes ASCII, P5 binary.
void write_pgm(const std::filesystem::path& path, std::size_t rows, std::size_t cols, std::span<const float> pixels,
               bool binary = true);
/// Plain PBM (P1); 1 is black.
void write_pbm(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
               std::span<const std::uint8_t> bits);

/// Tiles equally sized images into a grid with `pad` pixels of spacing.
struct GridImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> pixels;
};
GridImage compose_grid(const std::vector<std::vector<float>>& images, std::size_t rows, std::size_t cols,
                       std::size_t grid_cols, std::size_t pad = 2, float background = 0.5f);

}  // namespace pbit
