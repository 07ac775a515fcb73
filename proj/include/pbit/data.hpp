#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pbit {

enum class Split { train, test };

/// Image set with pixels in [0,1], row-major per image.
struct Dataset {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t n_classes = 10;
    Split split = Split::train;
    std::vector<float> pixels;
    std::vector<std::uint8_t> labels;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::size_t pixel_count() const noexcept { return rows * cols; }
    [[nodiscard]] std::span<const float> image(std::size_t k) const {
        return {pixels.data() + k * pixel_count(), pixel_count()};
    }
};

/// Reads an IDX image file (magic 0x803) and label file (magic 0x801).
/// Either may be gzip-compressed. Pixel bytes are scaled by 1/255.
/// Throws ParseError on bad magic, truncation or a count mismatch.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split = Split::train);

/// pixel >= threshold -> 1, else 0. Throws ConfigError unless 0 < threshold < 1.
Dataset binarize(const Dataset& ds, double threshold = 0.5);

/// Fraction of images with each pixel at >= 0.5.
std::vector<double> pixel_on_proportion(const Dataset& ds);

/// Fraction of images per class.
std::vector<double> class_frequencies(const Dataset& ds);

/// The k-th image as 0/1 bits (pixel >= 0.5).
std::vector<std::uint8_t> image_bits(const Dataset& ds, std::size_t k);

/// Luma 0.2989 R + 0.5870 G + 0.1140 B over a channel-planar buffer.
/// Throws DimensionError unless channels == 3 and the size divides evenly.
std::vector<float> rgb_to_gray(std::span<const float> planar, std::size_t channels = 3);

/// Seeded, class-balanced draw of `per_class` images from each class, grouped
/// by class in ascending order. Throws ConfigError if a class has too few images.
Dataset subset(const Dataset& ds, std::size_t per_class, std::uint64_t seed);

/// Flat cache: a text header line
///   PBDS1 <count> <rows> <cols> <n_classes> <train|test>
/// followed by the label bytes and then the pixels as little-endian float32.
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

/// CIFAR-10 binary batch (1 label byte + 3x32x32 planar bytes per record),
/// converted to grayscale.
Dataset load_cifar_batch(const std::filesystem::path& path, Split split = Split::train);

}  // namespace pbit
