#include "pbit/data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <zlib.h>

#include "pbit/error.hpp"
#include "pbit/rng.hpp"

namespace pbit {

namespace {

// gzread passes uncompressed files through unchanged.
std::vector<unsigned char> read_maybe_gzip(const std::filesystem::path& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> out;
    std::array<unsigned char, 1 << 16> buf{};
    int n = 0;
    while ((n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) out.insert(out.end(), buf.data(), buf.data() + n);
    const bool failed = n < 0;
    gzclose(f);
    if (failed) throw IoError("decompression failed for " + path.string());
    return out;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path, Split split) {
    const auto img = read_maybe_gzip(images_path);
    const auto lab = read_maybe_gzip(labels_path);
    if (img.size() < 16) throw ParseError("truncated IDX header in " + images_path.string(), 0);
    if (lab.size() < 8) throw ParseError("truncated IDX header in " + labels_path.string(), 0);
    if (be32(img, 0) != 0x00000803) throw ParseError(fmt::format("bad image magic {:#010x}", be32(img, 0)), 0);
    if (be32(lab, 0) != 0x00000801) throw ParseError(fmt::format("bad label magic {:#010x}", be32(lab, 0)), 0);

    const std::size_t count = be32(img, 4);
    Dataset ds;
    ds.split = split;
    ds.rows = be32(img, 8);
    ds.cols = be32(img, 12);
    if (be32(lab, 4) != count)
        throw ParseError(fmt::format("{} images but {} labels", count, be32(lab, 4)), 0);
    const std::size_t px = ds.rows * ds.cols;
    if (img.size() < 16 + count * px) throw ParseError("truncated image data in " + images_path.string(), 0);
    if (lab.size() < 8 + count) throw ParseError("truncated label data in " + labels_path.string(), 0);

    ds.pixels.resize(count * px);
    for (std::size_t k = 0; k < ds.pixels.size(); ++k) ds.pixels[k] = static_cast<float>(img[16 + k]) / 255.0f;
    ds.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(count));
    const auto top = *std::max_element(ds.labels.begin(), ds.labels.end());
    ds.n_classes = std::max<std::size_t>(10, std::size_t{top} + 1);
    return ds;
}

Dataset binarize(const Dataset& ds, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("binarize threshold must lie in (0,1)");
    Dataset out = ds;
    const auto t = static_cast<float>(threshold);
    for (auto& p : out.pixels) p = p >= t ? 1.0f : 0.0f;
    return out;
}

std::vector<double> pixel_on_proportion(const Dataset& ds) {
    std::vector<double> p(ds.pixel_count(), 0.0);
    if (ds.size() == 0) return p;
    for (std::size_t k = 0; k < ds.size(); ++k) {
        const auto img = ds.image(k);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += img[i] >= 0.5f ? 1.0 : 0.0;
    }
    for (auto& v : p) v /= static_cast<double>(ds.size());
    return p;
}

std::vector<double> class_frequencies(const Dataset& ds) {
    std::vector<double> f(ds.n_classes, 0.0);
    for (auto l : ds.labels) f.at(l) += 1.0;
    for (auto& v : f) v /= static_cast<double>(std::max<std::size_t>(ds.size(), 1));
    return f;
}

std::vector<std::uint8_t> image_bits(const Dataset& ds, std::size_t k) {
    const auto img = ds.image(k);
    std::vector<std::uint8_t> bits(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) bits[i] = img[i] >= 0.5f ? 1 : 0;
    return bits;
}

std::vector<float> rgb_to_gray(std::span<const float> planar, std::size_t channels) {
    if (channels != 3) throw DimensionError(fmt::format("expected 3 color channels, got {}", channels));
    if (planar.size() % 3 != 0) throw DimensionError("RGB buffer size is not a multiple of 3");
    const std::size_t n = planar.size() / 3;
    std::vector<float> gray(n);
    for (std::size_t i = 0; i < n; ++i)
        gray[i] = static_cast<float>(0.2989 * planar[i] + 0.5870 * planar[n + i] + 0.1140 * planar[2 * n + i]);
    return gray;
}

Dataset subset(const Dataset& ds, std::size_t per_class, std::uint64_t seed) {
    if (per_class == 0) throw ConfigError("subset needs per_class >= 1");
    std::vector<std::vector<std::size_t>> by_class(ds.n_classes);
    for (std::size_t k = 0; k < ds.size(); ++k) by_class.at(ds.labels[k]).push_back(k);

    Xoshiro256 rng(mix_seed(seed, 0x737562736574));
    Dataset out;
    out.rows = ds.rows;
    out.cols = ds.cols;
    out.n_classes = ds.n_classes;
    out.split = ds.split;
    for (std::size_t c = 0; c < ds.n_classes; ++c) {
        auto& idx = by_class[c];
        if (idx.size() < per_class)
            throw ConfigError(fmt::format("class {} has {} images, {} requested", c, idx.size(), per_class));
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(per_class);
        std::sort(idx.begin(), idx.end());
        for (auto k : idx) {
            const auto img = ds.image(k);
            out.pixels.insert(out.pixels.end(), img.begin(), img.end());
            out.labels.push_back(ds.labels[k]);
        }
    }
    return out;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
    static_assert(std::endian::native == std::endian::little, "dataset cache assumes little-endian float32");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << fmt::format("PBDS1 {} {} {} {} {}\n", ds.size(), ds.rows, ds.cols, ds.n_classes,
                       ds.split == Split::train ? "train" : "test");
    out.write(reinterpret_cast<const char*>(ds.labels.data()), static_cast<std::streamsize>(ds.labels.size()));
    out.write(reinterpret_cast<const char*>(ds.pixels.data()),
              static_cast<std::streamsize>(ds.pixels.size() * sizeof(float)));
    if (!out) throw IoError("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string magic, split;
    std::size_t count = 0;
    Dataset ds;
    if (!(hs >> magic >> count >> ds.rows >> ds.cols >> ds.n_classes >> split) || magic != "PBDS1" ||
        (split != "train" && split != "test"))
        throw ParseError("bad dataset cache header", 1);
    ds.split = split == "train" ? Split::train : Split::test;
    ds.labels.resize(count);
    ds.pixels.resize(count * ds.pixel_count());
    in.read(reinterpret_cast<char*>(ds.labels.data()), static_cast<std::streamsize>(count));
    in.read(reinterpret_cast<char*>(ds.pixels.data()), static_cast<std::streamsize>(ds.pixels.size() * sizeof(float)));
    if (!in) throw ParseError("truncated dataset cache " + path.string(), 0);
    return ds;
}

Dataset load_cifar_batch(const std::filesystem::path& path, Split split) {
    constexpr std::size_t plane = 32 * 32;
    constexpr std::size_t record = 1 + 3 * plane;
    const auto bytes = read_maybe_gzip(path);
    if (bytes.empty() || bytes.size() % record != 0)
        throw ParseError(fmt::format("CIFAR batch size {} is not a multiple of {}", bytes.size(), record), 0);
    Dataset ds;
    ds.rows = ds.cols = 32;
    ds.split = split;
    const std::size_t count = bytes.size() / record;
    std::vector<float> rgb(3 * plane);
    for (std::size_t k = 0; k < count; ++k) {
        const unsigned char* r = bytes.data() + k * record;
        ds.labels.push_back(r[0]);
        for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<float>(r[1 + i]) / 255.0f;
        const auto gray = rgb_to_gray(rgb);
        ds.pixels.insert(ds.pixels.end(), gray.begin(), gray.end());
    }
    return ds;
}

}  // namespace pbit
