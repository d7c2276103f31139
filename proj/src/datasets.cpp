#include "ganlab/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace ganlab::data {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("idx: truncated header in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

void RingSpec::validate() const {
    if (n_modes < 1) throw std::invalid_argument("ring: n_modes must be >= 1");
    if (!(radius > 0.0)) throw std::invalid_argument("ring: radius must be > 0");
    if (!(mode_std >= 0.0))
        throw std::invalid_argument("ring: mode_std must be >= 0");
}

std::vector<double> ring_centers(const RingSpec& spec) {
    spec.validate();
    std::vector<double> centers(2 * spec.n_modes);
    for (int i = 0; i < spec.n_modes; ++i) {
        const double angle = 2.0 * std::numbers::pi * i / spec.n_modes;
        centers[2 * i] = spec.radius * std::cos(angle);
        centers[2 * i + 1] = spec.radius * std::sin(angle);
    }
    return centers;
}

std::vector<double> sample_ring(const RingSpec& spec, int n, Rng& rng) {
    const std::vector<double> centers = ring_centers(spec);
    std::vector<double> out(2 * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int mode = static_cast<int>(rng.below(spec.n_modes));
        out[2 * i] = centers[2 * mode] + spec.mode_std * rng.normal();
        out[2 * i + 1] = centers[2 * mode + 1] + spec.mode_std * rng.normal();
    }
    return out;
}

std::vector<double> sample_noise(int dim, int n, Rng& rng) {
    std::vector<double> out(static_cast<std::size_t>(dim) * n);
    for (double& v : out) v = rng.normal();
    return out;
}

IdxDataset load_idx(const std::string& images_path,
                    const std::string& labels_path, int limit,
                    bool unit_scale) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("idx: cannot open " + images_path);
    if (read_be32(imgs, images_path) != kImagesMagic)
        throw std::runtime_error("idx: bad image magic in " + images_path);
    const std::uint32_t n_img = read_be32(imgs, images_path);
    const std::uint32_t rows = read_be32(imgs, images_path);
    const std::uint32_t cols = read_be32(imgs, images_path);

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("idx: cannot open " + labels_path);
    if (read_be32(labs, labels_path) != kLabelsMagic)
        throw std::runtime_error("idx: bad label magic in " + labels_path);
    const std::uint32_t n_lab = read_be32(labs, labels_path);

    if (n_img != n_lab)
        throw std::runtime_error(
            "idx: image/label count mismatch (" + std::to_string(n_img) +
            " vs " + std::to_string(n_lab) + ")");

    IdxDataset ds;
    ds.count = (limit > 0 && std::uint32_t(limit) < n_img)
                   ? limit
                   : static_cast<int>(n_img);
    ds.rows = static_cast<int>(rows);
    ds.cols = static_cast<int>(cols);

    const std::size_t n_pixels =
        static_cast<std::size_t>(ds.count) * ds.dim();
    std::vector<std::uint8_t> raw(n_pixels);
    if (!imgs.read(reinterpret_cast<char*>(raw.data()),
                   static_cast<std::streamsize>(n_pixels)))
        throw std::runtime_error("idx: truncated image data in " + images_path);

    ds.labels.resize(ds.count);
    if (!labs.read(reinterpret_cast<char*>(ds.labels.data()), ds.count))
        throw std::runtime_error("idx: truncated label data in " + labels_path);

    ds.images.resize(n_pixels);
    const double scale = unit_scale ? 1.0 / 255.0 : 1.0;
    for (std::size_t i = 0; i < n_pixels; ++i)
        ds.images[i] = scale * raw[i];
    return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               std::span<const std::uint8_t> pixels,
               std::span<const std::uint8_t> labels, int count, int rows,
               int cols) {
    if (pixels.size() != static_cast<std::size_t>(count) * rows * cols)
        throw std::invalid_argument("idx: pixel buffer size mismatch");
    if (labels.size() != static_cast<std::size_t>(count))
        throw std::invalid_argument("idx: label buffer size mismatch");

    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("idx: cannot create " + images_path);
    write_be32(imgs, kImagesMagic);
    write_be32(imgs, static_cast<std::uint32_t>(count));
    write_be32(imgs, static_cast<std::uint32_t>(rows));
    write_be32(imgs, static_cast<std::uint32_t>(cols));
    imgs.write(reinterpret_cast<const char*>(pixels.data()),
               static_cast<std::streamsize>(pixels.size()));
    if (!imgs) throw std::runtime_error("idx: write failed for " + images_path);

    std::ofstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("idx: cannot create " + labels_path);
    write_be32(labs, kLabelsMagic);
    write_be32(labs, static_cast<std::uint32_t>(count));
    labs.write(reinterpret_cast<const char*>(labels.data()),
               static_cast<std::streamsize>(labels.size()));
    if (!labs) throw std::runtime_error("idx: write failed for " + labels_path);
}

}  // namespace ganlab::data
