#pragma once

// Target distributions: the ring of Gaussians used by the 2-D experiments,
// the standard-normal latent sampler, and a minimal IDX (MNIST-style) file
// reader/writer for image experiments.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ganlab/rng.hpp"

namespace ganlab::data {

struct RingSpec {
    int n_modes = 8;
    double radius = 2.0;
    double mode_std = 0.05;

    void validate() const;  // throws std::invalid_argument
};

// Mode centers, row-major [n_modes x 2]; mode i sits at angle 2*pi*i/n on
// the circle, mode 0 at (radius, 0).
std::vector<double> ring_centers(const RingSpec& spec);

// n samples, row-major [n x 2]: uniform mode choice plus isotropic Gaussian
// jitter of width mode_std.
std::vector<double> sample_ring(const RingSpec& spec, int n, Rng& rng);

// n i.i.d. standard-normal vectors, row-major [n x dim].
std::vector<double> sample_noise(int dim, int n, Rng& rng);

struct IdxDataset {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<double> images;        // row-major [count x rows*cols]
    std::vector<std::uint8_t> labels;  // [count]

    int dim() const { return rows * cols; }
};

// Reads paired IDX image/label files (big-endian headers, magic 0x803 and
// 0x801). Keeps the first `limit` examples (limit <= 0 keeps all). Pixels
// are scaled to [0,1] when unit_scale is true, else kept as raw 0..255.
// Bad magic, truncation, and image/label count mismatch raise distinct
// errors naming the file.
IdxDataset load_idx(const std::string& images_path,
                    const std::string& labels_path, int limit,
                    bool unit_scale = true);

// Writes IDX files in the same format (pixels as raw bytes 0..255).
void write_idx(const std::string& images_path, const std::string& labels_path,
               std::span<const std::uint8_t> pixels,
               std::span<const std::uint8_t> labels, int count, int rows,
               int cols);

}  // namespace ganlab::data
