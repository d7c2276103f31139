#pragma once

// Measurement instruments over a trained discriminator: 1-D landscape
// slices along a shared random direction, directional monotonicity, local-
// maximum detection with basin widths, 2-D score-gradient fields with a
// path-integral conservativity check, frozen-batch forgetting traces, and
// nearest-center mode coverage for the ring dataset.

#include <functional>
#include <span>
#include <vector>

#include "ganlab/datasets.hpp"

namespace ganlab::diag {

// Scalar score at a point (typically the discriminator's output).
using ScoreFn = std::function<double(std::span<const double>)>;
// Vector field at a point (typically v = -dL_G/dx).
using FieldFn = std::function<std::vector<double>(std::span<const double>)>;

struct Slice {
    std::vector<double> k;  // offsets along the direction, k=0 on the grid
    std::vector<double> f;  // scores f(k) = D(x + k*uhat)
};

// Evaluates f(k) = D(x + k*uhat) on a uniform n_points grid over
// [k_min, k_max]. uhat must be unit within 1e-12 and n_points odd >= 3 with
// a symmetric range so that k = 0 lands exactly on the grid (f(0) is then
// exactly D(x)).
Slice slice_landscape(const ScoreFn& score, std::span<const double> x,
                      std::span<const double> uhat, double k_min,
                      double k_max, int n_points);

// Draws a uniformly random unit direction (normalized Gaussian vector).
std::vector<double> random_unit_vector(int dim, Rng& rng);

// max(fraction of non-negative consecutive differences, fraction of
// non-positive ones); 1.0 means monotone.
double monotonicity_score(std::span<const double> f);

// Default slack absorbing float noise: 1e-6 * (max f - min f).
double local_max_slack(std::span<const double> f);

// True iff f(0) >= f(k) - slack for every grid point within `window` steps
// of k = 0 (window clipped to the grid).
bool detect_local_maximum(const Slice& slice, int window, double slack);

// Length of the maximal contiguous k-interval around 0 with
// f(k) >= f(0) - drop. Zero when k=0 is not a local maximum under
// (window, slack).
double basin_width(const Slice& slice, double drop, int window, double slack);

struct FieldSample {
    double x = 0.0, y = 0.0;    // lattice point
    double vx = 0.0, vy = 0.0;  // v = -dL_G/dx
    enum class Label { real_region, fake_region, neutral } label =
        Label::neutral;
    bool finite = true;  // false when the gradient failed at this point
};

struct FieldGrid {
    double x_min = -3.0, x_max = 3.0;
    double y_min = -3.0, y_max = 3.0;
    int nx = 20, ny = 20;
};

// Samples v = -dL_G/dx on the lattice. A point is labelled real_region /
// fake_region when it lies within label_radius of any point in the
// corresponding set (real wins ties). Non-finite gradients flag the sample
// instead of failing the sweep.
std::vector<FieldSample> gradient_field(
    const FieldFn& field, const FieldGrid& grid,
    std::span<const double> real_points, std::span<const double> fake_points,
    double label_radius);

// Numerical line integrals of the field along two piecewise-linear paths
// (waypoint lists, each starting at x0 and ending at x1), midpoint rule
// with n_steps sub-segments total per path. For a conservative field both
// integrals equal L_G(x0) - L_G(x1).
std::pair<double, double> path_integral_check(const FieldFn& field,
                                              std::span<const double> x0,
                                              std::span<const double> x1,
                                              std::span<const double> path_a,
                                              std::span<const double> path_b,
                                              int dim, int n_steps);

// Scores a frozen batch (row-major, `dim` values per image) under each
// checkpoint: result[c][i] is checkpoint c's score of image i.
std::vector<std::vector<double>> forgetting_trace(
    const std::vector<ScoreFn>& checkpoints, std::span<const double> frozen,
    int dim);

// Score matrix of a frozen batch across checkpoints: scores[c][i] is
// checkpoint c's score of image i. The summary statistic is the per-image
// population variance over checkpoints, averaged across images.
double forgetting_variance(const std::vector<std::vector<double>>& scores);

struct Coverage {
    int modes_hit = 0;
    std::vector<int> counts;        // samples assigned to each mode
    std::vector<double> mean_dist;  // mean distance to the assigned center
};

// Assigns each 2-D sample to its nearest mode center; a mode is hit when it
// receives >= min_frac of all samples and the assigned samples' mean
// distance to the center is <= 3 * mode_std.
Coverage mode_coverage(std::span<const double> samples,
                       const data::RingSpec& spec, double min_frac);

}  // namespace ganlab::diag
