#include "ganlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ganlab::diag {

namespace {

int center_index(const Slice& slice) {
    for (std::size_t i = 0; i < slice.k.size(); ++i)
        if (slice.k[i] == 0.0) return static_cast<int>(i);
    throw std::invalid_argument("slice: k = 0 is not on the grid");
}

}  // namespace

Slice slice_landscape(const ScoreFn& score, std::span<const double> x,
                      std::span<const double> uhat, double k_min,
                      double k_max, int n_points) {
    if (x.size() != uhat.size())
        throw std::invalid_argument("slice: x and uhat dimensions differ");
    if (n_points < 3 || n_points % 2 == 0)
        throw std::invalid_argument("slice: n_points must be odd and >= 3");
    if (!(k_min < 0.0 && k_max > 0.0) || k_min != -k_max)
        throw std::invalid_argument("slice: range must be symmetric around 0");
    double norm_sq = 0.0;
    for (double u : uhat) norm_sq += u * u;
    if (std::abs(std::sqrt(norm_sq) - 1.0) > 1e-12)
        throw std::invalid_argument("slice: direction is not a unit vector");

    Slice s;
    s.k.resize(n_points);
    s.f.resize(n_points);
    std::vector<double> p(x.size());
    const int m = n_points - 1;
    for (int i = 0; i <= m; ++i) {
        // Division-last so the midpoint lands on exactly 0.0 and
        // x + 0*uhat == x bit-for-bit.
        const double k = k_min + (k_max - k_min) * (double(i) / m);
        s.k[i] = k;
        for (std::size_t j = 0; j < x.size(); ++j) p[j] = x[j] + k * uhat[j];
        s.f[i] = score(p);
    }
    return s;
}

std::vector<double> random_unit_vector(int dim, Rng& rng) {
    if (dim < 1) throw std::invalid_argument("random_unit_vector: dim < 1");
    std::vector<double> u(dim);
    double norm_sq = 0.0;
    do {
        norm_sq = 0.0;
        for (double& v : u) {
            v = rng.normal();
            norm_sq += v * v;
        }
    } while (norm_sq == 0.0);  // astronomically unlikely; guards the divide
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& v : u) v *= inv;
    return u;
}

double monotonicity_score(std::span<const double> f) {
    if (f.size() < 2)
        throw std::invalid_argument("monotonicity_score: need >= 2 points");
    int up = 0, down = 0;
    const int n = static_cast<int>(f.size()) - 1;
    for (int i = 0; i < n; ++i) {
        const double d = f[i + 1] - f[i];
        if (d >= 0.0) ++up;
        if (d <= 0.0) ++down;
    }
    return static_cast<double>(std::max(up, down)) / n;
}

double local_max_slack(std::span<const double> f) {
    const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
    return 1e-6 * (*hi - *lo);
}

bool detect_local_maximum(const Slice& slice, int window, double slack) {
    if (window < 1)
        throw std::invalid_argument("detect_local_maximum: window < 1");
    const int c = center_index(slice);
    const int n = static_cast<int>(slice.f.size());
    const double f0 = slice.f[c];
    for (int j = 1; j <= window; ++j) {
        if (c + j < n && f0 < slice.f[c + j] - slack) return false;
        if (c - j >= 0 && f0 < slice.f[c - j] - slack) return false;
    }
    return true;
}

double basin_width(const Slice& slice, double drop, int window,
                   double slack) {
    if (!(drop >= 0.0))
        throw std::invalid_argument("basin_width: drop must be >= 0");
    if (!detect_local_maximum(slice, window, slack)) return 0.0;
    const int c = center_index(slice);
    const int n = static_cast<int>(slice.f.size());
    const double floor_value = slice.f[c] - drop;
    int lo = c, hi = c;
    while (lo - 1 >= 0 && slice.f[lo - 1] >= floor_value) --lo;
    while (hi + 1 < n && slice.f[hi + 1] >= floor_value) ++hi;
    return slice.k[hi] - slice.k[lo];
}

std::vector<FieldSample> gradient_field(
    const FieldFn& field, const FieldGrid& grid,
    std::span<const double> real_points, std::span<const double> fake_points,
    double label_radius) {
    if (grid.nx < 1 || grid.ny < 1)
        throw std::invalid_argument("gradient_field: empty lattice");

    auto near_any = [&](std::span<const double> pts, double px,
                        double py) {
        for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
            const double dx = pts[i] - px, dy = pts[i + 1] - py;
            if (std::sqrt(dx * dx + dy * dy) <= label_radius) return true;
        }
        return false;
    };

    std::vector<FieldSample> out;
    out.reserve(static_cast<std::size_t>(grid.nx) * grid.ny);
    for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix) {
            FieldSample s;
            s.x = grid.nx == 1 ? grid.x_min
                               : grid.x_min + (grid.x_max - grid.x_min) *
                                                  (double(ix) / (grid.nx - 1));
            s.y = grid.ny == 1 ? grid.y_min
                               : grid.y_min + (grid.y_max - grid.y_min) *
                                                  (double(iy) / (grid.ny - 1));
            const double p[2] = {s.x, s.y};
            try {
                const std::vector<double> v = field(std::span(p, 2));
                if (v.size() != 2 || !std::isfinite(v[0]) ||
                    !std::isfinite(v[1]))
                    s.finite = false;
                else {
                    s.vx = v[0];
                    s.vy = v[1];
                }
            } catch (const std::exception&) {
                s.finite = false;
            }
            if (near_any(real_points, s.x, s.y))
                s.label = FieldSample::Label::real_region;
            else if (near_any(fake_points, s.x, s.y))
                s.label = FieldSample::Label::fake_region;
            out.push_back(s);
        }
    return out;
}

namespace {

double integrate_path(const FieldFn& field, std::span<const double> path,
                      int dim, int n_steps) {
    const int n_way = static_cast<int>(path.size()) / dim;
    if (n_way < 2)
        throw std::invalid_argument("path integral: need >= 2 waypoints");

    // Total length, to spread n_steps across segments proportionally.
    double total_len = 0.0;
    std::vector<double> seg_len(n_way - 1);
    for (int s = 0; s + 1 < n_way; ++s) {
        double l2 = 0.0;
        for (int j = 0; j < dim; ++j) {
            const double d = path[(s + 1) * dim + j] - path[s * dim + j];
            l2 += d * d;
        }
        seg_len[s] = std::sqrt(l2);
        total_len += seg_len[s];
    }

    double integral = 0.0;
    std::vector<double> mid(dim);
    for (int s = 0; s + 1 < n_way; ++s) {
        if (seg_len[s] == 0.0) continue;
        const int steps = std::max(
            1, static_cast<int>(std::lround(n_steps * seg_len[s] / total_len)));
        for (int t = 0; t < steps; ++t) {
            const double a = (t + 0.5) / steps;
            for (int j = 0; j < dim; ++j)
                mid[j] = path[s * dim + j] +
                         a * (path[(s + 1) * dim + j] - path[s * dim + j]);
            const std::vector<double> v = field(mid);
            for (int j = 0; j < dim; ++j)
                integral += v[j] *
                            (path[(s + 1) * dim + j] - path[s * dim + j]) /
                            steps;
        }
    }
    return integral;
}

}  // namespace

std::pair<double, double> path_integral_check(const FieldFn& field,
                                              std::span<const double> x0,
                                              std::span<const double> x1,
                                              std::span<const double> path_a,
                                              std::span<const double> path_b,
                                              int dim, int n_steps) {
    auto check_endpoints = [&](std::span<const double> path,
                               const char* name) {
        if (path.size() % dim != 0)
            throw std::invalid_argument(std::string("path integral: ") + name +
                                        " length not a multiple of dim");
        for (int j = 0; j < dim; ++j) {
            if (path[j] != x0[j])
                throw std::invalid_argument(std::string("path integral: ") +
                                            name + " does not start at x0");
            if (path[path.size() - dim + j] != x1[j])
                throw std::invalid_argument(std::string("path integral: ") +
                                            name + " does not end at x1");
        }
    };
    check_endpoints(path_a, "path_a");
    check_endpoints(path_b, "path_b");
    return {integrate_path(field, path_a, dim, n_steps),
            integrate_path(field, path_b, dim, n_steps)};
}

std::vector<std::vector<double>> forgetting_trace(
    const std::vector<ScoreFn>& checkpoints, std::span<const double> frozen,
    int dim) {
    if (checkpoints.size() < 2)
        throw std::invalid_argument("forgetting: need >= 2 checkpoints");
    if (dim < 1 || frozen.size() % dim != 0)
        throw std::invalid_argument("forgetting: bad frozen batch layout");
    const std::size_t n = frozen.size() / dim;
    std::vector<std::vector<double>> scores(checkpoints.size(),
                                            std::vector<double>(n));
    for (std::size_t c = 0; c < checkpoints.size(); ++c)
        for (std::size_t i = 0; i < n; ++i)
            scores[c][i] =
                checkpoints[c](frozen.subspan(i * dim, dim));
    return scores;
}

double forgetting_variance(const std::vector<std::vector<double>>& scores) {
    if (scores.size() < 2)
        throw std::invalid_argument("forgetting: need >= 2 checkpoints");
    const std::size_t n_images = scores.front().size();
    for (const auto& row : scores)
        if (row.size() != n_images)
            throw std::invalid_argument("forgetting: ragged score matrix");
    if (n_images == 0) return 0.0;

    const double n_ckpt = static_cast<double>(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < n_images; ++i) {
        double mean = 0.0;
        for (const auto& row : scores) mean += row[i];
        mean /= n_ckpt;
        double var = 0.0;
        for (const auto& row : scores) {
            const double d = row[i] - mean;
            var += d * d;
        }
        total += var / n_ckpt;  // population variance
    }
    return total / static_cast<double>(n_images);
}

Coverage mode_coverage(std::span<const double> samples,
                       const data::RingSpec& spec, double min_frac) {
    if (samples.size() % 2 != 0)
        throw std::invalid_argument("mode_coverage: samples must be 2-D pairs");
    const std::vector<double> centers = ring_centers(spec);
    Coverage cov;
    cov.counts.assign(spec.n_modes, 0);
    cov.mean_dist.assign(spec.n_modes, 0.0);

    const std::size_t n = samples.size() / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const double sx = samples[2 * i], sy = samples[2 * i + 1];
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int m = 0; m < spec.n_modes; ++m) {
            const double dx = sx - centers[2 * m], dy = sy - centers[2 * m + 1];
            const double d = std::sqrt(dx * dx + dy * dy);
            if (d < best_d) {
                best_d = d;
                best = m;
            }
        }
        ++cov.counts[best];
        cov.mean_dist[best] += best_d;
    }
    for (int m = 0; m < spec.n_modes; ++m) {
        if (cov.counts[m] > 0) cov.mean_dist[m] /= cov.counts[m];
        const bool enough =
            n > 0 && cov.counts[m] >= min_frac * static_cast<double>(n);
        if (enough && cov.mean_dist[m] <= 3.0 * spec.mode_std) ++cov.modes_hit;
    }
    return cov;
}

}  // namespace ganlab::diag
