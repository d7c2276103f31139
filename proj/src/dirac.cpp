#include "ganlab/dirac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "ganlab/autodiff.hpp"

namespace ganlab::dirac {

namespace {

using ad::Graph;
using ad::Var;

constexpr double kLeakySlope = 0.2;

double act_eval(nn::Activation a, double x) {
    switch (a) {
        case nn::Activation::relu: return x > 0.0 ? x : 0.0;
        case nn::Activation::leaky_relu: return x > 0.0 ? x : kLeakySlope * x;
        case nn::Activation::tanh: return std::tanh(x);
        case nn::Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case nn::Activation::linear: return x;
    }
    throw std::logic_error("act_eval: bad activation");
}

Var act_node(Graph& g, nn::Activation a, Var x) {
    switch (a) {
        case nn::Activation::relu: return g.relu(x);
        case nn::Activation::leaky_relu: return g.leaky_relu(x, kLeakySlope);
        case nn::Activation::tanh: return g.tanh(x);
        case nn::Activation::sigmoid: return g.sigmoid(x);
        case nn::Activation::linear: return x;
    }
    throw std::logic_error("act_node: bad activation");
}

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

DiscParams optimal_discriminator_closed_form(double y0, int n,
                                             nn::Activation) {
    if (y0 == 0.0)
        throw std::invalid_argument(
            "optimal discriminator: y0 = 0 gives no separation task");
    if (n < 1) throw std::invalid_argument("optimal discriminator: n < 1");
    const double s = y0 > 0.0 ? 1.0 : -1.0;
    DiscParams p;
    p.psi0.assign(n, s);
    p.psi1.assign(n, -1.0);
    return p;
}

double dhat_eval(const DiscParams& p, nn::Activation activation, double x) {
    double d = 0.0;
    for (std::size_t j = 0; j < p.psi0.size(); ++j)
        d += p.psi1[j] * act_eval(activation, p.psi0[j] * x);
    return d;
}

BruteForceResult brute_force_optimal(double y0, int n,
                                     nn::Activation activation,
                                     double grid_step) {
    if (n < 1 || n > 2)
        throw std::invalid_argument(
            "brute_force_optimal: n must be 1 or 2 (grid size guard)");
    if (!(grid_step > 0.0 && grid_step <= 1.0))
        throw std::invalid_argument("brute_force_optimal: bad grid step");

    // Grid -1..1 with exact endpoints (k_i = -1 + 2i/N).
    const int N = static_cast<int>(std::lround(2.0 / grid_step));
    std::vector<double> grid(N + 1);
    for (int i = 0; i <= N; ++i) grid[i] = -1.0 + 2.0 * i / N;

    // The objective D(0) - D(y0) only sees psi0 through
    // w(psi0) = act(0) - act(psi0 * y0); precompute it per grid value.
    const double act0 = act_eval(activation, 0.0);
    std::vector<double> w(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        w[i] = act0 - act_eval(activation, grid[i] * y0);

    BruteForceResult best;
    best.objective = -std::numeric_limits<double>::infinity();
    // Lexicographic sweep over (psi0..., psi1...); strict improvement keeps
    // the lexicographically first argmax on ties.
    if (n == 1) {
        for (std::size_t a = 0; a < grid.size(); ++a)
            for (std::size_t p = 0; p < grid.size(); ++p) {
                const double obj = grid[p] * w[a];
                if (obj > best.objective) {
                    best.objective = obj;
                    best.params.psi0 = {grid[a]};
                    best.params.psi1 = {grid[p]};
                }
            }
        return best;
    }
    for (std::size_t a = 0; a < grid.size(); ++a)
        for (std::size_t b = 0; b < grid.size(); ++b)
            for (std::size_t p = 0; p < grid.size(); ++p) {
                const double partial = grid[p] * w[a];
                for (std::size_t q = 0; q < grid.size(); ++q) {
                    const double obj = partial + grid[q] * w[b];
                    if (obj > best.objective) {
                        best.objective = obj;
                        best.params.psi0 = {grid[a], grid[b]};
                        best.params.psi1 = {grid[p], grid[q]};
                    }
                }
            }
    return best;
}

DiracHistory train_dirac(const DiracConfig& cfg) {
    if (cfg.iters < 1) throw std::invalid_argument("train_dirac: iters < 1");
    if (cfg.disc == DiscKind::mlp && cfg.n_hidden < 1)
        throw std::invalid_argument("train_dirac: n_hidden < 1");

    Graph g;
    Var theta = g.leaf(cfg.theta0);
    std::vector<Var> disc;  // linear: {psi}; mlp: psi0[0..n), psi1[0..n)
    if (cfg.disc == DiscKind::linear) {
        disc.push_back(g.leaf(clamp_unit(cfg.psi0)));
    } else {
        // Fixed mixed-sign start: alternating +-0.5 input weights and
        // negative output weights. A non-negative or sign-uniform start sits
        // in the attraction basin of the degenerate all-zero saddle.
        for (int j = 0; j < cfg.n_hidden; ++j)
            disc.push_back(g.leaf(j % 2 == 0 ? 0.5 : -0.5));
        for (int j = 0; j < cfg.n_hidden; ++j) disc.push_back(g.leaf(-0.5));
    }
    const ad::Graph::Mark base = g.mark();

    // D at a fresh input leaf; returns (input, output).
    auto d_at = [&](double xval) -> std::pair<Var, Var> {
        Var x = g.leaf(xval);
        if (cfg.disc == DiscKind::linear) return {x, g.mul(disc[0], x)};
        std::vector<Var> terms;
        terms.reserve(cfg.n_hidden);
        for (int j = 0; j < cfg.n_hidden; ++j)
            terms.push_back(g.mul(disc[cfg.n_hidden + j],
                                  act_node(g, cfg.activation,
                                           g.mul(disc[j], x))));
        return {x, g.sum(terms)};
    };

    // L_D = -D(0) + mean_i D(fake_i), plus the optional R1 term
    // lambda * (dD/dx at the real point)^2.
    auto build_l_d = [&](const std::vector<double>& fakes) -> Var {
        auto [x_real, d_real] = d_at(0.0);
        std::vector<Var> d_fakes;
        d_fakes.reserve(fakes.size());
        for (double f : fakes) d_fakes.push_back(d_at(f).second);
        Var l = g.add(g.neg(d_real),
                      g.scale(g.sum(d_fakes), 1.0 / double(fakes.size())));
        if (cfg.r1_lambda > 0.0) {
            Var dx = g.gradients(d_real, std::span<const Var>(&x_real, 1))[0];
            l = g.add(l, g.scale(g.square(dx), cfg.r1_lambda));
        }
        return l;
    };

    DiracHistory hist;
    hist.theta.reserve(cfg.iters);
    hist.disc_param_norm.reserve(cfg.iters);
    hist.objective.reserve(cfg.iters);

    auto snapshot = [&](int iter) {
        CurveSnapshot snap;
        snap.iter = iter;
        snap.x.resize(cfg.curve_points);
        snap.d.resize(cfg.curve_points);
        const int m = cfg.curve_points - 1;
        for (int i = 0; i <= m; ++i) {
            const double x = -cfg.curve_half_width +
                             2.0 * cfg.curve_half_width * i / m;
            const ad::Graph::Mark mk = g.mark();
            snap.x[i] = x;
            snap.d[i] = g.value(d_at(x).second);
            g.reset(mk);
        }
        hist.snapshots.push_back(std::move(snap));
    };

    double theta_prev = cfg.theta0;  // replay buffer: previous fake position
    for (int t = 1; t <= cfg.iters; ++t) {
        const double theta_now = g.value(theta);
        std::vector<double> fakes{theta_now};
        if (cfg.replay_old_fake) fakes.push_back(theta_prev);

        // Discriminator step (fake positions fixed).
        g.reset(base);
        Var l_d = build_l_d(fakes);
        hist.objective.push_back(g.value(l_d));
        g.backward(l_d);
        for (Var p : disc)
            g.set_value(p, clamp_unit(g.value(p) - cfg.lr * g.grad(p)));

        // Generator step against the updated discriminator: L_G = -L_D.
        // The fake position enters through the input leaf x_cur, so the
        // update reads the gradient off that leaf. (The replay term is
        // constant in theta and contributes nothing.)
        g.reset(base);
        auto [x_cur, d_cur] = d_at(theta_now);
        Var l_g = g.neg(g.add(g.neg(d_at(0.0).second),
                              g.scale(d_cur, 1.0 / double(fakes.size()))));
        g.backward(l_g);
        g.set_value(theta, theta_now - cfg.lr * g.grad(x_cur));

        theta_prev = theta_now;
        hist.theta.push_back(g.value(theta));
        double nrm = 0.0;
        for (Var p : disc) nrm += g.value(p) * g.value(p);
        hist.disc_param_norm.push_back(std::sqrt(nrm));

        if (std::abs(g.value(theta)) > 1e6) {
            hist.diverged = true;
            break;
        }
        if (cfg.snapshot_every > 0 && t % cfg.snapshot_every == 0)
            snapshot(t);
    }
    g.reset(base);
    const int final_iter = static_cast<int>(hist.theta.size());
    if (hist.snapshots.empty() || hist.snapshots.back().iter != final_iter)
        snapshot(final_iter);
    return hist;
}

}  // namespace ganlab::dirac
