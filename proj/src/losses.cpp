#include "ganlab/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace ganlab::gan {

namespace {

using ad::Graph;
using ad::Var;

// Forward one row-major [n x dim] value array through D, creating one leaf
// per coordinate. Returns the n scalar outputs and (optionally) the created
// leaves, row-major.
std::vector<Var> forward_batch(Graph& g, const nn::MlpNetwork& D,
                               std::span<const double> rows, int dim,
                               std::vector<Var>* leaves_out) {
    const int n = static_cast<int>(rows.size()) / dim;
    std::vector<Var> outs;
    outs.reserve(n);
    std::vector<Var> row(dim);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j) {
            row[j] = g.leaf(rows[i * dim + j]);
            if (leaves_out) leaves_out->push_back(row[j]);
        }
        outs.push_back(D.forward(row)[0]);
    }
    return outs;
}

Var mean_of(Graph& g, std::span<const Var> terms) {
    return g.scale(g.sum(terms), 1.0 / static_cast<double>(terms.size()));
}

// -mean log(v_i)
Var neg_mean_log(Graph& g, std::span<const Var> vs) {
    std::vector<Var> logs;
    logs.reserve(vs.size());
    for (Var v : vs) logs.push_back(g.log(v));
    return g.scale(g.sum(logs), -1.0 / static_cast<double>(logs.size()));
}

// -mean log(1 - v_i)
Var neg_mean_log1m(Graph& g, std::span<const Var> vs) {
    std::vector<Var> logs;
    logs.reserve(vs.size());
    for (Var v : vs) logs.push_back(g.log(g.add_const(g.neg(v), 1.0)));
    return g.scale(g.sum(logs), -1.0 / static_cast<double>(logs.size()));
}

// Per-row squared gradient norms ||grad_x D(x_i)||^2 for points whose
// leaves are already on the tape. Differentiates the sum of the outputs --
// rows are independent, so each leaf's adjoint is its own row's gradient.
std::vector<Var> squared_grad_norms(Graph& g, std::span<const Var> outputs,
                                    std::span<const Var> leaves, int dim) {
    std::vector<Var> adj = g.gradients(g.sum(outputs), leaves);
    const int n = static_cast<int>(outputs.size());
    std::vector<Var> norms;
    norms.reserve(n);
    std::vector<Var> sq(dim);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j) sq[j] = g.square(adj[i * dim + j]);
        norms.push_back(g.sum(sq));
    }
    return norms;
}

void check_finite(Graph& g, Var v, const char* term) {
    if (!std::isfinite(g.value(v)))
        throw std::runtime_error(std::string("discriminator_loss: term '") +
                                 term + "' is non-finite");
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::gan_ns: return "gan_ns";
        case Variant::wgan_gp: return "wgan_gp";
        case Variant::gan_r1: return "gan_r1";
        case Variant::gan_0gp: return "gan_0gp";
    }
    throw std::logic_error("to_string: bad Variant");
}

Variant variant_from_string(const std::string& s) {
    if (s == "gan_ns") return Variant::gan_ns;
    if (s == "wgan_gp") return Variant::wgan_gp;
    if (s == "gan_r1") return Variant::gan_r1;
    if (s == "gan_0gp") return Variant::gan_0gp;
    throw std::invalid_argument("unknown GAN variant '" + s + "'");
}

void GanLossConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("GanLossConfig: lambda must be >= 0");
    if (!(gamma_imb >= 1.0) || !std::isfinite(gamma_imb))
        throw std::invalid_argument("GanLossConfig: gamma_imb must be >= 1");
}

std::vector<InterpolationDraw> sample_interpolates(
    std::span<const double> real, std::span<const double> fake, int dim,
    Rng& rng) {
    if (real.size() != fake.size())
        throw std::invalid_argument(
            "sample_interpolates: real/fake batch sizes differ (" +
            std::to_string(real.size()) + " vs " + std::to_string(fake.size()) +
            ")");
    const int n = static_cast<int>(real.size()) / dim;
    std::vector<InterpolationDraw> draws(n);
    for (int i = 0; i < n; ++i) {
        double a = rng.uniform();
        draws[i].alpha = a;
        draws[i].u.resize(dim);
        for (int j = 0; j < dim; ++j)
            draws[i].u[j] = a * real[i * dim + j] + (1.0 - a) * fake[i * dim + j];
    }
    return draws;
}

ad::Var discriminator_loss(Graph& g, const nn::MlpNetwork& D,
                           const GanLossConfig& cfg,
                           std::span<const double> real,
                           std::span<const double> fake, int dim, Rng& rng) {
    cfg.validate();
    if (real.empty() || fake.empty())
        throw std::invalid_argument("discriminator_loss: empty batch");
    if (real.size() % dim != 0 || fake.size() % dim != 0)
        throw std::invalid_argument(
            "discriminator_loss: batch size not a multiple of dim");

    const bool wasserstein = cfg.variant == Variant::wgan_gp;

    std::vector<Var> real_leaves;
    std::vector<Var> d_real =
        forward_batch(g, D, real, dim, &real_leaves);
    std::vector<Var> d_fake = forward_batch(g, D, fake, dim, nullptr);

    Var l_real = wasserstein ? g.neg(mean_of(g, d_real))
                             : neg_mean_log(g, d_real);
    Var l_fake = wasserstein ? mean_of(g, d_fake)
                             : neg_mean_log1m(g, d_fake);
    check_finite(g, l_real, "L_real");
    check_finite(g, l_fake, "L_fake");

    Var loss = cfg.gamma_imb == 1.0
                   ? g.add(l_real, l_fake)
                   : g.add(g.scale(l_real, cfg.gamma_imb), l_fake);

    // lambda = 0: no penalty subgraph and no rng consumption, so the result
    // is bit-identical to gan_ns.
    if (cfg.lambda == 0.0 || cfg.variant == Variant::gan_ns) return loss;

    Var penalty{};
    if (cfg.variant == Variant::gan_r1) {
        std::vector<Var> norms = squared_grad_norms(g, d_real, real_leaves, dim);
        penalty = mean_of(g, norms);
    } else {
        std::vector<InterpolationDraw> draws =
            sample_interpolates(real, fake, dim, rng);
        std::vector<double> flat;
        flat.reserve(draws.size() * dim);
        for (const auto& d : draws)
            flat.insert(flat.end(), d.u.begin(), d.u.end());
        std::vector<Var> u_leaves;
        std::vector<Var> d_u = forward_batch(g, D, flat, dim, &u_leaves);
        std::vector<Var> norms = squared_grad_norms(g, d_u, u_leaves, dim);
        if (cfg.variant == Variant::gan_0gp) {
            penalty = mean_of(g, norms);
        } else {  // wgan_gp: (||grad|| - 1)^2, norm cushioned against the
                  // sqrt singularity at exactly zero gradient
            std::vector<Var> terms;
            terms.reserve(norms.size());
            for (Var nsq : norms) {
                Var nrm = g.sqrt(g.add_const(nsq, 1e-12));
                terms.push_back(g.square(g.add_const(nrm, -1.0)));
            }
            penalty = mean_of(g, terms);
        }
    }
    check_finite(g, penalty, "penalty");
    return g.add(loss, g.scale(penalty, cfg.lambda));
}

ad::Var generator_loss(Graph& g, const nn::MlpNetwork& D, Variant variant,
                       std::span<const ad::Var> fake_rows, int dim) {
    if (fake_rows.empty() || fake_rows.size() % static_cast<size_t>(dim) != 0)
        throw std::invalid_argument(
            "generator_loss: batch size not a positive multiple of dim");
    const int n = static_cast<int>(fake_rows.size()) / dim;
    std::vector<Var> outs;
    outs.reserve(n);
    for (int i = 0; i < n; ++i)
        outs.push_back(D.forward(fake_rows.subspan(
            static_cast<size_t>(i) * dim, dim))[0]);
    Var loss = variant == Variant::wgan_gp ? g.neg(mean_of(g, outs))
                                           : neg_mean_log(g, outs);
    if (!std::isfinite(g.value(loss)))
        throw std::runtime_error("generator_loss: non-finite loss");
    return loss;
}

}  // namespace ganlab::gan
