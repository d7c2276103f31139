#pragma once

// GAN objectives built on the tape: the non-saturating loss plus its
// gradient-penalty variants, and the Wasserstein loss with the one-centered
// penalty.  Every builder returns a scalar node; differentiating it (numeric
// backward) yields parameter gradients, including the second-order terms the
// penalties require, because penalties are emitted as symbolic-derivative
// subgraphs.

#include <span>
#include <string>
#include <vector>

#include "ganlab/autodiff.hpp"
#include "ganlab/nn.hpp"
#include "ganlab/rng.hpp"

namespace ganlab::gan {

enum class Variant { gan_ns, wgan_gp, gan_r1, gan_0gp };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

// Loss family: L_D = gamma_imb * L_real + L_fake + lambda * penalty.
//   gan_ns   no penalty
//   wgan_gp  (||grad D(u)|| - 1)^2 at interpolates u
//   gan_r1   ||grad D(x)||^2 at real points
//   gan_0gp  ||grad D(u)||^2 at interpolates u
// lambda = 0 skips penalty construction entirely (and leaves the rng
// untouched), which makes gan_r1/gan_0gp with lambda = 0 bit-identical to
// gan_ns -- a property the test suite pins.
struct GanLossConfig {
    Variant variant = Variant::gan_ns;
    double lambda = 0.0;     // penalty weight, >= 0
    double gamma_imb = 1.0;  // weight on the real-batch term, >= 1

    void validate() const;  // throws std::invalid_argument
};

// One interpolate u = alpha*x + (1-alpha)*y between a paired real x and
// fake y, with alpha drawn fresh per pair.
struct InterpolationDraw {
    double alpha = 0.0;
    std::vector<double> u;
};

// Pair the i-th real with the i-th fake. Throws on size mismatch.
std::vector<InterpolationDraw> sample_interpolates(
    std::span<const double> real, std::span<const double> fake, int dim,
    Rng& rng);

// Discriminator loss for one batch. `real`/`fake` are row-major [n x dim]
// value arrays; the builder creates leaves for the points it differentiates
// through. Throws if a term comes out non-finite, naming the term.
ad::Var discriminator_loss(ad::Graph& g, const nn::MlpNetwork& D,
                           const GanLossConfig& cfg,
                           std::span<const double> real,
                           std::span<const double> fake, int dim, Rng& rng);

// Generator loss over fake points that already live on the tape (so the
// gradient flows back into whatever produced them -- generator parameters,
// or a bare input leaf when probing the landscape). `fake_rows` holds n
// rows of `dim` nodes each.
ad::Var generator_loss(ad::Graph& g, const nn::MlpNetwork& D,
                       Variant variant,
                       std::span<const ad::Var> fake_rows, int dim);

}  // namespace ganlab::gan
