#pragma once

// Online elastic-weight-consolidation regularizer for the discriminator.
// Training is sliced into chunks of tau iterations; each chunk plays the
// role of one task. Per-parameter importance is the running mean of squared
// loss gradients over the chunk (a diagonal Fisher estimate); at a chunk
// boundary the importance is blended into the running omega and the current
// parameters become the anchor. The penalty
//
//     lambda * sum_i omega_i * (theta_i - anchor_i)^2
//
// is emitted onto the tape so it differentiates with the rest of the loss.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "ganlab/autodiff.hpp"

namespace ganlab::ewc {

struct EwcConfig {
    double lambda = 0.0;  // penalty weight; 0 disables the penalty term
    double alpha = 0.5;   // blend weight for the newest chunk's importance
    int tau = 100;        // chunk length in discriminator steps

    void validate() const;  // throws std::invalid_argument
};

class EwcState {
public:
    EwcState(EwcConfig cfg, std::size_t n_params);

    // Called once per discriminator step with that step's gradients.
    void accumulate(std::span<const double> grads);

    // True once exactly tau accumulations have happened.
    bool chunk_ready() const { return counter_ == cfg_.tau; }

    // Blend importance, move the anchor to the current parameters, reset
    // the accumulator. Throws if fewer than tau steps were accumulated.
    void end_chunk(std::span<const double> current_params);

    // Emit lambda * sum omega_i (theta_i - anchor_i)^2 onto the tape.
    // Requires an anchor (at least one completed chunk).
    ad::Var penalty(ad::Graph& g, std::span<const ad::Var> params) const;

    bool has_anchor() const { return has_anchor_; }
    const EwcConfig& config() const { return cfg_; }
    std::span<const double> omega() const { return omega_; }
    std::span<const double> anchor() const { return anchor_; }

    void save(std::ostream& os) const;
    void load(std::istream& is);

private:
    EwcConfig cfg_;
    std::vector<double> omega_;
    std::vector<double> anchor_;
    std::vector<double> acc_;  // sum of squared gradients this chunk
    int counter_ = 0;
    bool has_anchor_ = false;
};

}  // namespace ganlab::ewc
