#pragma once

// From-scratch first-order optimizers over tape leaves: plain SGD, SGD with
// an accumulator-style momentum term (the learning rate folded into the
// accumulator: g_t = m*g_{t-1} + lr*grad, theta -= g_t), and bias-corrected
// Adam. State serializes to/from streams for checkpointing.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ganlab/autodiff.hpp"

namespace ganlab::optim {

enum class Kind : std::uint8_t { sgd, sgd_momentum, adam };

const char* to_string(Kind k);
Kind kind_from_string(const std::string& s);

struct OptimConfig {
    Kind kind = Kind::sgd;
    double lr = 1e-3;
    double momentum = 0.0;  // sgd_momentum only, in [0,1)
    double beta1 = 0.9;     // adam
    double beta2 = 0.999;   // adam
    double eps = 1e-8;      // adam

    void validate() const;  // throws std::invalid_argument
};

class Optimizer {
public:
    Optimizer(OptimConfig cfg, std::size_t n_params);

    // Applies one update in place via Graph::set_value. Throws on a
    // non-finite gradient, naming the parameter index; the step is then not
    // applied (no partial writes).
    void step(ad::Graph& g, std::span<const ad::Var> params,
              std::span<const double> grads);

    const OptimConfig& config() const { return cfg_; }
    std::int64_t steps_taken() const { return t_; }

    void save(std::ostream& os) const;
    void load(std::istream& is);  // throws if sizes/kind disagree

private:
    OptimConfig cfg_;
    std::int64_t t_ = 0;
    std::vector<double> buf_;  // momentum accumulator, or adam first moment
    std::vector<double> v_;    // adam second moment
};

}  // namespace ganlab::optim
