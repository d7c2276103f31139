#pragma once

// MLP construction and forward evaluation on the autodiff tape.
//
// Parameters are tape leaves created once, below the per-step watermark, in
// a fixed contiguous layout (per layer: weights row-major, then biases).
// forward() emits each layer in three passes — all dot products, all bias
// adds, all activations — so every intermediate range is contiguous on the
// tape and layers reduce to strided-dot nodes. That layout is what the
// autodiff fast paths key on.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ganlab/autodiff.hpp"
#include "ganlab/rng.hpp"

namespace ganlab::nn {

enum class Activation : std::uint8_t {
    relu,
    leaky_relu,
    tanh,
    sigmoid,
    linear,
};

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

enum class Init : std::uint8_t {
    glorot_uniform,  // U(-a, a), a = sqrt(6 / (fan_in + fan_out)); bias 0
    zeros,
};

struct MlpConfig {
    int input_dim = 0;
    std::vector<int> hidden_dims;
    int output_dim = 1;
    Activation hidden_activation = Activation::relu;
    double leaky_slope = 0.2;
    Activation output_activation = Activation::linear;
    Init init = Init::glorot_uniform;
    bool use_bias = true;

    int param_count() const;
    void validate() const;  // throws std::invalid_argument on bad dims
};

class MlpNetwork {
public:
    // Creates parameter leaves on `g` and initializes them from `seed`.
    MlpNetwork(ad::Graph& g, MlpConfig config, std::uint64_t seed);

    // Forward for one input vector; x nodes must already be on the tape and
    // their ids must form an arithmetic progression (a loop of leaf() calls
    // does). Returns output_dim nodes, contiguous on the tape.
    std::vector<ad::Var> forward(std::span<const ad::Var> x) const;

    ad::Graph& graph() const { return *g_; }
    const MlpConfig& config() const { return cfg_; }
    std::span<const ad::Var> params() const { return params_; }

    std::vector<double> param_values() const;
    void set_param_values(std::span<const double> values);

private:
    ad::Graph* g_;
    MlpConfig cfg_;
    std::vector<ad::Var> params_;
    struct Layer {
        std::int32_t w0;  // first weight leaf id (row-major [out][in])
        std::int32_t b0;  // first bias leaf id, -1 when use_bias is false
        int in, out;
    };
    std::vector<Layer> layers_;
};

// Parameter checkpoint: one JSON header line describing the architecture and
// parameter count, then the raw parameter values as little-endian doubles.
void save_params(const MlpNetwork& net, const std::string& path);

// Reads a checkpoint written by save_params. The stored config must match
// `expect` exactly; mismatches throw with the offending field named.
std::vector<double> load_params(const std::string& path,
                                const MlpConfig& expect);

}  // namespace ganlab::nn
