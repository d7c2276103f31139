#include "ganlab/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ganlab::nn {

using ad::Var;

const char* to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::linear: return "linear";
    }
    return "?";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "leaky_relu") return Activation::leaky_relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "linear") return Activation::linear;
    throw std::invalid_argument("unknown activation: " + s);
}

void MlpConfig::validate() const {
    if (input_dim < 1) throw std::invalid_argument("mlp: input_dim must be >= 1");
    if (output_dim < 1)
        throw std::invalid_argument("mlp: output_dim must be >= 1");
    for (int h : hidden_dims)
        if (h < 1) throw std::invalid_argument("mlp: hidden dims must be >= 1");
    if (hidden_activation == Activation::leaky_relu &&
        (leaky_slope <= 0.0 || leaky_slope >= 1.0))
        throw std::invalid_argument("mlp: leaky_slope must be in (0, 1)");
}

int MlpConfig::param_count() const {
    int count = 0;
    int in = input_dim;
    for (int h : hidden_dims) {
        count += (use_bias ? in + 1 : in) * h;
        in = h;
    }
    count += (use_bias ? in + 1 : in) * output_dim;
    return count;
}

MlpNetwork::MlpNetwork(ad::Graph& g, MlpConfig config, std::uint64_t seed)
    : g_(&g), cfg_(std::move(config)) {
    cfg_.validate();
    Rng rng(seed);
    params_.reserve(static_cast<std::size_t>(cfg_.param_count()));

    std::vector<int> dims;
    dims.push_back(cfg_.input_dim);
    dims.insert(dims.end(), cfg_.hidden_dims.begin(), cfg_.hidden_dims.end());
    dims.push_back(cfg_.output_dim);

    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l], out = dims[l + 1];
        Layer layer{-1, -1, in, out};
        const double a = std::sqrt(6.0 / (in + out));
        for (int j = 0; j < out; ++j) {
            for (int i = 0; i < in; ++i) {
                double w =
                    cfg_.init == Init::glorot_uniform ? rng.uniform(-a, a) : 0.0;
                Var v = g_->leaf(w);
                if (layer.w0 < 0) layer.w0 = v.id;
                params_.push_back(v);
            }
        }
        if (cfg_.use_bias) {
            for (int j = 0; j < out; ++j) {
                Var v = g_->leaf(0.0);
                if (layer.b0 < 0) layer.b0 = v.id;
                params_.push_back(v);
            }
        }
        layers_.push_back(layer);
    }
}

std::vector<Var> MlpNetwork::forward(std::span<const ad::Var> x) const {
    if (static_cast<int>(x.size()) != cfg_.input_dim)
        throw std::invalid_argument(
            "mlp: input size " + std::to_string(x.size()) + ", expected " +
            std::to_string(cfg_.input_dim));
    std::int32_t xstride = x.size() > 1 ? x[1].id - x[0].id : 0;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i].id - x[i - 1].id != xstride)
            throw std::invalid_argument(
                "mlp: input node ids must form an arithmetic progression");

    ad::Graph& g = *g_;
    Var cur0{};
    std::int32_t cur_stride = xstride;
    int cur_n = cfg_.input_dim;
    cur0 = x[0];

    std::vector<Var> out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const bool last = (l + 1 == layers_.size());

        // Pass 1: dot products. Row j's weights start at w0 + j*in.
        Var z0{};
        for (int j = 0; j < layer.out; ++j) {
            Var row{&g, layer.w0 + j * layer.in};
            Var z = g.sdot(row, 1, cur0, cur_stride, layer.in);
            if (j == 0) z0 = z;
        }
        // Pass 2: bias adds.
        if (layer.b0 >= 0) {
            Var zb0{};
            for (int j = 0; j < layer.out; ++j) {
                Var zb = g.add(Var{&g, z0.id + j}, Var{&g, layer.b0 + j});
                if (j == 0) zb0 = zb;
            }
            z0 = zb0;
        }
        // Pass 3: activations.
        const Activation act =
            last ? cfg_.output_activation : cfg_.hidden_activation;
        Var a0 = z0;
        if (act != Activation::linear) {
            for (int j = 0; j < layer.out; ++j) {
                Var z{&g, z0.id + j};
                Var a;
                switch (act) {
                    case Activation::relu: a = g.relu(z); break;
                    case Activation::leaky_relu:
                        a = g.leaky_relu(z, cfg_.leaky_slope);
                        break;
                    case Activation::tanh: a = g.tanh(z); break;
                    case Activation::sigmoid: a = g.sigmoid(z); break;
                    case Activation::linear: a = z; break;
                }
                if (j == 0) a0 = a;
            }
        }
        cur0 = a0;
        cur_stride = 1;
        cur_n = layer.out;

        if (last) {
            out.reserve(static_cast<std::size_t>(layer.out));
            for (int j = 0; j < layer.out; ++j)
                out.push_back(Var{&g, a0.id + j});
        }
    }
    (void)cur_n;
    return out;
}

std::vector<double> MlpNetwork::param_values() const {
    std::vector<double> v;
    v.reserve(params_.size());
    for (Var p : params_) v.push_back(g_->value(p));
    return v;
}

void MlpNetwork::set_param_values(std::span<const double> values) {
    if (values.size() != params_.size())
        throw std::invalid_argument(
            "mlp: expected " + std::to_string(params_.size()) +
            " parameter values, got " + std::to_string(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
        g_->set_value(params_[i], values[i]);
}

namespace {

nlohmann::json config_to_json(const MlpConfig& cfg) {
    return {
        {"input_dim", cfg.input_dim},
        {"hidden_dims", cfg.hidden_dims},
        {"output_dim", cfg.output_dim},
        {"hidden_activation", to_string(cfg.hidden_activation)},
        {"leaky_slope", cfg.leaky_slope},
        {"output_activation", to_string(cfg.output_activation)},
        {"use_bias", cfg.use_bias},
    };
}

void write_le_doubles(std::ostream& os, std::span<const double> values) {
    static_assert(std::endian::native == std::endian::little,
                  "checkpoint writer assumes a little-endian host");
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(double)));
}

}  // namespace

void save_params(const MlpNetwork& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    nlohmann::json header = config_to_json(net.config());
    header["param_count"] = net.config().param_count();
    os << header.dump() << '\n';
    auto values = net.param_values();
    write_le_doubles(os, values);
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<double> load_params(const std::string& path,
                                const MlpConfig& expect) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line))
        throw std::runtime_error("checkpoint missing header: " + path);
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded())
        throw std::runtime_error("checkpoint header is not valid JSON: " + path);

    nlohmann::json want = config_to_json(expect);
    for (const auto& [key, value] : want.items()) {
        if (!header.contains(key) || header[key] != value)
            throw std::runtime_error("checkpoint mismatch in field '" + key +
                                     "': " + path);
    }
    const auto count = header.value("param_count", -1);
    if (count != expect.param_count())
        throw std::runtime_error("checkpoint mismatch in field 'param_count': " +
                                 path);

    std::vector<double> values(static_cast<std::size_t>(count));
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (is.gcount() !=
        static_cast<std::streamsize>(values.size() * sizeof(double)))
        throw std::runtime_error("checkpoint truncated: " + path);
    return values;
}

}  // namespace ganlab::nn
