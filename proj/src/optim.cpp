#include "ganlab/optim.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace ganlab::optim {

const char* to_string(Kind k) {
    switch (k) {
        case Kind::sgd: return "sgd";
        case Kind::sgd_momentum: return "sgd_momentum";
        case Kind::adam: return "adam";
    }
    throw std::logic_error("to_string: bad optimizer Kind");
}

Kind kind_from_string(const std::string& s) {
    if (s == "sgd") return Kind::sgd;
    if (s == "sgd_momentum") return Kind::sgd_momentum;
    if (s == "adam") return Kind::adam;
    throw std::invalid_argument("unknown optimizer kind '" + s + "'");
}

void OptimConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr))
        throw std::invalid_argument("optimizer: lr must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw std::invalid_argument("optimizer: momentum must be in [0,1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("optimizer: betas must be in [0,1)");
    if (!(eps > 0.0))
        throw std::invalid_argument("optimizer: eps must be > 0");
}

Optimizer::Optimizer(OptimConfig cfg, std::size_t n_params) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.kind != Kind::sgd) buf_.assign(n_params, 0.0);
    if (cfg_.kind == Kind::adam) v_.assign(n_params, 0.0);
}

void Optimizer::step(ad::Graph& g, std::span<const ad::Var> params,
                     std::span<const double> grads) {
    const std::size_t n = params.size();
    if (grads.size() != n)
        throw std::invalid_argument("optimizer: params/grads size mismatch");
    if (cfg_.kind != Kind::sgd && buf_.size() != n)
        throw std::invalid_argument("optimizer: state sized for " +
                                    std::to_string(buf_.size()) +
                                    " params, got " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(grads[i]))
            throw std::runtime_error("optimizer: non-finite gradient at "
                                     "parameter " + std::to_string(i));

    ++t_;
    switch (cfg_.kind) {
        case Kind::sgd:
            for (std::size_t i = 0; i < n; ++i)
                g.set_value(params[i],
                            g.value(params[i]) - cfg_.lr * grads[i]);
            break;
        case Kind::sgd_momentum:
            // Accumulator form: buf = momentum*buf + lr*grad; theta -= buf.
            for (std::size_t i = 0; i < n; ++i) {
                buf_[i] = cfg_.momentum * buf_[i] + cfg_.lr * grads[i];
                g.set_value(params[i], g.value(params[i]) - buf_[i]);
            }
            break;
        case Kind::adam: {
            const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
            const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
            for (std::size_t i = 0; i < n; ++i) {
                buf_[i] = cfg_.beta1 * buf_[i] + (1.0 - cfg_.beta1) * grads[i];
                v_[i] = cfg_.beta2 * v_[i] +
                        (1.0 - cfg_.beta2) * grads[i] * grads[i];
                const double mhat = buf_[i] / c1;
                const double vhat = v_[i] / c2;
                g.set_value(params[i], g.value(params[i]) -
                                           cfg_.lr * mhat /
                                               (std::sqrt(vhat) + cfg_.eps));
            }
            break;
        }
    }
}

void Optimizer::save(std::ostream& os) const {
    os << "optim " << to_string(cfg_.kind) << ' ' << t_ << ' ' << buf_.size()
       << ' ' << v_.size() << '\n';
    os.precision(17);
    for (double b : buf_) os << b << '\n';
    for (double v : v_) os << v << '\n';
    if (!os) throw std::runtime_error("optimizer: serialization failed");
}

void Optimizer::load(std::istream& is) {
    std::string tag, kind;
    std::size_t nb = 0, nv = 0;
    std::int64_t t = 0;
    if (!(is >> tag >> kind >> t >> nb >> nv) || tag != "optim")
        throw std::runtime_error("optimizer: bad state header");
    if (kind != to_string(cfg_.kind))
        throw std::runtime_error("optimizer: state kind '" + kind +
                                 "' does not match configured '" +
                                 to_string(cfg_.kind) + "'");
    if (nb != buf_.size() || nv != v_.size())
        throw std::runtime_error("optimizer: state size mismatch");
    t_ = t;
    for (double& b : buf_)
        if (!(is >> b)) throw std::runtime_error("optimizer: truncated state");
    for (double& v : v_)
        if (!(is >> v)) throw std::runtime_error("optimizer: truncated state");
}

}  // namespace ganlab::optim
