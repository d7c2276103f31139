#include "ganlab/ewc.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace ganlab::ewc {

void EwcConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("ewc: lambda must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("ewc: alpha must be in [0,1]");
    if (tau < 1) throw std::invalid_argument("ewc: tau must be >= 1");
}

EwcState::EwcState(EwcConfig cfg, std::size_t n_params)
    : cfg_(cfg),
      omega_(n_params, 0.0),
      anchor_(n_params, 0.0),
      acc_(n_params, 0.0) {
    cfg_.validate();
}

void EwcState::accumulate(std::span<const double> grads) {
    if (grads.size() != acc_.size())
        throw std::invalid_argument("ewc: gradient size mismatch");
    for (std::size_t i = 0; i < acc_.size(); ++i)
        acc_[i] += grads[i] * grads[i];
    ++counter_;
}

void EwcState::end_chunk(std::span<const double> current_params) {
    if (current_params.size() != anchor_.size())
        throw std::invalid_argument("ewc: parameter size mismatch");
    if (counter_ < cfg_.tau)
        throw std::logic_error("ewc: end_chunk after " +
                               std::to_string(counter_) + " steps, tau = " +
                               std::to_string(cfg_.tau));
    const double inv_n = 1.0 / static_cast<double>(counter_);
    for (std::size_t i = 0; i < omega_.size(); ++i) {
        const double importance = acc_[i] * inv_n;  // mean squared gradient
        omega_[i] = cfg_.alpha * importance + (1.0 - cfg_.alpha) * omega_[i];
        anchor_[i] = current_params[i];
        acc_[i] = 0.0;
    }
    counter_ = 0;
    has_anchor_ = true;
}

ad::Var EwcState::penalty(ad::Graph& g,
                          std::span<const ad::Var> params) const {
    if (!has_anchor_)
        throw std::logic_error("ewc: penalty requested before any chunk end");
    if (params.size() != anchor_.size())
        throw std::invalid_argument("ewc: parameter size mismatch");
    std::vector<ad::Var> terms;
    terms.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (omega_[i] == 0.0) continue;  // dead term, keep the tape lean
        terms.push_back(
            g.scale(g.square(g.add_const(params[i], -anchor_[i])), omega_[i]));
    }
    if (terms.empty()) return g.leaf(0.0);
    return g.scale(g.sum(terms), cfg_.lambda);
}

void EwcState::save(std::ostream& os) const {
    os << "ewc " << omega_.size() << ' ' << counter_ << ' '
       << (has_anchor_ ? 1 : 0) << '\n';
    os.precision(17);
    for (double v : omega_) os << v << '\n';
    for (double v : anchor_) os << v << '\n';
    for (double v : acc_) os << v << '\n';
    if (!os) throw std::runtime_error("ewc: serialization failed");
}

void EwcState::load(std::istream& is) {
    std::string tag;
    std::size_t n = 0;
    int counter = 0, has = 0;
    if (!(is >> tag >> n >> counter >> has) || tag != "ewc")
        throw std::runtime_error("ewc: bad state header");
    if (n != omega_.size())
        throw std::runtime_error("ewc: state size mismatch");
    counter_ = counter;
    has_anchor_ = has != 0;
    for (double& v : omega_)
        if (!(is >> v)) throw std::runtime_error("ewc: truncated state");
    for (double& v : anchor_)
        if (!(is >> v)) throw std::runtime_error("ewc: truncated state");
    for (double& v : acc_)
        if (!(is >> v)) throw std::runtime_error("ewc: truncated state");
}

}  // namespace ganlab::ewc
