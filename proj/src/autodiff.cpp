#include "ganlab/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ganlab::ad {

namespace {

const char* op_name(Op op) {
    switch (op) {
        case Op::leaf: return "leaf";
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::mul: return "mul";
        case Op::div: return "div";
        case Op::neg: return "neg";
        case Op::log: return "log";
        case Op::exp: return "exp";
        case Op::square: return "square";
        case Op::sqrt: return "sqrt";
        case Op::relu: return "relu";
        case Op::leaky_relu: return "leaky_relu";
        case Op::sigmoid: return "sigmoid";
        case Op::tanh: return "tanh";
        case Op::abs: return "abs";
        case Op::scale: return "scale";
        case Op::add_const: return "add_const";
        case Op::sum: return "sum";
        case Op::sdot: return "sdot";
        case Op::relu_grad: return "relu_grad";
        case Op::leaky_grad: return "leaky_grad";
        case Op::abs_grad: return "abs_grad";
        case Op::sig_grad: return "sig_grad";
        case Op::tanh_grad: return "tanh_grad";
        case Op::log_grad: return "log_grad";
    }
    return "?";
}

// Denominators are floored away from zero, preserving sign, so division can
// never produce an infinity. copysign(., 0.0) yields +eps, which keeps the
// rule deterministic at exactly zero.
inline double floor_denominator(double b) {
    return std::fabs(b) >= kLogEps ? b : std::copysign(kLogEps, b);
}

}  // namespace

Graph::Graph() {
    constexpr std::size_t reserve = 1u << 16;
    val_.reserve(reserve);
    grad_.reserve(reserve);
    meta_.reserve(reserve);
    aux_.reserve(reserve);
}

std::int32_t Graph::check(Var v) const {
    if (v.g != this)
        throw std::logic_error("autodiff: Var belongs to a different graph");
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= val_.size())
        throw std::logic_error("autodiff: Var id " + std::to_string(v.id) +
                               " out of range");
    return v.id;
}

Var Graph::push(Op op, double value, std::int32_t a, std::int32_t b,
                double aux) {
    if (!std::isfinite(value))
        throw std::runtime_error(std::string("autodiff: non-finite value in ") +
                                 op_name(op) + " at node " +
                                 std::to_string(val_.size()));
    val_.push_back(value);
    grad_.push_back(0.0);
    meta_.push_back({op, a, b});
    aux_.push_back(aux);
    return Var{this, static_cast<std::int32_t>(val_.size() - 1)};
}

Var Graph::leaf(double value) { return push(Op::leaf, value, -1, -1); }

Var Graph::add(Var a, Var b) {
    return push(Op::add, val_[check(a)] + val_[check(b)], a.id, b.id);
}

Var Graph::sub(Var a, Var b) {
    return push(Op::sub, val_[check(a)] - val_[check(b)], a.id, b.id);
}

Var Graph::mul(Var a, Var b) {
    return push(Op::mul, val_[check(a)] * val_[check(b)], a.id, b.id);
}

Var Graph::div(Var a, Var b) {
    double fb = floor_denominator(val_[check(b)]);
    return push(Op::div, val_[check(a)] / fb, a.id, b.id);
}

Var Graph::neg(Var a) { return push(Op::neg, -val_[check(a)], a.id, -1); }

Var Graph::log(Var a) {
    double v = val_[check(a)];
    return push(Op::log, std::log(v > kLogEps ? v : kLogEps), a.id, -1);
}

Var Graph::exp(Var a) { return push(Op::exp, std::exp(val_[check(a)]), a.id, -1); }

Var Graph::square(Var a) {
    double v = val_[check(a)];
    return push(Op::square, v * v, a.id, -1);
}

Var Graph::sqrt(Var a) {
    double v = val_[check(a)];
    if (v < 0.0)
        throw std::runtime_error("autodiff: sqrt of negative value at node " +
                                 std::to_string(a.id));
    return push(Op::sqrt, std::sqrt(v), a.id, -1);
}

Var Graph::relu(Var a) {
    double v = val_[check(a)];
    return push(Op::relu, v > 0.0 ? v : 0.0, a.id, -1);
}

Var Graph::leaky_relu(Var a, double slope) {
    double v = val_[check(a)];
    return push(Op::leaky_relu, v > 0.0 ? v : slope * v, a.id, -1, slope);
}

Var Graph::sigmoid(Var a) {
    double v = val_[check(a)];
    // Evaluate with the sign split so neither branch exponentiates a large
    // positive argument.
    double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                        : std::exp(v) / (1.0 + std::exp(v));
    return push(Op::sigmoid, s, a.id, -1);
}

Var Graph::tanh(Var a) { return push(Op::tanh, std::tanh(val_[check(a)]), a.id, -1); }

Var Graph::abs(Var a) { return push(Op::abs, std::fabs(val_[check(a)]), a.id, -1); }

Var Graph::scale(Var a, double c) {
    return push(Op::scale, c * val_[check(a)], a.id, -1, c);
}

Var Graph::add_const(Var a, double c) {
    return push(Op::add_const, val_[check(a)] + c, a.id, -1, c);
}

Var Graph::sum(std::span<const Var> terms) {
    if (terms.empty()) return leaf(0.0);
    if (terms.size() == 1) return terms[0];
    auto offset = static_cast<std::int32_t>(pool_.size());
    double total = 0.0;
    for (Var t : terms) {
        total += val_[check(t)];
        pool_.push_back(t.id);
    }
    return push(Op::sum, total, offset,
                static_cast<std::int32_t>(terms.size()));
}

Var Graph::sdot(Var a0, std::int32_t astride, Var b0, std::int32_t bstride,
                std::int32_t n) {
    check(a0);
    check(b0);
    if (n < 1) throw std::logic_error("autodiff: sdot needs n >= 1");
    auto in_range = [this](std::int64_t id) {
        return id >= 0 && id < static_cast<std::int64_t>(val_.size());
    };
    if (!in_range(a0.id + std::int64_t(n - 1) * astride) ||
        !in_range(b0.id + std::int64_t(n - 1) * bstride))
        throw std::logic_error("autodiff: sdot range exceeds tape");

    const double* av = val_.data() + a0.id;
    const double* bv = val_.data() + b0.id;
    double acc = 0.0;
    if (astride == 1 && bstride == 1) {
        for (std::int32_t i = 0; i < n; ++i) acc += av[i] * bv[i];
    } else {
        for (std::int32_t i = 0; i < n; ++i)
            acc += av[std::int64_t(i) * astride] * bv[std::int64_t(i) * bstride];
    }
    auto span_index = static_cast<std::int32_t>(spans_.size());
    spans_.push_back({a0.id, b0.id, n, astride, bstride});
    return push(Op::sdot, acc, span_index, -1);
}

void Graph::set_value(Var leaf, double v) {
    std::int32_t i = check(leaf);
    if (meta_[i].op != Op::leaf)
        throw std::logic_error("autodiff: set_value on a derived node");
    if (!std::isfinite(v))
        throw std::runtime_error("autodiff: set_value with non-finite value");
    val_[i] = v;
}

void Graph::reset(const Mark& m) {
    if (m.nodes > val_.size() || m.pool > pool_.size() ||
        m.spans > spans_.size())
        throw std::logic_error("autodiff: reset beyond current tape");
    val_.resize(m.nodes);
    grad_.resize(m.nodes);
    meta_.resize(m.nodes);
    aux_.resize(m.nodes);
    pool_.resize(m.pool);
    spans_.resize(m.spans);
}

void Graph::backward(Var root) {
    const std::int32_t r = check(root);
    std::fill(grad_.begin(), grad_.begin() + r + 1, 0.0);
    grad_[r] = 1.0;

    double* gp = grad_.data();
    const double* vp = val_.data();
    for (std::int32_t i = r; i >= 0; --i) {
        const double g = gp[i];
        if (g == 0.0) continue;
        const Meta& m = meta_[i];
        switch (m.op) {
            case Op::leaf:
                break;
            case Op::add:
                gp[m.a] += g;
                gp[m.b] += g;
                break;
            case Op::sub:
                gp[m.a] += g;
                gp[m.b] -= g;
                break;
            case Op::mul:
                gp[m.a] += g * vp[m.b];
                gp[m.b] += g * vp[m.a];
                break;
            case Op::div: {
                // The denominator floor is treated as transparent for the
                // derivative so the numeric and symbolic rules agree exactly.
                double fb = floor_denominator(vp[m.b]);
                gp[m.a] += g / fb;
                gp[m.b] -= g * vp[i] / fb;
                break;
            }
            case Op::neg:
                gp[m.a] -= g;
                break;
            case Op::log:
                if (vp[m.a] > kLogEps) gp[m.a] += g / vp[m.a];
                break;
            case Op::exp:
                gp[m.a] += g * vp[i];
                break;
            case Op::square:
                gp[m.a] += g * 2.0 * vp[m.a];
                break;
            case Op::sqrt:
                gp[m.a] += g * 0.5 / vp[i];
                break;
            case Op::relu:
                if (vp[m.a] > 0.0) gp[m.a] += g;
                break;
            case Op::leaky_relu:
                gp[m.a] += g * (vp[m.a] > 0.0 ? 1.0 : aux_[i]);
                break;
            case Op::sigmoid: {
                double s = vp[i];
                gp[m.a] += g * s * (1.0 - s);
                break;
            }
            case Op::tanh: {
                double t = vp[i];
                gp[m.a] += g * (1.0 - t * t);
                break;
            }
            case Op::abs:
                if (vp[m.a] > 0.0)
                    gp[m.a] += g;
                else if (vp[m.a] < 0.0)
                    gp[m.a] -= g;
                break;
            case Op::scale:
                gp[m.a] += g * aux_[i];
                break;
            case Op::add_const:
                gp[m.a] += g;
                break;
            case Op::sum: {
                const std::int32_t* ids = pool_.data() + m.a;
                for (std::int32_t k = 0; k < m.b; ++k) gp[ids[k]] += g;
                break;
            }
            case Op::sdot: {
                const SdotSpan& s = spans_[m.a];
                double* ga = gp + s.a0;
                double* gb = gp + s.b0;
                const double* va = vp + s.a0;
                const double* vb = vp + s.b0;
                if (s.astride == 1 && s.bstride == 1) {
                    for (std::int32_t k = 0; k < s.n; ++k) {
                        ga[k] += g * vb[k];
                        gb[k] += g * va[k];
                    }
                } else {
                    for (std::int32_t k = 0; k < s.n; ++k) {
                        const std::int64_t ia = std::int64_t(k) * s.astride;
                        const std::int64_t ib = std::int64_t(k) * s.bstride;
                        ga[ia] += g * vb[ib];
                        gb[ib] += g * va[ia];
                    }
                }
                break;
            }
            case Op::relu_grad:
            case Op::leaky_grad:
            case Op::abs_grad:
                // Piecewise constant: zero derivative almost everywhere.
                break;
            case Op::sig_grad:
                // d/ds [s(1-s)] = 1 - 2s, where s is the parent value.
                gp[m.a] += g * (1.0 - 2.0 * vp[m.a]);
                break;
            case Op::tanh_grad:
                // d/dt [1 - t^2] = -2t.
                gp[m.a] -= g * 2.0 * vp[m.a];
                break;
            case Op::log_grad: {
                // value is 1/a above the floor (0 below); derivative -1/a^2
                // equals -value^2 in both regimes.
                double v = vp[i];
                gp[m.a] -= g * v * v;
                break;
            }
        }
    }
}

Var Graph::materialize_adjoint(std::int32_t head) {
    // Single contribution: avoid any wrapper node where possible.
    const Contrib& first = contribs_[head];
    if (first.next < 0) {
        Var adj{this, first.adj};
        if (first.coeff >= 0) return mul(adj, Var{this, first.coeff});
        if (first.c == 1.0) return adj;
        if (first.c == -1.0) return neg(adj);
        return scale(adj, first.c);
    }

    // Count and check for the structured case: every contribution carries a
    // node coefficient, and both the adjoint ids and the coefficient ids
    // form arithmetic progressions. That is exactly the shape produced by a
    // layer of sdot consumers, and it collapses to a single sdot node.
    std::int32_t count = 0;
    bool all_var = true;
    for (std::int32_t h = head; h >= 0; h = contribs_[h].next) {
        all_var = all_var && contribs_[h].coeff >= 0;
        ++count;
    }
    if (all_var && count >= 3) {
        std::int32_t h0 = head;
        std::int32_t h1 = contribs_[h0].next;
        const std::int64_t da = std::int64_t(contribs_[h1].adj) - contribs_[h0].adj;
        const std::int64_t dc =
            std::int64_t(contribs_[h1].coeff) - contribs_[h0].coeff;
        bool progression = true;
        std::int32_t prev = h1;
        for (std::int32_t h = contribs_[h1].next; h >= 0;
             h = contribs_[h].next) {
            if (contribs_[h].adj - contribs_[prev].adj != da ||
                contribs_[h].coeff - contribs_[prev].coeff != dc) {
                progression = false;
                break;
            }
            prev = h;
        }
        if (progression) {
            return sdot(Var{this, contribs_[head].coeff},
                        static_cast<std::int32_t>(dc),
                        Var{this, contribs_[head].adj},
                        static_cast<std::int32_t>(da), count);
        }
    }

    terms_scratch_.clear();
    for (std::int32_t h = head; h >= 0; h = contribs_[h].next) {
        const Contrib& e = contribs_[h];
        Var adj{this, e.adj};
        if (e.coeff >= 0)
            terms_scratch_.push_back(mul(adj, Var{this, e.coeff}));
        else if (e.c == 1.0)
            terms_scratch_.push_back(adj);
        else if (e.c == -1.0)
            terms_scratch_.push_back(neg(adj));
        else
            terms_scratch_.push_back(scale(adj, e.c));
    }
    return sum(terms_scratch_);
}

std::vector<Var> Graph::gradients(Var root, std::span<const Var> inputs) {
    const std::int32_t r = check(root);
    std::int32_t lo = r;
    for (Var v : inputs) lo = std::min(lo, check(v));
    const std::size_t span = static_cast<std::size_t>(r) - lo + 1;

    // reach_ bit 0: descendant of some input. bit 1: also on a path to the
    // root (i.e. needs an adjoint). Parameter leaves never get bit 0, so the
    // sweep touches only the input->root subgraph.
    reach_.assign(span, 0);
    for (Var v : inputs)
        if (v.id >= lo && v.id <= r) reach_[v.id - lo] |= 1;

    auto descendant = [&](std::int32_t p) {
        return p >= lo && (reach_[p - lo] & 1) != 0;
    };

    for (std::int32_t i = lo; i <= r; ++i) {
        if (reach_[i - lo] & 1) continue;
        const Meta& m = meta_[i];
        bool d = false;
        switch (m.op) {
            case Op::leaf:
                break;
            case Op::sum: {
                const std::int32_t* ids = pool_.data() + m.a;
                for (std::int32_t k = 0; k < m.b && !d; ++k)
                    d = descendant(ids[k]);
                break;
            }
            case Op::sdot: {
                const SdotSpan& s = spans_[m.a];
                for (std::int32_t k = 0; k < s.n && !d; ++k)
                    d = descendant(s.a0 + k * s.astride) ||
                        descendant(s.b0 + k * s.bstride);
                break;
            }
            default:
                d = descendant(m.a) || (m.b >= 0 && descendant(m.b));
                break;
        }
        if (d) reach_[i - lo] |= 1;
    }

    if (!(reach_[r - lo] & 1)) {
        // Root does not depend on any input: all gradients are zero.
        std::vector<Var> out;
        out.reserve(inputs.size());
        Var zero = leaf(0.0);
        for (std::size_t k = 0; k < inputs.size(); ++k) out.push_back(zero);
        return out;
    }

    head_.assign(span, -1);
    contribs_.clear();
    std::vector<std::int32_t> adj_id(span, -1);

    auto contribute_const = [&](std::int32_t p, double c, std::int32_t adj) {
        if (!descendant(p)) return;
        reach_[p - lo] |= 2;
        contribs_.push_back({c, -1, adj, head_[p - lo]});
        head_[p - lo] = static_cast<std::int32_t>(contribs_.size() - 1);
    };
    auto contribute_var = [&](std::int32_t p, std::int32_t coeff,
                              std::int32_t adj) {
        if (!descendant(p)) return;
        reach_[p - lo] |= 2;
        contribs_.push_back({0.0, coeff, adj, head_[p - lo]});
        head_[p - lo] = static_cast<std::int32_t>(contribs_.size() - 1);
    };

    reach_[r - lo] |= 2;
    for (std::int32_t i = r; i >= lo; --i) {
        if ((reach_[i - lo] & 2) == 0) continue;

        Var a_i = (i == r) ? leaf(1.0) : materialize_adjoint(head_[i - lo]);
        adj_id[i - lo] = a_i.id;

        const Meta& m = meta_[i];
        Var self{this, i};
        switch (m.op) {
            case Op::leaf:
                break;
            case Op::add:
                contribute_const(m.a, 1.0, a_i.id);
                contribute_const(m.b, 1.0, a_i.id);
                break;
            case Op::sub:
                contribute_const(m.a, 1.0, a_i.id);
                contribute_const(m.b, -1.0, a_i.id);
                break;
            case Op::mul:
                contribute_var(m.a, m.b, a_i.id);
                contribute_var(m.b, m.a, a_i.id);
                break;
            case Op::div: {
                Var b{this, m.b};
                if (descendant(m.a)) {
                    Var ca = div(constant(1.0), b);
                    contribute_var(m.a, ca.id, a_i.id);
                }
                if (descendant(m.b)) {
                    Var cb = neg(div(self, b));
                    contribute_var(m.b, cb.id, a_i.id);
                }
                break;
            }
            case Op::neg:
                contribute_const(m.a, -1.0, a_i.id);
                break;
            case Op::log:
                if (descendant(m.a)) {
                    Var c = push(Op::log_grad,
                                 val_[m.a] > kLogEps ? 1.0 / val_[m.a] : 0.0,
                                 m.a, -1);
                    contribute_var(m.a, c.id, a_i.id);
                }
                break;
            case Op::exp:
                contribute_var(m.a, i, a_i.id);
                break;
            case Op::square:
                if (descendant(m.a)) {
                    Var c = scale(Var{this, m.a}, 2.0);
                    contribute_var(m.a, c.id, a_i.id);
                }
                break;
            case Op::sqrt:
                if (descendant(m.a)) {
                    Var c = div(constant(0.5), self);
                    contribute_var(m.a, c.id, a_i.id);
                }
                break;
            case Op::relu:
                if (descendant(m.a)) {
                    Var c = push(Op::relu_grad, val_[m.a] > 0.0 ? 1.0 : 0.0,
                                 m.a, -1);
                    contribute_var(m.a, c.id, a_i.id);
                }
                break;
            case Op::leaky_relu:
                if (descendant(m.a)) {
                    Var c = push(Op::leaky_grad,
                                 val_[m.a] > 0.0 ? 1.0 : aux_[i], m.a, -1,
                                 aux_[i]);
                    contribute_var(m.a, c.id, a_i.id);
                }
                break;
            case Op::sigmoid:
                if (descendant(m.a)) {
                    double s = val_[i];
                    Var c = push(Op::sig_grad, s * (1.0 - s), i, -1);
                    contribute_var(m.a, c.id, a_i.id);
                }
                break;
            case Op::tanh:
                if (descendant(m.a)) {
                    double t = val_[i];
                    Var c = push(Op::tanh_grad, 1.0 - t * t, i, -1);
                    contribute_var(m.a, c.id, a_i.id);
                }
                break;
            case Op::abs: {
                if (descendant(m.a)) {
                    double v = val_[m.a];
                    Var c = push(Op::abs_grad,
                                 v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0), m.a,
                                 -1);
                    contribute_var(m.a, c.id, a_i.id);
                }
                break;
            }
            case Op::scale:
                contribute_const(m.a, aux_[i], a_i.id);
                break;
            case Op::add_const:
                contribute_const(m.a, 1.0, a_i.id);
                break;
            case Op::sum: {
                const std::int32_t* ids = pool_.data() + m.a;
                for (std::int32_t k = 0; k < m.b; ++k)
                    contribute_const(ids[k], 1.0, a_i.id);
                break;
            }
            case Op::sdot: {
                const SdotSpan& s = spans_[m.a];
                for (std::int32_t k = 0; k < s.n; ++k) {
                    const std::int32_t pa = s.a0 + k * s.astride;
                    const std::int32_t pb = s.b0 + k * s.bstride;
                    contribute_var(pa, pb, a_i.id);
                    contribute_var(pb, pa, a_i.id);
                }
                break;
            }
            case Op::relu_grad:
            case Op::leaky_grad:
            case Op::abs_grad:
                // Zero derivative almost everywhere: no contribution.
                break;
            case Op::sig_grad:
                if (descendant(m.a)) {
                    // d/ds [s(1-s)] = 1 - 2s.
                    Var c = add_const(scale(Var{this, m.a}, -2.0), 1.0);
                    contribute_var(m.a, c.id, a_i.id);
                }
                break;
            case Op::tanh_grad:
                if (descendant(m.a)) {
                    Var c = scale(Var{this, m.a}, -2.0);
                    contribute_var(m.a, c.id, a_i.id);
                }
                break;
            case Op::log_grad:
                if (descendant(m.a)) {
                    Var c = neg(square(self));
                    contribute_var(m.a, c.id, a_i.id);
                }
                break;
        }
    }

    std::vector<Var> out;
    out.reserve(inputs.size());
    Var zero{};
    for (Var v : inputs) {
        std::int32_t a = adj_id[v.id - lo];
        if (a >= 0) {
            out.push_back(Var{this, a});
        } else {
            if (!zero.valid()) zero = leaf(0.0);
            out.push_back(zero);
        }
    }
    return out;
}

}  // namespace ganlab::ad
