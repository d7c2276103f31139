#pragma once

// Reverse-mode automatic differentiation over a flat tape of scalar nodes.
//
// Layout and cost model:
//  - Nodes live in one arena; ids increase in creation order, so id order is
//    a topological order and the numeric backward pass is a single reverse
//    loop over the tape — no traversal bookkeeping.
//  - `sdot` is an n-ary strided inner-product node: one node per neuron
//    instead of one per multiply. Affine layers become contiguous value
//    ranges, and the hot loops (forward, backward, adjoint construction)
//    reduce to strided dot/axpy sweeps the compiler can vectorize. This is
//    what makes 10k-iteration training runs affordable on a scalar tape.
//  - gradients() performs the backward pass *symbolically*, emitting the
//    derivative as new tape nodes. Gradient-norm penalties built from those
//    nodes therefore stay differentiable (double backward) with no extra
//    machinery: the ordinary numeric backward just keeps going through them.
//  - mark()/reset() truncate the tape to a saved watermark after each
//    training step. Parameter leaves created below the watermark keep their
//    ids for the whole run.
//
// A Graph is single-threaded. Independent Graphs may live on independent
// threads; nothing is shared.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ganlab::ad {

class Graph;

// Lightweight handle: tape index plus owning graph. Passing Vars between
// graphs is a logic error and asserted against in debug builds.
struct Var {
    Graph* g = nullptr;
    std::int32_t id = -1;

    bool valid() const { return g != nullptr && id >= 0; }
};

enum class Op : std::uint8_t {
    leaf,
    add,        // a + b
    sub,        // a - b
    mul,        // a * b
    div,        // a / floor(b)        (denominator floored away from zero)
    neg,        // -a
    log,        // log(max(a, eps))    (derivative zero below the floor)
    exp,        // exp(a)
    square,     // a*a
    sqrt,       // sqrt(a), a >= 0 required
    relu,       // max(a, 0)
    leaky_relu, // a > 0 ? a : aux*a
    sigmoid,    // 1/(1+exp(-a))
    tanh,       // tanh(a)
    abs,        // |a|
    scale,      // aux * a
    add_const,  // a + aux
    sum,        // pooled n-ary sum
    sdot,       // strided n-ary dot: sum_i val[a0+i*as] * val[b0+i*bs]
    // Derivative-step nodes emitted by the symbolic backward. Their own
    // backward rules carry the second-order terms the penalties need.
    relu_grad,  // a > 0 ? 1 : 0          (second derivative zero a.e.)
    leaky_grad, // a > 0 ? 1 : aux        (second derivative zero a.e.)
    abs_grad,   // sign(a), 0 at 0        (second derivative zero a.e.)
    sig_grad,   // s*(1-s) of sigmoid output s; backward g*(1-2s)
    tanh_grad,  // 1-t^2 of tanh output t; backward g*(-2t)
    log_grad,   // a > eps ? 1/a : 0;     backward g*(-1/a^2) above the floor
};

// Epsilon policy, applied uniformly so losses cannot produce infinities:
// log arguments are floored at kLogEps (gradient zero below the floor) and
// division denominators are floored at the same magnitude away from zero,
// preserving sign.
inline constexpr double kLogEps = 1e-12;

class Graph {
public:
    Graph();

    // ---- construction -------------------------------------------------
    Var leaf(double value);
    Var constant(double value) { return leaf(value); }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var neg(Var a);
    Var log(Var a);
    Var exp(Var a);
    Var square(Var a);
    Var sqrt(Var a);
    Var relu(Var a);
    Var leaky_relu(Var a, double slope);
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var abs(Var a);
    Var scale(Var a, double c);
    Var add_const(Var a, double c);

    // Pooled n-ary sum of arbitrary nodes.
    Var sum(std::span<const Var> terms);

    // Strided inner product over two tape ranges:
    //   sum_{i<n} value(a0 + i*astride) * value(b0 + i*bstride).
    // Ranges must already be on the tape; strides may be negative or zero.
    Var sdot(Var a0, std::int32_t astride, Var b0, std::int32_t bstride,
             std::int32_t n);

    // ---- execution ----------------------------------------------------
    // Numeric reverse pass: zeroes grads over [0, root], seeds grad(root)=1,
    // then accumulates in one reverse sweep. After it returns, grad(v) holds
    // d root / d v for every node at or below root.
    void backward(Var root);

    // Symbolic reverse pass: emits tape nodes holding d root / d input for
    // each requested input. Only the subgraph between the inputs and the
    // root is differentiated; everything else (e.g. parameter leaves) is
    // treated as constant. Inputs that cannot reach the root yield a zero
    // leaf. The emitted nodes are ordinary nodes: build further expressions
    // from them and call backward() for second-order gradients.
    std::vector<Var> gradients(Var root, std::span<const Var> inputs);

    // ---- access -------------------------------------------------------
    double value(Var v) const { return val_[check(v)]; }
    double grad(Var v) const { return grad_[check(v)]; }

    // Rebinding a leaf's value between steps (parameter updates). Only
    // leaves may be rebound; derived nodes are immutable.
    void set_value(Var leaf, double v);

    // ---- tape management ----------------------------------------------
    struct Mark {
        std::size_t nodes = 0, pool = 0, spans = 0;
    };
    Mark mark() const { return {val_.size(), pool_.size(), spans_.size()}; }
    void reset(const Mark& m);
    std::size_t size() const { return val_.size(); }

private:
    friend struct Var;

    struct Meta {
        Op op;
        std::int32_t a = -1;  // parent id; pool offset (sum); span index (sdot)
        std::int32_t b = -1;  // parent id; pool count (sum)
    };
    struct SdotSpan {
        std::int32_t a0, b0, n, astride, bstride;
    };

    std::int32_t check(Var v) const;
    Var push(Op op, double value, std::int32_t a, std::int32_t b,
             double aux = 0.0);

    // One entry in an adjoint contribution chain built by gradients().
    // coeff >= 0 names a tape node used as the coefficient; coeff == -1
    // means the constant `c`.
    struct Contrib {
        double c;
        std::int32_t coeff;
        std::int32_t adj;
        std::int32_t next;
    };
    Var materialize_adjoint(std::int32_t head);

    std::vector<double> val_;
    std::vector<double> grad_;
    std::vector<Meta> meta_;
    std::vector<double> aux_;        // per-node scalar payload (slopes, consts)
    std::vector<std::int32_t> pool_; // indices for sum nodes
    std::vector<SdotSpan> spans_;    // descriptors for sdot nodes

    // Scratch reused across gradients() calls to avoid allocation churn.
    std::vector<std::uint8_t> reach_;
    std::vector<std::int32_t> head_;
    std::vector<Contrib> contribs_;
    std::vector<Var> terms_scratch_;
};

// ---- Var operator sugar ------------------------------------------------
// Expression-style composition for readable loss code. All operands must
// belong to the same graph.

inline Var operator+(Var a, Var b) { return a.g->add(a, b); }
inline Var operator-(Var a, Var b) { return a.g->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.g->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.g->div(a, b); }
inline Var operator-(Var a) { return a.g->neg(a); }
inline Var operator+(Var a, double c) { return a.g->add_const(a, c); }
inline Var operator+(double c, Var a) { return a.g->add_const(a, c); }
inline Var operator-(Var a, double c) { return a.g->add_const(a, -c); }
inline Var operator-(double c, Var a) { return a.g->add_const(a.g->neg(a), c); }
inline Var operator*(Var a, double c) { return a.g->scale(a, c); }
inline Var operator*(double c, Var a) { return a.g->scale(a, c); }
inline Var operator/(Var a, double c) { return a.g->scale(a, 1.0 / c); }

inline Var log(Var a) { return a.g->log(a); }
inline Var exp(Var a) { return a.g->exp(a); }
inline Var square(Var a) { return a.g->square(a); }
inline Var sqrt(Var a) { return a.g->sqrt(a); }
inline Var relu(Var a) { return a.g->relu(a); }
inline Var leaky_relu(Var a, double slope) { return a.g->leaky_relu(a, slope); }
inline Var sigmoid(Var a) { return a.g->sigmoid(a); }
inline Var tanh(Var a) { return a.g->tanh(a); }
inline Var abs(Var a) { return a.g->abs(a); }

}  // namespace ganlab::ad
