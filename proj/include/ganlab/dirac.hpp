#pragma once

// One-dimensional two-player bench: the generator is a single point theta
// chasing a real point fixed at x0 = 0; the discriminator is either linear
// D(x) = psi*x or a tiny one-hidden-layer net D(x) = Psi1 . act(Psi0 * x),
// with all discriminator parameters clamped to [-1,1] by projection after
// every step. The zero-sum objective is
//
//     L_D = -D(0) + D(theta),   L_G = -L_D,
//
// optionally with an R1 penalty at the real point and/or a one-element
// replay buffer holding the previous fake position as an extra fake term.
// This bench reproduces the oscillation/convergence dichotomy and the
// replay experiment, and doubles as the test oracle for the closed-form
// optimal discriminator.

#include <string>
#include <vector>

#include "ganlab/nn.hpp"

namespace ganlab::dirac {

enum class DiscKind { linear, mlp };

struct DiracConfig {
    DiscKind disc = DiscKind::linear;
    int n_hidden = 2;  // mlp only
    nn::Activation activation = nn::Activation::sigmoid;  // mlp only
    double lr = 0.1;   // plain gradient descent on both players
    double r1_lambda = 0.0;  // > 0 adds lambda * (d D/d x |_{x=0})^2 to L_D
    bool replay_old_fake = false;
    int iters = 5000;
    double theta0 = 0.5;
    double psi0 = 0.5;  // linear disc initial value
    int snapshot_every = 0;   // 0 = only the final snapshot
    double curve_half_width = 2.0;  // snapshot grid is [-w, w]
    int curve_points = 201;
};

struct CurveSnapshot {
    int iter = 0;
    std::vector<double> x;
    std::vector<double> d;  // D(x) at the snapshot's parameters
};

struct DiracHistory {
    std::vector<double> theta;            // per iteration (after the step)
    std::vector<double> disc_param_norm;  // L2 norm of disc parameters
    std::vector<double> objective;        // L_D value seen that iteration
    std::vector<CurveSnapshot> snapshots;
    bool diverged = false;
};

// Optimal clamped-discriminator parameters for separating the real point 0
// from a fake point y0: Psi0 = sign(y0)*ones, Psi1 = -ones. Throws when
// y0 = 0 (nothing to separate).
struct DiscParams {
    std::vector<double> psi0;
    std::vector<double> psi1;
};
DiscParams optimal_discriminator_closed_form(double y0, int n,
                                             nn::Activation activation);

// Exhaustive grid argmax of D(0) - D(y0) over the clamped box [-1,1]^{2n},
// grid points -1, -1+step, ..., 1; ties broken by lexicographic parameter
// order (first grid point found wins). Guarded to n <= 2.
struct BruteForceResult {
    DiscParams params;
    double objective = 0.0;
};
BruteForceResult brute_force_optimal(double y0, int n,
                                     nn::Activation activation,
                                     double grid_step);

// Evaluates D(x) = Psi1 . act(Psi0 * x) for given parameters.
double dhat_eval(const DiscParams& p, nn::Activation activation, double x);

// Runs the alternating-descent simulation. Deterministic (no rng anywhere;
// the mlp discriminator starts from a fixed mixed-sign initialization).
DiracHistory train_dirac(const DiracConfig& cfg);

}  // namespace ganlab::dirac
