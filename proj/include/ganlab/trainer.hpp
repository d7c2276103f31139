#pragma once

// Experiment orchestration: the alternating-SGD training loop over one
// (config, seed) pair, checkpointing with exact resume, scheduled
// diagnostics on an isolated rng stream, and the multi-seed runner that
// lays out artifact directories.
//
// Determinism contract: (config, seed) -> byte-identical artifacts on the
// same platform. Everything random flows through three serializable rng
// streams (data, noise, diagnostics); a checkpoint stores parameters,
// optimizer and regularizer state, all three streams, and the diagnostic
// fixtures (anchors, shared direction, frozen fake batch), so a resumed run
// continues the exact sample sequence of an uninterrupted one.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganlab/autodiff.hpp"
#include "ganlab/config.hpp"
#include "ganlab/datasets.hpp"
#include "ganlab/diagnostics.hpp"
#include "ganlab/ewc.hpp"
#include "ganlab/losses.hpp"
#include "ganlab/nn.hpp"
#include "ganlab/optim.hpp"
#include "ganlab/rng.hpp"

namespace ganlab::train {

inline constexpr const char* kVersion = "1.0.0";

// Raised when training hits a non-finite loss or gradient; the run loop
// writes a dump of the last batch next to the metrics before rethrowing.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StepMetrics {
    double l_d = 0.0;          // discriminator objective (last critic step)
    double l_g = 0.0;          // generator objective
    double grad_norm_d = 0.0;  // L2 norm of D parameter gradients
    double grad_norm_g = 0.0;  // L2 norm of G parameter gradients
};

// Everything one training run owns. Members initialize in declaration
// order: rng streams first, then data, then the tape and both networks
// (parameter leaves land below the watermark `base`).
struct RunState {
    RunState(const cfg::ExperimentConfig& config, std::uint64_t seed);

    RunState(const RunState&) = delete;
    RunState& operator=(const RunState&) = delete;

    cfg::ExperimentConfig cfg;
    std::uint64_t seed;

    Rng data_rng;   // real samples / finite-set index picks
    Rng noise_rng;  // generator inputs and interpolation draws
    Rng diag_rng;   // anchors, shared direction, frozen/coverage batches

    std::vector<double> train_set;  // finite training data; empty = stream
    int dim;                        // data dimension

    ad::Graph g;
    nn::MlpNetwork gen;
    nn::MlpNetwork disc;
    optim::Optimizer opt_g;
    optim::Optimizer opt_d;
    ewc::EwcState ewc;
    ad::Graph::Mark base;  // tape watermark above the parameter leaves

    std::int64_t iter = 0;

    std::vector<double> anchors;  // n_anchors rows of dim (real points)
    std::vector<double> uhat;     // shared slice direction, unit norm
    std::vector<double> frozen;   // frozen fake batch; empty until drawn

    std::vector<double> last_real;  // most recent batches, for abort dumps
    std::vector<double> last_fake;

    // One real batch (streamed or index-sampled) as row-major values.
    std::vector<double> real_batch(int n);
    // One generator output batch as plain values (tape left unchanged).
    std::vector<double> fake_batch(int n, Rng& rng);
    // Discriminator output at a single point (tape left unchanged).
    double score(std::span<const double> x);
};

// n_critic discriminator updates (fresh real+fake batches each, with the
// consolidation hooks when enabled), then one generator update. Throws
// NumericalError on a non-finite loss or gradient.
StepMetrics train_step(RunState& s);

// Full run state to/from one file (atomic via tmp+rename on save).
void save_checkpoint(const RunState& s, const std::filesystem::path& path);
void load_checkpoint(RunState& s, const std::filesystem::path& path);

// Architecture echo stored in every checkpoint, enough to rebuild matching
// networks without the original config file.
struct CheckpointInfo {
    std::int64_t iter = 0;
    int dim = 0;
    int noise_dim = 0;
    std::vector<int> g_hidden;
    std::vector<int> d_hidden;
    nn::Activation g_activation = nn::Activation::relu;
    nn::Activation d_activation = nn::Activation::relu;
    bool d_sigmoid_head = true;
    optim::Kind opt_g_kind = optim::Kind::sgd;
    optim::Kind opt_d_kind = optim::Kind::sgd;
};
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

// Per-diagnostics-event summary, one row per scheduled event.
struct DiagSummary {
    std::int64_t iter = 0;
    int modes_hit = -1;                  // -1 when coverage does not apply
    double mean_monotonicity = 0.0;      // central-window mean over anchors
    double frac_local_max = 0.0;         // fraction of anchors, lm_window
    double median_basin_width = 0.0;     // drop = 10% of slice range
};

struct SeedResult {
    std::uint64_t seed = 0;
    bool aborted = false;
    std::string abort_message;
    std::vector<DiagSummary> diag;
    std::vector<std::vector<double>> frozen_scores;  // [event][image]
    double forgetting_var = 0.0;  // set once >= 2 events scored the batch
};

struct RunResult {
    std::filesystem::path out_dir;
    std::string config_hash;
    std::vector<SeedResult> seeds;
};

// One seed: artifacts under `dir` (metrics.csv, ckpt_*.bin, slice_*.csv,
// coverage.csv, landscape.csv, forgetting.csv, optional field_*.csv).
// With resume = true, picks up from the newest checkpoint and reproduces
// the uninterrupted run byte-for-byte.
SeedResult run_seed(const cfg::ExperimentConfig& cfg, std::uint64_t seed,
                    const std::filesystem::path& dir, bool resume);

// One-shot diagnostics of the current state into out_dir (slice CSV,
// landscape.csv, coverage.csv for ring data, forgetting.csv scores of the
// frozen batch). Used by the diag subcommand on a loaded checkpoint.
DiagSummary write_diagnostics(RunState& s,
                              const std::filesystem::path& out_dir);

// All seeds: per-seed subdirectories seed_<n>/ under cfg.out plus a
// manifest.json recording the library version and the config hash.
RunResult run_experiment(const cfg::ExperimentConfig& cfg,
                         bool resume = false);

}  // namespace ganlab::train
