#pragma once

// Experiment configuration: an INI-style text format (sections of key=value
// lines, '#'/';' comments) parsed in two layers. The raw layer keeps every
// entry as text so sweep overrides can edit values by "section.key" path;
// the typed layer extracts a validated ExperimentConfig, rejecting unknown
// keys and naming the offending key path in every error.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganlab/datasets.hpp"
#include "ganlab/dirac.hpp"
#include "ganlab/ewc.hpp"
#include "ganlab/losses.hpp"
#include "ganlab/nn.hpp"
#include "ganlab/optim.hpp"

namespace ganlab::cfg {

struct ConfigError : std::runtime_error {
    enum class Kind { syntax, missing_key, range, unknown_key };
    ConfigError(Kind k, const std::string& msg)
        : std::runtime_error(msg), kind(k) {}
    Kind kind;
};

// Parsed text form: section -> key -> value, both levels sorted so the
// canonical serialization (and hash) is order-independent.
struct RawConfig {
    std::map<std::string, std::map<std::string, std::string>> sections;
};

// Parses INI text. Syntax errors (bad section header, line without '=',
// duplicate key, empty value) report the line number.
RawConfig parse_raw(const std::string& text);

// Reads and parses a file; throws ConfigError{syntax} when unreadable.
RawConfig parse_raw_file(const std::string& path);

// Sets raw.sections[section][key] = value where path is "section.key".
// The path must name a key the typed layer knows, otherwise unknown_key.
void set_override(RawConfig& raw, const std::string& path,
                  const std::string& value);

// Canonical "section.key=value\n" serialization, sorted.
std::string canonical_text(const RawConfig& raw);

// FNV-1a 64-bit hash of canonical_text, as 16 hex digits.
std::string config_hash(const RawConfig& raw);

struct DatasetConfig {
    enum class Kind { ring, idx } kind = Kind::ring;
    data::RingSpec ring;    // ring parameters (kind == ring)
    int train_size = 0;     // 0 = stream fresh samples every batch
    std::string images;     // IDX image file (kind == idx)
    std::string labels;     // IDX label file (kind == idx)
    int limit = 0;          // keep first N IDX images; 0 = all
};

struct ExperimentConfig {
    DatasetConfig dataset;

    std::vector<int> g_hidden = {64, 64};
    nn::Activation g_activation = nn::Activation::relu;
    int noise_dim = 2;

    std::vector<int> d_hidden = {64, 64};
    nn::Activation d_activation = nn::Activation::relu;
    bool d_sigmoid_head = true;

    gan::GanLossConfig loss;  // variant + lambda + gamma_imb

    optim::OptimConfig opt_g;
    optim::OptimConfig opt_d;

    ewc::EwcConfig ewc;  // lambda == 0 disables the regularizer

    int iters = 10000;
    int batch_size = 64;
    int n_critic = 1;
    std::vector<std::uint64_t> seeds = {0};
    int checkpoint_every = 500;
    std::string out = "runs/out";

    int diag_every = 500;          // 0 disables diagnostics
    double slice_half_width = 2.0;
    int slice_points = 201;
    int n_anchors = 64;
    int lm_window = 5;
    bool field = false;            // emit gradient-field CSVs
    double field_extent = 3.0;
    int field_points = 20;

    // Range checks; errors name the key path ("variant.lambda: ...").
    void validate() const;
};

// Typed extraction: every present key must be known (unknown_key names the
// full path), values must parse and sit in range, defaults fill the rest.
ExperimentConfig config_from_raw(const RawConfig& raw);

// parse_raw_file + config_from_raw + validate.
ExperimentConfig parse_config(const std::string& path);

// Serializes a typed config back to the raw text form (shortest
// round-trip floats), so any config has a canonical hash:
// config_from_raw(to_raw(c)) reproduces c.
RawConfig to_raw(const ExperimentConfig& c);

// Dataset spec strings for the diag subcommand:
//   "ring"                                    defaults
//   "ring:n_modes=8,radius=2,mode_std=0.05"   any subset of ring keys
//   "idx:images=<path>,labels=<path>,limit=N"
DatasetConfig parse_dataset_spec(const std::string& spec);

// Dirac bench presets by name (dirac-plain, dirac-replay).
dirac::DiracConfig dirac_preset(const std::string& name);

}  // namespace ganlab::cfg
