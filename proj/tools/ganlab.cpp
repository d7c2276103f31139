// ganlab: GAN training-dynamics laboratory.
//
// Subcommands:
//   train  --config <path> [--seed N] [--out DIR] [--resume]
//   dirac  --preset <name> [--lr F] [--penalty r1:LAMBDA] [--replay]
//          [--iters N] [--out DIR]
//   diag   --checkpoint <path> --dataset <spec> --out DIR [--seed N]
//   sweep  --config <path> --grid <key=v1,v2,...>
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ganlab/config.hpp"
#include "ganlab/csv.hpp"
#include "ganlab/dirac.hpp"
#include "ganlab/trainer.hpp"

namespace fs = std::filesystem;
using namespace ganlab;

namespace {

void print_run_summary(const train::RunResult& r) {
    std::cout << "run complete: " << r.seeds.size() << " seed(s) under "
              << r.out_dir.string() << " (config " << r.config_hash << ")\n";
    for (const auto& sr : r.seeds) {
        std::cout << "  seed " << sr.seed;
        if (!sr.diag.empty()) {
            const auto& last = sr.diag.back();
            std::cout << ": final iter " << last.iter;
            if (last.modes_hit >= 0)
                std::cout << ", modes hit " << last.modes_hit;
            std::cout << ", mean monotonicity "
                      << csv::format(last.mean_monotonicity)
                      << ", local-max fraction "
                      << csv::format(last.frac_local_max);
            if (sr.frozen_scores.size() >= 2)
                std::cout << ", frozen-score variance "
                          << csv::format(sr.forgetting_var);
        }
        std::cout << '\n';
    }
}

int run_train(const std::string& config_path, long long seed_override,
              const std::string& out_override, bool resume) {
    cfg::RawConfig raw = cfg::parse_raw_file(config_path);
    if (seed_override >= 0)
        cfg::set_override(raw, "trainer.seeds",
                          std::to_string(seed_override));
    if (!out_override.empty())
        cfg::set_override(raw, "trainer.out", out_override);
    const cfg::ExperimentConfig c = cfg::config_from_raw(raw);
    print_run_summary(train::run_experiment(c, resume));
    return 0;
}

int run_dirac(const std::string& preset, double lr, const std::string& penalty,
              bool replay, int iters, std::string out) {
    dirac::DiracConfig c = cfg::dirac_preset(preset);
    if (lr > 0.0) c.lr = lr;
    if (!penalty.empty()) {
        if (penalty.rfind("r1:", 0) != 0)
            throw cfg::ConfigError(cfg::ConfigError::Kind::range,
                                   "--penalty expects r1:LAMBDA, got '" +
                                       penalty + "'");
        try {
            c.r1_lambda = std::stod(penalty.substr(3));
        } catch (const std::exception&) {
            throw cfg::ConfigError(cfg::ConfigError::Kind::range,
                                   "--penalty expects r1:LAMBDA, got '" +
                                       penalty + "'");
        }
        if (c.r1_lambda < 0.0)
            throw cfg::ConfigError(cfg::ConfigError::Kind::range,
                                   "--penalty lambda must be >= 0");
    }
    if (replay) c.replay_old_fake = true;
    if (iters > 0) c.iters = iters;
    if (out.empty()) out = "runs/" + preset;

    const dirac::DiracHistory h = dirac::train_dirac(c);

    fs::create_directories(out);
    {
        std::ofstream csv_out(fs::path(out) / "dirac.csv",
                              std::ios::binary | std::ios::trunc);
        csv_out << "iter,theta,disc_param_norm,objective\n";
        for (std::size_t i = 0; i < h.theta.size(); ++i)
            csv_out << (i + 1) << ',' << csv::format(h.theta[i]) << ','
                    << csv::format(h.disc_param_norm[i]) << ','
                    << csv::format(h.objective[i]) << '\n';
    }
    for (const auto& snap : h.snapshots) {
        std::ofstream curve(fs::path(out) /
                                ("curve_" + std::to_string(snap.iter) + ".csv"),
                            std::ios::binary | std::ios::trunc);
        curve << "x,d\n";
        for (std::size_t i = 0; i < snap.x.size(); ++i)
            curve << csv::format(snap.x[i]) << ',' << csv::format(snap.d[i])
                  << '\n';
    }

    std::cout << "dirac " << preset << ": " << h.theta.size()
              << " iterations, final theta "
              << csv::format(h.theta.empty() ? c.theta0 : h.theta.back())
              << ", artifacts in " << out << '\n';
    if (h.diverged) {
        std::cerr << "dirac run diverged (|theta| exceeded guard)\n";
        return 2;
    }
    return 0;
}

int run_diag(const std::string& ckpt_path, const std::string& dataset_spec,
             const std::string& out, long long seed) {
    const train::CheckpointInfo info = train::read_checkpoint_info(ckpt_path);

    cfg::ExperimentConfig c;
    c.dataset = cfg::parse_dataset_spec(dataset_spec);
    c.g_hidden = info.g_hidden;
    c.g_activation = info.g_activation;
    c.noise_dim = info.noise_dim;
    c.d_hidden = info.d_hidden;
    c.d_activation = info.d_activation;
    c.d_sigmoid_head = info.d_sigmoid_head;
    c.opt_g.kind = info.opt_g_kind;  // so the stored optimizer state loads
    c.opt_d.kind = info.opt_d_kind;
    c.out = out;
    if (c.dataset.kind == cfg::DatasetConfig::Kind::ring && info.dim != 2)
        throw cfg::ConfigError(cfg::ConfigError::Kind::range,
                               "checkpoint was trained on " +
                                   std::to_string(info.dim) +
                                   "-dimensional data, ring spec is 2-D");
    if (info.dim > 2) c.slice_half_width = 100.0;  // image-scale window

    train::RunState s(c, static_cast<std::uint64_t>(seed));
    const std::vector<double> fresh_anchors = s.anchors;
    const std::vector<double> fresh_uhat = s.uhat;
    train::load_checkpoint(s, ckpt_path);
    // A run that never scheduled diagnostics stored no fixtures; fall back
    // to the ones drawn for this invocation's seed.
    if (s.anchors.empty()) s.anchors = fresh_anchors;
    if (s.uhat.empty()) s.uhat = fresh_uhat;

    const train::DiagSummary sum = train::write_diagnostics(s, out);
    std::cout << "diagnostics for iter " << sum.iter << " in " << out;
    if (sum.modes_hit >= 0) std::cout << ": modes hit " << sum.modes_hit;
    std::cout << ", mean monotonicity " << csv::format(sum.mean_monotonicity)
              << ", local-max fraction " << csv::format(sum.frac_local_max)
              << ", median basin width "
              << csv::format(sum.median_basin_width) << '\n';
    return 0;
}

int run_sweep(const std::string& config_path, const std::string& grid) {
    const auto eq = grid.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == grid.size())
        throw cfg::ConfigError(cfg::ConfigError::Kind::syntax,
                               "--grid expects key=v1,v2,..., got '" + grid +
                                   "'");
    const std::string key = grid.substr(0, eq);
    std::vector<std::string> values;
    {
        std::string rest = grid.substr(eq + 1), item;
        std::istringstream in(rest);
        while (std::getline(in, item, ','))
            if (!item.empty()) values.push_back(item);
    }
    if (values.empty())
        throw cfg::ConfigError(cfg::ConfigError::Kind::syntax,
                               "--grid has no values");

    const cfg::RawConfig base = cfg::parse_raw_file(config_path);
    std::string base_out = "runs/sweep";
    if (const auto t = base.sections.find("trainer");
        t != base.sections.end()) {
        if (const auto o = t->second.find("out"); o != t->second.end())
            base_out = o->second;
    }

    for (const std::string& value : values) {
        cfg::RawConfig raw = base;
        cfg::set_override(raw, key, value);
        std::string leaf = key + "=" + value;
        for (char& ch : leaf)
            if (ch == '/') ch = '_';
        cfg::set_override(raw, "trainer.out", base_out + "/" + leaf);
        const cfg::ExperimentConfig c = cfg::config_from_raw(raw);
        std::cout << "sweep point " << key << " = " << value << '\n';
        print_run_summary(train::run_experiment(c, false));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GAN training-dynamics laboratory"};
    app.require_subcommand(1);

    std::string train_config, train_out;
    long long train_seed = -1;
    bool train_resume = false;
    auto* t = app.add_subcommand("train", "run a training experiment");
    t->add_option("--config", train_config, "experiment config file")
        ->required();
    t->add_option("--seed", train_seed, "run only this seed");
    t->add_option("--out", train_out, "output directory override");
    t->add_flag("--resume", train_resume, "resume from the last checkpoint");

    std::string dirac_preset, dirac_penalty, dirac_out;
    double dirac_lr = -1.0;
    bool dirac_replay = false;
    int dirac_iters = -1;
    auto* d = app.add_subcommand("dirac", "run the 1-D point-mass bench");
    d->add_option("--preset", dirac_preset, "dirac-plain or dirac-replay")
        ->required();
    d->add_option("--lr", dirac_lr, "learning-rate override");
    d->add_option("--penalty", dirac_penalty, "r1:LAMBDA");
    d->add_flag("--replay", dirac_replay, "enable the one-sample replay buffer");
    d->add_option("--iters", dirac_iters, "iteration-count override");
    d->add_option("--out", dirac_out, "output directory");

    std::string diag_ckpt, diag_dataset, diag_out;
    long long diag_seed = 0;
    auto* dg = app.add_subcommand("diag", "diagnostics for a checkpoint");
    dg->add_option("--checkpoint", diag_ckpt, "checkpoint file")->required();
    dg->add_option("--dataset", diag_dataset,
                   "dataset spec (ring[:k=v,...] or idx:images=..,labels=..)")
        ->required();
    dg->add_option("--out", diag_out, "output directory")->required();
    dg->add_option("--seed", diag_seed, "anchor-draw seed (default 0)");

    std::string sweep_config, sweep_grid;
    auto* sw = app.add_subcommand("sweep", "grid sweep over one config key");
    sw->add_option("--config", sweep_config, "experiment config file")
        ->required();
    sw->add_option("--grid", sweep_grid, "key=v1,v2,...")->required();

    try {
        app.parse(argc, argv);
        if (*t) return run_train(train_config, train_seed, train_out,
                                 train_resume);
        if (*d) return run_dirac(dirac_preset, dirac_lr, dirac_penalty,
                                 dirac_replay, dirac_iters, dirac_out);
        if (*dg) return run_diag(diag_ckpt, diag_dataset, diag_out, diag_seed);
        if (*sw) return run_sweep(sweep_config, sweep_grid);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage problems are config errors
    } catch (const cfg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const train::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
