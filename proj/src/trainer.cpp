#include "ganlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "ganlab/csv.hpp"

namespace fs = std::filesystem;

namespace ganlab::train {

namespace {

constexpr int kCoverageSamples = 1024;  // fakes drawn per coverage row
constexpr double kCoverageMinFrac = 0.02;
constexpr double kBasinDropFrac = 0.10;  // basin drop = 10% of slice range

std::uint64_t stream_seed(std::uint64_t seed, int k) {
    return seed * 8 + static_cast<std::uint64_t>(k);
}

std::uint32_t read_be32_at(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

// Data dimension without loading the full dataset: 2 for the ring, image
// rows*cols for IDX files.
int resolve_dim(const cfg::ExperimentConfig& c) {
    if (c.dataset.kind == cfg::DatasetConfig::Kind::ring) return 2;
    std::ifstream in(c.dataset.images, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open image file '" + c.dataset.images +
                                 "'");
    read_be32_at(in);  // magic, validated by the full load
    read_be32_at(in);  // count
    const int rows = static_cast<int>(read_be32_at(in));
    const int cols = static_cast<int>(read_be32_at(in));
    if (!in || rows < 1 || cols < 1)
        throw std::runtime_error("bad image header in '" + c.dataset.images +
                                 "'");
    return rows * cols;
}

std::vector<double> load_train_data(const cfg::ExperimentConfig& c,
                                    Rng& data_rng) {
    if (c.dataset.kind == cfg::DatasetConfig::Kind::ring) {
        if (c.dataset.train_size == 0) return {};  // stream fresh samples
        return data::sample_ring(c.dataset.ring, c.dataset.train_size,
                                 data_rng);
    }
    data::IdxDataset ds = data::load_idx(c.dataset.images, c.dataset.labels,
                                         c.dataset.limit, true);
    return std::move(ds.images);
}

nn::MlpConfig gen_mlp_config(const cfg::ExperimentConfig& c, int dim) {
    nn::MlpConfig m;
    m.input_dim = c.noise_dim;
    m.hidden_dims = c.g_hidden;
    m.output_dim = dim;
    m.hidden_activation = c.g_activation;
    m.output_activation = nn::Activation::linear;
    return m;
}

nn::MlpConfig disc_mlp_config(const cfg::ExperimentConfig& c, int dim) {
    nn::MlpConfig m;
    m.input_dim = dim;
    m.hidden_dims = c.d_hidden;
    m.output_dim = 1;
    m.hidden_activation = c.d_activation;
    m.output_activation = c.d_sigmoid_head ? nn::Activation::sigmoid
                                           : nn::Activation::linear;
    return m;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (const double x : v) s += x * x;
    return std::sqrt(s);
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

RunState::RunState(const cfg::ExperimentConfig& config, std::uint64_t seed_)
    : cfg(config),
      seed(seed_),
      data_rng(stream_seed(seed_, 1)),
      noise_rng(stream_seed(seed_, 2)),
      diag_rng(stream_seed(seed_, 3)),
      train_set(load_train_data(config, data_rng)),
      dim(resolve_dim(config)),
      g(),
      gen(g, gen_mlp_config(config, dim), stream_seed(seed_, 4)),
      disc(g, disc_mlp_config(config, dim), stream_seed(seed_, 5)),
      opt_g(config.opt_g, gen.params().size()),
      opt_d(config.opt_d, disc.params().size()),
      ewc(config.ewc, disc.params().size()),
      base(g.mark()) {
    if (cfg.diag_every > 0) {
        if (train_set.empty()) {
            anchors = data::sample_ring(cfg.dataset.ring, cfg.n_anchors,
                                        diag_rng);
        } else {
            const int rows = static_cast<int>(train_set.size()) / dim;
            anchors.reserve(static_cast<std::size_t>(cfg.n_anchors) * dim);
            for (int i = 0; i < cfg.n_anchors; ++i) {
                const int r = diag_rng.below(rows);
                anchors.insert(anchors.end(),
                               train_set.begin() + std::size_t(r) * dim,
                               train_set.begin() + std::size_t(r + 1) * dim);
            }
        }
        uhat = diag::random_unit_vector(dim, diag_rng);
    }
}

std::vector<double> RunState::real_batch(int n) {
    if (train_set.empty())
        return data::sample_ring(cfg.dataset.ring, n, data_rng);
    const int rows = static_cast<int>(train_set.size()) / dim;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n) * dim);
    for (int i = 0; i < n; ++i) {
        const int r = data_rng.below(rows);
        out.insert(out.end(), train_set.begin() + std::size_t(r) * dim,
                   train_set.begin() + std::size_t(r + 1) * dim);
    }
    return out;
}

std::vector<double> RunState::fake_batch(int n, Rng& rng) {
    const auto m = g.mark();
    const std::vector<double> noise =
        data::sample_noise(cfg.noise_dim, n, rng);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n) * dim);
    std::vector<ad::Var> zs(cfg.noise_dim);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < cfg.noise_dim; ++j)
            zs[j] = g.leaf(noise[std::size_t(i) * cfg.noise_dim + j]);
        for (const ad::Var y : gen.forward(zs)) out.push_back(g.value(y));
    }
    g.reset(m);
    return out;
}

double RunState::score(std::span<const double> x) {
    const auto m = g.mark();
    std::vector<ad::Var> xs(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) xs[j] = g.leaf(x[j]);
    const double v = g.value(disc.forward(xs)[0]);
    g.reset(m);
    return v;
}

StepMetrics train_step(RunState& s) {
    StepMetrics out;
    ad::Graph& g = s.g;
    const cfg::ExperimentConfig& cfg = s.cfg;
    const int nb = cfg.batch_size;
    const bool use_ewc = cfg.ewc.lambda > 0.0;
    std::vector<double> grads;

    auto numerical = [&s](const std::string& what) {
        return NumericalError(what + " at iteration " +
                              std::to_string(s.iter + 1));
    };

    for (int c = 0; c < cfg.n_critic; ++c) {
        s.last_real = s.real_batch(nb);
        s.last_fake = s.fake_batch(nb, s.noise_rng);
        const auto m = g.mark();
        try {
            ad::Var l_d = gan::discriminator_loss(g, s.disc, cfg.loss,
                                                  s.last_real, s.last_fake,
                                                  s.dim, s.noise_rng);
            const auto params = s.disc.params();
            grads.resize(params.size());
            ad::Var objective = l_d;
            if (use_ewc) {
                // Importance uses the task-loss gradients, penalty excluded.
                g.backward(l_d);
                for (std::size_t i = 0; i < params.size(); ++i)
                    grads[i] = g.grad(params[i]);
                s.ewc.accumulate(grads);
                if (s.ewc.has_anchor()) {
                    objective = g.add(l_d, s.ewc.penalty(g, params));
                    g.backward(objective);
                }
            } else {
                g.backward(l_d);
            }
            out.l_d = g.value(objective);
            if (!std::isfinite(out.l_d))
                throw std::runtime_error("discriminator objective non-finite");
            for (std::size_t i = 0; i < params.size(); ++i)
                grads[i] = g.grad(params[i]);
            out.grad_norm_d = l2_norm(grads);
            s.opt_d.step(g, params, grads);
            if (use_ewc && s.ewc.chunk_ready()) {
                const std::vector<double> pv = s.disc.param_values();
                s.ewc.end_chunk(pv);
            }
        } catch (const std::runtime_error& e) {
            g.reset(m);
            throw numerical(e.what());
        }
        g.reset(m);
    }

    {
        const auto m = g.mark();
        try {
            const std::vector<double> noise =
                data::sample_noise(cfg.noise_dim, nb, s.noise_rng);
            std::vector<ad::Var> rows;
            rows.reserve(static_cast<std::size_t>(nb) * s.dim);
            std::vector<ad::Var> zs(cfg.noise_dim);
            for (int i = 0; i < nb; ++i) {
                for (int j = 0; j < cfg.noise_dim; ++j)
                    zs[j] = g.leaf(noise[std::size_t(i) * cfg.noise_dim + j]);
                for (const ad::Var y : s.gen.forward(zs)) rows.push_back(y);
            }
            const ad::Var l_g = gan::generator_loss(g, s.disc,
                                                    cfg.loss.variant, rows,
                                                    s.dim);
            out.l_g = g.value(l_g);
            if (!std::isfinite(out.l_g))
                throw std::runtime_error("generator objective non-finite");
            g.backward(l_g);
            const auto params = s.gen.params();
            grads.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i)
                grads[i] = g.grad(params[i]);
            out.grad_norm_g = l2_norm(grads);
            s.opt_g.step(g, params, grads);
        } catch (const std::runtime_error& e) {
            g.reset(m);
            throw numerical(e.what());
        }
        g.reset(m);
    }

    s.iter += 1;
    return out;
}

// ---- checkpointing -------------------------------------------------------

namespace {

template <typename T>
std::string save_to_string(const T& obj) {
    std::ostringstream os;
    obj.save(os);
    return os.str();
}

template <typename T>
void load_from_string(T& obj, const std::string& text, const char* what) {
    std::istringstream is(text);
    obj.load(is);
    if (is.fail())
        throw std::runtime_error(std::string("checkpoint: bad ") + what +
                                 " state");
}

void write_doubles(std::ostream& os, std::span<const double> v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const RunState& s, const fs::path& path) {
    nlohmann::json h;
    h["version"] = kVersion;
    h["iter"] = s.iter;
    h["arch"] = {
        {"dim", s.dim},
        {"noise_dim", s.cfg.noise_dim},
        {"g_hidden", s.cfg.g_hidden},
        {"d_hidden", s.cfg.d_hidden},
        {"g_activation", nn::to_string(s.cfg.g_activation)},
        {"d_activation", nn::to_string(s.cfg.d_activation)},
        {"d_head", s.cfg.d_sigmoid_head ? "sigmoid" : "linear"},
    };
    h["g_params"] = s.gen.params().size();
    h["d_params"] = s.disc.params().size();
    h["anchors"] = s.anchors.size();
    h["uhat"] = s.uhat.size();
    h["frozen"] = s.frozen.size();
    h["rng_data"] = save_to_string(s.data_rng);
    h["rng_noise"] = save_to_string(s.noise_rng);
    h["rng_diag"] = save_to_string(s.diag_rng);
    h["opt_g"] = save_to_string(s.opt_g);
    h["opt_d"] = save_to_string(s.opt_d);
    h["ewc"] = save_to_string(s.ewc);

    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write checkpoint '" +
                                     tmp.string() + "'");
        out << h.dump() << '\n';
        const std::vector<double> gp = s.gen.param_values();
        const std::vector<double> dp = s.disc.param_values();
        write_doubles(out, gp);
        write_doubles(out, dp);
        write_doubles(out, s.anchors);
        write_doubles(out, s.uhat);
        write_doubles(out, s.frozen);
        out.flush();
        if (out.fail())
            throw std::runtime_error("failed writing checkpoint '" +
                                     tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

void load_checkpoint(RunState& s, const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open checkpoint '" + path.string() +
                                 "'");
    std::string buf{std::istreambuf_iterator<char>(in),
                    std::istreambuf_iterator<char>()};
    const auto nl = buf.find('\n');
    if (nl == std::string::npos)
        throw std::runtime_error("checkpoint missing header: '" +
                                 path.string() + "'");
    nlohmann::json h = nlohmann::json::parse(buf.substr(0, nl));

    const std::size_t n_g = h.at("g_params").get<std::size_t>();
    const std::size_t n_d = h.at("d_params").get<std::size_t>();
    const std::size_t n_anchor = h.at("anchors").get<std::size_t>();
    const std::size_t n_uhat = h.at("uhat").get<std::size_t>();
    const std::size_t n_frozen = h.at("frozen").get<std::size_t>();
    if (n_g != s.gen.params().size() || n_d != s.disc.params().size())
        throw std::runtime_error(
            "checkpoint architecture mismatch: stored " + std::to_string(n_g) +
            "/" + std::to_string(n_d) + " params, current " +
            std::to_string(s.gen.params().size()) + "/" +
            std::to_string(s.disc.params().size()));

    const std::size_t total = n_g + n_d + n_anchor + n_uhat + n_frozen;
    if (buf.size() - nl - 1 != total * sizeof(double))
        throw std::runtime_error("checkpoint payload truncated: '" +
                                 path.string() + "'");
    const char* p = buf.data() + nl + 1;
    auto take = [&p](std::size_t n) {
        std::vector<double> v(n);
        std::memcpy(v.data(), p, n * sizeof(double));
        p += n * sizeof(double);
        return v;
    };
    const std::vector<double> gp = take(n_g);
    const std::vector<double> dp = take(n_d);
    s.anchors = take(n_anchor);
    s.uhat = take(n_uhat);
    s.frozen = take(n_frozen);

    s.gen.set_param_values(gp);
    s.disc.set_param_values(dp);
    s.iter = h.at("iter").get<std::int64_t>();
    load_from_string(s.data_rng, h.at("rng_data").get<std::string>(), "rng");
    load_from_string(s.noise_rng, h.at("rng_noise").get<std::string>(), "rng");
    load_from_string(s.diag_rng, h.at("rng_diag").get<std::string>(), "rng");
    load_from_string(s.opt_g, h.at("opt_g").get<std::string>(), "optimizer");
    load_from_string(s.opt_d, h.at("opt_d").get<std::string>(), "optimizer");
    load_from_string(s.ewc, h.at("ewc").get<std::string>(), "ewc");
}

CheckpointInfo read_checkpoint_info(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open checkpoint '" + path.string() +
                                 "'");
    std::string header;
    if (!std::getline(in, header))
        throw std::runtime_error("checkpoint missing header: '" +
                                 path.string() + "'");
    const nlohmann::json h = nlohmann::json::parse(header);
    const nlohmann::json& a = h.at("arch");
    CheckpointInfo info;
    info.iter = h.at("iter").get<std::int64_t>();
    info.dim = a.at("dim").get<int>();
    info.noise_dim = a.at("noise_dim").get<int>();
    info.g_hidden = a.at("g_hidden").get<std::vector<int>>();
    info.d_hidden = a.at("d_hidden").get<std::vector<int>>();
    info.g_activation =
        nn::activation_from_string(a.at("g_activation").get<std::string>());
    info.d_activation =
        nn::activation_from_string(a.at("d_activation").get<std::string>());
    info.d_sigmoid_head = a.at("d_head").get<std::string>() == "sigmoid";
    // The serialized optimizer blobs start "optim <kind> ..."; surface the
    // kind so a state built around this checkpoint can be loaded back.
    auto opt_kind = [&](const char* key) {
        std::istringstream ss(h.at(key).get<std::string>());
        std::string tag, kind;
        if (!(ss >> tag >> kind) || tag != "optim")
            throw std::runtime_error("checkpoint has malformed '" +
                                     std::string(key) + "' state: '" +
                                     path.string() + "'");
        return optim::kind_from_string(kind);
    };
    info.opt_g_kind = opt_kind("opt_g");
    info.opt_d_kind = opt_kind("opt_d");
    return info;
}

// ---- per-seed run loop ----------------------------------------------------

namespace {

// Central sub-window of a slice: the middle half of the grid (half the
// half-width on each side of k = 0), where "local" monotonicity is read.
std::span<const double> central_window(const diag::Slice& sl) {
    const int n = static_cast<int>(sl.f.size());
    const int c = n / 2;
    const int q = std::max(1, (n - 1) / 4);
    return std::span<const double>(sl.f).subspan(c - q, 2 * q + 1);
}

struct EventOutputs {
    DiagSummary summary;
    std::vector<double> frozen_row;
};

EventOutputs run_diag_event(RunState& s, std::int64_t t, const fs::path& dir,
                            std::ofstream& coverage_csv,
                            std::ofstream& landscape_csv,
                            std::ofstream& forgetting_csv) {
    EventOutputs out;
    out.summary.iter = t;
    const cfg::ExperimentConfig& cfg = s.cfg;

    // Pinned diag-stream order: frozen draw (first event only), coverage.
    if (s.frozen.empty())
        s.frozen = s.fake_batch(cfg.n_anchors, s.diag_rng);

    const std::size_t n_frozen = s.frozen.size() / s.dim;
    out.frozen_row.resize(n_frozen);
    for (std::size_t i = 0; i < n_frozen; ++i) {
        const double sc = s.score(
            std::span<const double>(s.frozen).subspan(i * s.dim, s.dim));
        out.frozen_row[i] = sc;
        forgetting_csv << t << ',' << i << ',' << csv::format(sc) << '\n';
    }

    std::vector<double> coverage_samples;
    const bool ring = cfg.dataset.kind == cfg::DatasetConfig::Kind::ring;
    if (ring) {
        coverage_samples = s.fake_batch(kCoverageSamples, s.diag_rng);
        const diag::Coverage cov = diag::mode_coverage(
            coverage_samples, cfg.dataset.ring, kCoverageMinFrac);
        out.summary.modes_hit = cov.modes_hit;
        coverage_csv << t << ',' << cov.modes_hit;
        for (const int c : cov.counts) coverage_csv << ',' << c;
        coverage_csv << '\n';
    }

    // Slices over the anchors, shared direction.
    const int n_anchors = static_cast<int>(s.anchors.size()) / s.dim;
    std::ofstream slice_csv(dir / ("slice_" + std::to_string(t) + ".csv"),
                            std::ios::binary | std::ios::trunc);
    slice_csv << "anchor_id,k,score\n";
    auto score_fn = [&s](std::span<const double> x) { return s.score(x); };
    double mono_sum = 0.0;
    int lm_count = 0;
    std::vector<double> widths;
    widths.reserve(n_anchors);
    for (int a = 0; a < n_anchors; ++a) {
        const std::span<const double> anchor(
            s.anchors.data() + std::size_t(a) * s.dim, std::size_t(s.dim));
        const diag::Slice sl = diag::slice_landscape(
            score_fn, anchor, s.uhat, -cfg.slice_half_width,
            cfg.slice_half_width, cfg.slice_points);
        for (std::size_t i = 0; i < sl.k.size(); ++i)
            slice_csv << a << ',' << csv::format(sl.k[i]) << ','
                      << csv::format(sl.f[i]) << '\n';

        const double mono_full = diag::monotonicity_score(sl.f);
        const double mono_central = diag::monotonicity_score(central_window(sl));
        const double slack = diag::local_max_slack(sl.f);
        const bool lm = diag::detect_local_maximum(sl, cfg.lm_window, slack);
        const auto [lo, hi] = std::minmax_element(sl.f.begin(), sl.f.end());
        const double drop = kBasinDropFrac * (*hi - *lo);
        const double width = diag::basin_width(sl, drop, cfg.lm_window, slack);

        landscape_csv << t << ',' << a << ',' << csv::format(mono_full) << ','
                      << csv::format(mono_central) << ',' << (lm ? 1 : 0)
                      << ',' << csv::format(width) << '\n';
        mono_sum += mono_central;
        lm_count += lm ? 1 : 0;
        widths.push_back(width);
    }
    if (n_anchors > 0) {
        out.summary.mean_monotonicity = mono_sum / n_anchors;
        out.summary.frac_local_max = static_cast<double>(lm_count) / n_anchors;
        out.summary.median_basin_width = median(widths);
    }

    // Score-gradient field over a 2-D lattice, labelled by the anchors
    // (real) and the freshly drawn coverage batch (fake).
    if (cfg.field && s.dim == 2) {
        auto field_fn = [&s](std::span<const double> x) {
            const auto m = s.g.mark();
            std::vector<ad::Var> xs(x.size());
            for (std::size_t j = 0; j < x.size(); ++j)
                xs[j] = s.g.leaf(x[j]);
            const ad::Var lg = gan::generator_loss(s.g, s.disc,
                                                   s.cfg.loss.variant, xs,
                                                   s.dim);
            const std::vector<ad::Var> gs = s.g.gradients(lg, xs);
            std::vector<double> v{-s.g.value(gs[0]), -s.g.value(gs[1])};
            s.g.reset(m);
            return v;
        };
        diag::FieldGrid grid;
        grid.x_min = grid.y_min = -cfg.field_extent;
        grid.x_max = grid.y_max = cfg.field_extent;
        grid.nx = grid.ny = cfg.field_points;
        const double label_radius = 3.0 * cfg.dataset.ring.mode_std;
        const std::vector<diag::FieldSample> samples = diag::gradient_field(
            field_fn, grid, s.anchors, coverage_samples, label_radius);
        std::ofstream field_csv(dir / ("field_" + std::to_string(t) + ".csv"),
                                std::ios::binary | std::ios::trunc);
        field_csv << "x,y,vx,vy,label\n";
        for (const auto& fsamp : samples) {
            const char* label =
                fsamp.label == diag::FieldSample::Label::real_region  ? "real"
                : fsamp.label == diag::FieldSample::Label::fake_region ? "fake"
                                                                       : "neutral";
            field_csv << csv::format(fsamp.x) << ',' << csv::format(fsamp.y)
                      << ',' << csv::format(fsamp.vx) << ','
                      << csv::format(fsamp.vy) << ',' << label << '\n';
        }
    }
    return out;
}

std::optional<std::pair<std::int64_t, fs::path>> find_latest_checkpoint(
    const fs::path& dir) {
    std::optional<std::pair<std::int64_t, fs::path>> best;
    if (!fs::exists(dir)) return best;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("ckpt_", 0) != 0 || entry.path().extension() != ".bin")
            continue;
        const std::string digits = name.substr(5, name.size() - 5 - 4);
        if (digits.empty() ||
            digits.find_first_not_of("0123456789") != std::string::npos)
            continue;
        const std::int64_t it = std::stoll(digits);
        if (!best || it > best->first) best = {{it, entry.path()}};
    }
    return best;
}

// Keeps the header plus rows whose leading integer field is <= keep_iter.
void truncate_csv(const fs::path& path, std::int64_t keep_iter) {
    if (!fs::exists(path)) return;
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::vector<std::string> kept;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            kept.push_back(line);
            first = false;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        std::int64_t it = -1;
        try {
            it = std::stoll(line.substr(0, comma));
        } catch (...) {
            continue;
        }
        if (it <= keep_iter) kept.push_back(line);
    }
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const std::string& l : kept) out << l << '\n';
}

// Removes per-event artifacts (slice_*.csv, field_*.csv) and checkpoints
// past the resume point.
void remove_stale_artifacts(const fs::path& dir, std::int64_t keep_iter) {
    std::vector<fs::path> doomed;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        for (const char* prefix : {"slice_", "field_", "ckpt_"}) {
            if (name.rfind(prefix, 0) != 0) continue;
            const auto dot = name.find('.');
            const std::string digits =
                name.substr(std::strlen(prefix), dot - std::strlen(prefix));
            if (digits.empty() ||
                digits.find_first_not_of("0123456789") != std::string::npos)
                continue;
            if (std::stoll(digits) > keep_iter) doomed.push_back(entry.path());
        }
    }
    for (const fs::path& p : doomed) fs::remove(p);
}

void write_abort_dump(const RunState& s, const fs::path& dir) {
    std::ofstream out(dir / "abort_dump.csv", std::ios::binary | std::ios::trunc);
    out << "kind,index";
    for (int j = 0; j < s.dim; ++j) out << ",v_" << j;
    out << '\n';
    auto rows = [&out, &s](const char* kind, const std::vector<double>& batch) {
        const std::size_t n = batch.size() / s.dim;
        for (std::size_t i = 0; i < n; ++i) {
            out << kind << ',' << i;
            for (int j = 0; j < s.dim; ++j)
                out << ',' << csv::format(batch[i * s.dim + j]);
            out << '\n';
        }
    };
    rows("real", s.last_real);
    rows("fake", s.last_fake);
}

std::ofstream open_csv(const fs::path& path, const char* header, bool fresh) {
    if (fresh || !fs::exists(path)) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << header << '\n';
        return out;
    }
    return std::ofstream(path, std::ios::binary | std::ios::app);
}

}  // namespace

SeedResult run_seed(const cfg::ExperimentConfig& cfg, std::uint64_t seed,
                    const fs::path& dir, bool resume) {
    fs::create_directories(dir);
    RunState s(cfg, seed);
    SeedResult res;
    res.seed = seed;

    bool fresh = true;
    if (resume) {
        if (const auto ck = find_latest_checkpoint(dir)) {
            load_checkpoint(s, ck->second);
            truncate_csv(dir / "metrics.csv", s.iter);
            truncate_csv(dir / "coverage.csv", s.iter);
            truncate_csv(dir / "landscape.csv", s.iter);
            truncate_csv(dir / "forgetting.csv", s.iter);
            remove_stale_artifacts(dir, s.iter);
            fresh = false;
        }
    }

    std::ofstream metrics = open_csv(
        dir / "metrics.csv", "iter,l_d,l_g,grad_norm_d,grad_norm_g", fresh);
    std::ofstream coverage;
    if (cfg.dataset.kind == cfg::DatasetConfig::Kind::ring) {
        std::string header = "iter,modes_hit";
        for (int m = 0; m < cfg.dataset.ring.n_modes; ++m)
            header += ",count_" + std::to_string(m);
        coverage = open_csv(dir / "coverage.csv", header.c_str(), fresh);
    }
    std::ofstream landscape = open_csv(
        dir / "landscape.csv",
        "iter,anchor_id,monotonicity,monotonicity_central,local_max,"
        "basin_width",
        fresh);
    std::ofstream forgetting =
        open_csv(dir / "forgetting.csv", "checkpoint,image_id,score", fresh);

    for (std::int64_t t = s.iter + 1; t <= cfg.iters; ++t) {
        StepMetrics m;
        try {
            m = train_step(s);
        } catch (const NumericalError& e) {
            write_abort_dump(s, dir);
            res.aborted = true;
            res.abort_message = e.what();
            return res;
        }
        metrics << t << ',' << csv::format(m.l_d) << ',' << csv::format(m.l_g)
                << ',' << csv::format(m.grad_norm_d) << ','
                << csv::format(m.grad_norm_g) << '\n';

        const bool final_iter = t == cfg.iters;
        if (cfg.diag_every > 0 && (t % cfg.diag_every == 0 || final_iter)) {
            EventOutputs ev =
                run_diag_event(s, t, dir, coverage, landscape, forgetting);
            res.diag.push_back(ev.summary);
            res.frozen_scores.push_back(std::move(ev.frozen_row));
        }
        if (cfg.checkpoint_every > 0 &&
            (t % cfg.checkpoint_every == 0 || final_iter)) {
            metrics.flush();
            if (coverage.is_open()) coverage.flush();
            landscape.flush();
            forgetting.flush();
            save_checkpoint(s, dir / ("ckpt_" + std::to_string(t) + ".bin"));
        }
    }

    if (res.frozen_scores.size() >= 2)
        res.forgetting_var = diag::forgetting_variance(res.frozen_scores);
    return res;
}

DiagSummary write_diagnostics(RunState& s, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream coverage;
    if (s.cfg.dataset.kind == cfg::DatasetConfig::Kind::ring) {
        std::string header = "iter,modes_hit";
        for (int m = 0; m < s.cfg.dataset.ring.n_modes; ++m)
            header += ",count_" + std::to_string(m);
        coverage = open_csv(out_dir / "coverage.csv", header.c_str(), true);
    }
    std::ofstream landscape = open_csv(
        out_dir / "landscape.csv",
        "iter,anchor_id,monotonicity,monotonicity_central,local_max,"
        "basin_width",
        true);
    std::ofstream forgetting =
        open_csv(out_dir / "forgetting.csv", "checkpoint,image_id,score", true);
    return run_diag_event(s, s.iter, out_dir, coverage, landscape, forgetting)
        .summary;
}

RunResult run_experiment(const cfg::ExperimentConfig& cfg, bool resume) {
    cfg.validate();
    RunResult result;
    result.out_dir = cfg.out;
    result.config_hash = cfg::config_hash(cfg::to_raw(cfg));
    fs::create_directories(result.out_dir);

    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["config_hash"] = result.config_hash;
    manifest["seeds"] = cfg.seeds;
    {
        std::ofstream out(result.out_dir / "manifest.json",
                          std::ios::binary | std::ios::trunc);
        out << manifest.dump(2) << '\n';
    }

    for (const std::uint64_t seed : cfg.seeds) {
        SeedResult r = run_seed(cfg, seed,
                                result.out_dir / ("seed_" +
                                                  std::to_string(seed)),
                                resume);
        const bool aborted = r.aborted;
        const std::string msg = r.abort_message;
        result.seeds.push_back(std::move(r));
        if (aborted)
            throw NumericalError("seed " + std::to_string(seed) + ": " + msg);
    }
    return result;
}

}  // namespace ganlab::train
