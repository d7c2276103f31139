#include "ganlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "ganlab/csv.hpp"

namespace ganlab::cfg {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void syntax_error(int line, const std::string& msg) {
    throw ConfigError(ConfigError::Kind::syntax,
                      "config line " + std::to_string(line) + ": " + msg);
}

// Schema: every section and key the typed layer understands. Anything in a
// parsed file outside this table is rejected as an unknown key.
const std::map<std::string, std::vector<std::string>>& schema() {
    static const std::map<std::string, std::vector<std::string>> s = {
        {"dataset",
         {"kind", "n_modes", "radius", "mode_std", "train_size", "images",
          "labels", "limit"}},
        {"generator", {"hidden", "activation", "noise_dim"}},
        {"discriminator", {"hidden", "activation", "head"}},
        {"variant", {"name", "lambda", "gamma_imb"}},
        {"optimizer_g", {"kind", "lr", "momentum", "beta1", "beta2"}},
        {"optimizer_d", {"kind", "lr", "momentum", "beta1", "beta2"}},
        {"ewc", {"lambda", "alpha", "tau"}},
        {"trainer",
         {"iters", "batch_size", "n_critic", "seeds", "checkpoint_every",
          "out"}},
        {"diagnostics",
         {"every", "slice_half_width", "slice_points", "anchors", "window",
          "field", "field_extent", "field_points"}},
    };
    return s;
}

bool known_key(const std::string& section, const std::string& key) {
    const auto it = schema().find(section);
    if (it == schema().end()) return false;
    return std::find(it->second.begin(), it->second.end(), key) !=
           it->second.end();
}

[[noreturn]] void unknown_key_error(const std::string& path) {
    throw ConfigError(ConfigError::Kind::unknown_key,
                      "unknown config key '" + path + "'");
}

[[noreturn]] void range_error(const std::string& path,
                              const std::string& what) {
    throw ConfigError(ConfigError::Kind::range, path + ": " + what);
}

double parse_double(const std::string& path, const std::string& v) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end)
        range_error(path, "expected a real number, got '" + v + "'");
    return out;
}

long long parse_ll(const std::string& path, const std::string& v) {
    long long out = 0;
    const char* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end)
        range_error(path, "expected an integer, got '" + v + "'");
    return out;
}

int parse_int(const std::string& path, const std::string& v) {
    const long long x = parse_ll(path, v);
    if (x < INT32_MIN || x > INT32_MAX) range_error(path, "integer overflow");
    return static_cast<int>(x);
}

bool parse_bool(const std::string& path, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    range_error(path, "expected a boolean (true/false), got '" + v + "'");
}

std::vector<std::string> split_commas(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(v);
    while (std::getline(in, cur, ',')) out.push_back(trim(cur));
    return out;
}

// Tracks which raw keys the typed extraction consumed so leftovers can be
// reported as unknown keys with their full path.
class Reader {
  public:
    explicit Reader(const RawConfig& raw) : raw_(raw) {}

    bool has(const std::string& section, const std::string& key) const {
        const auto s = raw_.sections.find(section);
        return s != raw_.sections.end() && s->second.count(key) > 0;
    }

    std::string take(const std::string& section, const std::string& key,
                     const std::string& fallback) {
        const auto s = raw_.sections.find(section);
        if (s == raw_.sections.end()) return fallback;
        const auto k = s->second.find(key);
        if (k == s->second.end()) return fallback;
        used_.insert(section + "." + key);
        return k->second;
    }

    double take_double(const std::string& section, const std::string& key,
                       double fallback) {
        if (!has(section, key)) return fallback;
        return parse_double(section + "." + key, take(section, key, ""));
    }

    int take_int(const std::string& section, const std::string& key,
                 int fallback) {
        if (!has(section, key)) return fallback;
        return parse_int(section + "." + key, take(section, key, ""));
    }

    bool take_bool(const std::string& section, const std::string& key,
                   bool fallback) {
        if (!has(section, key)) return fallback;
        return parse_bool(section + "." + key, take(section, key, ""));
    }

    void finish() const {
        for (const auto& [section, keys] : raw_.sections)
            for (const auto& [key, value] : keys) {
                const std::string path = section + "." + key;
                if (used_.count(path) == 0) unknown_key_error(path);
            }
    }

  private:
    const RawConfig& raw_;
    std::set<std::string> used_;
};

std::vector<int> take_int_list(Reader& r, const std::string& section,
                               const std::string& key,
                               std::vector<int> fallback) {
    if (!r.has(section, key)) return fallback;
    const std::string path = section + "." + key;
    std::vector<int> out;
    for (const std::string& item : split_commas(r.take(section, key, "")))
        out.push_back(parse_int(path, item));
    return out;
}

std::vector<std::uint64_t> take_u64_list(Reader& r, const std::string& section,
                                         const std::string& key,
                                         std::vector<std::uint64_t> fallback) {
    if (!r.has(section, key)) return fallback;
    const std::string path = section + "." + key;
    std::vector<std::uint64_t> out;
    for (const std::string& item : split_commas(r.take(section, key, ""))) {
        const long long x = parse_ll(path, item);
        if (x < 0) range_error(path, "seeds must be >= 0");
        out.push_back(static_cast<std::uint64_t>(x));
    }
    return out;
}

nn::Activation take_activation(Reader& r, const std::string& section,
                               const std::string& key,
                               nn::Activation fallback) {
    if (!r.has(section, key)) return fallback;
    const std::string v = r.take(section, key, "");
    try {
        return nn::activation_from_string(v);
    } catch (const std::invalid_argument&) {
        range_error(section + "." + key, "unknown activation '" + v + "'");
    }
}

void read_optimizer(Reader& r, const std::string& section,
                    optim::OptimConfig& cfg) {
    if (r.has(section, "kind")) {
        const std::string v = r.take(section, "kind", "");
        try {
            cfg.kind = optim::kind_from_string(v);
        } catch (const std::invalid_argument&) {
            range_error(section + ".kind", "unknown optimizer '" + v + "'");
        }
    }
    cfg.lr = r.take_double(section, "lr", cfg.lr);
    cfg.momentum = r.take_double(section, "momentum", cfg.momentum);
    cfg.beta1 = r.take_double(section, "beta1", cfg.beta1);
    cfg.beta2 = r.take_double(section, "beta2", cfg.beta2);
}

void check_optimizer(const std::string& section,
                     const optim::OptimConfig& cfg) {
    if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr))
        range_error(section + ".lr", "must be >= 0");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
        range_error(section + ".momentum", "must be in [0,1)");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0))
        range_error(section + ".beta1", "must be in [0,1)");
    if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
        range_error(section + ".beta2", "must be in [0,1)");
}

}  // namespace

RawConfig parse_raw(const std::string& text) {
    RawConfig raw;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                syntax_error(lineno, "unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty()) syntax_error(lineno, "empty section name");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            syntax_error(lineno, "expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) syntax_error(lineno, "empty key");
        if (value.empty()) syntax_error(lineno, "empty value for '" + key + "'");
        if (section.empty())
            syntax_error(lineno, "key '" + key + "' outside any section");
        auto& sec = raw.sections[section];
        if (!sec.emplace(key, value).second)
            syntax_error(lineno, "duplicate key '" + section + "." + key + "'");
    }
    return raw;
}

RawConfig parse_raw_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError(ConfigError::Kind::syntax,
                          "cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_raw(buf.str());
}

void set_override(RawConfig& raw, const std::string& path,
                  const std::string& value) {
    const auto dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == path.size())
        throw ConfigError(ConfigError::Kind::syntax,
                          "override path must be 'section.key', got '" + path +
                              "'");
    const std::string section = path.substr(0, dot);
    const std::string key = path.substr(dot + 1);
    if (!known_key(section, key)) unknown_key_error(path);
    raw.sections[section][key] = value;
}

std::string canonical_text(const RawConfig& raw) {
    std::string out;
    for (const auto& [section, keys] : raw.sections)
        for (const auto& [key, value] : keys)
            out += section + "." + key + "=" + value + "\n";
    return out;
}

std::string config_hash(const RawConfig& raw) {
    const std::string text = canonical_text(raw);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    static const char* hex = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = hex[h & 0xf];
        h >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf);
}

ExperimentConfig config_from_raw(const RawConfig& raw) {
    // Reject unknown sections up front so the error names them.
    for (const auto& [section, keys] : raw.sections) {
        if (schema().count(section) > 0) continue;
        const std::string first =
            keys.empty() ? std::string("?") : keys.begin()->first;
        unknown_key_error(section + "." + first);
    }

    Reader r(raw);
    ExperimentConfig c;

    {
        const std::string kind = r.take("dataset", "kind", "ring");
        if (kind == "ring")
            c.dataset.kind = DatasetConfig::Kind::ring;
        else if (kind == "idx")
            c.dataset.kind = DatasetConfig::Kind::idx;
        else
            range_error("dataset.kind", "expected 'ring' or 'idx', got '" +
                                            kind + "'");
        c.dataset.ring.n_modes =
            r.take_int("dataset", "n_modes", c.dataset.ring.n_modes);
        c.dataset.ring.radius =
            r.take_double("dataset", "radius", c.dataset.ring.radius);
        c.dataset.ring.mode_std =
            r.take_double("dataset", "mode_std", c.dataset.ring.mode_std);
        c.dataset.train_size =
            r.take_int("dataset", "train_size", c.dataset.train_size);
        c.dataset.images = r.take("dataset", "images", "");
        c.dataset.labels = r.take("dataset", "labels", "");
        c.dataset.limit = r.take_int("dataset", "limit", 0);
    }

    c.g_hidden = take_int_list(r, "generator", "hidden", c.g_hidden);
    c.g_activation =
        take_activation(r, "generator", "activation", c.g_activation);
    c.noise_dim = r.take_int("generator", "noise_dim", c.noise_dim);

    c.d_hidden = take_int_list(r, "discriminator", "hidden", c.d_hidden);
    c.d_activation =
        take_activation(r, "discriminator", "activation", c.d_activation);
    {
        const std::string head = r.take("discriminator", "head", "sigmoid");
        if (head == "sigmoid")
            c.d_sigmoid_head = true;
        else if (head == "linear")
            c.d_sigmoid_head = false;
        else
            range_error("discriminator.head",
                        "expected 'sigmoid' or 'linear', got '" + head + "'");
    }

    {
        const std::string name = r.take("variant", "name", "gan_ns");
        try {
            c.loss.variant = gan::variant_from_string(name);
        } catch (const std::invalid_argument&) {
            range_error("variant.name", "unknown variant '" + name + "'");
        }
        c.loss.lambda = r.take_double("variant", "lambda", c.loss.lambda);
        c.loss.gamma_imb =
            r.take_double("variant", "gamma_imb", c.loss.gamma_imb);
    }

    read_optimizer(r, "optimizer_g", c.opt_g);
    read_optimizer(r, "optimizer_d", c.opt_d);

    c.ewc.lambda = r.take_double("ewc", "lambda", c.ewc.lambda);
    c.ewc.alpha = r.take_double("ewc", "alpha", c.ewc.alpha);
    c.ewc.tau = r.take_int("ewc", "tau", c.ewc.tau);

    c.iters = r.take_int("trainer", "iters", c.iters);
    c.batch_size = r.take_int("trainer", "batch_size", c.batch_size);
    c.n_critic = r.take_int("trainer", "n_critic", c.n_critic);
    c.seeds = take_u64_list(r, "trainer", "seeds", c.seeds);
    c.checkpoint_every =
        r.take_int("trainer", "checkpoint_every", c.checkpoint_every);
    c.out = r.take("trainer", "out", c.out);

    c.diag_every = r.take_int("diagnostics", "every", c.diag_every);
    c.slice_half_width =
        r.take_double("diagnostics", "slice_half_width", c.slice_half_width);
    c.slice_points = r.take_int("diagnostics", "slice_points", c.slice_points);
    c.n_anchors = r.take_int("diagnostics", "anchors", c.n_anchors);
    c.lm_window = r.take_int("diagnostics", "window", c.lm_window);
    c.field = r.take_bool("diagnostics", "field", c.field);
    c.field_extent =
        r.take_double("diagnostics", "field_extent", c.field_extent);
    c.field_points = r.take_int("diagnostics", "field_points", c.field_points);

    r.finish();
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    if (dataset.ring.n_modes < 1) range_error("dataset.n_modes", "must be >= 1");
    if (!(dataset.ring.radius > 0.0))
        range_error("dataset.radius", "must be > 0");
    if (!(dataset.ring.mode_std >= 0.0))
        range_error("dataset.mode_std", "must be >= 0");
    if (dataset.train_size < 0)
        range_error("dataset.train_size", "must be >= 0");
    if (dataset.limit < 0) range_error("dataset.limit", "must be >= 0");
    if (dataset.kind == DatasetConfig::Kind::idx) {
        if (dataset.images.empty())
            throw ConfigError(ConfigError::Kind::missing_key,
                              "missing required key 'dataset.images' for "
                              "kind = idx");
        if (dataset.labels.empty())
            throw ConfigError(ConfigError::Kind::missing_key,
                              "missing required key 'dataset.labels' for "
                              "kind = idx");
    }

    for (const int h : g_hidden)
        if (h < 1) range_error("generator.hidden", "layer widths must be >= 1");
    if (noise_dim < 1) range_error("generator.noise_dim", "must be >= 1");
    for (const int h : d_hidden)
        if (h < 1)
            range_error("discriminator.hidden", "layer widths must be >= 1");

    if (!(loss.lambda >= 0.0) || !std::isfinite(loss.lambda))
        range_error("variant.lambda", "must be >= 0");
    if (!(loss.gamma_imb >= 1.0) || !std::isfinite(loss.gamma_imb))
        range_error("variant.gamma_imb", "must be >= 1");

    check_optimizer("optimizer_g", opt_g);
    check_optimizer("optimizer_d", opt_d);

    if (!(ewc.lambda >= 0.0)) range_error("ewc.lambda", "must be >= 0");
    if (!(ewc.alpha >= 0.0 && ewc.alpha <= 1.0))
        range_error("ewc.alpha", "must be in [0,1]");
    if (ewc.tau < 1) range_error("ewc.tau", "must be >= 1");

    if (iters < 1) range_error("trainer.iters", "must be >= 1");
    if (batch_size < 1) range_error("trainer.batch_size", "must be >= 1");
    if (n_critic < 1) range_error("trainer.n_critic", "must be >= 1");
    if (seeds.empty()) range_error("trainer.seeds", "must be non-empty");
    if (checkpoint_every < 0)
        range_error("trainer.checkpoint_every", "must be >= 0");
    if (out.empty()) range_error("trainer.out", "must be non-empty");

    if (diag_every < 0) range_error("diagnostics.every", "must be >= 0");
    if (!(slice_half_width > 0.0))
        range_error("diagnostics.slice_half_width", "must be > 0");
    if (slice_points < 3 || slice_points % 2 == 0)
        range_error("diagnostics.slice_points", "must be odd and >= 3");
    if (n_anchors < 1) range_error("diagnostics.anchors", "must be >= 1");
    if (lm_window < 1) range_error("diagnostics.window", "must be >= 1");
    if (!(field_extent > 0.0))
        range_error("diagnostics.field_extent", "must be > 0");
    if (field_points < 2)
        range_error("diagnostics.field_points", "must be >= 2");
}

ExperimentConfig parse_config(const std::string& path) {
    return config_from_raw(parse_raw_file(path));
}

RawConfig to_raw(const ExperimentConfig& c) {
    RawConfig raw;
    auto put = [&raw](const std::string& section, const std::string& key,
                      const std::string& value) {
        raw.sections[section][key] = value;
    };
    auto join_ints = [](const auto& xs) {
        std::string out;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (i) out += ',';
            out += std::to_string(xs[i]);
        }
        return out;
    };

    put("dataset", "kind",
        c.dataset.kind == DatasetConfig::Kind::ring ? "ring" : "idx");
    put("dataset", "n_modes", std::to_string(c.dataset.ring.n_modes));
    put("dataset", "radius", csv::format(c.dataset.ring.radius));
    put("dataset", "mode_std", csv::format(c.dataset.ring.mode_std));
    put("dataset", "train_size", std::to_string(c.dataset.train_size));
    if (!c.dataset.images.empty()) put("dataset", "images", c.dataset.images);
    if (!c.dataset.labels.empty()) put("dataset", "labels", c.dataset.labels);
    if (c.dataset.limit != 0)
        put("dataset", "limit", std::to_string(c.dataset.limit));

    put("generator", "hidden", join_ints(c.g_hidden));
    put("generator", "activation", nn::to_string(c.g_activation));
    put("generator", "noise_dim", std::to_string(c.noise_dim));

    put("discriminator", "hidden", join_ints(c.d_hidden));
    put("discriminator", "activation", nn::to_string(c.d_activation));
    put("discriminator", "head", c.d_sigmoid_head ? "sigmoid" : "linear");

    put("variant", "name", gan::to_string(c.loss.variant));
    put("variant", "lambda", csv::format(c.loss.lambda));
    put("variant", "gamma_imb", csv::format(c.loss.gamma_imb));

    for (const auto& [section, opt] :
         {std::pair<std::string, const optim::OptimConfig*>{"optimizer_g",
                                                            &c.opt_g},
          {"optimizer_d", &c.opt_d}}) {
        put(section, "kind", optim::to_string(opt->kind));
        put(section, "lr", csv::format(opt->lr));
        put(section, "momentum", csv::format(opt->momentum));
        put(section, "beta1", csv::format(opt->beta1));
        put(section, "beta2", csv::format(opt->beta2));
    }

    put("ewc", "lambda", csv::format(c.ewc.lambda));
    put("ewc", "alpha", csv::format(c.ewc.alpha));
    put("ewc", "tau", std::to_string(c.ewc.tau));

    put("trainer", "iters", std::to_string(c.iters));
    put("trainer", "batch_size", std::to_string(c.batch_size));
    put("trainer", "n_critic", std::to_string(c.n_critic));
    put("trainer", "seeds", join_ints(c.seeds));
    put("trainer", "checkpoint_every", std::to_string(c.checkpoint_every));
    put("trainer", "out", c.out);

    put("diagnostics", "every", std::to_string(c.diag_every));
    put("diagnostics", "slice_half_width", csv::format(c.slice_half_width));
    put("diagnostics", "slice_points", std::to_string(c.slice_points));
    put("diagnostics", "anchors", std::to_string(c.n_anchors));
    put("diagnostics", "window", std::to_string(c.lm_window));
    put("diagnostics", "field", c.field ? "true" : "false");
    put("diagnostics", "field_extent", csv::format(c.field_extent));
    put("diagnostics", "field_points", std::to_string(c.field_points));
    return raw;
}

DatasetConfig parse_dataset_spec(const std::string& spec) {
    DatasetConfig d;
    std::string kind = spec, rest;
    const auto colon = spec.find(':');
    if (colon != std::string::npos) {
        kind = spec.substr(0, colon);
        rest = spec.substr(colon + 1);
    }
    if (kind == "ring")
        d.kind = DatasetConfig::Kind::ring;
    else if (kind == "idx")
        d.kind = DatasetConfig::Kind::idx;
    else
        range_error("dataset spec", "expected 'ring' or 'idx', got '" + kind +
                                        "'");
    if (!rest.empty()) {
        for (const std::string& item : split_commas(rest)) {
            const auto eq = item.find('=');
            if (eq == std::string::npos)
                range_error("dataset spec", "expected key=value, got '" + item +
                                                "'");
            const std::string key = trim(item.substr(0, eq));
            const std::string value = trim(item.substr(eq + 1));
            if (d.kind == DatasetConfig::Kind::ring && key == "n_modes")
                d.ring.n_modes = parse_int("dataset spec n_modes", value);
            else if (d.kind == DatasetConfig::Kind::ring && key == "radius")
                d.ring.radius = parse_double("dataset spec radius", value);
            else if (d.kind == DatasetConfig::Kind::ring && key == "mode_std")
                d.ring.mode_std = parse_double("dataset spec mode_std", value);
            else if (d.kind == DatasetConfig::Kind::idx && key == "images")
                d.images = value;
            else if (d.kind == DatasetConfig::Kind::idx && key == "labels")
                d.labels = value;
            else if (d.kind == DatasetConfig::Kind::idx && key == "limit")
                d.limit = parse_int("dataset spec limit", value);
            else
                range_error("dataset spec", "unknown key '" + key + "'");
        }
    }
    return d;
}

dirac::DiracConfig dirac_preset(const std::string& name) {
    dirac::DiracConfig c;
    if (name == "dirac-plain") {
        c.disc = dirac::DiscKind::linear;
        c.lr = 0.1;
        c.iters = 5000;
        c.snapshot_every = 500;
        return c;
    }
    if (name == "dirac-replay") {
        c.disc = dirac::DiscKind::mlp;
        c.n_hidden = 2;
        // relu: two clamped units can realize the tent shape with a strict
        // peak at the real point; odd sigmoidal units cannot peak at 0.
        c.activation = nn::Activation::relu;
        c.lr = 0.1;
        c.iters = 5000;
        c.replay_old_fake = true;
        c.snapshot_every = 500;
        return c;
    }
    throw ConfigError(ConfigError::Kind::range,
                      "unknown dirac preset '" + name +
                          "' (expected dirac-plain or dirac-replay)");
}

}  // namespace ganlab::cfg
