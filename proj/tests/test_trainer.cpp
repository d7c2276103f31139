#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ganlab/config.hpp"
#include "ganlab/trainer.hpp"

using namespace ganlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("ganlab_trainer_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(bool(in), "missing file: ", p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string first_line(const fs::path& p) {
    const std::string all = slurp(p);
    return all.substr(0, all.find('\n'));
}

cfg::ExperimentConfig tiny_cfg() {
    cfg::ExperimentConfig c;
    c.dataset.kind = cfg::DatasetConfig::Kind::ring;
    c.dataset.ring.n_modes = 8;
    c.dataset.ring.radius = 2.0;
    c.dataset.ring.mode_std = 0.05;
    c.dataset.train_size = 0;  // stream fresh batches
    c.g_hidden = {8};
    c.g_activation = nn::Activation::relu;
    c.noise_dim = 2;
    c.d_hidden = {8};
    c.d_activation = nn::Activation::relu;
    c.d_sigmoid_head = true;
    c.loss.variant = gan::Variant::gan_ns;
    c.loss.lambda = 0.0;
    c.loss.gamma_imb = 1.0;
    c.opt_g.kind = optim::Kind::sgd;
    c.opt_g.lr = 0.05;
    c.opt_d.kind = optim::Kind::sgd;
    c.opt_d.lr = 0.05;
    c.iters = 30;
    c.batch_size = 8;
    c.n_critic = 1;
    c.seeds = {0};
    c.checkpoint_every = 10;
    c.out = "unused";
    c.diag_every = 10;
    c.slice_half_width = 2.0;
    c.slice_points = 21;
    c.n_anchors = 4;
    c.lm_window = 3;
    c.field = false;
    return c;
}

}  // namespace

TEST_CASE("identical (config, seed) pairs produce byte-identical artifacts") {
    const auto c = tiny_cfg();
    TempDir a("det_a"), b("det_b");
    const auto ra = train::run_seed(c, 0, a.path, false);
    const auto rb = train::run_seed(c, 0, b.path, false);
    CHECK_FALSE(ra.aborted);
    CHECK_FALSE(rb.aborted);

    for (const char* f : {"metrics.csv", "coverage.csv", "landscape.csv",
                          "forgetting.csv", "slice_30.csv", "ckpt_30.bin"})
        CHECK(slurp(a.path / f) == slurp(b.path / f));

    REQUIRE(ra.diag.size() == rb.diag.size());
    for (std::size_t i = 0; i < ra.diag.size(); ++i) {
        CHECK(ra.diag[i].iter == rb.diag[i].iter);
        CHECK(ra.diag[i].modes_hit == rb.diag[i].modes_hit);
        CHECK(ra.diag[i].mean_monotonicity == rb.diag[i].mean_monotonicity);
        CHECK(ra.diag[i].frac_local_max == rb.diag[i].frac_local_max);
        CHECK(ra.diag[i].median_basin_width == rb.diag[i].median_basin_width);
    }
    CHECK(ra.forgetting_var == rb.forgetting_var);

    SUBCASE("a different seed diverges") {
        TempDir d("det_d");
        (void)train::run_seed(c, 1, d.path, false);
        CHECK(slurp(a.path / "metrics.csv") != slurp(d.path / "metrics.csv"));
    }
}

TEST_CASE("diagnostics do not perturb the training trajectory") {
    auto with_diag = tiny_cfg();
    auto without = tiny_cfg();
    without.diag_every = 0;
    TempDir a("noninv_a"), b("noninv_b");
    (void)train::run_seed(with_diag, 3, a.path, false);
    (void)train::run_seed(without, 3, b.path, false);
    CHECK(slurp(a.path / "metrics.csv") == slurp(b.path / "metrics.csv"));
    CHECK(fs::exists(a.path / "slice_10.csv"));
    CHECK_FALSE(fs::exists(b.path / "slice_10.csv"));
}

TEST_CASE("artifact layout and headers") {
    const auto c = tiny_cfg();
    TempDir t("layout");
    (void)train::run_seed(c, 0, t.path, false);

    CHECK(first_line(t.path / "metrics.csv") ==
          "iter,l_d,l_g,grad_norm_d,grad_norm_g");
    CHECK(first_line(t.path / "coverage.csv") ==
          "iter,modes_hit,count_0,count_1,count_2,count_3,count_4,count_5,"
          "count_6,count_7");
    CHECK(first_line(t.path / "landscape.csv") ==
          "iter,anchor_id,monotonicity,monotonicity_central,local_max,"
          "basin_width");
    CHECK(first_line(t.path / "forgetting.csv") == "checkpoint,image_id,score");
    CHECK(first_line(t.path / "slice_10.csv") == "anchor_id,k,score");

    for (const char* f :
         {"ckpt_10.bin", "ckpt_20.bin", "ckpt_30.bin", "slice_10.csv",
          "slice_20.csv", "slice_30.csv"})
        CHECK(fs::exists(t.path / f));

    // One metrics row per iteration, plus the header.
    int lines = 0;
    std::istringstream in(slurp(t.path / "metrics.csv"));
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 31);
}

TEST_CASE("checkpoints restore the exact training state") {
    const auto c = tiny_cfg();
    TempDir t("ckpt");

    train::RunState s(c, 7);
    for (int i = 0; i < 7; ++i) (void)train::train_step(s);
    train::save_checkpoint(s, t.path / "state.bin");

    train::RunState s2(c, 7);
    train::load_checkpoint(s2, t.path / "state.bin");
    CHECK(s2.iter == 7);
    CHECK(s2.gen.param_values() == s.gen.param_values());
    CHECK(s2.disc.param_values() == s.disc.param_values());
    CHECK(s2.anchors == s.anchors);
    CHECK(s2.uhat == s.uhat);
    const std::vector<double> probe = {0.3, -1.1};
    CHECK(s2.score(probe) == s.score(probe));

    SUBCASE("continuations agree step for step") {
        for (int i = 0; i < 5; ++i) {
            const auto ma = train::train_step(s);
            const auto mb = train::train_step(s2);
            CHECK(ma.l_d == mb.l_d);
            CHECK(ma.l_g == mb.l_g);
            CHECK(ma.grad_norm_d == mb.grad_norm_d);
            CHECK(ma.grad_norm_g == mb.grad_norm_g);
        }
    }
    SUBCASE("the header echoes the architecture") {
        const auto info = train::read_checkpoint_info(t.path / "state.bin");
        CHECK(info.iter == 7);
        CHECK(info.dim == 2);
        CHECK(info.noise_dim == 2);
        CHECK(info.g_hidden == std::vector<int>{8});
        CHECK(info.d_hidden == std::vector<int>{8});
        CHECK(info.g_activation == nn::Activation::relu);
        CHECK(info.d_activation == nn::Activation::relu);
        CHECK(info.d_sigmoid_head);
        CHECK(info.opt_g_kind == optim::Kind::sgd);
        CHECK(info.opt_d_kind == optim::Kind::sgd);
    }
    SUBCASE("the header echoes a non-default optimizer kind") {
        auto c2 = c;
        c2.opt_d.kind = optim::Kind::adam;
        train::RunState s3(c2, 7);
        train::save_checkpoint(s3, t.path / "adam.bin");
        const auto info = train::read_checkpoint_info(t.path / "adam.bin");
        CHECK(info.opt_g_kind == optim::Kind::sgd);
        CHECK(info.opt_d_kind == optim::Kind::adam);
    }
    SUBCASE("loading into a mismatched architecture fails loudly") {
        auto c2 = c;
        c2.d_hidden = {8, 8};
        train::RunState wrong(c2, 7);
        CHECK_THROWS_WITH_AS(
            train::load_checkpoint(wrong, t.path / "state.bin"),
            doctest::Contains("architecture mismatch"), std::runtime_error);
    }
}

TEST_CASE("a resumed run reproduces the uninterrupted one byte for byte") {
    auto c = tiny_cfg();
    // Exercise the consolidation state across the checkpoint boundary too.
    c.ewc.lambda = 0.001;
    c.ewc.alpha = 0.5;
    c.ewc.tau = 7;

    TempDir straight("resume_straight"), split("resume_split");
    (void)train::run_seed(c, 5, straight.path, false);

    auto c_short = c;
    c_short.iters = 20;
    (void)train::run_seed(c_short, 5, split.path, false);
    (void)train::run_seed(c, 5, split.path, true);  // resume 21..30

    for (const char* f : {"metrics.csv", "coverage.csv", "landscape.csv",
                          "forgetting.csv", "slice_30.csv", "ckpt_30.bin"})
        CHECK(slurp(straight.path / f) == slurp(split.path / f));
}

TEST_CASE("resume discards rows and artifacts past the last checkpoint") {
    auto c = tiny_cfg();
    TempDir straight("kill_straight"), killed("kill_killed");
    (void)train::run_seed(c, 2, straight.path, false);

    // Simulate a crash after iteration 25: artifacts beyond the last intact
    // checkpoint (iteration 20) exist, but ckpt_25 was lost.
    auto c_kill = c;
    c_kill.iters = 25;
    (void)train::run_seed(c_kill, 2, killed.path, false);
    REQUIRE(fs::exists(killed.path / "ckpt_25.bin"));
    REQUIRE(fs::exists(killed.path / "slice_25.csv"));
    fs::remove(killed.path / "ckpt_25.bin");

    (void)train::run_seed(c, 2, killed.path, true);

    CHECK_FALSE(fs::exists(killed.path / "slice_25.csv"));
    CHECK_FALSE(fs::exists(killed.path / "ckpt_25.bin"));
    for (const char* f : {"metrics.csv", "coverage.csv", "landscape.csv",
                          "forgetting.csv", "slice_30.csv", "ckpt_30.bin"})
        CHECK(slurp(straight.path / f) == slurp(killed.path / f));
}

TEST_CASE("a frozen generator reduces discriminator training to a convex fit") {
    // One zero-width mode and an all-zero generator: every real batch is the
    // single point (1, 0) and every fake batch is the origin, so the
    // discriminator performs deterministic full-batch logistic regression —
    // its loss must fall monotonically at this step size.
    cfg::ExperimentConfig c = tiny_cfg();
    c.dataset.ring.n_modes = 1;
    c.dataset.ring.radius = 1.0;
    c.dataset.ring.mode_std = 0.0;
    c.dataset.train_size = 8;
    c.d_hidden = {};  // logistic regression head
    c.opt_d.lr = 0.1;
    c.opt_g.lr = 0.0;  // frozen
    c.diag_every = 0;
    c.checkpoint_every = 0;

    train::RunState s(c, 0);
    s.gen.set_param_values(
        std::vector<double>(s.gen.params().size(), 0.0));

    std::vector<double> l_d;
    for (int i = 0; i < 100; ++i) l_d.push_back(train::train_step(s).l_d);
    for (std::size_t i = 1; i < l_d.size(); ++i)
        CHECK(l_d[i] <= l_d[i - 1] + 1e-12);
    CHECK(l_d.back() < l_d.front() - 0.05);
}

TEST_CASE("numerical blow-ups abort cleanly with a batch dump") {
    cfg::ExperimentConfig c = tiny_cfg();
    c.d_sigmoid_head = false;
    c.loss.variant = gan::Variant::wgan_gp;
    c.loss.lambda = 0.0;
    c.opt_d.lr = 1e200;  // one giant step overflows the next evaluation
    c.opt_g.lr = 1e200;
    c.iters = 10;
    c.diag_every = 0;
    c.checkpoint_every = 0;
    c.batch_size = 4;

    TempDir t("abort");
    const auto res = train::run_seed(c, 0, t.path, false);
    CHECK(res.aborted);
    CHECK(res.abort_message.find("iteration") != std::string::npos);
    REQUIRE(fs::exists(t.path / "abort_dump.csv"));
    CHECK(first_line(t.path / "abort_dump.csv") == "kind,index,v_0,v_1");
    const std::string dump = slurp(t.path / "abort_dump.csv");
    CHECK(dump.find("real,0,") != std::string::npos);
    CHECK(dump.find("fake,0,") != std::string::npos);

    SUBCASE("the multi-seed runner escalates the abort") {
        TempDir e("abort_exp");
        auto c2 = c;
        c2.out = (e.path / "exp").string();
        CHECK_THROWS_WITH_AS(train::run_experiment(c2),
                             doctest::Contains("seed 0"),
                             train::NumericalError);
        CHECK(fs::exists(e.path / "exp" / "manifest.json"));
        CHECK(fs::exists(e.path / "exp" / "seed_0" / "abort_dump.csv"));
    }
}

TEST_CASE("the consolidation penalty engages after the first chunk") {
    auto off = tiny_cfg();
    off.diag_every = 0;
    off.checkpoint_every = 0;
    off.iters = 16;
    auto on = off;
    on.ewc.lambda = 10.0;
    on.ewc.alpha = 1.0;
    on.ewc.tau = 5;

    train::RunState so(off, 1), se(on, 1);
    std::vector<double> lo, le;
    for (int i = 0; i < 16; ++i) {
        lo.push_back(train::train_step(so).l_d);
        le.push_back(train::train_step(se).l_d);
    }
    // Chunks end after iteration 5; at iteration 6 the parameters still sit
    // on the anchor (zero penalty, zero penalty gradient), so the histories
    // match through 6 and part afterwards.
    for (int i = 0; i < 6; ++i) CHECK(lo[i] == le[i]);
    bool differs = false;
    for (int i = 6; i < 16; ++i) differs = differs || lo[i] != le[i];
    CHECK(differs);
}

TEST_CASE("multi-critic schedules take several real batches per iteration") {
    auto c = tiny_cfg();
    c.n_critic = 3;
    c.iters = 12;
    c.diag_every = 0;
    c.checkpoint_every = 0;
    TempDir a("critic_a"), b("critic_b");
    (void)train::run_seed(c, 0, a.path, false);
    (void)train::run_seed(c, 0, b.path, false);
    CHECK(slurp(a.path / "metrics.csv") == slurp(b.path / "metrics.csv"));
    int lines = 0;
    std::istringstream in(slurp(a.path / "metrics.csv"));
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 13);  // one row per iteration regardless of n_critic
}

TEST_CASE("gradient-field lattices are written when requested") {
    auto c = tiny_cfg();
    c.field = true;
    c.field_extent = 3.0;
    c.field_points = 5;
    c.iters = 10;
    TempDir t("field");
    (void)train::run_seed(c, 0, t.path, false);

    REQUIRE(fs::exists(t.path / "field_10.csv"));
    CHECK(first_line(t.path / "field_10.csv") == "x,y,vx,vy,label");
    std::istringstream in(slurp(t.path / "field_10.csv"));
    std::string line;
    std::getline(in, line);  // header
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        const auto last_comma = line.rfind(',');
        const std::string label = line.substr(last_comma + 1);
        CHECK((label == "real" || label == "fake" || label == "neutral"));
    }
    CHECK(rows == 25);
}

TEST_CASE("one-shot diagnostics on a restored checkpoint are reproducible") {
    const auto c = tiny_cfg();
    TempDir t("diagshot");
    train::RunState s(c, 4);
    for (int i = 0; i < 10; ++i) (void)train::train_step(s);
    train::save_checkpoint(s, t.path / "state.bin");

    auto run_one = [&](const fs::path& out) {
        train::RunState loaded(c, 4);
        train::load_checkpoint(loaded, t.path / "state.bin");
        return train::write_diagnostics(loaded, out);
    };
    const auto d1 = run_one(t.path / "d1");
    const auto d2 = run_one(t.path / "d2");
    CHECK(d1.iter == 10);
    CHECK(d1.modes_hit == d2.modes_hit);
    CHECK(d1.mean_monotonicity == d2.mean_monotonicity);
    CHECK(d1.frac_local_max == d2.frac_local_max);
    CHECK(d1.median_basin_width == d2.median_basin_width);
    CHECK(d1.modes_hit >= 0);
    CHECK(d1.modes_hit <= 8);
    CHECK(d1.mean_monotonicity >= 0.5);
    CHECK(d1.mean_monotonicity <= 1.0);

    for (const char* f :
         {"slice_10.csv", "coverage.csv", "landscape.csv", "forgetting.csv"})
        CHECK(slurp(t.path / "d1" / f) == slurp(t.path / "d2" / f));
}

TEST_CASE("the experiment runner writes a manifest and per-seed directories") {
    auto c = tiny_cfg();
    c.iters = 10;
    c.seeds = {0, 1};
    TempDir t("exp");
    c.out = (t.path / "exp").string();
    const auto res = train::run_experiment(c);

    CHECK(res.seeds.size() == 2);
    CHECK(res.config_hash.size() == 16);
    REQUIRE(fs::exists(t.path / "exp" / "manifest.json"));
    const std::string manifest = slurp(t.path / "exp" / "manifest.json");
    CHECK(manifest.find(train::kVersion) != std::string::npos);
    CHECK(manifest.find(res.config_hash) != std::string::npos);
    CHECK(fs::exists(t.path / "exp" / "seed_0" / "metrics.csv"));
    CHECK(fs::exists(t.path / "exp" / "seed_1" / "metrics.csv"));
}
