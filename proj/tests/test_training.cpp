#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "gestgan/common.hpp"
#include "gestgan/io.hpp"
#include "gestgan/training.hpp"

using namespace gestgan;

namespace {

// Smallest architecture that still exercises every code path: 16 frames
// (divisible by the pooling window, long enough for style-0/1 beat periods).
ModelConfig tiny_arch() {
    ModelConfig cfg;
    cfg.frames = 16;
    cfg.styles = 2;
    cfg.d_model = 16;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d_ff = 24;
    cfg.d_z = 4;
    cfg.d_hidden = 24;
    cfg.d_cond = 8;
    cfg.gn_groups = 4;
    return cfg;
}

SynthConfig tiny_data() {
    SynthConfig cfg;
    cfg.frames = 16;
    cfg.styles = 2;
    return cfg;
}

TrainConfig tiny_train(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.T = 4;
    cfg.batch = 4;
    cfg.epochs = 2;
    cfg.seed = seed;
    return cfg;
}

std::vector<const ClipExample*> first_batch(const Dataset& ds, std::size_t n) {
    std::vector<const ClipExample*> batch;
    for (std::size_t i = 0; i < n; ++i) batch.push_back(&ds.train[i]);
    return batch;
}

void zero_final_layer(Discriminator& d) {
    Tensor& w = d.params["mlp6.w"];
    Tensor& b = d.params["mlp6.b"];
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.0;
}

}  // namespace

TEST_CASE("loss values at the D = 1/2 operating point match the closed-form arithmetic") {
    const Dataset ds = make_dataset(12, 0.7, 0.15, tiny_data(), 5);
    TrainState st = make_train_state(tiny_train(1), tiny_arch());
    // Zeroing the last layer forces logits to 0, i.e. D == 0.5 everywhere.
    zero_final_layer(st.d);

    SUBCASE("d_loss = 2 ln 2 when D outputs 1/2 on real and fake") {
        const double d_loss = d_step(st, first_batch(ds, 4));
        CHECK(d_loss == doctest::Approx(2.0 * std::numbers::ln2).epsilon(1e-12));
    }

    SUBCASE("g_adv = ln 2 when D outputs 1/2 on fakes; accounting identity is exact") {
        const LossReport rep = g_step(st, first_batch(ds, 4));
        CHECK(rep.g_adv == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
        CHECK(rep.g_total == rep.g_adv + st.config.lambda_geo * rep.g_recon);
        CHECK(rep.g_recon > 0.0);
        CHECK(std::isfinite(rep.g_total));
    }

    SUBCASE("lambda_geo = 0 reduces the generator objective to the adversarial term") {
        st.config.lambda_geo = 0.0;
        const LossReport rep = g_step(st, first_batch(ds, 4));
        CHECK(rep.g_total == rep.g_adv);
        CHECK(rep.g_recon > 0.0);  // still reported, just unweighted
    }
}

TEST_CASE("update isolation: d_step only touches D, g_step only touches G") {
    const Dataset ds = make_dataset(12, 0.7, 0.15, tiny_data(), 6);
    TrainState st = make_train_state(tiny_train(2), tiny_arch());

    const std::uint64_t g_before = st.g.params.checksum();
    const std::uint64_t d_before = st.d.params.checksum();
    (void)d_step(st, first_batch(ds, 4));
    CHECK(st.g.params.checksum() == g_before);       // G untouched
    CHECK(st.d.params.checksum() != d_before);       // D updated
    const std::uint64_t d_after = st.d.params.checksum();
    (void)g_step(st, first_batch(ds, 4));
    CHECK(st.d.params.checksum() == d_after);        // D untouched
    CHECK(st.g.params.checksum() != g_before);       // G updated
}

TEST_CASE("NaN input aborts the step leaving parameters and moments untouched") {
    Dataset ds = make_dataset(12, 0.7, 0.15, tiny_data(), 7);
    TrainState st = make_train_state(tiny_train(3), tiny_arch());
    ds.train[0].clip.positions[0] = std::numeric_limits<double>::quiet_NaN();

    const std::uint64_t g_before = st.g.params.checksum();
    const std::uint64_t d_before = st.d.params.checksum();
    CHECK_THROWS_AS((void)d_step(st, first_batch(ds, 4)), NumericError);
    CHECK(st.g.params.checksum() == g_before);
    CHECK(st.d.params.checksum() == d_before);
    CHECK(st.opt_d.step_count == 0);
    CHECK_THROWS_AS((void)g_step(st, first_batch(ds, 4)), NumericError);
    CHECK(st.g.params.checksum() == g_before);
    CHECK(st.opt_g.step_count == 0);
}

TEST_CASE("time-step sampling covers all of {1..T} over 10T draws") {
    // Mirrors the per-sample draw: t ~ uniform_int(1, T) from the train stream.
    const std::size_t T = 20;
    Rng rng(derive_seed(123, 3, 0));
    std::vector<bool> seen(T + 1, false);
    for (std::size_t i = 0; i < 10 * T; ++i) {
        seen[static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(T)))] = true;
    }
    for (std::size_t t = 1; t <= T; ++t) CHECK(seen[t]);
}

TEST_CASE("cond_dropout = 1.0 trains fully unconditionally") {
    const Dataset ds = make_dataset(12, 0.7, 0.15, tiny_data(), 8);
    TrainConfig tc = tiny_train(4);
    tc.cond_dropout = 1.0;
    TrainState st = make_train_state(tc, tiny_arch());

    // With every sample masked, the condition-content parameters receive
    // exactly-zero gradient: the only change AdamW applies to them is the
    // decoupled weight-decay shrink p <- p - lr*(0 + wd*p).
    const std::vector<std::string> masked = {"cond.style", "cond.seed.w", "cond.seed.b",
                                             "cond.env.w", "cond.env.b"};
    std::vector<Tensor> before;
    for (const std::string& name : masked) before.push_back(st.g.params[name]);
    (void)g_step(st, first_batch(ds, 4));
    for (std::size_t k = 0; k < masked.size(); ++k) {
        const Tensor& now = st.g.params[masked[k]];
        for (std::size_t j = 0; j < now.size(); ++j) {
            const double expect =
                before[k][j] - st.opt_g.lr * (st.opt_g.weight_decay * before[k][j]);
            CHECK(now[j] == expect);
        }
    }
    // The null token, by contrast, is trained.
    CHECK(st.opt_g.step_count == 1);
}

TEST_CASE("the discriminator learns to separate real pairs from a frozen random generator") {
    SynthConfig dc = tiny_data();
    const Dataset ds = make_dataset(24, 0.8, 0.1, dc, 9);
    TrainConfig tc = tiny_train(5);
    tc.lr_d = 3e-3;  // tiny-scale smoke run: larger step so 200 iterations suffice
    TrainState st = make_train_state(tc, tiny_arch());

    std::vector<double> losses;
    for (int i = 0; i < 200; ++i) losses.push_back(d_step(st, first_batch(ds, 4)));
    const auto mean_range = [&](std::size_t lo, std::size_t hi) {
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += losses[i];
        return acc / static_cast<double>(hi - lo);
    };
    const double early = mean_range(0, 50);
    const double late = mean_range(150, 200);
    CHECK(late < early);
    CHECK(late < 2.0 * std::numbers::ln2);  // better than the blind 0.5 operating point
}

TEST_CASE("fit: determinism, logging, loss csv, and collapse counter") {
    const Dataset ds = make_dataset(16, 0.75, 0.125, tiny_data(), 10);

    TrainState a = make_train_state(tiny_train(11), tiny_arch());
    fit(a, ds);
    TrainState b = make_train_state(tiny_train(11), tiny_arch());
    fit(b, ds);

    CHECK(a.g.params.checksum() == b.g.params.checksum());
    CHECK(a.d.params.checksum() == b.d.params.checksum());
    REQUIRE(a.log.size() == b.log.size());
    REQUIRE(a.log.size() == 2 * 3);  // 2 epochs x floor(12/4) full batches
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].step == i);
        CHECK(a.log[i].d_loss == b.log[i].d_loss);
        CHECK(a.log[i].g_total == b.log[i].g_total);
        CHECK(a.log[i].g_total == a.log[i].g_adv + a.config.lambda_geo * a.log[i].g_recon);
        CHECK(std::isfinite(a.log[i].g_total));
    }
    CHECK(a.step == 6);
    CHECK(a.epoch == 2);

    const std::string path =
        (std::filesystem::temp_directory_path() / "gestgan_losses_test.csv").string();
    write_loss_csv(path, a.log);
    const CsvTable t = read_csv_file(path);
    CHECK(t.header == std::vector<std::string>{"step", "d_loss", "g_adv", "g_recon", "g_total"});
    REQUIRE(t.rows.size() == a.log.size());
    CHECK(parse_double(t.rows[3][4]) == a.log[3].g_total);
    std::filesystem::remove(path);

    // EMA generator mirrors shapes/names of the live one.
    const Generator ema = ema_generator(a);
    CHECK(ema.params.names == a.g.params.names);
    CHECK(ema.params.checksum() != a.g.params.checksum());  // decay 0.999 lags behind

    // Untrained plain-diffusion arm: d_loss column is exactly zero.
    TrainConfig plain = tiny_train(12);
    plain.adversarial = false;
    TrainState c = make_train_state(plain, tiny_arch());
    fit(c, ds);
    for (const LossReport& r : c.log) {
        CHECK(r.d_loss == 0.0);
        CHECK(r.g_adv == 0.0);
        CHECK(r.g_total == plain.lambda_geo * r.g_recon);
    }
    CHECK(c.collapse_warnings == 0);  // collapse detection is adversarial-only
}

TEST_CASE("checkpoint: bitwise round-trip and resumed training equals uninterrupted training") {
    const Dataset ds = make_dataset(16, 0.75, 0.125, tiny_data(), 13);
    const std::string path =
        (std::filesystem::temp_directory_path() / "gestgan_ckpt_test.txt").string();

    // Uninterrupted reference: 4 epochs in one go.
    TrainConfig tc4 = tiny_train(21);
    tc4.epochs = 4;
    TrainState ref = make_train_state(tc4, tiny_arch());
    fit(ref, ds);

    // Chunked run: 2 epochs, checkpoint to disk, reload, finish to 4.
    TrainState half = make_train_state(tiny_train(21), tiny_arch());
    fit(half, ds);  // epochs = 2
    save_checkpoint(path, half);
    TrainState resumed = load_checkpoint(path);

    SUBCASE("round-trip restores every field bitwise") {
        CHECK(resumed.g.params.checksum() == half.g.params.checksum());
        CHECK(resumed.d.params.checksum() == half.d.params.checksum());
        CHECK(resumed.step == half.step);
        CHECK(resumed.epoch == half.epoch);
        CHECK(resumed.config.lr_g == half.config.lr_g);
        CHECK(resumed.opt_g.step_count == half.opt_g.step_count);
        REQUIRE(resumed.opt_g.m.size() == half.opt_g.m.size());
        for (std::size_t i = 0; i < half.opt_g.m.size(); ++i) {
            CHECK(max_abs_diff(resumed.opt_g.m[i], half.opt_g.m[i]) == 0.0);
            CHECK(max_abs_diff(resumed.opt_g.v[i], half.opt_g.v[i]) == 0.0);
        }
        REQUIRE(resumed.ema.shadow.size() == half.ema.shadow.size());
        for (std::size_t i = 0; i < half.ema.shadow.size(); ++i) {
            CHECK(max_abs_diff(resumed.ema.shadow[i], half.ema.shadow[i]) == 0.0);
        }
        REQUIRE(resumed.log.size() == half.log.size());
        for (std::size_t i = 0; i < half.log.size(); ++i) {
            CHECK(resumed.log[i].g_total == half.log[i].g_total);
        }
        // Saving the loaded state reproduces the file byte for byte.
        const std::string path2 = path + ".2";
        save_checkpoint(path2, resumed);
        CHECK(read_text_file(path2) == read_text_file(path));
        std::filesystem::remove(path2);
    }

    SUBCASE("resuming reproduces the uninterrupted run bitwise") {
        resumed.config.epochs = 4;
        fit(resumed, ds);
        CHECK(resumed.g.params.checksum() == ref.g.params.checksum());
        CHECK(resumed.d.params.checksum() == ref.d.params.checksum());
        CHECK(resumed.step == ref.step);
        REQUIRE(resumed.log.size() == ref.log.size());
        for (std::size_t i = 0; i < ref.log.size(); ++i) {
            CHECK(resumed.log[i].d_loss == ref.log[i].d_loss);
            CHECK(resumed.log[i].g_total == ref.log[i].g_total);
        }
        const Generator ge = ema_generator(resumed);
        const Generator gr = ema_generator(ref);
        CHECK(ge.params.checksum() == gr.params.checksum());
    }

    std::filesystem::remove(path);

    SUBCASE("corrupt checkpoints are rejected") {
        const std::string bad = path + ".bad";
        write_text_file(bad, "not a checkpoint\n");
        CHECK_THROWS_AS(load_checkpoint(bad), IoError);
        std::filesystem::remove(bad);
        CHECK_THROWS_AS(load_checkpoint(path + ".missing"), IoError);
    }
}

TEST_CASE("train config defaults match the documented recipe") {
    const TrainConfig cfg;
    CHECK(cfg.T == 20);
    CHECK(cfg.lr_g == 3e-5);
    CHECK(cfg.lr_d == 1.25e-4);
    CHECK(cfg.batch == 64);
    CHECK(cfg.lambda_geo == 10.0);
    CHECK(cfg.huber_delta == 1.0);
    CHECK(cfg.cond_dropout == 0.1);
    CHECK(cfg.ema_decay == 0.999);
    CHECK(cfg.adversarial);
    CHECK_THROWS(TrainConfig{.T = 0}.validate());
    CHECK_THROWS(TrainConfig{.lambda_geo = -1.0}.validate());
    CHECK_THROWS(TrainConfig{.batch = 0}.validate());
}
