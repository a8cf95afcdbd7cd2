#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gestgan/models.hpp"
#include "gestgan/optim.hpp"
#include "gestgan/rng.hpp"
#include "gestgan/schedule.hpp"
#include "gestgan/synthdata.hpp"

namespace gestgan {

struct TrainConfig {
    std::size_t T = 20;
    ScheduleKind schedule_kind = ScheduleKind::geometric_alpha;
    double lr_g = 3e-5;
    double lr_d = 1.25e-4;
    std::size_t batch = 64;
    double lambda_geo = 10.0;
    double huber_delta = 1.0;
    double cond_dropout = 0.1;
    std::size_t epochs = 4;
    double ema_decay = 0.999;
    std::uint64_t seed = 1;
    // false trains the plain-diffusion arm: the generator sees only the
    // geometric reconstruction term, the discriminator is never touched.
    bool adversarial = true;

    void validate() const;
};

struct LossReport {
    std::uint64_t step = 0;
    double d_loss = 0.0;
    double g_adv = 0.0;
    double g_recon = 0.0;
    double g_total = 0.0;  // g_adv + lambda_geo * g_recon, exact accounting
};

struct TrainState {
    TrainConfig config;
    ModelConfig arch;
    NoiseSchedule sched;
    Generator g;
    Discriminator d;
    AdamWState opt_g, opt_d;
    EmaState ema;
    Rng rng;
    std::uint64_t step = 0;   // completed d/g step pairs
    std::size_t epoch = 0;    // completed epochs
    std::size_t collapse_warnings = 0;
    std::vector<LossReport> log;
};

TrainState make_train_state(const TrainConfig& cfg, const ModelConfig& arch);

// One discriminator update on the logistic pair losses: real pairs are built by
// ancestral consistency (x_{t-1} ~ q(.|x0), then one forward_step), fake
// pairs route the generator's x0_hat through the stochastic posterior.
// Throws NumericError on a NaN loss; the step is then a no-op.
double d_step(TrainState& state, const std::vector<const ClipExample*>& batch);

// One generator update: nonsaturating adversarial term plus the geometric
// Huber term, then an EMA update. Returns the recorded losses.
LossReport g_step(TrainState& state, const std::vector<const ClipExample*>& batch);

// Alternating 1:1 d/g training from state.epoch up to state.config.epochs.
// Full batches only (a trailing partial batch is dropped). If `progress` is
// non-null a one-line summary is written per epoch; a smoothed epoch d_loss
// below 0.05 logs a discriminator-collapse warning.
void fit(TrainState& state, const Dataset& data, std::ostream* progress = nullptr);

// Generator with the EMA shadow weights (the evaluation-time model).
Generator ema_generator(const TrainState& state);

// step,d_loss,g_adv,g_recon,g_total — one row per training step.
void write_loss_csv(const std::string& path, const std::vector<LossReport>& log);

// Full training snapshot (models, optimizer moments, EMA, RNG, counters);
// loading and continuing reproduces the uninterrupted run bitwise.
void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

}  // namespace gestgan
