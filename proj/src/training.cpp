#include "gestgan/training.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <utility>

#include "gestgan/autodiff.hpp"
#include "gestgan/common.hpp"
#include "gestgan/io.hpp"

namespace gestgan {

void TrainConfig::validate() const {
    require(T >= 1, "TrainConfig: T must be >= 1");
    require(lr_g > 0.0 && lr_d > 0.0, "TrainConfig: learning rates must be positive");
    require(batch >= 1, "TrainConfig: batch must be >= 1");
    require(lambda_geo >= 0.0, "TrainConfig: lambda_geo must be >= 0");
    require(huber_delta > 0.0, "TrainConfig: huber_delta must be positive");
    require(cond_dropout >= 0.0 && cond_dropout <= 1.0, "TrainConfig: cond_dropout must be in [0, 1]");
    require(ema_decay >= 0.0 && ema_decay < 1.0, "TrainConfig: ema_decay must be in [0, 1)");
}

TrainState make_train_state(const TrainConfig& cfg, const ModelConfig& arch) {
    cfg.validate();
    arch.validate();
    TrainState st;
    st.config = cfg;
    st.arch = arch;
    st.sched = make_schedule(cfg.T, cfg.schedule_kind);
    st.g = make_generator(arch, derive_seed(cfg.seed, 1, 0));
    st.d = make_discriminator(arch, derive_seed(cfg.seed, 2, 0));
    st.opt_g = make_adamw(cfg.lr_g);
    st.opt_d = make_adamw(cfg.lr_d);
    st.ema = make_ema(cfg.ema_decay, std::as_const(st.g.params).pointers());
    st.rng = Rng(derive_seed(cfg.seed, 3, 0));
    return st;
}

namespace {

// Per-sample randomness for one training step. Drawing everything up front in
// a fixed order keeps the RNG stream layout independent of graph staging.
struct SampleDraw {
    std::size_t t = 1;
    bool drop = false;
    Tensor eps_prev;  // {N, fd}, used by the d-step real pair (t > 1)
    Tensor eps;       // {N, fd}, forward_step / q_sample noise
    Tensor z;         // {1, d_z}
    Tensor z_post;    // {N, fd}, stochastic-posterior noise for the fake pair
};

Tensor draw_normal(Rng& rng, std::size_t r, std::size_t c) {
    Tensor out({r, c});
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.normal();
    return out;
}

SampleDraw draw_sample(TrainState& st) {
    const std::size_t n = st.arch.frames;
    const std::size_t fd = st.arch.frame_dim();
    SampleDraw s;
    s.t = static_cast<std::size_t>(st.rng.uniform_int(1, static_cast<std::int64_t>(st.config.T)));
    s.drop = st.rng.bernoulli(st.config.cond_dropout);
    s.eps_prev = draw_normal(st.rng, n, fd);
    s.eps = draw_normal(st.rng, n, fd);
    s.z = draw_normal(st.rng, 1, st.arch.d_z);
    s.z_post = draw_normal(st.rng, n, fd);
    return s;
}

std::vector<Tensor> zero_like(const TensorDict& dict) {
    std::vector<Tensor> acc;
    acc.reserve(dict.size());
    for (const Tensor& t : dict.values) acc.emplace_back(t.shape());
    return acc;
}

void accumulate_grads(Tape& tape, const std::vector<Var>& vars, std::vector<Tensor>& acc) {
    for (std::size_t i = 0; i < vars.size(); ++i) add_inplace(acc[i], tape.grad(vars[i]));
}

std::vector<const Tensor*> grad_pointers(const std::vector<Tensor>& acc) {
    std::vector<const Tensor*> out;
    out.reserve(acc.size());
    for (const Tensor& t : acc) out.push_back(&t);
    return out;
}

// x_{t-1} drawn from the stochastic posterior around the generator estimate,
// with only the x0_hat term kept on the tape (everything else is data).
Var fake_prev_var(Tape& tape, Var x0_hat, const Tensor& x_t, const PosteriorCoeffs& pc,
                  const Tensor& z_post) {
    Tensor rest = scale(x_t, pc.coef_xt);
    if (pc.sigma != 0.0) axpy_inplace(pc.sigma, z_post, rest);
    return tape.add(tape.scale(x0_hat, pc.coef_x0), tape.constant(std::move(rest)));
}

}  // namespace

double d_step(TrainState& st, const std::vector<const ClipExample*>& batch) {
    require(!batch.empty(), "d_step: empty batch");
    require(st.config.adversarial, "d_step: disabled in plain-diffusion mode");
    std::vector<Tensor> grad_acc = zero_like(st.d.params);
    double loss_sum = 0.0;
    for (const ClipExample* ex : batch) {
        const SampleDraw s = draw_sample(st);
        const CondFeatures cond = make_cond_features(ex->track, st.arch);
        const Tensor& x0 = ex->clip.positions;

        // Real pair by ancestral consistency: x_{t-1} ~ q(x_{t-1} | x0), then
        // one forward step to the matching x_t.
        const Tensor x_prev = s.t == 1 ? x0 : q_sample(x0, s.t - 1, st.sched, s.eps_prev);
        const Tensor x_t = forward_step(x_prev, s.t, st.sched, s.eps);

        Tape tape;
        const std::vector<Var> pd = lift_params(tape, st.d.params, true);
        const std::vector<Var> pg = lift_params(tape, st.g.params, false);
        const Var x_t_c = tape.constant(x_t);

        const Var x0_hat =
            generator_forward(tape, pg, st.g, x_t_c, tape.constant(s.z), cond, s.t, s.drop);
        const PosteriorCoeffs pc = posterior_coeffs(st.sched, s.t);
        const Var fake_prev = fake_prev_var(tape, x0_hat, x_t, pc, s.z_post);

        const Var logit_real =
            discriminator_logit(tape, pd, st.d, tape.constant(x_prev), x_t_c, cond, s.t, s.drop);
        const Var logit_fake = discriminator_logit(tape, pd, st.d, fake_prev, x_t_c, cond, s.t, s.drop);

        // -log D(real) - log (1 - D(fake)) via numerically safe softplus.
        const Var loss = tape.add(tape.softplus(tape.scale(logit_real, -1.0)), tape.softplus(logit_fake));
        loss_sum += tape.value(loss).item();
        tape.backward(loss);
        accumulate_grads(tape, pd, grad_acc);
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (Tensor& g : grad_acc) scale_inplace(g, inv_b);
    adamw_step(st.opt_d, st.d.params.pointers(), grad_pointers(grad_acc));
    return loss_sum * inv_b;
}

LossReport g_step(TrainState& st, const std::vector<const ClipExample*>& batch) {
    require(!batch.empty(), "g_step: empty batch");
    std::vector<Tensor> grad_acc = zero_like(st.g.params);
    double adv_sum = 0.0;
    double recon_sum = 0.0;
    for (const ClipExample* ex : batch) {
        const SampleDraw s = draw_sample(st);
        const CondFeatures cond = make_cond_features(ex->track, st.arch);
        const Tensor& x0 = ex->clip.positions;
        const Tensor x_t = q_sample(x0, s.t, st.sched, s.eps);

        Tape tape;
        const std::vector<Var> pg = lift_params(tape, st.g.params, true);
        const Var x_t_c = tape.constant(x_t);
        const Var x0_hat =
            generator_forward(tape, pg, st.g, x_t_c, tape.constant(s.z), cond, s.t, s.drop);
        const Var recon = tape.huber_mean(x0_hat, tape.constant(x0), st.config.huber_delta);

        Var loss;
        if (st.config.adversarial) {
            const std::vector<Var> pd = lift_params(tape, st.d.params, false);
            const PosteriorCoeffs pc = posterior_coeffs(st.sched, s.t);
            const Var fake_prev = fake_prev_var(tape, x0_hat, x_t, pc, s.z_post);
            const Var logit_fake =
                discriminator_logit(tape, pd, st.d, fake_prev, x_t_c, cond, s.t, s.drop);
            // Nonsaturating generator objective: -log D(fake). The sum
            // collapses the {1,1} logit to a scalar so it can join recon.
            const Var adv = tape.sum(tape.softplus(tape.scale(logit_fake, -1.0)));
            adv_sum += tape.value(adv).item();
            loss = tape.add(adv, tape.scale(recon, st.config.lambda_geo));
        } else {
            loss = tape.scale(recon, st.config.lambda_geo);
        }
        recon_sum += tape.value(recon).item();
        tape.backward(loss);
        accumulate_grads(tape, pg, grad_acc);
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (Tensor& g : grad_acc) scale_inplace(g, inv_b);
    adamw_step(st.opt_g, st.g.params.pointers(), grad_pointers(grad_acc));
    ema_update(st.ema, std::as_const(st.g.params).pointers());

    LossReport rep;
    rep.step = st.step;
    rep.g_adv = adv_sum * inv_b;
    rep.g_recon = recon_sum * inv_b;
    rep.g_total = rep.g_adv + st.config.lambda_geo * rep.g_recon;
    return rep;
}

void fit(TrainState& st, const Dataset& data, std::ostream* progress) {
    st.config.validate();
    require(!data.train.empty(), "fit: empty train split");
    require(data.train.size() >= st.config.batch, "fit: train split smaller than one batch");
    const std::size_t n = data.train.size();
    const std::size_t b = st.config.batch;
    for (std::size_t epoch = st.epoch; epoch < st.config.epochs; ++epoch) {
        // Deterministic Fisher-Yates shuffle on the training order.
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j =
                static_cast<std::size_t>(st.rng.uniform_int(0, static_cast<std::int64_t>(i)));
            std::swap(order[i], order[j]);
        }
        double d_sum = 0.0;
        std::size_t steps_in_epoch = 0;
        for (std::size_t start = 0; start + b <= n; start += b) {
            std::vector<const ClipExample*> batch;
            batch.reserve(b);
            for (std::size_t k = 0; k < b; ++k) batch.push_back(&data.train[order[start + k]]);
            const double dl = st.config.adversarial ? d_step(st, batch) : 0.0;
            LossReport rep = g_step(st, batch);
            rep.step = st.step;
            rep.d_loss = dl;
            st.log.push_back(rep);
            ++st.step;
            d_sum += dl;
            ++steps_in_epoch;
        }
        st.epoch = epoch + 1;
        const double d_mean = steps_in_epoch ? d_sum / static_cast<double>(steps_in_epoch) : 0.0;
        const bool collapse = st.config.adversarial && steps_in_epoch > 0 && d_mean < 0.05;
        if (collapse) ++st.collapse_warnings;
        if (progress) {
            const LossReport& last = st.log.back();
            (*progress) << "epoch " << st.epoch << "/" << st.config.epochs << " step " << st.step
                        << " d_loss " << d_mean << " g_adv " << last.g_adv << " g_recon "
                        << last.g_recon << " g_total " << last.g_total;
            if (collapse) (*progress) << "  [warning: discriminator loss collapsed (< 0.05)]";
            (*progress) << "\n";
        }
    }
}

Generator ema_generator(const TrainState& st) {
    require(st.ema.shadow.size() == st.g.params.size(), "ema_generator: shadow/param mismatch");
    Generator out;
    out.cfg = st.g.cfg;
    out.params.names = st.g.params.names;
    out.params.values = st.ema.shadow;
    return out;
}

void write_loss_csv(const std::string& path, const std::vector<LossReport>& log) {
    std::ofstream os(path);
    if (!os) throw IoError("write_loss_csv: cannot open " + path);
    write_csv_row(os, {"step", "d_loss", "g_adv", "g_recon", "g_total"});
    for (const LossReport& r : log) {
        write_csv_row(os, {std::to_string(r.step), format_g17(r.d_loss), format_g17(r.g_adv),
                           format_g17(r.g_recon), format_g17(r.g_total)});
    }
    if (!os) throw IoError("write_loss_csv: stream write failed");
}

// ---- checkpointing ---------------------------------------------------------

namespace {

constexpr const char* kCkptMagic = "gestgan_checkpoint 1";

TensorDict named_moments(const TensorDict& params, const std::vector<Tensor>& moments) {
    TensorDict d;
    for (std::size_t i = 0; i < moments.size(); ++i) d.add(params.names[i], moments[i]);
    return d;
}

void write_section(std::ostream& os, const std::string& name) { os << "[" << name << "]\n"; }

std::string next_nonblank_line(std::istream& is) {
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty()) return line;
    }
    throw IoError("checkpoint: truncated file");
}

void expect_section(std::istream& is, const std::string& name) {
    const std::string line = next_nonblank_line(is);
    if (line != "[" + name + "]") {
        throw IoError("checkpoint: expected section [" + name + "], got '" + line + "'");
    }
}

// key=value lines until the next '[section]' header (which is not consumed).
Manifest read_manifest_section(std::istream& is) {
    Manifest m;
    while (is.peek() != std::char_traits<char>::eof() && is.peek() != '[') {
        std::string line;
        if (!std::getline(is, line)) break;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw IoError("checkpoint: bad manifest line '" + line + "'");
        m[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return m;
}

Manifest config_manifest(const TrainState& st) {
    const TrainConfig& c = st.config;
    const ModelConfig& a = st.arch;
    Manifest m;
    m["train.T"] = std::to_string(c.T);
    m["train.schedule"] = to_string(c.schedule_kind);
    m["train.lr_g"] = format_hex(c.lr_g);
    m["train.lr_d"] = format_hex(c.lr_d);
    m["train.batch"] = std::to_string(c.batch);
    m["train.lambda_geo"] = format_hex(c.lambda_geo);
    m["train.huber_delta"] = format_hex(c.huber_delta);
    m["train.cond_dropout"] = format_hex(c.cond_dropout);
    m["train.epochs"] = std::to_string(c.epochs);
    m["train.ema_decay"] = format_hex(c.ema_decay);
    m["train.seed"] = std::to_string(c.seed);
    m["train.adversarial"] = c.adversarial ? "1" : "0";
    m["arch.frames"] = std::to_string(a.frames);
    m["arch.joints"] = std::to_string(a.joints);
    m["arch.styles"] = std::to_string(a.styles);
    m["arch.seed_frames"] = std::to_string(a.seed_frames);
    m["arch.d_model"] = std::to_string(a.d_model);
    m["arch.layers"] = std::to_string(a.layers);
    m["arch.heads"] = std::to_string(a.heads);
    m["arch.d_ff"] = std::to_string(a.d_ff);
    m["arch.d_z"] = std::to_string(a.d_z);
    m["arch.d_hidden"] = std::to_string(a.d_hidden);
    m["arch.d_cond"] = std::to_string(a.d_cond);
    m["arch.gn_groups"] = std::to_string(a.gn_groups);
    m["state.step"] = std::to_string(st.step);
    m["state.epoch"] = std::to_string(st.epoch);
    m["state.collapse_warnings"] = std::to_string(st.collapse_warnings);
    return m;
}

void apply_config_manifest(const Manifest& m, TrainState& st) {
    TrainConfig& c = st.config;
    ModelConfig& a = st.arch;
    c.T = manifest_get_size(m, "train.T");
    c.schedule_kind = schedule_kind_from_string(manifest_get(m, "train.schedule"));
    c.lr_g = manifest_get_double(m, "train.lr_g");
    c.lr_d = manifest_get_double(m, "train.lr_d");
    c.batch = manifest_get_size(m, "train.batch");
    c.lambda_geo = manifest_get_double(m, "train.lambda_geo");
    c.huber_delta = manifest_get_double(m, "train.huber_delta");
    c.cond_dropout = manifest_get_double(m, "train.cond_dropout");
    c.epochs = manifest_get_size(m, "train.epochs");
    c.ema_decay = manifest_get_double(m, "train.ema_decay");
    c.seed = manifest_get_size(m, "train.seed");
    c.adversarial = manifest_get(m, "train.adversarial") == "1";
    a.frames = manifest_get_size(m, "arch.frames");
    a.joints = manifest_get_size(m, "arch.joints");
    a.styles = manifest_get_size(m, "arch.styles");
    a.seed_frames = manifest_get_size(m, "arch.seed_frames");
    a.d_model = manifest_get_size(m, "arch.d_model");
    a.layers = manifest_get_size(m, "arch.layers");
    a.heads = manifest_get_size(m, "arch.heads");
    a.d_ff = manifest_get_size(m, "arch.d_ff");
    a.d_z = manifest_get_size(m, "arch.d_z");
    a.d_hidden = manifest_get_size(m, "arch.d_hidden");
    a.d_cond = manifest_get_size(m, "arch.d_cond");
    a.gn_groups = manifest_get_size(m, "arch.gn_groups");
    st.step = manifest_get_size(m, "state.step");
    st.epoch = manifest_get_size(m, "state.epoch");
    st.collapse_warnings = manifest_get_size(m, "state.collapse_warnings");
}

void save_adamw(std::ostream& os, const std::string& tag, const AdamWState& opt,
                const TensorDict& params) {
    write_section(os, tag);
    os << "lr=" << format_hex(opt.lr) << "\n";
    os << "beta1=" << format_hex(opt.beta1) << "\n";
    os << "beta2=" << format_hex(opt.beta2) << "\n";
    os << "eps=" << format_hex(opt.eps) << "\n";
    os << "weight_decay=" << format_hex(opt.weight_decay) << "\n";
    os << "step_count=" << opt.step_count << "\n";
    write_section(os, tag + ".m");
    save_tensors(os, named_moments(params, opt.m));
    write_section(os, tag + ".v");
    save_tensors(os, named_moments(params, opt.v));
}

AdamWState load_adamw(std::istream& is, const std::string& tag) {
    expect_section(is, tag);
    AdamWState opt;
    const Manifest m = read_manifest_section(is);
    opt.lr = manifest_get_double(m, "lr");
    opt.beta1 = manifest_get_double(m, "beta1");
    opt.beta2 = manifest_get_double(m, "beta2");
    opt.eps = manifest_get_double(m, "eps");
    opt.weight_decay = manifest_get_double(m, "weight_decay");
    opt.step_count = manifest_get_size(m, "step_count");
    expect_section(is, tag + ".m");
    opt.m = load_tensors(is).values;
    expect_section(is, tag + ".v");
    opt.v = load_tensors(is).values;
    return opt;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& st) {
    std::ofstream os(path);
    if (!os) throw IoError("save_checkpoint: cannot open " + path);
    os << kCkptMagic << "\n";
    write_section(os, "config");
    write_manifest(os, config_manifest(st));
    write_section(os, "schedule");
    save_schedule(os, st.sched);
    write_section(os, "rng");
    st.rng.save(os);
    write_section(os, "generator");
    save_tensors(os, st.g.params);
    write_section(os, "discriminator");
    save_tensors(os, st.d.params);
    save_adamw(os, "opt_g", st.opt_g, st.g.params);
    save_adamw(os, "opt_d", st.opt_d, st.d.params);
    write_section(os, "ema");
    os << "decay=" << format_hex(st.ema.decay) << "\n";
    write_section(os, "ema.shadow");
    save_tensors(os, named_moments(st.g.params, st.ema.shadow));
    write_section(os, "log");
    os << st.log.size() << "\n";
    for (const LossReport& r : st.log) {
        os << r.step << " " << format_hex(r.d_loss) << " " << format_hex(r.g_adv) << " "
           << format_hex(r.g_recon) << " " << format_hex(r.g_total) << "\n";
    }
    if (!os) throw IoError("save_checkpoint: stream write failed");
}

TrainState load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("load_checkpoint: cannot open " + path);
    if (next_nonblank_line(is) != kCkptMagic) {
        throw IoError("load_checkpoint: not a checkpoint file: " + path);
    }
    TrainState st;
    expect_section(is, "config");
    apply_config_manifest(read_manifest_section(is), st);
    expect_section(is, "schedule");
    st.sched = load_schedule(is);
    expect_section(is, "rng");
    st.rng.load(is);
    expect_section(is, "generator");
    st.g.cfg = st.arch;
    st.g.params = load_tensors(is);
    expect_section(is, "discriminator");
    st.d.cfg = st.arch;
    st.d.params = load_tensors(is);
    st.opt_g = load_adamw(is, "opt_g");
    st.opt_d = load_adamw(is, "opt_d");
    expect_section(is, "ema");
    st.ema.decay = manifest_get_double(read_manifest_section(is), "decay");
    expect_section(is, "ema.shadow");
    st.ema.shadow = load_tensors(is).values;
    expect_section(is, "log");
    std::size_t log_n = 0;
    is >> log_n;
    st.log.resize(log_n);
    for (LossReport& r : st.log) {
        std::string dl, ga, gr, gt;
        if (!(is >> r.step >> dl >> ga >> gr >> gt)) {
            throw IoError("load_checkpoint: truncated training log");
        }
        r.d_loss = parse_double(dl);
        r.g_adv = parse_double(ga);
        r.g_recon = parse_double(gr);
        r.g_total = parse_double(gt);
    }
    require(st.ema.shadow.size() == st.g.params.size(), "load_checkpoint: EMA size mismatch");
    require(st.sched.T == st.config.T, "load_checkpoint: schedule/config T mismatch");
    return st;
}

}  // namespace gestgan
