#include "gestgan/models.hpp"

#include <cmath>
#include <string>

#include "gestgan/common.hpp"
#include "gestgan/rng.hpp"

namespace gestgan {

void ModelConfig::validate() const {
    require(frames >= kPoolWindow && frames % kPoolWindow == 0,
            "ModelConfig: frames must be a positive multiple of the pooling window");
    require(joints >= 2, "ModelConfig: joints must be >= 2");
    require(styles >= 1, "ModelConfig: styles must be >= 1");
    require(seed_frames >= 1 && seed_frames < frames, "ModelConfig: need 1 <= F < N");
    require(d_model >= 2 && d_model % 2 == 0, "ModelConfig: d_model must be even");
    require(heads >= 1 && d_model % heads == 0, "ModelConfig: heads must divide d_model");
    require(layers >= 1, "ModelConfig: layers must be >= 1");
    require(d_ff >= 1 && d_z >= 1, "ModelConfig: d_ff and d_z must be >= 1");
    require(d_cond >= 2 && d_cond % 2 == 0, "ModelConfig: d_cond must be even");
    require(gn_groups >= 1 && d_hidden % gn_groups == 0,
            "ModelConfig: gn_groups must divide d_hidden");
}

CondFeatures make_cond_features(const ControlTrack& track, const ModelConfig& cfg) {
    const std::size_t n = cfg.frames, fd = cfg.frame_dim();
    require(track.beat_envelope.size() == n, "make_cond_features: envelope length != frames");
    require(track.style_id < cfg.styles, "make_cond_features: style out of range");
    require(track.seed_frames.rank() == 2 && track.seed_frames.rows() == cfg.seed_frames &&
                track.seed_frames.cols() == fd,
            "make_cond_features: seed_frames shape mismatch");

    CondFeatures f;
    f.env_windows = Tensor({n, kEnvWindow});
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kEnvWindow / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::ptrdiff_t w = -half; w <= half; ++w) {
            std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i) + w;
            src = std::max<std::ptrdiff_t>(0, std::min<std::ptrdiff_t>(src, n - 1));
            f.env_windows.at(i, static_cast<std::size_t>(w + half)) =
                track.beat_envelope[static_cast<std::size_t>(src)];
        }
    }
    f.style_onehot = Tensor({1, cfg.styles});
    f.style_onehot.at(0, track.style_id) = 1.0;
    f.seed_flat = track.seed_frames.reshaped({1, cfg.seed_frames * fd});
    f.env_row = Tensor({1, n});
    for (std::size_t i = 0; i < n; ++i) f.env_row.at(0, i) = track.beat_envelope[i];
    return f;
}

Tensor sinusoidal_embedding(double t, std::size_t dim) {
    require(dim >= 2 && dim % 2 == 0, "sinusoidal_embedding: dim must be even and >= 2");
    Tensor e({1, dim});
    const std::size_t half = dim / 2;
    for (std::size_t i = 0; i < half; ++i) {
        const double freq =
            std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
        e.at(0, 2 * i) = std::sin(t * freq);
        e.at(0, 2 * i + 1) = std::cos(t * freq);
    }
    return e;
}

namespace {

// Initialization: linear weights ~ N(0, 1/fan_in); embeddings, positional
// rows and null tokens ~ N(0, 0.02^2); norms start at identity.
Tensor init_linear(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
    Tensor w({fan_in, fan_out});
    const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std * rng.normal();
    return w;
}

Tensor init_table(Rng& rng, std::vector<std::size_t> shape) {
    Tensor w(std::move(shape));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.02 * rng.normal();
    return w;
}

std::string enc(std::size_t l, const char* leaf) {
    return "enc" + std::to_string(l) + "." + leaf;
}

}  // namespace

Generator make_generator(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Generator g;
    g.cfg = cfg;
    Rng rng(seed);
    TensorDict& p = g.params;
    const std::size_t d = cfg.d_model, fd = cfg.frame_dim();

    p.add("in.w", init_linear(rng, fd, d));
    p.add("in.b", Tensor({d}));
    p.add("pos", init_table(rng, {kPrefixTokens + cfg.frames, d}));
    p.add("cond.style", init_table(rng, {cfg.styles, d}));
    p.add("cond.seed.w", init_linear(rng, cfg.seed_frames * fd, d));
    p.add("cond.seed.b", Tensor({d}));
    p.add("cond.env.w", init_linear(rng, kEnvWindow, d));
    p.add("cond.env.b", Tensor({d}));
    p.add("cond.null", init_table(rng, {1, d}));
    p.add("time.w", init_linear(rng, d, d));
    p.add("time.b", Tensor({d}));
    p.add("z.w", init_linear(rng, cfg.d_z, d));
    p.add("z.b", Tensor({d}));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        p.add(enc(l, "ln1.g"), Tensor::full({d}, 1.0));
        p.add(enc(l, "ln1.b"), Tensor({d}));
        p.add(enc(l, "wq"), init_linear(rng, d, d));
        p.add(enc(l, "bq"), Tensor({d}));
        p.add(enc(l, "wk"), init_linear(rng, d, d));
        p.add(enc(l, "bk"), Tensor({d}));
        p.add(enc(l, "wv"), init_linear(rng, d, d));
        p.add(enc(l, "bv"), Tensor({d}));
        p.add(enc(l, "wo"), init_linear(rng, d, d));
        p.add(enc(l, "bo"), Tensor({d}));
        p.add(enc(l, "ln2.g"), Tensor::full({d}, 1.0));
        p.add(enc(l, "ln2.b"), Tensor({d}));
        p.add(enc(l, "ff.w1"), init_linear(rng, d, cfg.d_ff));
        p.add(enc(l, "ff.b1"), Tensor({cfg.d_ff}));
        p.add(enc(l, "ff.w2"), init_linear(rng, cfg.d_ff, d));
        p.add(enc(l, "ff.b2"), Tensor({d}));
    }
    p.add("final.ln.g", Tensor::full({d}, 1.0));
    p.add("final.ln.b", Tensor({d}));
    p.add("out.w", init_linear(rng, d, fd));
    p.add("out.b", Tensor({fd}));
    return g;
}

Discriminator make_discriminator(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Discriminator d;
    d.cfg = cfg;
    Rng rng(seed);
    TensorDict& p = d.params;
    const std::size_t fd = cfg.frame_dim(), dc = cfg.d_cond, h = cfg.d_hidden;
    const std::size_t pooled = (cfg.frames / kPoolWindow) * 2 * fd;
    const std::size_t d_in = pooled + 4 * dc;  // style + seed + env + time blocks

    p.add("cond.style", init_table(rng, {cfg.styles, dc}));
    p.add("cond.seed.w", init_linear(rng, cfg.seed_frames * fd, dc));
    p.add("cond.seed.b", Tensor({dc}));
    p.add("cond.env.w", init_linear(rng, cfg.frames, dc));
    p.add("cond.env.b", Tensor({dc}));
    p.add("cond.null", init_table(rng, {1, 3 * dc}));
    p.add("time.w", init_linear(rng, dc, dc));
    p.add("time.b", Tensor({dc}));

    // 7 affine layers: input -> 6 hidden (SELU) -> scalar logit, with group
    // norm between consecutive hidden layers (5 norms).
    p.add("mlp0.w", init_linear(rng, d_in, h));
    p.add("mlp0.b", Tensor({h}));
    for (std::size_t l = 1; l <= 5; ++l) {
        p.add("mlp" + std::to_string(l) + ".w", init_linear(rng, h, h));
        p.add("mlp" + std::to_string(l) + ".b", Tensor({h}));
        p.add("gn" + std::to_string(l - 1) + ".g", Tensor::full({h}, 1.0));
        p.add("gn" + std::to_string(l - 1) + ".b", Tensor({h}));
    }
    p.add("mlp6.w", init_linear(rng, h, 1));
    p.add("mlp6.b", Tensor({1}));
    return d;
}

std::vector<Var> lift_params(Tape& tape, const TensorDict& dict, bool requires_grad) {
    std::vector<Var> vars;
    vars.reserve(dict.size());
    for (const Tensor& t : dict.values) vars.push_back(tape.leaf(t, requires_grad));
    return vars;
}

namespace {

struct CondTokens {
    Var style;       // {1, d_model}
    Var seed;        // {1, d_model}
    Var time;        // {1, d_model} (z projection NOT included)
    Var frame_cond;  // {N, d_model}
};

// Shared by generator_forward and encode_condition. With null_mask the
// style/seed tokens become the learned null token and every frame's envelope
// feature is replaced by the same null row — the embedding is then exactly
// independent of the track content.
CondTokens cond_tokens(Tape& tape, const std::vector<Var>& p, const Generator& g,
                       const CondFeatures& cond, std::size_t t, bool null_mask) {
    const TensorDict& d = g.params;
    auto P = [&](const char* name) { return p[d.index_of(name)]; };
    const std::size_t n = g.cfg.frames;

    CondTokens out;
    Var null_tok = P("cond.null");
    if (null_mask) {
        out.style = null_tok;
        out.seed = null_tok;
        Tensor ones({n, 1});
        for (std::size_t i = 0; i < n; ++i) ones.at(i, 0) = 1.0;
        out.frame_cond = tape.matmul(tape.constant(ones), null_tok);
    } else {
        out.style = tape.matmul(tape.constant(cond.style_onehot), P("cond.style"));
        out.seed = tape.add_rowvec(tape.matmul(tape.constant(cond.seed_flat), P("cond.seed.w")),
                                   P("cond.seed.b"));
        out.frame_cond = tape.add_rowvec(
            tape.matmul(tape.constant(cond.env_windows), P("cond.env.w")), P("cond.env.b"));
    }
    const Tensor temb = sinusoidal_embedding(static_cast<double>(t), g.cfg.d_model);
    out.time = tape.add_rowvec(tape.matmul(tape.constant(temb), P("time.w")), P("time.b"));
    return out;
}

Var layer_norm(Tape& tape, Var x, Var gain, Var bias) { return tape.group_norm(x, 1, gain, bias); }

}  // namespace

Var generator_forward(Tape& tape, const std::vector<Var>& p, const Generator& g, Var x_t, Var z,
                      const CondFeatures& cond, std::size_t t, bool null_mask) {
    const ModelConfig& cfg = g.cfg;
    const TensorDict& d = g.params;
    require(p.size() == d.size(), "generator_forward: lifted parameter count mismatch");
    auto P = [&](const std::string& name) { return p[d.index_of(name)]; };
    require(tape.value(x_t).shape() ==
                std::vector<std::size_t>({cfg.frames, cfg.frame_dim()}),
            "generator_forward: x_t must be {N, frame_dim}");
    require(tape.value(z).shape() == std::vector<std::size_t>({1, cfg.d_z}),
            "generator_forward: z must be {1, d_z}");

    const CondTokens ct = cond_tokens(tape, p, g, cond, t, null_mask);
    Var time_tok =
        tape.add(ct.time, tape.add_rowvec(tape.matmul(z, P("z.w")), P("z.b")));

    Var frames = tape.add_rowvec(tape.matmul(x_t, P("in.w")), P("in.b"));
    frames = tape.add(frames, ct.frame_cond);
    Var x = tape.concat_rows({ct.style, ct.seed, time_tok, frames});
    x = tape.add(x, P("pos"));

    const std::size_t dk = cfg.d_model / cfg.heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        // pre-LN self-attention block
        Var h = layer_norm(tape, x, P(enc(l, "ln1.g")), P(enc(l, "ln1.b")));
        Var q = tape.add_rowvec(tape.matmul(h, P(enc(l, "wq"))), P(enc(l, "bq")));
        Var k = tape.add_rowvec(tape.matmul(h, P(enc(l, "wk"))), P(enc(l, "bk")));
        Var v = tape.add_rowvec(tape.matmul(h, P(enc(l, "wv"))), P(enc(l, "bv")));
        std::vector<Var> heads;
        heads.reserve(cfg.heads);
        for (std::size_t hi = 0; hi < cfg.heads; ++hi) {
            const std::size_t c0 = hi * dk, c1 = (hi + 1) * dk;
            Var qh = tape.slice_cols(q, c0, c1);
            Var kh = tape.slice_cols(k, c0, c1);
            Var vh = tape.slice_cols(v, c0, c1);
            Var attn = tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_dk));
            heads.push_back(tape.matmul(attn, vh));
        }
        Var o = tape.concat_cols(heads);
        x = tape.add(x, tape.add_rowvec(tape.matmul(o, P(enc(l, "wo"))), P(enc(l, "bo"))));
        // pre-LN feed-forward block
        Var f = layer_norm(tape, x, P(enc(l, "ln2.g")), P(enc(l, "ln2.b")));
        f = tape.gelu(tape.add_rowvec(tape.matmul(f, P(enc(l, "ff.w1"))), P(enc(l, "ff.b1"))));
        x = tape.add(x, tape.add_rowvec(tape.matmul(f, P(enc(l, "ff.w2"))), P(enc(l, "ff.b2"))));
    }
    Var y = layer_norm(tape, x, P("final.ln.g"), P("final.ln.b"));
    y = tape.slice_rows(y, kPrefixTokens, kPrefixTokens + cfg.frames);
    return tape.add_rowvec(tape.matmul(y, P("out.w")), P("out.b"));
}

Var discriminator_logit(Tape& tape, const std::vector<Var>& p, const Discriminator& d, Var x_prev,
                        Var x_t, const CondFeatures& cond, std::size_t t, bool null_mask) {
    const ModelConfig& cfg = d.cfg;
    const TensorDict& dict = d.params;
    require(p.size() == dict.size(), "discriminator_logit: lifted parameter count mismatch");
    auto P = [&](const std::string& name) { return p[dict.index_of(name)]; };
    const std::vector<std::size_t> want = {cfg.frames, cfg.frame_dim()};
    require(tape.value(x_prev).shape() == want && tape.value(x_t).shape() == want,
            "discriminator_logit: pair must be {N, frame_dim}");

    // (x_prev, x_t) concatenated per frame, mean-pooled over 4-frame windows,
    // flattened to one row.
    Var pair = tape.concat_cols({x_prev, x_t});
    Var pooled = tape.mean_pool_rows(pair, kPoolWindow);
    pooled = tape.reshape(pooled, {1, (cfg.frames / kPoolWindow) * 2 * cfg.frame_dim()});

    Var cond_block;
    if (null_mask) {
        cond_block = P("cond.null");
    } else {
        Var style = tape.matmul(tape.constant(cond.style_onehot), P("cond.style"));
        Var seed = tape.add_rowvec(tape.matmul(tape.constant(cond.seed_flat), P("cond.seed.w")),
                                   P("cond.seed.b"));
        Var env = tape.add_rowvec(tape.matmul(tape.constant(cond.env_row), P("cond.env.w")),
                                  P("cond.env.b"));
        cond_block = tape.concat_cols({style, seed, env});
    }
    const Tensor temb = sinusoidal_embedding(static_cast<double>(t), cfg.d_cond);
    Var time_block =
        tape.add_rowvec(tape.matmul(tape.constant(temb), P("time.w")), P("time.b"));

    Var x = tape.concat_cols({pooled, cond_block, time_block});
    x = tape.selu(tape.add_rowvec(tape.matmul(x, P("mlp0.w")), P("mlp0.b")));
    for (std::size_t l = 1; l <= 5; ++l) {
        const std::string gl = std::to_string(l - 1);
        x = tape.group_norm(x, cfg.gn_groups, P("gn" + gl + ".g"), P("gn" + gl + ".b"));
        const std::string ml = std::to_string(l);
        x = tape.selu(tape.add_rowvec(tape.matmul(x, P("mlp" + ml + ".w")), P("mlp" + ml + ".b")));
    }
    return tape.add_rowvec(tape.matmul(x, P("mlp6.w")), P("mlp6.b"));
}

Tensor generator_infer(const Generator& g, const Tensor& x_t, const Tensor& z,
                       const CondFeatures& cond, std::size_t t, bool null_mask) {
    Tape tape;
    std::vector<Var> p = lift_params(tape, g.params, false);
    Var out = generator_forward(tape, p, g, tape.constant(x_t), tape.constant(z), cond, t,
                                null_mask);
    return tape.value(out);
}

double discriminator_prob(const Discriminator& d, const Tensor& x_prev, const Tensor& x_t,
                          const CondFeatures& cond, std::size_t t, bool null_mask) {
    Tape tape;
    std::vector<Var> p = lift_params(tape, d.params, false);
    Var logit = discriminator_logit(tape, p, d, tape.constant(x_prev), tape.constant(x_t), cond, t,
                                    null_mask);
    const double prob = 1.0 / (1.0 + std::exp(-tape.value(logit).item()));
    return std::min(1.0 - 1e-12, std::max(1e-12, prob));
}

ConditionEmbedding encode_condition(const Generator& g, const ControlTrack& track, std::size_t t,
                                    bool null_mask) {
    const CondFeatures cond = make_cond_features(track, g.cfg);
    Tape tape;
    std::vector<Var> p = lift_params(tape, g.params, false);
    const CondTokens ct = cond_tokens(tape, p, g, cond, t, null_mask);
    ConditionEmbedding e;
    e.style_token = tape.value(ct.style);
    e.seed_token = tape.value(ct.seed);
    e.time_token = tape.value(ct.time);
    e.frame_cond = tape.value(ct.frame_cond);
    return e;
}

}  // namespace gestgan
