// gestgan command-line front end: dataset creation, training, sampling,
// evaluation, benchmarking, the posterior-oracle demo, and the two ablation
// harnesses. Every verb writes a `run.manifest` (key=value) beside its
// outputs recording the fully resolved configuration, so any run can be
// reproduced from the recorded flags alone.
//
// Exit codes: 0 success, 1 usage/config error, 2 numerical failure,
// 3 I/O failure.
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gestgan/common.hpp"
#include "gestgan/io.hpp"
#include "gestgan/metrics.hpp"
#include "gestgan/models.hpp"
#include "gestgan/oracle.hpp"
#include "gestgan/sampling.hpp"
#include "gestgan/schedule.hpp"
#include "gestgan/synthdata.hpp"
#include "gestgan/training.hpp"

using namespace gestgan;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- plumbing

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

// Refuses to write into an existing non-empty directory unless forced.
void prepare_outdir(const std::string& dir, bool force) {
    if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
        throw IoError("output directory '" + dir + "' is not empty (use --force to reuse it)");
    }
    fs::create_directories(dir);
}

void manifest_put(Manifest& m, const std::string& key, const std::string& v) { m[key] = v; }
void manifest_put(Manifest& m, const std::string& key, double v) { m[key] = format_g17(v); }
void manifest_put(Manifest& m, const std::string& key, std::uint64_t v) {
    m[key] = std::to_string(v);  // also covers std::size_t on this platform
}
void manifest_put(Manifest& m, const std::string& key, bool v) { m[key] = v ? "1" : "0"; }

// ---------------------------------------------------------------- flag groups

struct SamplerOpts {
    std::string kind = "gan_fewstep";
    std::size_t steps = 0;  // 0 -> schedule T
    double eta = 0.0;
    std::uint64_t seed = 0;
};

void add_sampler_flags(CLI::App* cmd, SamplerOpts& s) {
    cmd->add_option("--sampler", s.kind, "Sampler: gan_fewstep | ancestral | ddim")
        ->capture_default_str();
    cmd->add_option("--steps", s.steps, "Reverse steps (0 = schedule T; ddim may use fewer)")
        ->capture_default_str();
    cmd->add_option("--eta", s.eta, "DDIM stochasticity in [0, 1]")->capture_default_str();
    cmd->add_option("--sample-seed", s.seed, "Sampling RNG seed")->capture_default_str();
}

SamplerSpec make_spec(const SamplerOpts& s) {
    return SamplerSpec{sampler_kind_from_string(s.kind), s.steps, s.eta, s.seed};
}

void manifest_sampler(Manifest& m, const SamplerOpts& s) {
    manifest_put(m, "sampler.kind", s.kind);
    manifest_put(m, "sampler.steps", s.steps);
    manifest_put(m, "sampler.eta", s.eta);
    manifest_put(m, "sampler.seed", s.seed);
}

struct ArchOpts {
    std::size_t d_model = 128;
    std::size_t layers = 4;
    std::size_t heads = 4;
    std::size_t d_ff = 256;
    std::size_t d_z = 32;
    std::size_t d_hidden = 128;
    std::size_t d_cond = 32;
    std::size_t gn_groups = 8;
};

void add_arch_flags(CLI::App* cmd, ArchOpts& a) {
    cmd->add_option("--d-model", a.d_model, "Generator token width")->capture_default_str();
    cmd->add_option("--layers", a.layers, "Generator encoder layers")->capture_default_str();
    cmd->add_option("--heads", a.heads, "Attention heads")->capture_default_str();
    cmd->add_option("--d-ff", a.d_ff, "Feed-forward width")->capture_default_str();
    cmd->add_option("--d-z", a.d_z, "Latent z width")->capture_default_str();
    cmd->add_option("--d-hidden", a.d_hidden, "Discriminator hidden width")
        ->capture_default_str();
    cmd->add_option("--d-cond", a.d_cond, "Condition feature width (discriminator)")
        ->capture_default_str();
    cmd->add_option("--gn-groups", a.gn_groups, "Group-norm groups (discriminator)")
        ->capture_default_str();
}

// Data-dependent fields come from the dataset; capacity fields from flags.
ModelConfig arch_for(const Dataset& ds, const ArchOpts& a) {
    ModelConfig cfg;
    cfg.frames = ds.config.frames;
    cfg.joints = ds.config.skeleton.joint_count;
    cfg.styles = ds.config.styles;
    cfg.seed_frames = ds.config.seed_frames;
    cfg.d_model = a.d_model;
    cfg.layers = a.layers;
    cfg.heads = a.heads;
    cfg.d_ff = a.d_ff;
    cfg.d_z = a.d_z;
    cfg.d_hidden = a.d_hidden;
    cfg.d_cond = a.d_cond;
    cfg.gn_groups = a.gn_groups;
    return cfg;
}

void manifest_arch(Manifest& m, const ModelConfig& a) {
    manifest_put(m, "arch.frames", a.frames);
    manifest_put(m, "arch.joints", a.joints);
    manifest_put(m, "arch.styles", a.styles);
    manifest_put(m, "arch.seed_frames", a.seed_frames);
    manifest_put(m, "arch.d_model", a.d_model);
    manifest_put(m, "arch.layers", a.layers);
    manifest_put(m, "arch.heads", a.heads);
    manifest_put(m, "arch.d_ff", a.d_ff);
    manifest_put(m, "arch.d_z", a.d_z);
    manifest_put(m, "arch.d_hidden", a.d_hidden);
    manifest_put(m, "arch.d_cond", a.d_cond);
    manifest_put(m, "arch.gn_groups", a.gn_groups);
}

void manifest_train(Manifest& m, const TrainConfig& tc) {
    manifest_put(m, "train.T", tc.T);
    manifest_put(m, "train.schedule", to_string(tc.schedule_kind));
    manifest_put(m, "train.lr_g", tc.lr_g);
    manifest_put(m, "train.lr_d", tc.lr_d);
    manifest_put(m, "train.batch", tc.batch);
    manifest_put(m, "train.lambda_geo", tc.lambda_geo);
    manifest_put(m, "train.huber_delta", tc.huber_delta);
    manifest_put(m, "train.cond_dropout", tc.cond_dropout);
    manifest_put(m, "train.epochs", tc.epochs);
    manifest_put(m, "train.ema_decay", tc.ema_decay);
    manifest_put(m, "train.seed", tc.seed);
    manifest_put(m, "train.adversarial", tc.adversarial);
}

// Training flags shared by `train` and both ablation harnesses.
void add_train_flags(CLI::App* cmd, TrainConfig& tc, std::string& schedule, bool with_T) {
    if (with_T) {
        cmd->add_option("-T,--diffusion-steps", tc.T, "Diffusion steps T")
            ->capture_default_str();
    }
    cmd->add_option("--schedule", schedule, "Noise schedule: geometric-alpha | linear")
        ->capture_default_str();
    cmd->add_option("--lr-g", tc.lr_g, "Generator learning rate")->capture_default_str();
    cmd->add_option("--lr-d", tc.lr_d, "Discriminator learning rate")->capture_default_str();
    cmd->add_option("--batch", tc.batch, "Mini-batch size")->capture_default_str();
    cmd->add_option("--lambda-geo", tc.lambda_geo, "Geometric loss weight")
        ->capture_default_str();
    cmd->add_option("--huber-delta", tc.huber_delta, "Huber transition point")
        ->capture_default_str();
    cmd->add_option("--cond-dropout", tc.cond_dropout, "Condition dropout probability")
        ->capture_default_str();
    cmd->add_option("--epochs", tc.epochs, "Training epochs (total target)")
        ->capture_default_str();
    cmd->add_option("--ema-decay", tc.ema_decay, "Generator EMA decay")->capture_default_str();
    cmd->add_option("--seed", tc.seed, "Training RNG seed")->capture_default_str();
}

// ---------------------------------------------------------------- shared steps

Dataset load_dataset(const std::string& dir) { return import_dataset(dir); }

std::vector<ControlTrack> test_tracks(const Dataset& ds, std::size_t n) {
    require(n >= 1, "need at least one control track");
    require(n <= ds.test.size(), "requested more tracks than the test split holds");
    std::vector<ControlTrack> tracks;
    for (std::size_t i = 0; i < n; ++i) tracks.push_back(ds.test[i].track);
    return tracks;
}

Generator pick_generator(const TrainState& st, bool raw_weights) {
    return raw_weights ? st.g : ema_generator(st);
}

FeatureExtractor ensure_extractor(const std::string& path, const Dataset& ds, std::uint64_t seed,
                                  std::size_t epochs) {
    if (fs::exists(path)) {
        std::cout << "extractor: loading " << path << "\n";
        return load_extractor(path);
    }
    std::cout << "extractor: training on " << ds.train.size() << " real clips (seed " << seed
              << ")\n";
    std::vector<const GestureClip*> clips;
    clips.reserve(ds.train.size());
    for (const ClipExample& ex : ds.train) clips.push_back(&ex.clip);
    const FeatureExtractor fx = train_feature_extractor(clips, seed, epochs);
    save_extractor(path, fx);
    return fx;
}

TrainState train_or_load(const std::string& dir, const TrainConfig& tc, const ModelConfig& arch,
                         const Dataset& ds) {
    const std::string ckpt = join(dir, "checkpoint.txt");
    if (fs::exists(ckpt)) {
        std::cout << "loading existing checkpoint " << ckpt << "\n";
        return load_checkpoint(ckpt);
    }
    fs::create_directories(dir);
    TrainState st = make_train_state(tc, arch);
    fit(st, ds, &std::cout);
    save_checkpoint(ckpt, st);
    write_loss_csv(join(dir, "losses.csv"), st.log);
    return st;
}

void write_clips_csv(const std::string& path, const std::vector<std::vector<GestureClip>>& grid,
                     std::size_t joints) {
    std::ostringstream os;
    std::vector<std::string> header = {"track", "sample", "frame"};
    for (std::size_t j = 0; j < joints; ++j) {
        header.push_back("j" + std::to_string(j) + "_x");
        header.push_back("j" + std::to_string(j) + "_y");
    }
    write_csv_row(os, header);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t j = 0; j < grid[i].size(); ++j) {
            const GestureClip& clip = grid[i][j];
            for (std::size_t f = 0; f < clip.frames; ++f) {
                std::vector<std::string> row = {std::to_string(i), std::to_string(j),
                                                std::to_string(f)};
                for (std::size_t c = 0; c < clip.positions.cols(); ++c) {
                    row.push_back(format_g17(clip.positions.at(f, c)));
                }
                write_csv_row(os, row);
            }
        }
    }
    write_text_file(path, os.str());
}

void write_metrics_csv(const std::string& path, const std::vector<std::string>& key_header,
                       const std::vector<std::vector<std::string>>& key_cells,
                       const std::vector<MetricsReport>& reports) {
    std::ostringstream os;
    std::vector<std::string> header = key_header;
    for (const char* c : {"fgd", "ba", "div", "ms_per_frame", "config_fingerprint"}) {
        header.push_back(c);
    }
    write_csv_row(os, header);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        std::vector<std::string> row = key_cells[i];
        row.push_back(format_g17(reports[i].fgd));
        row.push_back(format_g17(reports[i].ba));
        row.push_back(format_g17(reports[i].div));
        row.push_back(format_g17(reports[i].ms_per_frame));
        row.push_back(std::to_string(reports[i].config_fingerprint));
        write_csv_row(os, row);
    }
    write_text_file(path, os.str());
}

void print_metrics_table(const std::vector<std::string>& labels,
                         const std::vector<MetricsReport>& reports) {
    std::cout << "\n  run              fgd          ba         div    ms/frame\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        std::ostringstream line;
        line << "  " << labels[i];
        for (std::size_t pad = labels[i].size(); pad < 12; ++pad) line << ' ';
        line.precision(6);
        line << std::fixed;
        line << ' ' << std::setw(11) << reports[i].fgd << ' ' << std::setw(11) << reports[i].ba
             << ' ' << std::setw(11) << reports[i].div << ' ' << std::setw(11)
             << reports[i].ms_per_frame;
        std::cout << line.str() << "\n";
    }
    std::cout << "\n";
}

// ---------------------------------------------------------------- verbs

struct DataCmd {
    std::string out;
    std::size_t count = 1000;
    std::size_t frames = 80;
    double fps = 20.0;
    std::size_t styles = 4;
    std::size_t seed_frames = 8;
    double train_ratio = 0.8;
    double val_ratio = 0.1;
    std::uint64_t seed = 1;
    bool force = false;

    void run() const {
        SynthConfig cfg;
        cfg.frames = frames;
        cfg.fps = fps;
        cfg.styles = styles;
        cfg.seed_frames = seed_frames;
        prepare_outdir(out, force);
        const Dataset ds = make_dataset(count, train_ratio, val_ratio, cfg, seed);
        export_dataset(ds, out);

        Manifest m;
        manifest_put(m, "command", std::string("data"));
        manifest_put(m, "data.count", count);
        manifest_put(m, "data.frames", frames);
        manifest_put(m, "data.fps", fps);
        manifest_put(m, "data.styles", styles);
        manifest_put(m, "data.seed_frames", seed_frames);
        manifest_put(m, "data.train_ratio", train_ratio);
        manifest_put(m, "data.val_ratio", val_ratio);
        manifest_put(m, "data.seed", seed);
        write_manifest_file(join(out, "run.manifest"), m);
        std::cout << "wrote " << ds.train.size() << "/" << ds.val.size() << "/" << ds.test.size()
                  << " train/val/test clips to " << out << "\n";
    }
};

struct TrainCmd {
    std::string data;
    std::string out;
    std::string resume;
    std::string schedule = "geometric-alpha";
    TrainConfig tc;
    ArchOpts arch;
    bool no_adversarial = false;
    bool force = false;
    CLI::Option* epochs_opt = nullptr;

    void run() const {
        const Dataset ds = load_dataset(data);
        prepare_outdir(out, force);

        TrainState st = [&] {
            if (!resume.empty()) {
                TrainState loaded = load_checkpoint(resume);
                // On resume only the epoch target may move; everything else
                // comes from the checkpoint to keep the trajectory intact.
                if (epochs_opt != nullptr && epochs_opt->count() > 0) {
                    loaded.config.epochs = tc.epochs;
                }
                return loaded;
            }
            TrainConfig cfg = tc;
            cfg.schedule_kind = schedule_kind_from_string(schedule);
            cfg.adversarial = !no_adversarial;
            return make_train_state(cfg, arch_for(ds, arch));
        }();

        fit(st, ds, &std::cout);
        save_checkpoint(join(out, "checkpoint.txt"), st);
        write_loss_csv(join(out, "losses.csv"), st.log);

        Manifest m;
        manifest_put(m, "command", std::string("train"));
        manifest_put(m, "train.data", data);
        manifest_put(m, "train.resume", resume);
        manifest_train(m, st.config);
        manifest_arch(m, st.arch);
        write_manifest_file(join(out, "run.manifest"), m);
        std::cout << "checkpoint: " << join(out, "checkpoint.txt") << " (" << st.step
                  << " steps, " << st.collapse_warnings << " collapse warnings)\n";
    }
};

struct SampleCmd {
    std::string checkpoint;
    std::string data;
    std::string out;
    SamplerOpts sampler;
    std::size_t tracks = 4;
    std::size_t k = 1;
    bool raw_weights = false;
    bool force = false;

    void run() const {
        const TrainState st = load_checkpoint(checkpoint);
        const Dataset ds = load_dataset(data);
        prepare_outdir(out, force);
        const Generator g = pick_generator(st, raw_weights);
        const std::vector<ControlTrack> ctrl = test_tracks(ds, tracks);
        const auto grid = batch_generate(make_spec(sampler), g, st.sched, ctrl, k, ds.config);
        write_clips_csv(join(out, "clips.csv"), grid, ds.config.skeleton.joint_count);

        Manifest m;
        manifest_put(m, "command", std::string("sample"));
        manifest_put(m, "sample.checkpoint", checkpoint);
        manifest_put(m, "sample.data", data);
        manifest_put(m, "sample.tracks", tracks);
        manifest_put(m, "sample.k", k);
        manifest_put(m, "sample.raw_weights", raw_weights);
        manifest_sampler(m, sampler);
        write_manifest_file(join(out, "run.manifest"), m);
        std::cout << "wrote " << tracks * k << " clips (" << tracks << " tracks x " << k
                  << " samples) to " << join(out, "clips.csv") << "\n";
    }
};

struct EvalCmd {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::string extractor;  // defaults to <out>/extractor.txt
    SamplerOpts sampler;
    EvalOptions opt;
    std::uint64_t fx_seed = 17;
    std::size_t fx_epochs = 20;
    bool raw_weights = false;
    bool force = false;

    void run() const {
        const TrainState st = load_checkpoint(checkpoint);
        const Dataset ds = load_dataset(data);
        prepare_outdir(out, force);
        const std::string fx_path = extractor.empty() ? join(out, "extractor.txt") : extractor;
        const FeatureExtractor fx = ensure_extractor(fx_path, ds, fx_seed, fx_epochs);
        const Generator g = pick_generator(st, raw_weights);
        const MetricsReport rep =
            evaluate(g, make_spec(sampler), st.sched, ds.test, fx, ds.config, opt);

        write_metrics_csv(join(out, "metrics.csv"), {}, {{}}, {rep});
        print_metrics_table({"eval"}, {rep});

        Manifest m;
        manifest_put(m, "command", std::string("eval"));
        manifest_put(m, "eval.checkpoint", checkpoint);
        manifest_put(m, "eval.data", data);
        manifest_put(m, "eval.extractor", fx_path);
        manifest_put(m, "eval.fx_seed", fx_seed);
        manifest_put(m, "eval.fx_epochs", fx_epochs);
        manifest_put(m, "eval.div_tracks", opt.div_tracks);
        manifest_put(m, "eval.div_k", opt.div_k);
        manifest_put(m, "eval.bench_tracks", opt.bench_tracks);
        manifest_put(m, "eval.bench_reps", opt.bench_reps);
        manifest_put(m, "eval.raw_weights", raw_weights);
        manifest_sampler(m, sampler);
        write_manifest_file(join(out, "run.manifest"), m);
    }
};

struct BenchCmd {
    std::string checkpoint;
    std::string data;
    std::string out;
    SamplerOpts sampler;
    std::size_t tracks = 4;
    std::size_t reps = 5;
    bool raw_weights = false;
    bool force = false;

    void run() const {
        const TrainState st = load_checkpoint(checkpoint);
        const Dataset ds = load_dataset(data);
        prepare_outdir(out, force);
        const Generator g = pick_generator(st, raw_weights);
        const std::vector<ControlTrack> ctrl = test_tracks(ds, tracks);
        const LatencyReport rep =
            benchmark(make_spec(sampler), g, st.sched, ctrl, ds.config, reps);

        {
            std::ostringstream os;
            write_csv_row(os, {"total_ms", "frames", "repetitions", "ms_per_frame"});
            write_csv_row(os, {format_g17(rep.total_ms), std::to_string(rep.frames),
                               std::to_string(rep.repetitions), format_g17(rep.ms_per_frame)});
            write_text_file(join(out, "latency.csv"), os.str());
        }
        {
            std::ostringstream os;
            write_csv_row(os, {"rep", "ms"});
            for (std::size_t i = 0; i < rep.rep_ms.size(); ++i) {
                write_csv_row(os, {std::to_string(i), format_g17(rep.rep_ms[i])});
            }
            write_text_file(join(out, "latency_reps.csv"), os.str());
        }
        {
            std::ostringstream os;
            write_csv_row(os, {"step", "ms"});
            for (std::size_t i = 0; i < rep.per_step_ms.size(); ++i) {
                write_csv_row(os, {std::to_string(i), format_g17(rep.per_step_ms[i])});
            }
            write_text_file(join(out, "latency_steps.csv"), os.str());
        }

        Manifest m;
        manifest_put(m, "command", std::string("bench"));
        manifest_put(m, "bench.checkpoint", checkpoint);
        manifest_put(m, "bench.data", data);
        manifest_put(m, "bench.tracks", tracks);
        manifest_put(m, "bench.reps", reps);
        manifest_put(m, "bench.raw_weights", raw_weights);
        manifest_sampler(m, sampler);
        write_manifest_file(join(out, "run.manifest"), m);
        std::cout << "median repetition " << rep.total_ms << " ms over " << rep.frames
                  << " frames -> " << rep.ms_per_frame << " ms/frame\n";
    }
};

struct OracleCmd {
    std::string out;
    std::size_t grid = 4097;
    double x_t = 0.0;
    bool force = false;

    struct Case {
        std::string name;
        double abar_prev;
        double abar_t;
    };

    void run() const {
        prepare_outdir(out, force);
        // The two-mode demo distribution: N(-1, 0.1^2) + N(+1, 0.1^2).
        const GaussianMixture1D data{{0.5, 0.5}, {-1.0, 1.0}, {0.1, 0.1}};
        // A large compression step makes the true posterior bimodal; an
        // adjacent fine step (abar ratio >= 0.98) keeps it unimodal.
        const std::vector<Case> cases = {{"large_gap", 0.99, 0.01},
                                         {"small_gap", 0.50, 0.49}};

        std::ostringstream summary;
        write_csv_row(summary, {"case", "abar_prev", "abar_t", "x_t", "modes_exact",
                                "modes_quadrature", "max_abs_dev"});
        for (const Case& c : cases) {
            const PosteriorResult exact = exact_posterior(data, c.abar_t, c.abar_prev, x_t);
            const DensityGrid quad = quadrature_posterior(data, c.abar_t, c.abar_prev, x_t, grid);
            double max_dev = 0.0;
            std::ostringstream os;
            write_csv_row(os, {"x", "exact", "quadrature", "abs_diff"});
            for (std::size_t i = 0; i < quad.x.size(); ++i) {
                const double ex = exact.mixture.pdf(quad.x[i]);
                const double dev = std::abs(ex - quad.density[i]);
                max_dev = std::max(max_dev, dev);
                write_csv_row(os, {format_g17(quad.x[i]), format_g17(ex),
                                   format_g17(quad.density[i]), format_g17(dev)});
            }
            write_text_file(join(out, "density_" + c.name + ".csv"), os.str());
            if (!(max_dev < 1e-6)) {
                throw NumericError("oracle: exact and quadrature posteriors disagree (max dev " +
                                   format_g17(max_dev) + ")");
            }
            const ModeReport quad_modes = count_modes(quad.x, quad.density);
            write_csv_row(summary,
                          {c.name, format_g17(c.abar_prev), format_g17(c.abar_t),
                           format_g17(x_t), std::to_string(exact.mode_locations.size()),
                           std::to_string(quad_modes.count), format_g17(max_dev)});
            std::cout << c.name << ": abar " << c.abar_prev << " -> " << c.abar_t << ", "
                      << exact.mode_locations.size() << " mode(s), max |exact - quadrature| = "
                      << max_dev << "\n";
        }
        write_text_file(join(out, "summary.csv"), summary.str());

        Manifest m;
        manifest_put(m, "command", std::string("oracle"));
        manifest_put(m, "oracle.grid", grid);
        manifest_put(m, "oracle.x_t", x_t);
        manifest_put(m, "oracle.mixture", std::string("0.5*N(-1,0.1^2)+0.5*N(+1,0.1^2)"));
        write_manifest_file(join(out, "run.manifest"), m);
    }
};

struct AblateStepsCmd {
    std::string data;
    std::string out;
    std::vector<std::size_t> steps = {1, 5, 10, 20};
    std::string schedule = "geometric-alpha";
    TrainConfig tc;  // T is taken from `steps` per row
    ArchOpts arch;
    EvalOptions opt;
    std::uint64_t fx_seed = 17;
    std::size_t fx_epochs = 20;
    std::uint64_t eval_seed = 0;
    bool force = false;

    void run() const {
        require(!steps.empty(), "ablate-steps: empty steps list");
        const Dataset ds = load_dataset(data);
        prepare_outdir(out, force);
        const FeatureExtractor fx =
            ensure_extractor(join(out, "extractor.txt"), ds, fx_seed, fx_epochs);

        std::vector<MetricsReport> reports;
        std::vector<std::vector<std::string>> keys;
        std::vector<std::string> labels;
        for (std::size_t T : steps) {
            std::cout << "=== T = " << T << " ===\n";
            TrainConfig cfg = tc;
            cfg.T = T;
            cfg.schedule_kind = schedule_kind_from_string(schedule);
            const TrainState st =
                train_or_load(join(out, "T" + std::to_string(T)), cfg, arch_for(ds, arch), ds);
            const SamplerSpec spec{SamplerKind::gan_fewstep, 0, 0.0, eval_seed};
            reports.push_back(
                evaluate(ema_generator(st), spec, st.sched, ds.test, fx, ds.config, opt));
            keys.push_back({std::to_string(T)});
            labels.push_back("T=" + std::to_string(T));
        }
        write_metrics_csv(join(out, "ablate_steps.csv"), {"steps"}, keys, reports);
        print_metrics_table(labels, reports);

        Manifest m;
        manifest_put(m, "command", std::string("ablate-steps"));
        manifest_put(m, "ablate.data", data);
        std::string list;
        for (std::size_t T : steps) list += (list.empty() ? "" : ",") + std::to_string(T);
        manifest_put(m, "ablate.steps", list);
        manifest_put(m, "ablate.eval_seed", eval_seed);
        manifest_put(m, "ablate.fx_seed", fx_seed);
        manifest_train(m, tc);
        write_manifest_file(join(out, "run.manifest"), m);
    }
};

struct AblateGeoCmd {
    std::string data;
    std::string out;
    std::vector<double> weights = {0.0, 1.0, 10.0};
    std::string schedule = "geometric-alpha";
    TrainConfig tc;
    ArchOpts arch;
    EvalOptions opt;
    std::uint64_t fx_seed = 17;
    std::size_t fx_epochs = 20;
    std::uint64_t eval_seed = 0;
    bool force = false;

    static std::string slug(double w) {
        std::string s = format_g17(w);
        for (char& c : s) {
            if (c == '.') c = 'p';
            if (c == '-') c = 'm';
        }
        return s;
    }

    void run() const {
        require(!weights.empty(), "ablate-geo: empty weight list");
        const Dataset ds = load_dataset(data);
        prepare_outdir(out, force);
        const FeatureExtractor fx =
            ensure_extractor(join(out, "extractor.txt"), ds, fx_seed, fx_epochs);

        std::vector<MetricsReport> reports;
        std::vector<std::vector<std::string>> keys;
        std::vector<std::string> labels;
        for (double w : weights) {
            std::cout << "=== lambda_geo = " << format_g17(w) << " ===\n";
            TrainConfig cfg = tc;
            cfg.lambda_geo = w;
            cfg.schedule_kind = schedule_kind_from_string(schedule);
            const TrainState st =
                train_or_load(join(out, "lambda" + slug(w)), cfg, arch_for(ds, arch), ds);
            const SamplerSpec spec{SamplerKind::gan_fewstep, 0, 0.0, eval_seed};
            reports.push_back(
                evaluate(ema_generator(st), spec, st.sched, ds.test, fx, ds.config, opt));
            keys.push_back({format_g17(w)});
            labels.push_back("lambda=" + format_g17(w));
        }
        write_metrics_csv(join(out, "ablate_geo.csv"), {"lambda_geo"}, keys, reports);
        print_metrics_table(labels, reports);

        Manifest m;
        manifest_put(m, "command", std::string("ablate-geo"));
        manifest_put(m, "ablate.data", data);
        std::string list;
        for (double w : weights) list += (list.empty() ? "" : ",") + format_g17(w);
        manifest_put(m, "ablate.weights", list);
        manifest_put(m, "ablate.eval_seed", eval_seed);
        manifest_put(m, "ablate.fx_seed", fx_seed);
        manifest_train(m, tc);
        write_manifest_file(join(out, "run.manifest"), m);
    }
};

void add_eval_option_flags(CLI::App* cmd, EvalOptions& opt) {
    cmd->add_option("--div-tracks", opt.div_tracks, "Controls probed for diversity")
        ->capture_default_str();
    cmd->add_option("--div-k", opt.div_k, "Samples per control for diversity")
        ->capture_default_str();
    cmd->add_option("--bench-tracks", opt.bench_tracks, "Controls timed for latency")
        ->capture_default_str();
    cmd->add_option("--bench-reps", opt.bench_reps, "Latency repetitions")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-step conditional denoising GAN for gesture generation"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a key=value config file");

    DataCmd data_cmd;
    auto* data = app.add_subcommand("data", "Generate the synthetic gesture dataset");
    data->add_option("-o,--out", data_cmd.out, "Output directory")->required();
    data->add_option("--count", data_cmd.count, "Total clips")->capture_default_str();
    data->add_option("--frames", data_cmd.frames, "Frames per clip")->capture_default_str();
    data->add_option("--fps", data_cmd.fps, "Frames per second")->capture_default_str();
    data->add_option("--styles", data_cmd.styles, "Style count")->capture_default_str();
    data->add_option("--seed-frames", data_cmd.seed_frames, "Seed-gesture frames")
        ->capture_default_str();
    data->add_option("--train-ratio", data_cmd.train_ratio, "Train split ratio")
        ->capture_default_str();
    data->add_option("--val-ratio", data_cmd.val_ratio, "Validation split ratio")
        ->capture_default_str();
    data->add_option("--seed", data_cmd.seed, "Dataset RNG seed")->capture_default_str();
    data->add_flag("--force", data_cmd.force, "Reuse a non-empty output directory");
    data->callback([&] { data_cmd.run(); });

    TrainCmd train_cmd;
    auto* train = app.add_subcommand("train", "Train the denoising GAN (or plain diffusion)");
    train->add_option("--data", train_cmd.data, "Dataset directory (from `data`)")->required();
    train->add_option("-o,--out", train_cmd.out, "Output directory")->required();
    train->add_option("--resume", train_cmd.resume,
                      "Checkpoint to continue from (only --epochs may change)");
    add_train_flags(train, train_cmd.tc, train_cmd.schedule, true);
    train_cmd.epochs_opt = train->get_option("--epochs");
    add_arch_flags(train, train_cmd.arch);
    train->add_flag("--no-adversarial", train_cmd.no_adversarial,
                    "Plain-diffusion arm: geometric loss only, no discriminator");
    train->add_flag("--force", train_cmd.force, "Reuse a non-empty output directory");
    train->callback([&] { train_cmd.run(); });

    SampleCmd sample_cmd;
    auto* sample = app.add_subcommand("sample", "Generate clips from a checkpoint");
    sample->add_option("--checkpoint", sample_cmd.checkpoint, "Training checkpoint")->required();
    sample->add_option("--data", sample_cmd.data, "Dataset directory (controls come from test)")
        ->required();
    sample->add_option("-o,--out", sample_cmd.out, "Output directory")->required();
    add_sampler_flags(sample, sample_cmd.sampler);
    sample->add_option("--tracks", sample_cmd.tracks, "Test controls to condition on")
        ->capture_default_str();
    sample->add_option("-k,--samples-per-track", sample_cmd.k, "Clips per control")
        ->capture_default_str();
    sample->add_flag("--raw-weights", sample_cmd.raw_weights,
                     "Use live generator weights instead of the EMA");
    sample->add_flag("--force", sample_cmd.force, "Reuse a non-empty output directory");
    sample->callback([&] { sample_cmd.run(); });

    EvalCmd eval_cmd;
    auto* eval = app.add_subcommand("eval", "Evaluate FGD/BA/DIV/latency on the test split");
    eval->add_option("--checkpoint", eval_cmd.checkpoint, "Training checkpoint")->required();
    eval->add_option("--data", eval_cmd.data, "Dataset directory")->required();
    eval->add_option("-o,--out", eval_cmd.out, "Output directory")->required();
    eval->add_option("--extractor", eval_cmd.extractor,
                     "Feature-extractor file (default <out>/extractor.txt; trained if missing)");
    add_sampler_flags(eval, eval_cmd.sampler);
    add_eval_option_flags(eval, eval_cmd.opt);
    eval->add_option("--fx-seed", eval_cmd.fx_seed, "Extractor training seed")
        ->capture_default_str();
    eval->add_option("--fx-epochs", eval_cmd.fx_epochs, "Extractor training epochs")
        ->capture_default_str();
    eval->add_flag("--raw-weights", eval_cmd.raw_weights,
                   "Use live generator weights instead of the EMA");
    eval->add_flag("--force", eval_cmd.force, "Reuse a non-empty output directory");
    eval->callback([&] { eval_cmd.run(); });

    BenchCmd bench_cmd;
    auto* bench = app.add_subcommand("bench", "Measure sampling latency");
    bench->add_option("--checkpoint", bench_cmd.checkpoint, "Training checkpoint")->required();
    bench->add_option("--data", bench_cmd.data, "Dataset directory")->required();
    bench->add_option("-o,--out", bench_cmd.out, "Output directory")->required();
    add_sampler_flags(bench, bench_cmd.sampler);
    bench->add_option("--tracks", bench_cmd.tracks, "Test controls to time")
        ->capture_default_str();
    bench->add_option("--reps", bench_cmd.reps, "Repetitions (median reported)")
        ->capture_default_str();
    bench->add_flag("--raw-weights", bench_cmd.raw_weights,
                    "Use live generator weights instead of the EMA");
    bench->add_flag("--force", bench_cmd.force, "Reuse a non-empty output directory");
    bench->callback([&] { bench_cmd.run(); });

    OracleCmd oracle_cmd;
    auto* oracle = app.add_subcommand(
        "oracle", "Exact vs quadrature denoising posteriors for the two-mode demo");
    oracle->add_option("-o,--out", oracle_cmd.out, "Output directory")->required();
    oracle->add_option("--grid", oracle_cmd.grid, "Quadrature grid points")
        ->capture_default_str();
    oracle->add_option("--x-t", oracle_cmd.x_t, "Conditioning point x_t")->capture_default_str();
    oracle->add_flag("--force", oracle_cmd.force, "Reuse a non-empty output directory");
    oracle->callback([&] { oracle_cmd.run(); });

    AblateStepsCmd absteps_cmd;
    auto* absteps = app.add_subcommand("ablate-steps", "Train/evaluate at several step counts T");
    absteps->add_option("--data", absteps_cmd.data, "Dataset directory")->required();
    absteps->add_option("-o,--out", absteps_cmd.out, "Output directory")->required();
    absteps->add_option("--steps-list", absteps_cmd.steps, "Comma-separated T values")
        ->delimiter(',')
        ->capture_default_str();
    add_train_flags(absteps, absteps_cmd.tc, absteps_cmd.schedule, false);
    add_arch_flags(absteps, absteps_cmd.arch);
    add_eval_option_flags(absteps, absteps_cmd.opt);
    absteps->add_option("--fx-seed", absteps_cmd.fx_seed, "Extractor training seed")
        ->capture_default_str();
    absteps->add_option("--fx-epochs", absteps_cmd.fx_epochs, "Extractor training epochs")
        ->capture_default_str();
    absteps->add_option("--eval-seed", absteps_cmd.eval_seed, "Sampling seed for evaluation")
        ->capture_default_str();
    absteps->add_flag("--force", absteps_cmd.force, "Reuse a non-empty output directory");
    absteps->callback([&] { absteps_cmd.run(); });

    AblateGeoCmd abgeo_cmd;
    abgeo_cmd.tc.T = 10;  // the weight sweep runs at a fixed few-step T
    auto* abgeo =
        app.add_subcommand("ablate-geo", "Train/evaluate at several geometric-loss weights");
    abgeo->add_option("--data", abgeo_cmd.data, "Dataset directory")->required();
    abgeo->add_option("-o,--out", abgeo_cmd.out, "Output directory")->required();
    abgeo->add_option("--weights", abgeo_cmd.weights, "Comma-separated lambda_geo values")
        ->delimiter(',')
        ->capture_default_str();
    add_train_flags(abgeo, abgeo_cmd.tc, abgeo_cmd.schedule, true);
    add_arch_flags(abgeo, abgeo_cmd.arch);
    add_eval_option_flags(abgeo, abgeo_cmd.opt);
    abgeo->add_option("--fx-seed", abgeo_cmd.fx_seed, "Extractor training seed")
        ->capture_default_str();
    abgeo->add_option("--fx-epochs", abgeo_cmd.fx_epochs, "Extractor training epochs")
        ->capture_default_str();
    abgeo->add_option("--eval-seed", abgeo_cmd.eval_seed, "Sampling seed for evaluation")
        ->capture_default_str();
    abgeo->add_flag("--force", abgeo_cmd.force, "Reuse a non-empty output directory");
    abgeo->callback([&] { abgeo_cmd.run(); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;  // 0 covers --help/--version paths
    } catch (const NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
