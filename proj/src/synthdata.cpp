#include "gestgan/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gestgan/common.hpp"
#include "gestgan/io.hpp"
#include "gestgan/rng.hpp"

namespace gestgan {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Beat period per style, in frames. Periods exceed the seed-frame count so
// the first beat always lands after the seed prefix.
constexpr std::size_t kBeatPeriods[] = {10, 13, 16, 20};
constexpr double kEnvelopeSigma = 1.5;  // frames; beat bump width
constexpr double kPulseWidth = 1.5;     // frames; pose-hit bump width
constexpr double kWarpWidth = 1.2;      // frames; clock-freeze width at beats
constexpr double kNoiseAmp = 0.02;      // radians; smooth nuisance component

// Per-frame mean joint angular speed, speeds[f] for f in [1, N).
std::vector<double> angular_speeds(const Tensor& angles) {
    const std::size_t n = angles.rows(), j = angles.cols();
    std::vector<double> speeds;
    speeds.reserve(n - 1);
    for (std::size_t f = 1; f < n; ++f) {
        double acc = 0.0;
        for (std::size_t k = 0; k < j; ++k) acc += std::abs(angles.at(f, k) - angles.at(f - 1, k));
        speeds.push_back(acc / static_cast<double>(j));
    }
    return speeds;
}

double median(std::vector<double> xs) {
    require(!xs.empty(), "median: empty");
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

void SkeletonSpec::validate() const {
    require(joint_count >= 2, "SkeletonSpec: need at least two joints");
    require(bone_lengths.size() == joint_count - 1, "SkeletonSpec: need J-1 bone lengths");
    for (double l : bone_lengths) require(l > 0.0, "SkeletonSpec: bone lengths must be > 0");
}

void SynthConfig::validate() const {
    skeleton.validate();
    require(frames >= 4, "SynthConfig: frames too small");
    require(fps > 0.0, "SynthConfig: fps must be > 0");
    require(styles >= 1 && styles <= 16, "SynthConfig: styles outside [1, 16]");
    require(seed_frames >= 1 && seed_frames < frames, "SynthConfig: need 1 <= F < N");
}

Tensor forward_kinematics(const Tensor& angles, const SkeletonSpec& spec) {
    spec.validate();
    require(angles.rank() == 2 && angles.cols() == spec.joint_count - 1,
            "forward_kinematics: angles must be {N, J-1}");
    const std::size_t n = angles.rows(), j = spec.joint_count;
    Tensor pos({n, j * 2});
    for (std::size_t f = 0; f < n; ++f) {
        double heading = 0.0, x = 0.0, y = 0.0;
        // joint 0 is the root at the origin (already zero-initialized)
        for (std::size_t k = 1; k < j; ++k) {
            heading += angles.at(f, k - 1);
            x += spec.bone_lengths[k - 1] * std::cos(heading);
            y += spec.bone_lengths[k - 1] * std::sin(heading);
            pos.at(f, 2 * k) = x;
            pos.at(f, 2 * k + 1) = y;
        }
    }
    return pos;
}

Tensor angles_from_positions(const Tensor& positions, const SkeletonSpec& spec) {
    spec.validate();
    require(positions.rank() == 2 && positions.cols() == spec.frame_dim(),
            "angles_from_positions: positions must be {N, J*2}");
    const std::size_t n = positions.rows(), j = spec.joint_count;
    Tensor angles({n, j - 1});
    for (std::size_t f = 0; f < n; ++f) {
        double prev_heading = 0.0;
        for (std::size_t k = 1; k < j; ++k) {
            const double dx = positions.at(f, 2 * k) - positions.at(f, 2 * (k - 1));
            const double dy = positions.at(f, 2 * k + 1) - positions.at(f, 2 * (k - 1) + 1);
            const double heading = std::atan2(dy, dx);
            double a = heading - prev_heading;
            while (a > std::numbers::pi) a -= kTwoPi;
            while (a <= -std::numbers::pi) a += kTwoPi;
            angles.at(f, k - 1) = a;
            prev_heading = heading;
        }
    }
    return angles;
}

ClipExample generate_clip(std::uint64_t rng_seed, std::size_t style_id, const SynthConfig& cfg) {
    cfg.validate();
    require(style_id < cfg.styles, "generate_clip: style outside [0, S)");

    const std::size_t n = cfg.frames;
    const std::size_t joints = cfg.skeleton.joint_count;
    const std::size_t period = kBeatPeriods[style_id % std::size(kBeatPeriods)];
    Rng rng(rng_seed);

    // Beat grid: multiples of the style period, kept interior (b <= N-3) so
    // both the envelope maximum and the kinematic beat minimum have full
    // neighborhoods.
    std::vector<std::size_t> beats;
    for (std::size_t b = period; b + 3 <= n; b += period) beats.push_back(b);
    require(!beats.empty(), "generate_clip: clip too short for the style's beat period");

    // Smooth nuisance component: two random-phase slow cosines per joint.
    struct NoiseWave {
        double period, phase;
    };
    std::vector<NoiseWave> noise(2 * (joints - 1));
    for (NoiseWave& w : noise) {
        w.period = rng.uniform(23.0, 37.0);
        w.phase = rng.uniform(0.0, kTwoPi);
    }

    // Warped clock: the rate dips to zero at each beat, so every oscillatory
    // component momentarily freezes there ("hitting the pose"). Combined with
    // the symmetric pose-hit bumps below this puts a deep end-effector-speed
    // minimum exactly on the beat and the angular-speed peaks on its flanks.
    std::vector<double> clock(n, 0.0);
    double u = 0.0;
    for (std::size_t f = 0; f < n; ++f) {
        double rate = 1.0;
        for (std::size_t b : beats) {
            const double d = (static_cast<double>(f) - static_cast<double>(b)) / kWarpWidth;
            rate -= std::exp(-0.5 * d * d);
        }
        u += std::max(rate, 0.0);
        clock[f] = u;
    }

    Tensor angles({n, joints - 1});
    const double s = static_cast<double>(style_id);
    for (std::size_t k = 0; k + 1 < joints; ++k) {
        const double j = static_cast<double>(k);
        // Style signature: posture offset, oscillation amplitude and phase.
        const double mean = 0.35 * std::sin(1.0 + 0.9 * s + 0.7 * j);
        const double amp = 0.25 + 0.1 * std::fmod(s + j, 3.0);
        const double phase = kTwoPi * std::fmod((s + 1.0) * (j + 1.0), 8.0) / 8.0;
        const double pulse_amp = 0.8 + 0.1 * std::fmod(j, 2.0);
        for (std::size_t f = 0; f < n; ++f) {
            const double fr = static_cast<double>(f);
            double a = mean + amp * std::cos(kTwoPi * clock[f] / static_cast<double>(period) + phase);
            // Pose hits: a symmetric Gaussian excursion per beat (apex at the
            // beat frame, angular velocity peaking ~1.5 frames to each side),
            // alternating in sign so the posture never drifts unboundedly.
            double sign = 1.0;
            for (std::size_t b : beats) {
                const double d = (fr - static_cast<double>(b)) / kPulseWidth;
                a += sign * pulse_amp * std::exp(-0.5 * d * d);
                sign = -sign;
            }
            for (std::size_t w = 0; w < 2; ++w) {
                const NoiseWave& nw = noise[2 * k + w];
                a += kNoiseAmp * std::cos(kTwoPi * clock[f] / nw.period + nw.phase);
            }
            angles.at(f, k) = a;
        }
    }

    ClipExample ex;
    ex.clip.frames = n;
    ex.clip.fps = cfg.fps;
    ex.clip.angles = angles;
    ex.clip.positions = forward_kinematics(angles, cfg.skeleton);

    // Envelope: unit-height Gaussian bump per beat, normalized to [0, 1].
    std::vector<double> env(n, 0.0);
    for (std::size_t f = 0; f < n; ++f) {
        const double fr = static_cast<double>(f);
        for (std::size_t b : beats) {
            const double d = (fr - static_cast<double>(b)) / kEnvelopeSigma;
            env[f] += std::exp(-0.5 * d * d);
        }
    }
    const double peak = *std::max_element(env.begin(), env.end());
    for (double& e : env) e /= peak;

    ex.track.beat_envelope = std::move(env);
    ex.track.beat_frames = std::move(beats);
    ex.track.style_id = style_id;
    const std::size_t fd = cfg.skeleton.frame_dim();
    Tensor seed({cfg.seed_frames, fd});
    for (std::size_t f = 0; f < cfg.seed_frames; ++f) {
        for (std::size_t c = 0; c < fd; ++c) seed.at(f, c) = ex.clip.positions.at(f, c);
    }
    ex.track.seed_frames = std::move(seed);

    validate_example(ex, cfg);
    return ex;
}

void validate_example(const ClipExample& ex, const SynthConfig& cfg) {
    const GestureClip& clip = ex.clip;
    const ControlTrack& track = ex.track;
    require(clip.frames == cfg.frames, "validate_example: frame count mismatch");
    require(track.beat_envelope.size() == cfg.frames, "validate_example: envelope length");
    require(track.style_id < cfg.styles, "validate_example: style out of range");
    require(!track.beat_frames.empty(), "validate_example: no beats");

    // Kinematic invariant: per-frame bone lengths match the skeleton < 1e-9.
    const Tensor fk = forward_kinematics(clip.angles, cfg.skeleton);
    require(max_abs_diff(fk, clip.positions) < 1e-9,
            "validate_example: positions are not the FK of angles");
    for (std::size_t f = 0; f < clip.frames; ++f) {
        for (std::size_t k = 1; k < cfg.skeleton.joint_count; ++k) {
            const double dx = clip.positions.at(f, 2 * k) - clip.positions.at(f, 2 * (k - 1));
            const double dy = clip.positions.at(f, 2 * k + 1) - clip.positions.at(f, 2 * (k - 1) + 1);
            const double len = std::hypot(dx, dy);
            require(std::abs(len - cfg.skeleton.bone_lengths[k - 1]) < 1e-9,
                    "validate_example: bone length error >= 1e-9");
        }
    }

    // Envelope invariant: strict local maximum at every beat frame.
    for (std::size_t b : track.beat_frames) {
        require(b >= 1 && b + 1 < cfg.frames, "validate_example: beat frame on the boundary");
        require(track.beat_envelope[b] > track.beat_envelope[b - 1] &&
                    track.beat_envelope[b] > track.beat_envelope[b + 1],
                "validate_example: envelope not a strict local max at a beat");
    }

    // Beat visibility: peak angular speed within +-2 frames of each beat
    // exceeds the clip's median angular speed.
    const std::vector<double> speeds = angular_speeds(clip.angles);
    const double med = median(speeds);
    for (std::size_t b : track.beat_frames) {
        double peak = 0.0;
        const std::size_t lo = b >= 2 ? b - 2 : 0;
        const std::size_t hi = std::min(clip.frames - 1, b + 2);
        // speeds[f-1] is the speed into frame f
        for (std::size_t f = std::max<std::size_t>(lo, 1); f <= hi; ++f) {
            peak = std::max(peak, speeds[f - 1]);
        }
        require(peak > med, "validate_example: beat not kinematically visible");
    }

    // Seed prefix matches the clip.
    require(track.seed_frames.rank() == 2 && track.seed_frames.rows() == cfg.seed_frames &&
                track.seed_frames.cols() == cfg.skeleton.frame_dim(),
            "validate_example: seed_frames shape");
    for (std::size_t f = 0; f < cfg.seed_frames; ++f) {
        for (std::size_t c = 0; c < cfg.skeleton.frame_dim(); ++c) {
            require(track.seed_frames.at(f, c) == clip.positions.at(f, c),
                    "validate_example: seed_frames are not the clip prefix");
        }
    }
}

Dataset make_dataset(std::size_t count, double train_ratio, double val_ratio,
                     const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    require(count >= 10, "make_dataset: count must be >= 10");
    require(train_ratio > 0.0 && val_ratio > 0.0 && train_ratio + val_ratio < 1.0,
            "make_dataset: ratios must be positive and leave room for a test split");

    const std::size_t n_train = static_cast<std::size_t>(std::lround(train_ratio * count));
    const std::size_t n_val = static_cast<std::size_t>(std::lround(val_ratio * count));
    require(n_train >= 1 && n_val >= 1 && n_train + n_val < count,
            "make_dataset: ratios produce an empty split");

    Dataset ds;
    ds.config = cfg;
    ds.seed = seed;
    for (std::size_t i = 0; i < count; ++i) {
        // Round-robin styles: contiguous split blocks stay balanced within 1.
        const std::size_t style = i % cfg.styles;
        ClipExample ex = generate_clip(derive_seed(seed, i), style, cfg);
        ex.clip_id = i;
        if (i < n_train) {
            ds.train.push_back(std::move(ex));
        } else if (i < n_train + n_val) {
            ds.val.push_back(std::move(ex));
        } else {
            ds.test.push_back(std::move(ex));
        }
    }
    return ds;
}

namespace {

void export_split(const std::string& path, const std::vector<ClipExample>& split,
                  const SynthConfig& cfg) {
    std::ostringstream os;
    std::vector<std::string> header = {"clip_id", "frame"};
    for (std::size_t k = 0; k < cfg.skeleton.joint_count; ++k) {
        header.push_back("j" + std::to_string(k) + "_x");
        header.push_back("j" + std::to_string(k) + "_y");
    }
    header.insert(header.end(), {"envelope", "style", "is_beat"});
    write_csv_row(os, header);
    for (const ClipExample& ex : split) {
        for (std::size_t f = 0; f < ex.clip.frames; ++f) {
            std::vector<std::string> row = {std::to_string(ex.clip_id), std::to_string(f)};
            for (std::size_t c = 0; c < cfg.skeleton.frame_dim(); ++c) {
                row.push_back(format_g17(ex.clip.positions.at(f, c)));
            }
            row.push_back(format_g17(ex.track.beat_envelope[f]));
            row.push_back(std::to_string(ex.track.style_id));
            const bool is_beat = std::find(ex.track.beat_frames.begin(),
                                           ex.track.beat_frames.end(),
                                           f) != ex.track.beat_frames.end();
            row.push_back(is_beat ? "1" : "0");
            write_csv_row(os, row);
        }
    }
    write_text_file(path, os.str());
}

std::vector<ClipExample> import_split(const std::string& path, const SynthConfig& cfg) {
    const CsvTable table = read_csv_file(path);
    const std::size_t fd = cfg.skeleton.frame_dim();
    if (table.header.size() != 2 + fd + 3) throw IoError("dataset csv: unexpected column count");

    std::vector<ClipExample> split;
    for (std::size_t r = 0; r < table.rows.size();) {
        if (r + cfg.frames > table.rows.size()) throw IoError("dataset csv: truncated clip");
        ClipExample ex;
        ex.clip_id = std::strtoull(table.rows[r][0].c_str(), nullptr, 10);
        ex.clip.frames = cfg.frames;
        ex.clip.fps = cfg.fps;
        ex.clip.positions = Tensor({cfg.frames, fd});
        ex.track.beat_envelope.resize(cfg.frames);
        ex.track.style_id = static_cast<std::size_t>(
            std::strtoull(table.rows[r][2 + fd + 1].c_str(), nullptr, 10));
        for (std::size_t f = 0; f < cfg.frames; ++f, ++r) {
            const std::vector<std::string>& row = table.rows[r];
            if (std::strtoull(row[0].c_str(), nullptr, 10) != ex.clip_id ||
                std::strtoull(row[1].c_str(), nullptr, 10) != f) {
                throw IoError("dataset csv: clip rows out of order");
            }
            for (std::size_t c = 0; c < fd; ++c) {
                ex.clip.positions.at(f, c) = parse_double(row[2 + c]);
            }
            ex.track.beat_envelope[f] = parse_double(row[2 + fd]);
            if (row[2 + fd + 2] == "1") ex.track.beat_frames.push_back(f);
        }
        // Angles recovered from positions; for synthdata-generated clips this
        // is exact up to 1e-12 (positions remain the authoritative data).
        ex.clip.angles = angles_from_positions(ex.clip.positions, cfg.skeleton);
        Tensor seed({cfg.seed_frames, fd});
        for (std::size_t f = 0; f < cfg.seed_frames; ++f) {
            for (std::size_t c = 0; c < fd; ++c) seed.at(f, c) = ex.clip.positions.at(f, c);
        }
        ex.track.seed_frames = std::move(seed);
        split.push_back(std::move(ex));
    }
    return split;
}

}  // namespace

void export_dataset(const Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    Manifest m;
    m["dataset.joints"] = std::to_string(ds.config.skeleton.joint_count);
    std::string bones;
    for (double l : ds.config.skeleton.bone_lengths) {
        if (!bones.empty()) bones += " ";
        bones += format_g17(l);
    }
    m["dataset.bone_lengths"] = bones;
    m["dataset.frames"] = std::to_string(ds.config.frames);
    m["dataset.fps"] = format_g17(ds.config.fps);
    m["dataset.styles"] = std::to_string(ds.config.styles);
    m["dataset.seed_frames"] = std::to_string(ds.config.seed_frames);
    m["dataset.seed"] = std::to_string(ds.seed);
    m["dataset.train"] = std::to_string(ds.train.size());
    m["dataset.val"] = std::to_string(ds.val.size());
    m["dataset.test"] = std::to_string(ds.test.size());
    write_manifest_file(dir + "/dataset.manifest", m);
    export_split(dir + "/train.csv", ds.train, ds.config);
    export_split(dir + "/val.csv", ds.val, ds.config);
    export_split(dir + "/test.csv", ds.test, ds.config);
}

Dataset import_dataset(const std::string& dir) {
    const Manifest m = read_manifest_file(dir + "/dataset.manifest");
    Dataset ds;
    ds.config.skeleton.joint_count = manifest_get_size(m, "dataset.joints");
    ds.config.skeleton.bone_lengths.clear();
    {
        std::istringstream bones(manifest_get(m, "dataset.bone_lengths"));
        std::string cell;
        while (bones >> cell) ds.config.skeleton.bone_lengths.push_back(parse_double(cell));
    }
    ds.config.frames = manifest_get_size(m, "dataset.frames");
    ds.config.fps = manifest_get_double(m, "dataset.fps");
    ds.config.styles = manifest_get_size(m, "dataset.styles");
    ds.config.seed_frames = manifest_get_size(m, "dataset.seed_frames");
    ds.seed = manifest_get_size(m, "dataset.seed");
    ds.config.validate();
    ds.train = import_split(dir + "/train.csv", ds.config);
    ds.val = import_split(dir + "/val.csv", ds.config);
    ds.test = import_split(dir + "/test.csv", ds.config);
    if (ds.train.size() != manifest_get_size(m, "dataset.train") ||
        ds.val.size() != manifest_get_size(m, "dataset.val") ||
        ds.test.size() != manifest_get_size(m, "dataset.test")) {
        throw IoError("import_dataset: split sizes disagree with the manifest");
    }
    return ds;
}

}  // namespace gestgan
