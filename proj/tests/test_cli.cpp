// End-to-end tests of the installed CLI: exit codes, artifact layout, and
// byte-level reproducibility of seed-fixed runs. Each case shells out to the
// real binary (path injected by the build as GESTGAN_CLI_PATH).
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "gestgan/io.hpp"

using namespace gestgan;
namespace fs = std::filesystem;

namespace {

const std::string kCli = GESTGAN_CLI_PATH;

struct TempTree {
    fs::path root;
    TempTree() {
        root = fs::temp_directory_path() /
               ("gestgan_cli_test_" + std::to_string(static_cast<unsigned>(::getpid())));
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~TempTree() { fs::remove_all(root); }
    std::string operator/(const std::string& name) const { return (root / name).string(); }
};

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string tiny_arch_flags() {
    return "--d-model 16 --layers 1 --heads 2 --d-ff 24 --d-z 4 --d-hidden 24 --d-cond 8 "
           "--gn-groups 4";
}

std::string tiny_data_flags(std::uint64_t seed) {
    return "--count 60 --frames 16 --styles 2 --seed " + std::to_string(seed);
}

bool same_bytes(const std::string& a, const std::string& b) {
    return read_text_file(a) == read_text_file(b);
}

}  // namespace

TEST_CASE("usage errors exit 1, help exits 0") {
    CHECK(run("") == 1);                        // missing verb
    CHECK(run("frobnicate") == 1);              // unknown verb
    CHECK(run("train") == 1);                   // missing required flags
    CHECK(run("--help") == 0);
    CHECK(run("data --help") == 0);
}

TEST_CASE("data: reproducible output, refusal to clobber, --force") {
    TempTree tmp;
    CHECK(run("data -o " + (tmp / "a") + " " + tiny_data_flags(5)) == 0);
    CHECK(run("data -o " + (tmp / "b") + " " + tiny_data_flags(5)) == 0);
    CHECK(same_bytes(tmp / "a/train.csv", tmp / "b/train.csv"));
    CHECK(same_bytes(tmp / "a/test.csv", tmp / "b/test.csv"));
    CHECK(same_bytes(tmp / "a/dataset.manifest", tmp / "b/dataset.manifest"));
    CHECK(fs::exists(tmp / "a/run.manifest"));

    // A different seed must change the payload.
    CHECK(run("data -o " + (tmp / "c") + " " + tiny_data_flags(6)) == 0);
    CHECK(!same_bytes(tmp / "a/train.csv", tmp / "c/train.csv"));

    // Existing non-empty directory: refused (I/O exit code) unless forced.
    CHECK(run("data -o " + (tmp / "a") + " " + tiny_data_flags(5)) == 3);
    CHECK(run("data --force -o " + (tmp / "a") + " " + tiny_data_flags(5)) == 0);
}

TEST_CASE("train/sample/resume: artifacts, reproducibility, I/O failures") {
    TempTree tmp;
    REQUIRE(run("data -o " + (tmp / "ds") + " " + tiny_data_flags(5)) == 0);
    const std::string train_flags =
        "--data " + (tmp / "ds") + " -T 4 --batch 4 " + tiny_arch_flags();

    SUBCASE("training writes a checkpoint, a loss CSV, and a manifest") {
        REQUIRE(run("train -o " + (tmp / "run") + " --epochs 1 " + train_flags) == 0);
        CHECK(fs::exists(tmp / "run/checkpoint.txt"));
        CHECK(fs::exists(tmp / "run/run.manifest"));
        const CsvTable losses = read_csv_file(tmp / "run/losses.csv");
        CHECK(losses.header ==
              std::vector<std::string>{"step", "d_loss", "g_adv", "g_recon", "g_total"});
        CHECK(losses.rows.size() == 12);  // 48 train clips / batch 4, one epoch
    }

    SUBCASE("seed-fixed sampling is byte-reproducible; the seed matters") {
        REQUIRE(run("train -o " + (tmp / "run") + " --epochs 1 " + train_flags) == 0);
        const std::string base = "sample --checkpoint " + (tmp / "run/checkpoint.txt") +
                                 " --data " + (tmp / "ds") + " --tracks 2 -k 2";
        REQUIRE(run(base + " --sample-seed 9 -o " + (tmp / "s1")) == 0);
        REQUIRE(run(base + " --sample-seed 9 -o " + (tmp / "s2")) == 0);
        REQUIRE(run(base + " --sample-seed 10 -o " + (tmp / "s3")) == 0);
        CHECK(same_bytes(tmp / "s1/clips.csv", tmp / "s2/clips.csv"));
        CHECK(!same_bytes(tmp / "s1/clips.csv", tmp / "s3/clips.csv"));
        CHECK(same_bytes(tmp / "s1/run.manifest", tmp / "s2/run.manifest"));
    }

    SUBCASE("interrupted + resumed training equals the uninterrupted run byte for byte") {
        REQUIRE(run("train -o " + (tmp / "two") + " --epochs 2 " + train_flags) == 0);
        REQUIRE(run("train -o " + (tmp / "one") + " --epochs 1 " + train_flags) == 0);
        REQUIRE(run("train -o " + (tmp / "cont") + " --resume " +
                    (tmp / "one/checkpoint.txt") + " --epochs 2 " + train_flags) == 0);
        CHECK(same_bytes(tmp / "two/checkpoint.txt", tmp / "cont/checkpoint.txt"));
    }

    SUBCASE("missing inputs exit 3, bad sampler names exit 1") {
        CHECK(run("train -o " + (tmp / "r2") + " --data " + (tmp / "nowhere") + " --epochs 1") ==
              3);
        REQUIRE(run("train -o " + (tmp / "run") + " --epochs 1 " + train_flags) == 0);
        CHECK(run("sample --checkpoint " + (tmp / "missing.txt") + " --data " + (tmp / "ds") +
                  " -o " + (tmp / "sx")) == 3);
        CHECK(run("sample --checkpoint " + (tmp / "run/checkpoint.txt") + " --data " +
                  (tmp / "ds") + " -o " + (tmp / "sy") + " --sampler euler") == 1);
        // gan_fewstep cannot skip steps: usage error.
        CHECK(run("sample --checkpoint " + (tmp / "run/checkpoint.txt") + " --data " +
                  (tmp / "ds") + " -o " + (tmp / "sz") + " --steps 2") == 1);
    }
}

TEST_CASE("eval and bench: report files with the documented columns") {
    TempTree tmp;
    REQUIRE(run("data -o " + (tmp / "ds") +
                " --count 170 --frames 16 --styles 2 --train-ratio 0.6 --val-ratio 0.2 "
                "--seed 6") == 0);
    REQUIRE(run("train -o " + (tmp / "run") + " --data " + (tmp / "ds") +
                " -T 4 --batch 4 --epochs 1 " + tiny_arch_flags()) == 0);

    const std::string eval_flags = " --div-tracks 2 --div-k 2 --bench-tracks 1 --bench-reps 1";
    REQUIRE(run("eval --checkpoint " + (tmp / "run/checkpoint.txt") + " --data " + (tmp / "ds") +
                " -o " + (tmp / "ev1") + eval_flags) == 0);
    const CsvTable m1 = read_csv_file(tmp / "ev1/metrics.csv");
    CHECK(m1.header == std::vector<std::string>{"fgd", "ba", "div", "ms_per_frame",
                                                "config_fingerprint"});
    REQUIRE(m1.rows.size() == 1);
    CHECK(parse_double(m1.rows[0][0]) > 0.0);             // fgd
    CHECK(parse_double(m1.rows[0][1]) >= 0.0);            // ba
    CHECK(parse_double(m1.rows[0][1]) <= 1.0);
    CHECK(parse_double(m1.rows[0][2]) > 0.0);             // div
    CHECK(parse_double(m1.rows[0][3]) > 0.0);             // ms/frame
    CHECK(fs::exists(tmp / "ev1/extractor.txt"));          // trained and stored beside outputs

    // Re-running with the stored extractor reproduces every statistical field.
    REQUIRE(run("eval --checkpoint " + (tmp / "run/checkpoint.txt") + " --data " + (tmp / "ds") +
                " -o " + (tmp / "ev2") + " --extractor " + (tmp / "ev1/extractor.txt") +
                eval_flags) == 0);
    const CsvTable m2 = read_csv_file(tmp / "ev2/metrics.csv");
    CHECK(m2.rows[0][0] == m1.rows[0][0]);
    CHECK(m2.rows[0][1] == m1.rows[0][1]);
    CHECK(m2.rows[0][2] == m1.rows[0][2]);
    CHECK(m2.rows[0][4] == m1.rows[0][4]);

    REQUIRE(run("bench --checkpoint " + (tmp / "run/checkpoint.txt") + " --data " + (tmp / "ds") +
                " -o " + (tmp / "bn") + " --tracks 2 --reps 3") == 0);
    const CsvTable lat = read_csv_file(tmp / "bn/latency.csv");
    CHECK(lat.header ==
          std::vector<std::string>{"total_ms", "frames", "repetitions", "ms_per_frame"});
    REQUIRE(lat.rows.size() == 1);
    CHECK(lat.rows[0][1] == "32");  // 2 tracks x 16 frames
    CHECK(lat.rows[0][2] == "3");
    const CsvTable reps = read_csv_file(tmp / "bn/latency_reps.csv");
    CHECK(reps.rows.size() == 3);
    const CsvTable steps = read_csv_file(tmp / "bn/latency_steps.csv");
    CHECK(steps.rows.size() == 4);  // one bucket per reverse step at T=4
}

TEST_CASE("oracle: deterministic density grids, mode counts, quadrature agreement") {
    TempTree tmp;
    REQUIRE(run("oracle -o " + (tmp / "a")) == 0);
    REQUIRE(run("oracle -o " + (tmp / "b")) == 0);
    CHECK(same_bytes(tmp / "a/density_large_gap.csv", tmp / "b/density_large_gap.csv"));
    CHECK(same_bytes(tmp / "a/summary.csv", tmp / "b/summary.csv"));

    const CsvTable summary = read_csv_file(tmp / "a/summary.csv");
    CHECK(summary.header ==
          std::vector<std::string>{"case", "abar_prev", "abar_t", "x_t", "modes_exact",
                                   "modes_quadrature", "max_abs_dev"});
    REQUIRE(summary.rows.size() == 2);
    CHECK(summary.rows[0][0] == "large_gap");
    CHECK(summary.rows[0][4] == "2");  // bimodal posterior under heavy compression
    CHECK(summary.rows[0][5] == "2");
    CHECK(summary.rows[1][0] == "small_gap");
    CHECK(summary.rows[1][4] == "1");  // fine step stays unimodal
    CHECK(summary.rows[1][5] == "1");
    CHECK(parse_double(summary.rows[0][6]) < 1e-6);
    CHECK(parse_double(summary.rows[1][6]) < 1e-6);

    const CsvTable grid = read_csv_file(tmp / "a/density_large_gap.csv");
    CHECK(grid.header == std::vector<std::string>{"x", "exact", "quadrature", "abs_diff"});
    CHECK(grid.rows.size() == 4097);
}
