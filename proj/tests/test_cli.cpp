#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fimcb/cli.hpp>
#include <fimcb/dataset.hpp>
#include <fimcb/imageops.hpp>
#include <fimcb/png_io.hpp>
#include <fimcb/trainer.hpp>

#include "testutil.hpp"

using namespace fimcb;
using fimcb::testutil::TempDir;
using fimcb::testutil::solid_image;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"fimcb"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run_main(static_cast<int>(argv.size()), argv.data());
}

// The installed binary, for true process-level checks (exit codes, logging).
std::string binary_path() { return FIMCB_BIN; }

int run_process(const std::string& args, const std::string& redirect = "> /dev/null 2>&1") {
    const std::string cmd = binary_path() + " " + args + " " + redirect;
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

// Small but split-friendly synthetic corpus on disk; returns the manifest dir.
std::filesystem::path make_curated(const TempDir& tmp) {
    const auto raw = tmp / "raw";
    const auto curated = tmp / "curated";
    cli::CommonOptions synth_opts;
    synth_opts.out_dir = raw;
    synth_opts.overrides = {"synth.n_per_class=60", "synth.image_side=28",
                            "synth.n_antibodies=3", "synth.holdout_count=1",
                            "run.seed=11"};
    REQUIRE(cli::cmd_synth(synth_opts) == 0);

    cli::CommonOptions curate_opts;
    curate_opts.out_dir = curated;
    curate_opts.overrides = {"split.val_fraction=0.25", "split.min_side=20",
                             "split.preprocess_side=28", "run.seed=11"};
    REQUIRE(cli::cmd_curate(curate_opts, raw) == 0);
    return curated;
}

} // namespace

TEST_CASE("cli: synth writes a loadable dataset and honors --seed") {
    TempDir tmp;
    cli::CommonOptions opts;
    opts.out_dir = tmp / "a";
    opts.seed = 42;
    opts.overrides = {"synth.n_per_class=5", "synth.image_side=24"};
    REQUIRE(cli::cmd_synth(opts) == 0);

    const Manifest manifest = load_manifest(tmp / "a" / "manifest.csv");
    CHECK(manifest.records.size() == 10);
    CHECK(manifest.seed == 42);

    // identical seed, identical bytes
    cli::CommonOptions again = opts;
    again.out_dir = tmp / "b";
    REQUIRE(cli::cmd_synth(again) == 0);
    CHECK(read_text(tmp / "a" / "manifest.csv") == read_text(tmp / "b" / "manifest.csv"));
    for (const auto& r : manifest.records) {
        CHECK(read_text(tmp / "a" / r.image_path) == read_text(tmp / "b" / r.image_path));
    }
}

TEST_CASE("cli: invalid config values exit with 2") {
    TempDir tmp;
    cli::CommonOptions opts;
    opts.out_dir = tmp / "out";
    opts.overrides = {"synth.chroma_delta=999"};
    CHECK(cli::cmd_synth(opts) == 2);

    opts.overrides = {"synth.nonsense=1"};
    CHECK(cli::cmd_synth(opts) == 2);

    cli::CommonOptions missing_cfg;
    missing_cfg.out_dir = tmp / "out2";
    missing_cfg.config_file = tmp / "absent.toml";
    CHECK(cli::cmd_synth(missing_cfg) == 2);
}

TEST_CASE("cli: uncreatable output directory exits with 3") {
    // a regular file where a directory component must go; this fails even
    // for root, which ignores permission bits
    TempDir tmp;
    std::ofstream(tmp / "blocked") << "file";
    cli::CommonOptions opts;
    opts.out_dir = tmp / "blocked" / "nested";
    opts.overrides = {"synth.n_per_class=2"};
    CHECK(cli::cmd_synth(opts) == 3);
}

TEST_CASE("cli: segment crops planted particles") {
    TempDir tmp;
    const auto frames = tmp / "frames";
    const auto bg_dir = tmp / "bg";
    std::filesystem::create_directories(frames);
    std::filesystem::create_directories(bg_dir);

    write_png_rgb(bg_dir / "bg0.png", solid_image(64, 48, {128, 128, 128}));
    write_png_rgb(bg_dir / "bg1.png", solid_image(64, 48, {128, 128, 128}));

    RGBImage frame = solid_image(64, 48, {128, 128, 128});
    for (int y = 10; y < 16; ++y) {
        for (int x = 8; x < 14; ++x) frame.at(x, y) = {180, 180, 180};
    }
    for (int y = 30; y < 34; ++y) {
        for (int x = 40; x < 52; ++x) frame.at(x, y) = {60, 60, 60};
    }
    write_png_rgb(frames / "f0.png", frame);
    write_png_rgb(frames / "f1.png", solid_image(64, 48, {128, 128, 128}));

    cli::CommonOptions opts;
    opts.out_dir = tmp / "out";
    opts.overrides = {"segmentation.calibration_um_per_px=1.0"};
    REQUIRE(cli::cmd_segment(opts, frames, bg_dir) == 0);

    // two crops from f0, none from the clean frame
    CHECK(std::filesystem::exists(tmp / "out" / "crops" / "f0_p0.png"));
    CHECK(std::filesystem::exists(tmp / "out" / "crops" / "f0_p1.png"));
    CHECK(!std::filesystem::exists(tmp / "out" / "crops" / "f1_p0.png"));

    const std::string csv = read_text(tmp / "out" / "particles.csv");
    CHECK(csv.find("frame,particle,x0,y0,x1,y1,pixel_count,crop") == 0);
    CHECK(csv.find("f0.png,0,8,10,13,15,36,crops/f0_p0.png") != std::string::npos);
    CHECK(csv.find("f0.png,1,40,30,51,33,48,crops/f0_p1.png") != std::string::npos);

    // default margin 2: bbox 8..13 x 10..15 expands to a 10x10 crop
    const RGBImage crop = read_png_rgb(tmp / "out" / "crops" / "f0_p0.png");
    CHECK(crop.width() == 10);
    CHECK(crop.height() == 10);
}

TEST_CASE("cli: segment requires calibration and nonempty inputs") {
    TempDir tmp;
    const auto frames = tmp / "frames";
    const auto bg_dir = tmp / "bg";
    std::filesystem::create_directories(frames);
    std::filesystem::create_directories(bg_dir);
    write_png_rgb(frames / "f.png", solid_image(8, 8, {0, 0, 0}));
    write_png_rgb(bg_dir / "b.png", solid_image(8, 8, {0, 0, 0}));

    cli::CommonOptions opts;
    opts.out_dir = tmp / "out";
    CHECK(cli::cmd_segment(opts, frames, bg_dir) == 2); // calibration unset

    opts.overrides = {"segmentation.calibration_um_per_px=1.0"};
    CHECK(cli::cmd_segment(opts, tmp / "nodir", bg_dir) == 2);

    const auto empty_dir = tmp / "empty";
    std::filesystem::create_directories(empty_dir);
    CHECK(cli::cmd_segment(opts, empty_dir, bg_dir) == 2);
    CHECK(cli::cmd_segment(opts, frames, empty_dir) == 2);
}

TEST_CASE("cli: curate splits a synthetic corpus and holds out antibodies") {
    TempDir tmp;
    const auto curated = make_curated(tmp);
    const Manifest manifest = load_manifest(curated / "manifest.csv");

    CHECK(manifest.records.size() == 120);
    CHECK(manifest.holdout_antibodies() == std::vector<std::string>{"mAb3"});
    int train = 0;
    int val = 0;
    for (const auto& r : manifest.records) {
        if (r.split == Split::Train) ++train;
        if (r.split == Split::Val) ++val;
        if (r.antibody == "mAb3") CHECK(r.split == Split::Val);
        CHECK(r.width == 28);
        CHECK(r.height == 28);
        CHECK(std::filesystem::exists(curated / r.image_path));
    }
    CHECK(train + val == 120);
    CHECK(train > 0);
    CHECK(val > 0);
}

TEST_CASE("cli: curate fails cleanly when the filter empties the corpus") {
    TempDir tmp;
    const auto raw = tmp / "raw";
    cli::CommonOptions synth_opts;
    synth_opts.out_dir = raw;
    synth_opts.overrides = {"synth.n_per_class=3", "synth.image_side=16"};
    REQUIRE(cli::cmd_synth(synth_opts) == 0);

    cli::CommonOptions curate_opts;
    curate_opts.out_dir = tmp / "curated";
    curate_opts.overrides = {"split.min_side=64"}; // nothing survives 16 < 64
    CHECK(cli::cmd_curate(curate_opts, raw) == 2);

    CHECK(cli::cmd_curate(curate_opts, tmp / "missing") == 2);
}

TEST_CASE("cli: grid produces results, checkpoints, and a config snapshot") {
    TempDir tmp;
    const auto curated = make_curated(tmp);
    const auto out = tmp / "runs";

    cli::CommonOptions opts;
    opts.out_dir = out;
    opts.overrides = {"grid.lrs=[0.05]",     "grid.weight_decays=[0.0]",
                      "grid.momenta=[0.0]",  "train.max_epochs=2",
                      "train.total_epochs=2", "train.input_side=16",
                      "train.batch_size=16",  "run.seed=11"};
    REQUIRE(cli::cmd_grid(opts, curated / "manifest.csv", {"rgb", "grayscale"}, 1) == 0);

    CHECK(std::filesystem::exists(out / "results.json"));
    CHECK(std::filesystem::exists(out / "config.toml"));
    CHECK(std::filesystem::exists(out / "checkpoints" / "RGB" / "run_0.ckpt"));
    CHECK(std::filesystem::exists(out / "checkpoints" / "Grayscale" / "run_0.ckpt"));

    const auto ablation = read_results_json(out / "results.json");
    REQUIRE(ablation.size() == 2);
    CHECK(ablation[0].first == ColorMode::rgb());
    CHECK(ablation[1].first == ColorMode::grayscale());
    REQUIRE(ablation[0].second.runs.size() == 1);
    CHECK(ablation[0].second.runs[0].history.size() == 2);
    CHECK(ablation[0].second.runs[0].checkpoint == "checkpoints/RGB/run_0.ckpt");
    CHECK(!ablation[0].second.runs[0].predictions.empty());

    // unknown mode name and missing manifest are usage errors
    CHECK(cli::cmd_grid(opts, curated / "manifest.csv", {"sepia"}, 1) == 2);
    CHECK(cli::cmd_grid(opts, tmp / "nope.csv", {"rgb"}, 1) == 2);
}

TEST_CASE("cli: repeated grid runs are byte-identical") {
    TempDir tmp;
    const auto curated = make_curated(tmp);

    auto run_grid = [&](const std::filesystem::path& out) {
        cli::CommonOptions opts;
        opts.out_dir = out;
        opts.overrides = {"grid.lrs=[0.05]",     "grid.weight_decays=[0.0]",
                          "grid.momenta=[0.0]",  "train.max_epochs=2",
                          "train.total_epochs=2", "train.input_side=16",
                          "train.batch_size=16",  "run.seed=11"};
        REQUIRE(cli::cmd_grid(opts, curated / "manifest.csv", {"rgb"}, 1) == 0);
    };
    run_grid(tmp / "r1");
    run_grid(tmp / "r2");
    CHECK(read_text(tmp / "r1" / "results.json") == read_text(tmp / "r2" / "results.json"));
    CHECK(read_text(tmp / "r1" / "config.toml") == read_text(tmp / "r2" / "config.toml"));
}

TEST_CASE("cli: report renders tables from grid results") {
    TempDir tmp;
    const auto curated = make_curated(tmp);
    const auto out = tmp / "runs";

    cli::CommonOptions grid_opts;
    grid_opts.out_dir = out;
    grid_opts.overrides = {"grid.lrs=[0.05]",     "grid.weight_decays=[0.0]",
                           "grid.momenta=[0.0]",  "train.max_epochs=2",
                           "train.total_epochs=2", "train.input_side=16",
                           "train.batch_size=16",  "run.seed=11"};
    REQUIRE(cli::cmd_grid(grid_opts, curated / "manifest.csv", {"rgb", "grayscale"}, 1) == 0);

    cli::CommonOptions report_opts;
    REQUIRE(cli::cmd_report(report_opts, out / "results.json", curated / "manifest.csv") == 0);
    const std::string csv = read_text(out / "report.csv");
    CHECK(csv.find("mode,overall,overall_mark") == 0);
    CHECK(csv.find("RGB,") != std::string::npos);
    CHECK(csv.find("Grayscale,") != std::string::npos);
    const std::string text = read_text(out / "report.txt");
    CHECK(text.find("overall") != std::string::npos);

    // re-render is byte-identical
    const std::string csv1 = read_text(out / "report.csv");
    REQUIRE(cli::cmd_report(report_opts, out / "results.json", curated / "manifest.csv") == 0);
    CHECK(read_text(out / "report.csv") == csv1);

    // missing and corrupt inputs are usage errors
    CHECK(cli::cmd_report(report_opts, tmp / "none.json", curated / "manifest.csv") == 2);
    std::ofstream(tmp / "bad.json") << "{broken";
    CHECK(cli::cmd_report(report_opts, tmp / "bad.json", curated / "manifest.csv") == 2);
}

TEST_CASE("cli: process-level exit codes and log stream") {
    TempDir tmp;
    CHECK(run_process("--help") == 0);
    CHECK(run_process("") == 2);              // no subcommand
    CHECK(run_process("nonsense") == 2);      // unknown subcommand
    CHECK(run_process("synth") == 2);         // missing required --out
    CHECK(run_process("synth --out " + (tmp / "x").string() +
                      " --set synth.chroma_delta=999") == 2);
    CHECK(run_process("synth --out " + (tmp / "y").string() + " --seed not-a-number") == 2);

    // a successful run with FIMCB_LOG=info emits the epoch lines
    const auto raw = tmp / "raw";
    CHECK(run_process("synth --out " + raw.string() +
                      " --set synth.n_per_class=30 --set synth.image_side=28"
                      " --set synth.n_antibodies=2 --set synth.holdout_count=0"
                      " --seed 3") == 0);
    const auto curated = tmp / "curated";
    CHECK(run_process("curate --raw " + raw.string() + " --out " + curated.string() +
                      " --set split.val_fraction=0.25 --set split.min_side=20"
                      " --set split.preprocess_side=28 --seed 3") == 0);
    const auto log_file = tmp / "grid.log";
    const int code = std::system(("FIMCB_LOG=info " + binary_path() + " grid --manifest " +
                                  (curated / "manifest.csv").string() + " --out " +
                                  (tmp / "runs").string() +
                                  " --modes rgb --set grid.lrs=[0.05]"
                                  " --set grid.weight_decays=[0.0] --set grid.momenta=[0.0]"
                                  " --set train.max_epochs=1 --set train.total_epochs=1"
                                  " --set train.input_side=16 --set train.batch_size=16"
                                  " --seed 3 > /dev/null 2> " +
                                  log_file.string())
                                     .c_str());
    REQUIRE(WIFEXITED(code));
    REQUIRE(WEXITSTATUS(code) == 0);
    const std::string log = read_text(log_file);
    CHECK(log.find("grid start: mode=RGB") != std::string::npos);
    CHECK(log.find("epoch=1 lr=0.05 loss=") != std::string::npos);
    CHECK(log.find("val_acc=") != std::string::npos);
}
