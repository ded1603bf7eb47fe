#include <fimcb/cli.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include <CLI11.hpp>

#include <fimcb/config.hpp>
#include <fimcb/errors.hpp>
#include <fimcb/log.hpp>
#include <fimcb/png_io.hpp>
#include <fimcb/segmentation.hpp>
#include <fimcb/synth.hpp>
#include <fimcb/trainer.hpp>

namespace fimcb::cli {

namespace {

int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const ConfigError& e) {
        log_error(e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        log_error(e.what());
        return 2;
    } catch (const IoError& e) {
        log_error(e.what());
        return 3;
    } catch (const std::exception& e) {
        log_error(e.what());
        return 3;
    }
}

AppConfig load_config(const CommonOptions& common) {
    if (common.config_file && !std::filesystem::exists(*common.config_file)) {
        throw ConfigError("config file not found: " + common.config_file->string());
    }
    AppConfig cfg = load_app_config(common.config_file, common.overrides);
    if (common.seed) {
        cfg.synth.seed = *common.seed;
        cfg.split.seed = *common.seed;
        cfg.grid.base.seed = *common.seed;
    }
    return cfg;
}

std::filesystem::path require_out(const CommonOptions& common) {
    if (!common.out_dir) throw ConfigError("--out is required");
    return *common.out_dir;
}

void make_dirs(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("failed to write: " + path.string());
}

std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir,
                                             const std::string& what) {
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError(what + " directory not found: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

ColorMode mode_from_name(const std::string& name, const AppConfig& cfg) {
    ColorMode mode = ColorMode::parse(name);
    if (mode.kind == ColorMode::Kind::Mixed) {
        mode = ColorMode::mixed(cfg.mixed_probs);
    }
    return mode;
}

/// Scans raw_dir for <antibody>/<stress>/<id>.png, reading dimensions from
/// each file. Fallback for corpora without a manifest.
Manifest scan_tree(const std::filesystem::path& raw_dir) {
    Manifest manifest;
    std::vector<std::filesystem::path> ab_dirs;
    for (const auto& entry : std::filesystem::directory_iterator(raw_dir)) {
        if (entry.is_directory()) ab_dirs.push_back(entry.path());
    }
    std::sort(ab_dirs.begin(), ab_dirs.end());
    for (const auto& ab_dir : ab_dirs) {
        std::vector<std::filesystem::path> stress_dirs;
        for (const auto& entry : std::filesystem::directory_iterator(ab_dir)) {
            if (entry.is_directory()) stress_dirs.push_back(entry.path());
        }
        std::sort(stress_dirs.begin(), stress_dirs.end());
        for (const auto& st_dir : stress_dirs) {
            const Stress stress = parse_stress(st_dir.filename().string());
            for (const auto& png : list_pngs(st_dir, "image")) {
                const RGBImage img = read_png_rgb(png);
                ParticleRecord r;
                r.id = png.stem().string();
                r.antibody = ab_dir.filename().string();
                r.stress = stress;
                r.replicate = 0;
                r.image_path = std::filesystem::relative(png, raw_dir).generic_string();
                r.width = img.width();
                r.height = img.height();
                manifest.records.push_back(std::move(r));
            }
        }
    }
    if (manifest.records.empty()) {
        throw ConfigError("no <antibody>/<stress>/*.png images under " + raw_dir.string());
    }
    return manifest;
}

} // namespace

int cmd_synth(const CommonOptions& common) {
    return guarded([&] {
        const AppConfig cfg = load_config(common);
        const auto out = require_out(common);
        make_dirs(out);
        const Manifest manifest = generate_dataset(cfg.synth, out);
        log_info("synth: wrote " + std::to_string(manifest.records.size()) + " images under " +
                 out.string());
    });
}

int cmd_segment(const CommonOptions& common, const std::filesystem::path& frames_dir,
                const std::filesystem::path& background_dir) {
    return guarded([&] {
        const AppConfig cfg = load_config(common);
        if (!(cfg.calibration_um_per_px > 0.0)) {
            throw ConfigError(
                "segmentation.calibration_um_per_px must be configured (> 0) for segment");
        }
        const auto out = require_out(common);

        const auto bg_files = list_pngs(background_dir, "background");
        if (bg_files.empty()) {
            throw ConfigError("no background frames in " + background_dir.string());
        }
        const auto frame_files = list_pngs(frames_dir, "frames");
        if (frame_files.empty()) {
            throw ConfigError("no frames in " + frames_dir.string());
        }

        std::vector<RawFrame> bg_frames;
        for (const auto& f : bg_files) {
            bg_frames.push_back({read_png_rgb(f), cfg.calibration_um_per_px});
        }
        const BackgroundModel background = calibrate_background(bg_frames);

        make_dirs(out / "crops");
        std::ostringstream csv;
        csv << "frame,particle,x0,y0,x1,y1,pixel_count,crop\n";
        std::size_t total = 0;
        for (const auto& f : frame_files) {
            const RawFrame frame{read_png_rgb(f), cfg.calibration_um_per_px};
            const auto blobs = detect_particles(frame, background, cfg.segmentation);
            for (std::size_t i = 0; i < blobs.size(); ++i) {
                const ParticleBlob& blob = blobs[i];
                const std::string crop_rel =
                    "crops/" + f.stem().string() + "_p" + std::to_string(i) + ".png";
                write_png_rgb(out / crop_rel,
                              crop_particle(frame, blob, cfg.segmentation.margin));
                csv << f.filename().string() << ',' << i << ',' << blob.bbox.x0 << ','
                    << blob.bbox.y0 << ',' << blob.bbox.x1 << ',' << blob.bbox.y1 << ','
                    << blob.pixels.size() << ',' << crop_rel << '\n';
            }
            total += blobs.size();
        }
        write_text(out / "particles.csv", csv.str());
        log_info("segment: " + std::to_string(total) + " particles from " +
                 std::to_string(frame_files.size()) + " frames");
    });
}

int cmd_curate(const CommonOptions& common, const std::filesystem::path& raw_dir) {
    return guarded([&] {
        AppConfig cfg = load_config(common);
        const auto out = require_out(common);
        if (!std::filesystem::is_directory(raw_dir)) {
            throw ConfigError("raw directory not found: " + raw_dir.string());
        }

        Manifest source;
        const auto manifest_file = raw_dir / "manifest.csv";
        if (std::filesystem::exists(manifest_file)) {
            source = load_manifest(manifest_file);
        } else {
            source = scan_tree(raw_dir);
        }

        source.records = filter_min_size(source.records, cfg.min_side);
        if (source.records.empty()) {
            throw ConfigError("curate: dataset is empty after the min-size filter (> " +
                              std::to_string(cfg.min_side) + " px required)");
        }

        make_dirs(out);
        const PreprocessResult pp = preprocess_all(source, raw_dir, out, cfg.preprocess_side);
        for (const auto& [id, message] : pp.errors) {
            log_error("curate: skipped " + id + ": " + message);
        }
        if (pp.manifest.records.empty()) {
            throw ConfigError("curate: every record failed preprocessing");
        }

        SplitSpec split = cfg.split;
        if (split.holdout_antibodies.empty()) {
            split.holdout_antibodies = source.holdout_antibodies();
        }
        Manifest curated = stratified_split(pp.manifest.records, split);
        for (const auto& [key, value] : pp.manifest.params.items()) {
            if (!curated.params.contains(key)) curated.params[key] = value;
        }
        save_manifest(curated, out / "manifest.csv");

        std::size_t n_train = 0;
        std::size_t n_val = 0;
        for (const auto& r : curated.records) {
            (r.split == Split::Train ? n_train : n_val) += 1;
        }
        log_info("curate: " + std::to_string(curated.records.size()) + " records (" +
                 std::to_string(n_train) + " train, " + std::to_string(n_val) + " val)");
    });
}

int cmd_grid(const CommonOptions& common, const std::filesystem::path& manifest_path,
             const std::vector<std::string>& modes, int parallelism) {
    return guarded([&] {
        const AppConfig cfg = load_config(common);
        const auto out = require_out(common);
        if (parallelism < 1) throw ConfigError("--parallel must be >= 1");
        if (!std::filesystem::exists(manifest_path)) {
            throw ConfigError("manifest not found: " + manifest_path.string());
        }

        std::vector<std::string> mode_names = modes;
        if (mode_names.empty()) {
            mode_names = {"rgb", "red", "green", "blue", "grayscale", "mixed"};
        }
        std::vector<ColorMode> mode_list;
        for (const auto& name : mode_names) mode_list.push_back(mode_from_name(name, cfg));

        const Manifest manifest = load_manifest(manifest_path);
        const ImageStore store = ImageStore::load(manifest, manifest_path.parent_path());

        auto ablation = run_color_ablation(mode_list, cfg.grid, manifest, store, parallelism);

        make_dirs(out);
        for (std::size_t m = 0; m < ablation.size(); ++m) {
            auto& [mode, grid] = ablation[m];
            const std::string mode_dir = "checkpoints/" + mode.name();
            make_dirs(out / mode_dir);
            for (std::size_t i = 0; i < grid.runs.size(); ++i) {
                RunResult& run = grid.runs[i];
                if (!run.error.empty()) continue;
                const std::string rel = mode_dir + "/run_" + std::to_string(i) + ".ckpt";
                save_checkpoint(out / rel,
                                Checkpoint{run.best_net, run.best_epoch,
                                           run.config.schedule.lr0, run.config.sgd.momentum,
                                           run.config.sgd.weight_decay});
                run.checkpoint = rel;
                // keep results.json lean: predictions only for the best run
                if (static_cast<int>(i) != grid.best_index) run.predictions.clear();
            }
        }
        write_results_json(out / "results.json", ablation, cfg.grid.base.seed);
        write_text(out / "config.toml", dump_app_config(cfg));
        log_info("grid: wrote " + (out / "results.json").string());
    });
}

int cmd_report(const CommonOptions& common, const std::filesystem::path& results_path,
               const std::filesystem::path& manifest_path) {
    return guarded([&] {
        if (!std::filesystem::exists(results_path)) {
            throw ConfigError("results file not found: " + results_path.string());
        }
        if (!std::filesystem::exists(manifest_path)) {
            throw ConfigError("manifest not found: " + manifest_path.string());
        }
        const auto ablation = read_results_json(results_path);
        const Manifest manifest = load_manifest(manifest_path);

        std::vector<ModeEval> evals;
        for (const auto& [mode, grid] : ablation) {
            if (grid.best_index < 0) {
                log_error("report: mode " + mode.name() + " has no successful runs; skipped");
                continue;
            }
            const RunResult& best = grid.runs[static_cast<std::size_t>(grid.best_index)];
            evals.push_back({mode.name(), best.best_val_accuracy, best.predictions});
        }
        if (evals.empty()) {
            throw ConfigError("report: results contain no successful runs");
        }

        const ReportFiles rep = render_report(evals, manifest);
        const auto out = common.out_dir ? *common.out_dir : results_path.parent_path();
        make_dirs(out);
        write_text(out / "report.csv", rep.csv);
        write_text(out / "report.txt", rep.text);
        log_info("report: wrote " + (out / "report.csv").string());
    });
}

int run_main(int argc, const char* const* argv) {
    CLI::App app{"stress-source classification experiments on flow-imaging particle data"};
    app.require_subcommand(1);

    struct SubState {
        CommonOptions common;
        std::string seed_text;
        std::filesystem::path out;
        bool has_out = false;
    };

    auto add_common = [](CLI::App* sub, SubState& st, bool out_required) {
        sub->add_option("--config", st.common.config_file, "config file (TOML-style)");
        sub->add_option("--set", st.common.overrides, "override: section.key=value")
            ->take_all();
        sub->add_option("--seed", st.seed_text, "seed overriding all configured seeds");
        auto* out_opt = sub->add_option("--out", st.out, "output directory");
        if (out_required) out_opt->required();
    };

    auto finish_common = [](SubState& st, bool has_out_flag) {
        if (has_out_flag) st.common.out_dir = st.out;
        if (!st.seed_text.empty()) {
            try {
                std::size_t pos = 0;
                const std::uint64_t seed = std::stoull(st.seed_text, &pos, 10);
                if (pos != st.seed_text.size()) throw std::invalid_argument(st.seed_text);
                st.common.seed = seed;
            } catch (const std::exception&) {
                throw ConfigError("--seed must be an unsigned integer, got \"" + st.seed_text +
                                  "\"");
            }
        }
    };

    int exit_code = 0;

    auto st_synth = std::make_shared<SubState>();
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, *st_synth, true);
    synth->callback([&, st_synth] {
        exit_code = guarded([&] { finish_common(*st_synth, true); });
        if (exit_code == 0) exit_code = cmd_synth(st_synth->common);
    });

    auto st_segment = std::make_shared<SubState>();
    auto* segment = app.add_subcommand("segment", "detect and crop particles in frames");
    add_common(segment, *st_segment, true);
    auto seg_frames = std::make_shared<std::filesystem::path>();
    auto seg_bg = std::make_shared<std::filesystem::path>();
    segment->add_option("--frames", *seg_frames, "directory of frame PNGs")->required();
    segment->add_option("--background", *seg_bg, "directory of particle-free frame PNGs")
        ->required();
    segment->callback([&, st_segment, seg_frames, seg_bg] {
        exit_code = guarded([&] { finish_common(*st_segment, true); });
        if (exit_code == 0) exit_code = cmd_segment(st_segment->common, *seg_frames, *seg_bg);
    });

    auto st_curate = std::make_shared<SubState>();
    auto* curate = app.add_subcommand("curate", "filter, preprocess, and split a corpus");
    add_common(curate, *st_curate, true);
    auto raw_dir = std::make_shared<std::filesystem::path>();
    curate->add_option("--raw", *raw_dir, "raw dataset directory")->required();
    curate->callback([&, st_curate, raw_dir] {
        exit_code = guarded([&] { finish_common(*st_curate, true); });
        if (exit_code == 0) exit_code = cmd_curate(st_curate->common, *raw_dir);
    });

    auto st_grid = std::make_shared<SubState>();
    auto* grid = app.add_subcommand("grid", "hyperparameter grid over color modes");
    add_common(grid, *st_grid, true);
    auto manifest_path = std::make_shared<std::filesystem::path>();
    auto mode_names = std::make_shared<std::vector<std::string>>();
    auto parallelism = std::make_shared<int>(1);
    grid->add_option("--manifest", *manifest_path, "curated manifest.csv")->required();
    grid->add_option("--modes", *mode_names, "color modes (default: all six)")
        ->delimiter(',');
    grid->add_option("--parallel", *parallelism, "concurrent training runs");
    grid->callback([&, st_grid, manifest_path, mode_names, parallelism] {
        exit_code = guarded([&] { finish_common(*st_grid, true); });
        if (exit_code == 0) {
            exit_code = cmd_grid(st_grid->common, *manifest_path, *mode_names, *parallelism);
        }
    });

    auto st_report = std::make_shared<SubState>();
    auto* report = app.add_subcommand("report", "render tables from results.json");
    add_common(report, *st_report, false);
    auto results_path = std::make_shared<std::filesystem::path>();
    auto report_manifest = std::make_shared<std::filesystem::path>();
    report->add_option("--results", *results_path, "results.json from grid")->required();
    report->add_option("--manifest", *report_manifest, "curated manifest.csv")->required();
    report->callback([&, st_report, results_path, report_manifest] {
        const bool has_out = report->count("--out") > 0;
        exit_code = guarded([&] { finish_common(*st_report, has_out); });
        if (exit_code == 0) {
            exit_code = cmd_report(st_report->common, *results_path, *report_manifest);
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return exit_code;
}

} // namespace fimcb::cli
