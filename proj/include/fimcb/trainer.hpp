#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include <fimcb/dataset.hpp>
#include <fimcb/eval.hpp>
#include <fimcb/image.hpp>
#include <fimcb/imageops.hpp>
#include <fimcb/model.hpp>

namespace fimcb {

struct AugmentToggles {
    bool crop = true;
    bool flips = true;

    friend bool operator==(const AugmentToggles&, const AugmentToggles&) = default;
};

struct TrainConfig {
    ColorMode color_mode = ColorMode::rgb();
    int batch_size = 32;
    int max_epochs = 50;
    int patience = 5;
    SGDConfig sgd;
    CosineSchedule schedule; // schedule.total_epochs stays fixed when
                             // max_epochs varies, so LR trajectories compare
    int input_side = 224;
    AugmentToggles augment;
    CropRanges crop_ranges;
    std::uint64_t seed = 0;
};

struct EpochStats {
    int epoch = 0; // 1-based
    double lr = 0.0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct RunResult {
    TrainConfig config;
    std::vector<EpochStats> history;
    double best_val_accuracy = 0.0;
    int best_epoch = 0; // 1-based; 0 when the run failed
    bool stopped_early = false;
    std::string checkpoint; // relative to the results root; set by the caller
    std::vector<Prediction> predictions; // best epoch, validation order
    std::string error;                   // nonempty when the run failed
    SmallCNN best_net;                   // best-epoch parameters; not serialized
};

struct GridSpec {
    std::vector<double> lrs{1.0, 0.1, 0.01, 0.001};
    std::vector<double> weight_decays{0.0, 1e-5};
    std::vector<double> momenta{0.0, 0.1, 0.05};
    TrainConfig base;
};

struct GridResult {
    std::vector<RunResult> runs; // enumeration order: lr, then wd, then momentum
    int best_index = -1;
};

/// All validation images decoded once and shared read-only across runs.
class ImageStore {
public:
    static ImageStore load(const Manifest& manifest, const std::filesystem::path& data_root);

    const RGBImage& get(const std::string& id) const;

private:
    std::map<std::string, RGBImage> images_;
};

/// Early-stopping bookkeeping over a 1-based epoch sequence: best tracks the
/// first strict maximum; a streak of `patience` non-improving epochs stops.
struct EarlyStopStatus {
    int epochs_run = 0;
    int best_epoch = 0;
    double best_value = 0.0;
    bool stopped = false;
};

/// Scans a full accuracy sequence and reports where training would stop.
EarlyStopStatus early_stop_scan(const std::vector<double>& val_accuracies, int patience);

struct TrainHooks {
    /// Replaces the computed validation accuracy when set (epoch is 1-based).
    std::function<double(int epoch, double computed)> val_accuracy;
};

RunResult train_one(const TrainConfig& cfg, const Manifest& manifest,
                    const std::filesystem::path& data_root);
RunResult train_one(const TrainConfig& cfg, const Manifest& manifest, const ImageStore& store,
                    const TrainHooks& hooks = {});

/// Seed salt for one grid point; excludes the color mode so an ablation
/// varies nothing but the mode.
std::uint64_t config_hash(double lr, double weight_decay, double momentum);

/// Runs every (lr, wd, momentum) combination. Per-run failures are recorded
/// in RunResult::error and the grid continues; throws only when every run
/// failed. Ties on best_val_accuracy resolve to the lowest lr, then lowest
/// wd, then lowest momentum.
GridResult grid_search(const GridSpec& spec, const Manifest& manifest, const ImageStore& store,
                       int parallelism = 1, const TrainHooks& hooks = {});
GridResult grid_search(const GridSpec& spec, const Manifest& manifest,
                       const std::filesystem::path& data_root, int parallelism = 1);

/// One grid per color mode over shared data and seeds.
std::vector<std::pair<ColorMode, GridResult>> run_color_ablation(
    const std::vector<ColorMode>& modes, const GridSpec& spec, const Manifest& manifest,
    const ImageStore& store, int parallelism = 1);

nlohmann::ordered_json run_to_json(const RunResult& run);
RunResult run_from_json(const nlohmann::json& j); // best_net is not restored
nlohmann::ordered_json grid_to_json(const GridResult& grid);
GridResult grid_from_json(const nlohmann::json& j);

/// results.json bundle for a whole ablation.
nlohmann::ordered_json ablation_to_json(
    const std::vector<std::pair<ColorMode, GridResult>>& ablation, std::uint64_t seed);
std::vector<std::pair<ColorMode, GridResult>> ablation_from_json(const nlohmann::json& j);

void write_results_json(const std::filesystem::path& path,
                        const std::vector<std::pair<ColorMode, GridResult>>& ablation,
                        std::uint64_t seed);
std::vector<std::pair<ColorMode, GridResult>> read_results_json(
    const std::filesystem::path& path);

} // namespace fimcb
