#include <fimcb/trainer.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <fimcb/errors.hpp>
#include <fimcb/log.hpp>
#include <fimcb/png_io.hpp>
#include <fimcb/rng.hpp>

namespace fimcb {

namespace {

constexpr int kHeatClass = 0;
constexpr int kMechClass = 1;

int class_of(Stress stress) {
    return stress == Stress::Heat ? kHeatClass : kMechClass;
}

Stress stress_of(int cls) {
    return cls == kHeatClass ? Stress::Heat : Stress::Mechanical;
}

void validate_train_config(const TrainConfig& cfg) {
    validate(cfg.color_mode);
    if (cfg.batch_size < 1) {
        throw std::invalid_argument("train config: batch_size must be >= 1");
    }
    if (cfg.max_epochs < 1) {
        throw std::invalid_argument("train config: max_epochs must be >= 1");
    }
    if (cfg.patience < 1) {
        throw std::invalid_argument("train config: patience must be >= 1");
    }
    if (cfg.input_side < 8) {
        throw std::invalid_argument("train config: input_side must be >= 8");
    }
    if (!(cfg.schedule.lr0 > 0.0)) {
        throw std::invalid_argument("train config: lr must be positive");
    }
    if (cfg.schedule.lr_min < 0.0 || cfg.schedule.lr_min > cfg.schedule.lr0) {
        throw std::invalid_argument("train config: lr_min must be in [0, lr]");
    }
    if (cfg.schedule.total_epochs < 1) {
        throw std::invalid_argument("train config: schedule length must be >= 1");
    }
    if (cfg.max_epochs - 1 > cfg.schedule.total_epochs) {
        throw std::invalid_argument("train config: cosine schedule shorter than max_epochs");
    }
    if (cfg.sgd.momentum < 0.0 || cfg.sgd.momentum >= 1.0) {
        throw std::invalid_argument("train config: momentum must be in [0, 1)");
    }
    if (cfg.sgd.weight_decay < 0.0) {
        throw std::invalid_argument("train config: weight_decay must be >= 0");
    }
    if (!(cfg.crop_ranges.scale_lo > 0.0) ||
        cfg.crop_ranges.scale_lo > cfg.crop_ranges.scale_hi ||
        !(cfg.crop_ranges.aspect_lo > 0.0) ||
        cfg.crop_ranges.aspect_lo > cfg.crop_ranges.aspect_hi) {
        throw std::invalid_argument("train config: invalid crop ranges");
    }
}

/// Validation-time conversion: deterministic, and Mixed evaluates as RGB.
RGBImage eval_convert(const RGBImage& img, const ColorMode& mode) {
    if (mode.kind == ColorMode::Kind::RGB || mode.kind == ColorMode::Kind::Mixed) {
        return img;
    }
    Rng unused(0); // deterministic kinds never draw from it
    return convert_color_mode(img, mode, unused);
}

// Fixed normalization constants for bright-field flow imaging: the empty
// cell is near white, so centering there makes background pixels contribute
// roughly zero to the features, and particle pixels carry the gradient.
constexpr double kPixelMean = 0.9;
constexpr double kPixelScale = 0.25;

void fill_sample(Tensor& batch, std::size_t slot, const RGBImage& img) {
    const std::size_t side = batch.shape()[3];
    double* base = batch.data() + slot * 3 * side * side;
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            const PixelRGB p = img.at(static_cast<int>(x), static_cast<int>(y));
            base[y * side + x] = (p.r / 255.0 - kPixelMean) / kPixelScale;
            base[side * side + y * side + x] = (p.g / 255.0 - kPixelMean) / kPixelScale;
            base[2 * side * side + y * side + x] = (p.b / 255.0 - kPixelMean) / kPixelScale;
        }
    }
}

std::string format_epoch_line(int epoch, double lr, double loss, double val_acc) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "epoch=%d lr=%.6g loss=%.6g val_acc=%.6g", epoch, lr,
                  loss, val_acc);
    return buf;
}

} // namespace

ImageStore ImageStore::load(const Manifest& manifest, const std::filesystem::path& data_root) {
    ImageStore store;
    for (const auto& r : manifest.records) {
        store.images_.emplace(r.id, read_png_rgb(data_root / r.image_path));
    }
    return store;
}

const RGBImage& ImageStore::get(const std::string& id) const {
    auto it = images_.find(id);
    if (it == images_.end()) {
        throw std::invalid_argument("image store: unknown record id \"" + id + "\"");
    }
    return it->second;
}

EarlyStopStatus early_stop_scan(const std::vector<double>& val_accuracies, int patience) {
    if (patience < 1) {
        throw std::invalid_argument("early_stop_scan: patience must be >= 1");
    }
    EarlyStopStatus st;
    int streak = 0;
    for (std::size_t i = 0; i < val_accuracies.size(); ++i) {
        st.epochs_run = static_cast<int>(i) + 1;
        const double v = val_accuracies[i];
        if (st.best_epoch == 0 || v > st.best_value) {
            st.best_epoch = st.epochs_run;
            st.best_value = v;
            streak = 0;
        } else if (++streak >= patience) {
            st.stopped = true;
            break;
        }
    }
    return st;
}

RunResult train_one(const TrainConfig& cfg, const Manifest& manifest,
                    const std::filesystem::path& data_root) {
    return train_one(cfg, manifest, ImageStore::load(manifest, data_root));
}

RunResult train_one(const TrainConfig& cfg, const Manifest& manifest, const ImageStore& store,
                    const TrainHooks& hooks) {
    validate_train_config(cfg);

    std::vector<const ParticleRecord*> train_recs;
    std::vector<const ParticleRecord*> val_recs;
    for (const auto& r : manifest.records) {
        if (r.split == Split::Train) train_recs.push_back(&r);
        if (r.split == Split::Val) val_recs.push_back(&r);
    }
    if (train_recs.empty()) {
        throw std::invalid_argument("train_one: manifest has no Train records");
    }
    if (val_recs.empty()) {
        throw std::invalid_argument("train_one: manifest has no Val records");
    }

    RunResult res;
    res.config = cfg;

    SmallCNN net;
    init_params(net, mix_seed(cfg.seed, fnv1a64("init")));
    Rng rng(mix_seed(cfg.seed, fnv1a64("train")));
    std::vector<Tensor> velocity;

    const std::size_t n_train = train_recs.size();
    const std::size_t n_val = val_recs.size();
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t side = static_cast<std::size_t>(cfg.input_side);

    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

    int streak = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double lr_t = cosine_lr(cfg.schedule, epoch - 1);

        for (std::size_t i = n_train; i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_int(i)]);
        }

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n_train; start += bs) {
            const std::size_t n = std::min(bs, n_train - start);
            Tensor batch({n, 3, side, side});
            std::vector<int> labels(n);
            for (std::size_t j = 0; j < n; ++j) {
                const ParticleRecord& r = *train_recs[order[start + j]];
                RGBImage img = convert_color_mode(store.get(r.id), cfg.color_mode, rng);
                img = cfg.augment.crop
                          ? random_resized_crop(img, rng, cfg.input_side, cfg.crop_ranges)
                          : fit_square(img, cfg.input_side);
                if (cfg.augment.flips) img = random_flips(img, rng);
                fill_sample(batch, j, img);
                labels[j] = class_of(r.stress);
            }
            BackwardResult bw = backward(net, batch, labels);
            sgd_step(net, bw.grads, velocity, cfg.sgd, lr_t);
            loss_sum += bw.loss * static_cast<double>(n);
        }
        const double train_loss = loss_sum / static_cast<double>(n_train);

        std::vector<Prediction> preds;
        preds.reserve(n_val);
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n_val; start += bs) {
            const std::size_t n = std::min(bs, n_val - start);
            Tensor batch({n, 3, side, side});
            for (std::size_t j = 0; j < n; ++j) {
                const ParticleRecord& r = *val_recs[start + j];
                fill_sample(batch, j,
                            fit_square(eval_convert(store.get(r.id), cfg.color_mode),
                                       cfg.input_side));
            }
            const std::vector<int> cls = predict(forward(net, batch));
            for (std::size_t j = 0; j < n; ++j) {
                const ParticleRecord& r = *val_recs[start + j];
                const Stress predicted = stress_of(cls[j]);
                preds.push_back({r.id, predicted, r.stress});
                if (predicted == r.stress) ++correct;
            }
        }
        double val_acc = static_cast<double>(correct) / static_cast<double>(n_val);
        if (hooks.val_accuracy) val_acc = hooks.val_accuracy(epoch, val_acc);

        res.history.push_back({epoch, lr_t, train_loss, val_acc});
        log_info(format_epoch_line(epoch, lr_t, train_loss, val_acc));

        if (res.best_epoch == 0 || val_acc > res.best_val_accuracy) {
            res.best_val_accuracy = val_acc;
            res.best_epoch = epoch;
            res.best_net = net;
            res.predictions = std::move(preds);
            streak = 0;
        } else if (++streak >= cfg.patience) {
            res.stopped_early = true;
            break;
        }
    }
    return res;
}

std::uint64_t config_hash(double lr, double weight_decay, double momentum) {
    std::uint64_t h = fnv1a64("grid-config");
    for (double v : {lr, weight_decay, momentum}) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        h = fnv1a64_bytes(&bits, sizeof(bits), h);
    }
    return h;
}

GridResult grid_search(const GridSpec& spec, const Manifest& manifest, const ImageStore& store,
                       int parallelism, const TrainHooks& hooks) {
    if (spec.lrs.empty() || spec.weight_decays.empty() || spec.momenta.empty()) {
        throw std::invalid_argument("grid_search: hyperparameter sets must be nonempty");
    }
    if (parallelism < 1) {
        throw std::invalid_argument("grid_search: parallelism must be >= 1");
    }

    std::vector<TrainConfig> configs;
    for (double lr : spec.lrs) {
        for (double wd : spec.weight_decays) {
            for (double m : spec.momenta) {
                TrainConfig cfg = spec.base;
                cfg.schedule.lr0 = lr;
                cfg.sgd.weight_decay = wd;
                cfg.sgd.momentum = m;
                cfg.seed = spec.base.seed ^ config_hash(lr, wd, m);
                configs.push_back(cfg);
            }
        }
    }

    GridResult grid;
    grid.runs.resize(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= configs.size()) break;
            try {
                grid.runs[i] = train_one(configs[i], manifest, store, hooks);
            } catch (const std::exception& e) {
                grid.runs[i] = RunResult{};
                grid.runs[i].config = configs[i];
                grid.runs[i].error = e.what();
                log_error("grid run failed: " + std::string(e.what()));
            }
        }
    };

    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(parallelism), configs.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (std::size_t i = 0; i < grid.runs.size(); ++i) {
        const RunResult& run = grid.runs[i];
        if (!run.error.empty()) continue;
        if (grid.best_index < 0) {
            grid.best_index = static_cast<int>(i);
            continue;
        }
        const RunResult& best = grid.runs[static_cast<std::size_t>(grid.best_index)];
        const auto key = [](const RunResult& r) {
            return std::tuple(-r.best_val_accuracy, r.config.schedule.lr0,
                              r.config.sgd.weight_decay, r.config.sgd.momentum);
        };
        if (key(run) < key(best)) grid.best_index = static_cast<int>(i);
    }
    if (grid.best_index < 0) {
        throw std::runtime_error("grid_search: all runs failed");
    }
    return grid;
}

GridResult grid_search(const GridSpec& spec, const Manifest& manifest,
                       const std::filesystem::path& data_root, int parallelism) {
    return grid_search(spec, manifest, ImageStore::load(manifest, data_root), parallelism);
}

std::vector<std::pair<ColorMode, GridResult>> run_color_ablation(
    const std::vector<ColorMode>& modes, const GridSpec& spec, const Manifest& manifest,
    const ImageStore& store, int parallelism) {
    if (modes.empty()) {
        throw std::invalid_argument("run_color_ablation: need at least one mode");
    }
    std::vector<std::pair<ColorMode, GridResult>> out;
    out.reserve(modes.size());
    for (const ColorMode& mode : modes) {
        validate(mode);
        GridSpec per_mode = spec;
        per_mode.base.color_mode = mode;
        log_info("grid start: mode=" + mode.name());
        out.emplace_back(mode, grid_search(per_mode, manifest, store, parallelism));
    }
    return out;
}

namespace {

nlohmann::ordered_json color_mode_to_json(const ColorMode& mode) {
    nlohmann::ordered_json j;
    j["kind"] = mode.name();
    if (mode.kind == ColorMode::Kind::Mixed) {
        j["mixed_probs"] = mode.mixed_probs;
    }
    return j;
}

ColorMode color_mode_from_json(const nlohmann::json& j) {
    ColorMode mode = ColorMode::parse(j.at("kind").get<std::string>());
    if (mode.kind == ColorMode::Kind::Mixed && j.contains("mixed_probs")) {
        const auto probs = j.at("mixed_probs").get<std::vector<double>>();
        if (probs.size() != 4) {
            throw ConfigError("results: mixed_probs must have 4 entries");
        }
        std::array<double, 4> arr{};
        std::copy(probs.begin(), probs.end(), arr.begin());
        mode = ColorMode::mixed(arr);
    }
    return mode;
}

} // namespace

nlohmann::ordered_json run_to_json(const RunResult& run) {
    nlohmann::ordered_json cfg;
    cfg["color_mode"] = color_mode_to_json(run.config.color_mode);
    cfg["lr"] = run.config.schedule.lr0;
    cfg["lr_min"] = run.config.schedule.lr_min;
    cfg["total_epochs"] = run.config.schedule.total_epochs;
    cfg["weight_decay"] = run.config.sgd.weight_decay;
    cfg["momentum"] = run.config.sgd.momentum;
    cfg["batch_size"] = run.config.batch_size;
    cfg["max_epochs"] = run.config.max_epochs;
    cfg["patience"] = run.config.patience;
    cfg["input_side"] = run.config.input_side;
    cfg["augment_crop"] = run.config.augment.crop;
    cfg["augment_flips"] = run.config.augment.flips;
    cfg["crop_scale"] = {run.config.crop_ranges.scale_lo, run.config.crop_ranges.scale_hi};
    cfg["crop_aspect"] = {run.config.crop_ranges.aspect_lo, run.config.crop_ranges.aspect_hi};
    cfg["seed"] = run.config.seed;

    nlohmann::ordered_json j;
    j["config"] = std::move(cfg);
    j["history"] = nlohmann::ordered_json::array();
    for (const auto& e : run.history) {
        nlohmann::ordered_json h;
        h["epoch"] = e.epoch;
        h["lr"] = e.lr;
        h["train_loss"] = e.train_loss;
        h["val_accuracy"] = e.val_accuracy;
        j["history"].push_back(std::move(h));
    }
    j["best_val_accuracy"] = run.best_val_accuracy;
    j["best_epoch"] = run.best_epoch;
    j["stopped_early"] = run.stopped_early;
    j["checkpoint"] = run.checkpoint;
    j["predictions"] = nlohmann::ordered_json::array();
    for (const auto& p : run.predictions) {
        nlohmann::ordered_json pj;
        pj["id"] = p.id;
        pj["predicted"] = to_string(p.predicted);
        pj["truth"] = to_string(p.truth);
        j["predictions"].push_back(std::move(pj));
    }
    j["error"] = run.error;
    return j;
}

RunResult run_from_json(const nlohmann::json& j) {
    RunResult run;
    const auto& cfg = j.at("config");
    run.config.color_mode = color_mode_from_json(cfg.at("color_mode"));
    run.config.schedule.lr0 = cfg.at("lr").get<double>();
    run.config.schedule.lr_min = cfg.at("lr_min").get<double>();
    run.config.schedule.total_epochs = cfg.at("total_epochs").get<int>();
    run.config.sgd.weight_decay = cfg.at("weight_decay").get<double>();
    run.config.sgd.momentum = cfg.at("momentum").get<double>();
    run.config.batch_size = cfg.at("batch_size").get<int>();
    run.config.max_epochs = cfg.at("max_epochs").get<int>();
    run.config.patience = cfg.at("patience").get<int>();
    run.config.input_side = cfg.at("input_side").get<int>();
    run.config.augment.crop = cfg.at("augment_crop").get<bool>();
    run.config.augment.flips = cfg.at("augment_flips").get<bool>();
    run.config.crop_ranges.scale_lo = cfg.at("crop_scale").at(0).get<double>();
    run.config.crop_ranges.scale_hi = cfg.at("crop_scale").at(1).get<double>();
    run.config.crop_ranges.aspect_lo = cfg.at("crop_aspect").at(0).get<double>();
    run.config.crop_ranges.aspect_hi = cfg.at("crop_aspect").at(1).get<double>();
    run.config.seed = cfg.at("seed").get<std::uint64_t>();

    for (const auto& h : j.at("history")) {
        EpochStats e;
        e.epoch = h.at("epoch").get<int>();
        e.lr = h.at("lr").get<double>();
        e.train_loss = h.at("train_loss").get<double>();
        e.val_accuracy = h.at("val_accuracy").get<double>();
        run.history.push_back(e);
    }
    run.best_val_accuracy = j.at("best_val_accuracy").get<double>();
    run.best_epoch = j.at("best_epoch").get<int>();
    run.stopped_early = j.at("stopped_early").get<bool>();
    run.checkpoint = j.at("checkpoint").get<std::string>();
    for (const auto& pj : j.at("predictions")) {
        Prediction p;
        p.id = pj.at("id").get<std::string>();
        p.predicted = parse_stress(pj.at("predicted").get<std::string>());
        p.truth = parse_stress(pj.at("truth").get<std::string>());
        run.predictions.push_back(std::move(p));
    }
    run.error = j.at("error").get<std::string>();
    return run;
}

nlohmann::ordered_json grid_to_json(const GridResult& grid) {
    nlohmann::ordered_json j;
    j["best_index"] = grid.best_index;
    j["runs"] = nlohmann::ordered_json::array();
    for (const auto& run : grid.runs) j["runs"].push_back(run_to_json(run));
    return j;
}

GridResult grid_from_json(const nlohmann::json& j) {
    GridResult grid;
    grid.best_index = j.at("best_index").get<int>();
    for (const auto& rj : j.at("runs")) grid.runs.push_back(run_from_json(rj));
    if (grid.best_index < -1 || grid.best_index >= static_cast<int>(grid.runs.size())) {
        throw ConfigError("results: best_index out of range");
    }
    return grid;
}

nlohmann::ordered_json ablation_to_json(
    const std::vector<std::pair<ColorMode, GridResult>>& ablation, std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["seed"] = seed;
    j["modes"] = nlohmann::ordered_json::array();
    for (const auto& [mode, grid] : ablation) {
        nlohmann::ordered_json mj;
        mj["mode"] = color_mode_to_json(mode);
        mj["grid"] = grid_to_json(grid);
        j["modes"].push_back(std::move(mj));
    }
    return j;
}

std::vector<std::pair<ColorMode, GridResult>> ablation_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("version", 0) != 1) {
        throw ConfigError("results: unsupported or missing version");
    }
    std::vector<std::pair<ColorMode, GridResult>> out;
    for (const auto& mj : j.at("modes")) {
        out.emplace_back(color_mode_from_json(mj.at("mode")), grid_from_json(mj.at("grid")));
    }
    return out;
}

void write_results_json(const std::filesystem::path& path,
                        const std::vector<std::pair<ColorMode, GridResult>>& ablation,
                        std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out << ablation_to_json(ablation, seed).dump(2) << '\n';
    if (!out) {
        throw IoError("failed to write: " + path.string());
    }
}

std::vector<std::pair<ColorMode, GridResult>> read_results_json(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open results file: " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    try {
        return ablation_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": malformed results: " + e.what());
    }
}

} // namespace fimcb
