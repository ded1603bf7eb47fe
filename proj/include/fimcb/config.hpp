#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <fimcb/segmentation.hpp>
#include <fimcb/synth.hpp>
#include <fimcb/trainer.hpp>

namespace fimcb {

/// File-based configuration mirroring the synth, segmentation, split, train,
/// and grid parameter sets. Unknown keys are rejected.
struct AppConfig {
    SynthSpec synth;

    SegmentationConfig segmentation;
    double calibration_um_per_px = 0.0; // 0 = unset; the segment command requires it

    SplitSpec split;
    int min_side = 25;
    int preprocess_side = 256;

    GridSpec grid; // grid.base carries the training defaults
    std::array<double, 4> mixed_probs{0.25, 0.25, 0.25, 0.25};
};

AppConfig default_app_config();

/// Parses the optional config file, then applies `section.key=value`
/// overrides in order. Throws ConfigError on unknown keys, syntax errors,
/// type mismatches, or invariant violations.
AppConfig load_app_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides = {});

/// The effective configuration in the same format load_app_config reads;
/// load(dump(cfg)) is an identity.
std::string dump_app_config(const AppConfig& cfg);

/// Parses dump_app_config-style text (used for snapshot round trips).
AppConfig parse_app_config(const std::string& text,
                           const std::vector<std::string>& overrides = {});

} // namespace fimcb
