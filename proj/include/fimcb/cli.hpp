#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fimcb::cli {

/// Flags shared by every subcommand. `seed`, when set, overrides every
/// configured seed so one flag pins a whole experiment.
struct CommonOptions {
    std::optional<std::filesystem::path> config_file;
    std::vector<std::string> overrides; // --set section.key=value
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out_dir;
};

/// Each command returns a process exit code: 0 success, 2 usage/config/data
/// errors, 3 I/O or runtime failures.
int cmd_synth(const CommonOptions& common);
int cmd_segment(const CommonOptions& common, const std::filesystem::path& frames_dir,
                const std::filesystem::path& background_dir);
int cmd_curate(const CommonOptions& common, const std::filesystem::path& raw_dir);
int cmd_grid(const CommonOptions& common, const std::filesystem::path& manifest_path,
             const std::vector<std::string>& modes, int parallelism);
int cmd_report(const CommonOptions& common, const std::filesystem::path& results_path,
               const std::filesystem::path& manifest_path);

/// Full argv front end (subcommands synth|segment|curate|grid|report).
int run_main(int argc, const char* const* argv);

} // namespace fimcb::cli
