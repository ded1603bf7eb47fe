#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace fimcb {

enum class Stress { Heat, Mechanical };
enum class Split { Train, Val, Unassigned };

std::string to_string(Stress stress);
std::string to_string(Split split);
Stress parse_stress(const std::string& text);
Split parse_split(const std::string& text);

/// One curated particle image plus its origin labels and split assignment.
struct ParticleRecord {
    std::string id;
    std::string antibody;
    Stress stress = Stress::Heat;
    int replicate = 0;
    std::string image_path; // relative to the manifest's directory
    int width = 0;
    int height = 0;
    Split split = Split::Unassigned;

    friend bool operator==(const ParticleRecord&, const ParticleRecord&) = default;
};

/// The dataset index. `params` carries free-form creation parameters
/// (generator settings, holdout flags); a content checksum over the record
/// rows is written on save and verified on load.
struct Manifest {
    std::vector<ParticleRecord> records;
    std::uint64_t seed = 0;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();

    /// Antibody labels flagged for holdout in params, if any.
    std::vector<std::string> holdout_antibodies() const;
};

struct SplitSpec {
    double val_fraction = 0.15;
    std::vector<std::string> holdout_antibodies;
    std::uint64_t seed = 0;
};

/// Keeps records strictly larger than min_side in BOTH dimensions.
std::vector<ParticleRecord> filter_min_size(const std::vector<ParticleRecord>& records,
                                            int min_side = 25);

/// Holdout antibodies go entirely to Val; every other (antibody, stress)
/// group is shuffled by a seed-derived stream and round(n * val_fraction)
/// of it goes to Val. All records must arrive Unassigned; non-holdout
/// groups of fewer than 2 records are an error.
Manifest stratified_split(std::vector<ParticleRecord> records, const SplitSpec& spec);

struct PreprocessResult {
    Manifest manifest;
    std::vector<std::pair<std::string, std::string>> errors; // (record id, message)
};

/// Resizes every image so its largest edge is `side`, pads it square with
/// the median color, and writes it under out_dir/<antibody>/<stress>/<id>.png.
/// Unreadable files become error entries; the run continues.
PreprocessResult preprocess_all(const Manifest& manifest, const std::filesystem::path& data_root,
                                const std::filesystem::path& out_dir, int side = 256);

void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Loads and verifies a manifest; throws ConfigError on checksum mismatch or
/// malformed content, IoError if the file cannot be read.
Manifest load_manifest(const std::filesystem::path& path);

} // namespace fimcb
