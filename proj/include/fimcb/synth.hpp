#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include <fimcb/dataset.hpp>
#include <fimcb/image.hpp>
#include <fimcb/rng.hpp>

namespace fimcb {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct IntRange {
    int lo = 0;
    int hi = 0;
};

/// Heat-class shapes: clusters of overlapping ellipses. `circularity` is the
/// per-ellipse axis ratio (1 = circle); `density` scales how many ellipses
/// pile into one cluster.
struct HeatMorphology {
    Range circularity{0.55, 0.95};
    Range density{0.35, 0.75};
};

/// Mechanical-class shapes: random-walk strands. `elongation` is the
/// length-to-width ratio of each strand.
struct MechMorphology {
    Range elongation{2.5, 6.0};
    IntRange strand_count{1, 3};
};

struct SynthSpec {
    int n_per_class = 100;
    int image_side = 64;
    HeatMorphology heat;
    MechMorphology mech;

    /// Tint magnitude applied to the heat class: channel means shift by
    /// (+delta, +delta/2, 0) against the particle's neutral gray.
    double chroma_delta = 30.0;
    double noise_sigma = 12.0;

    /// Probability that a particle's silhouette is drawn from the other
    /// class's shape family. Morphology distributions overlap in real
    /// corpora, so shape alone cannot fully identify the stress source;
    /// this caps a shape-only classifier near 1 - shape_overlap while the
    /// tint stays truthful.
    double shape_overlap = 0.1;
    int n_antibodies = 8;
    int holdout_count = 2;
    std::uint64_t seed = 0;

    /// Per-particle neutral body intensity, drawn uniformly. The width of
    /// this range confounds the luminance trace of the tint, which is what
    /// keeps the grayscale pipeline from reading the color signal off mean
    /// brightness alone.
    Range base_gray{110.0, 160.0};
    double background = 230.0;
};

/// Throws ConfigError on out-of-range values (delta outside [0,64],
/// n_per_class < 2, holdout_count >= n_antibodies, ...).
void validate(const SynthSpec& spec);

/// Antibody labels "mAb1".."mAbN" for the spec.
std::vector<std::string> synth_antibody_labels(const SynthSpec& spec);

/// The last holdout_count labels, flagged in the generated manifest.
std::vector<std::string> synth_holdout_labels(const SynthSpec& spec);

/// One particle image plus its record (id and image_path left for the
/// caller). Antibody drawn uniformly over the spec's labels.
std::pair<RGBImage, ParticleRecord> generate_particle(Stress stress, const SynthSpec& spec,
                                                      Rng& rng);

/// Writes 2 * n_per_class PNGs plus manifest.csv under out_dir, balanced
/// across classes, everything derived from the spec seed.
Manifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir);

} // namespace fimcb
