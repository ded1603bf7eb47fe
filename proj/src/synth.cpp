#include <fimcb/synth.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <fimcb/errors.hpp>
#include <fimcb/png_io.hpp>

namespace fimcb {

namespace {

double sample(const Range& range, Rng& rng) {
    return rng.uniform(range.lo, range.hi);
}

std::uint8_t clamp_u8(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

struct Mask {
    int side = 0;
    std::vector<char> inside;

    char& at(int x, int y) { return inside[static_cast<std::size_t>(y) * side + x]; }
    bool at(int x, int y) const { return inside[static_cast<std::size_t>(y) * side + x] != 0; }
};

// Cluster of overlapping rotated ellipses around the image center.
Mask heat_mask(const SynthSpec& spec, Rng& rng) {
    const int side = spec.image_side;
    const double s = static_cast<double>(side);
    Mask mask{side, std::vector<char>(static_cast<std::size_t>(side) * side, 0)};

    const double density = sample(spec.heat.density, rng);
    const int count = 1 + static_cast<int>(std::lround(density * 5.0));
    const double cx = s / 2.0 + rng.uniform(-0.06, 0.06) * s;
    const double cy = s / 2.0 + rng.uniform(-0.06, 0.06) * s;
    const double base_radius = rng.uniform(0.10, 0.17) * s;

    for (int e = 0; e < count; ++e) {
        const double q = sample(spec.heat.circularity, rng);
        const double ex = cx + rng.normal(0.0, 0.05 * s);
        const double ey = cy + rng.normal(0.0, 0.05 * s);
        const double a = std::max(1.0, base_radius * rng.uniform(0.6, 1.0));
        const double b = std::max(1.0, a * q);
        const double theta = rng.uniform(0.0, M_PI);
        const double ct = std::cos(theta);
        const double st = std::sin(theta);
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                const double dx = (x + 0.5) - ex;
                const double dy = (y + 0.5) - ey;
                const double u = (dx * ct + dy * st) / a;
                const double v = (-dx * st + dy * ct) / b;
                if (u * u + v * v <= 1.0) {
                    mask.at(x, y) = 1;
                }
            }
        }
    }
    return mask;
}

void stamp_disc(Mask& mask, double cx, double cy, double radius) {
    const int x_lo = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
    const int x_hi = std::min(mask.side - 1, static_cast<int>(std::ceil(cx + radius + 1)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
    const int y_hi = std::min(mask.side - 1, static_cast<int>(std::ceil(cy + radius + 1)));
    const double r2 = radius * radius;
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            const double dx = (x + 0.5) - cx;
            const double dy = (y + 0.5) - cy;
            if (dx * dx + dy * dy <= r2) {
                mask.at(x, y) = 1;
            }
        }
    }
}

// Curling random-walk strokes, one per strand.
Mask mech_mask(const SynthSpec& spec, Rng& rng) {
    const int side = spec.image_side;
    const double s = static_cast<double>(side);
    Mask mask{side, std::vector<char>(static_cast<std::size_t>(side) * side, 0)};

    const int strands =
        static_cast<int>(rng.uniform_int(spec.mech.strand_count.lo, spec.mech.strand_count.hi));
    for (int k = 0; k < strands; ++k) {
        const double elongation = sample(spec.mech.elongation, rng);
        const double thickness = std::max(0.8, rng.uniform(0.025, 0.05) * s);
        const double length = elongation * 2.0 * thickness;
        const int steps = std::max(2, static_cast<int>(std::lround(length)));

        double x = s / 2.0 + rng.normal(0.0, 0.10 * s);
        double y = s / 2.0 + rng.normal(0.0, 0.10 * s);
        double heading = rng.uniform(0.0, 2.0 * M_PI);
        for (int step = 0; step < steps; ++step) {
            stamp_disc(mask, x, y, thickness);
            heading += rng.normal(0.0, 0.18);
            x = std::clamp(x + std::cos(heading), 1.0, s - 2.0);
            y = std::clamp(y + std::sin(heading), 1.0, s - 2.0);
        }
    }
    return mask;
}

} // namespace

void validate(const SynthSpec& spec) {
    if (spec.n_per_class < 2) {
        throw ConfigError("synth: n_per_class must be >= 2");
    }
    if (spec.image_side < 8) {
        throw ConfigError("synth: image_side must be >= 8");
    }
    if (spec.chroma_delta < 0.0 || spec.chroma_delta > 64.0) {
        throw ConfigError("synth: chroma_delta must be in [0, 64]");
    }
    if (spec.noise_sigma < 0.0) {
        throw ConfigError("synth: noise_sigma must be >= 0");
    }
    if (spec.shape_overlap < 0.0 || spec.shape_overlap >= 0.5) {
        throw ConfigError("synth: shape_overlap must be in [0, 0.5)");
    }
    if (spec.n_antibodies < 1) {
        throw ConfigError("synth: n_antibodies must be >= 1");
    }
    if (spec.holdout_count < 0 || spec.holdout_count >= spec.n_antibodies) {
        throw ConfigError("synth: holdout_count must be in [0, n_antibodies)");
    }
    if (!(spec.base_gray.lo >= 0.0 && spec.base_gray.lo <= spec.base_gray.hi &&
          spec.base_gray.hi + spec.chroma_delta <= 255.0)) {
        throw ConfigError("synth: base_gray range must fit tint headroom within [0, 255]");
    }
    if (spec.background < 0.0 || spec.background > 255.0) {
        throw ConfigError("synth: background must be in [0, 255]");
    }
    auto check_range = [](const Range& r, const char* what) {
        if (!(r.lo <= r.hi)) {
            throw ConfigError(std::string("synth: empty range for ") + what);
        }
    };
    check_range(spec.heat.circularity, "heat.circularity");
    check_range(spec.heat.density, "heat.density");
    check_range(spec.mech.elongation, "mech.elongation");
    if (spec.mech.strand_count.lo < 1 || spec.mech.strand_count.lo > spec.mech.strand_count.hi) {
        throw ConfigError("synth: mech.strand_count must satisfy 1 <= lo <= hi");
    }
}

std::vector<std::string> synth_antibody_labels(const SynthSpec& spec) {
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(spec.n_antibodies));
    for (int i = 1; i <= spec.n_antibodies; ++i) {
        labels.push_back("mAb" + std::to_string(i));
    }
    return labels;
}

std::vector<std::string> synth_holdout_labels(const SynthSpec& spec) {
    auto labels = synth_antibody_labels(spec);
    return {labels.end() - spec.holdout_count, labels.end()};
}

std::pair<RGBImage, ParticleRecord> generate_particle(Stress stress, const SynthSpec& spec,
                                                      Rng& rng) {
    validate(spec);
    const int side = spec.image_side;
    // The shape draw happens before the mask so the swap consumes exactly one
    // uniform regardless of which family generates the silhouette.
    const bool swapped = rng.uniform() < spec.shape_overlap;
    const bool heat_shape = (stress == Stress::Heat) != swapped;
    const Mask mask = heat_shape ? heat_mask(spec, rng) : mech_mask(spec, rng);

    const double body = sample(spec.base_gray, rng);
    // Heat tint is additive so the R-B channel gap stays exactly delta no
    // matter where the body intensity landed.
    const double tint_r = stress == Stress::Heat ? spec.chroma_delta : 0.0;
    const double tint_g = stress == Stress::Heat ? spec.chroma_delta / 2.0 : 0.0;

    RGBImage img(side, side);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            double r = spec.background;
            double g = spec.background;
            double b = spec.background;
            if (mask.at(x, y)) {
                r = body + tint_r;
                g = body + tint_g;
                b = body;
            }
            img.at(x, y) = PixelRGB{
                clamp_u8(r + rng.normal(0.0, spec.noise_sigma)),
                clamp_u8(g + rng.normal(0.0, spec.noise_sigma)),
                clamp_u8(b + rng.normal(0.0, spec.noise_sigma))};
        }
    }

    ParticleRecord record;
    record.antibody =
        "mAb" + std::to_string(1 + static_cast<int>(rng.uniform_int(
                                       static_cast<std::uint64_t>(spec.n_antibodies))));
    record.stress = stress;
    record.replicate = 1 + static_cast<int>(rng.uniform_int(3));
    record.width = side;
    record.height = side;
    record.split = Split::Unassigned;
    return {std::move(img), std::move(record)};
}

Manifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir) {
    validate(spec);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create output dir: " + out_dir.string());
    }

    Manifest manifest;
    manifest.seed = spec.seed;
    manifest.params["generator"] = "synth";
    manifest.params["n_per_class"] = spec.n_per_class;
    manifest.params["image_side"] = spec.image_side;
    manifest.params["chroma_delta"] = spec.chroma_delta;
    manifest.params["noise_sigma"] = spec.noise_sigma;
    manifest.params["n_antibodies"] = spec.n_antibodies;
    manifest.params["holdout_antibodies"] = synth_holdout_labels(spec);

    const int total = 2 * spec.n_per_class;
    for (int index = 0; index < total; ++index) {
        const Stress stress = index < spec.n_per_class ? Stress::Heat : Stress::Mechanical;
        Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(index)));
        auto [img, record] = generate_particle(stress, spec, rng);

        const int class_index = index % spec.n_per_class;
        char id[32];
        std::snprintf(id, sizeof id, "%s_%06d", stress == Stress::Heat ? "heat" : "mech",
                      class_index);
        record.id = id;
        const std::filesystem::path rel = std::filesystem::path(record.antibody) /
                                          to_string(record.stress) / (record.id + ".png");
        record.image_path = rel.generic_string();

        std::filesystem::create_directories(out_dir / rel.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create dir: " + (out_dir / rel.parent_path()).string());
        }
        write_png_rgb(out_dir / rel, img);
        manifest.records.push_back(std::move(record));
    }

    save_manifest(manifest, out_dir / "manifest.csv");
    return manifest;
}

} // namespace fimcb
