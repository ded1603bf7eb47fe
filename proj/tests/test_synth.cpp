#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fimcb/dataset.hpp>
#include <fimcb/errors.hpp>
#include <fimcb/png_io.hpp>
#include <fimcb/synth.hpp>

#include "testutil.hpp"

using namespace fimcb;
using fimcb::testutil::TempDir;

namespace {

struct ChannelMeans {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
};

// Mean over pixels that differ from the flat background, i.e. the particle
// body plus its noise skirt.
ChannelMeans particle_means(const RGBImage& img, double background) {
    ChannelMeans m;
    long long n = 0;
    const auto bg = static_cast<std::uint8_t>(background);
    for (const auto& p : img.data()) {
        if (p.r == bg && p.g == bg && p.b == bg) continue;
        m.r += p.r;
        m.g += p.g;
        m.b += p.b;
        ++n;
    }
    REQUIRE(n > 0);
    m.r /= static_cast<double>(n);
    m.g /= static_cast<double>(n);
    m.b /= static_cast<double>(n);
    return m;
}

// Covered fraction of the bounding box of non-background pixels: compact
// heat clusters fill their box, thin mech strands leave it mostly empty.
double bbox_fill(const RGBImage& img, double background) {
    const auto bg = static_cast<std::uint8_t>(background);
    int x0 = img.width(), y0 = img.height(), x1 = -1, y1 = -1;
    long long covered = 0;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const auto& p = img.at(x, y);
            if (p.r == bg && p.g == bg && p.b == bg) continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
            ++covered;
        }
    }
    REQUIRE(x1 >= x0);
    const long long box = static_cast<long long>(x1 - x0 + 1) * (y1 - y0 + 1);
    return static_cast<double>(covered) / static_cast<double>(box);
}

} // namespace

TEST_CASE("synth: antibody and holdout labels") {
    SynthSpec spec;
    spec.n_antibodies = 5;
    spec.holdout_count = 2;
    CHECK(synth_antibody_labels(spec) ==
          std::vector<std::string>{"mAb1", "mAb2", "mAb3", "mAb4", "mAb5"});
    CHECK(synth_holdout_labels(spec) == std::vector<std::string>{"mAb4", "mAb5"});

    spec.holdout_count = 0;
    CHECK(synth_holdout_labels(spec).empty());
}

TEST_CASE("synth: validate rejects out-of-range specs") {
    SynthSpec ok;
    CHECK_NOTHROW(validate(ok));

    SynthSpec spec = ok;
    spec.chroma_delta = 65.0;
    CHECK_THROWS_AS(validate(spec), ConfigError);
    spec.chroma_delta = -1.0;
    CHECK_THROWS_AS(validate(spec), ConfigError);

    spec = ok;
    spec.n_per_class = 1;
    CHECK_THROWS_AS(validate(spec), ConfigError);

    spec = ok;
    spec.holdout_count = spec.n_antibodies;
    CHECK_THROWS_AS(validate(spec), ConfigError);

    spec = ok;
    spec.image_side = 4;
    CHECK_THROWS_AS(validate(spec), ConfigError);

    spec = ok;
    spec.noise_sigma = -0.5;
    CHECK_THROWS_AS(validate(spec), ConfigError);

    spec = ok;
    spec.base_gray = {200.0, 100.0};
    CHECK_THROWS_AS(validate(spec), ConfigError);
}

TEST_CASE("synth: zero delta leaves channel means equal") {
    SynthSpec spec;
    spec.chroma_delta = 0.0;
    spec.noise_sigma = 0.0;
    Rng rng(11);
    for (int i = 0; i < 30; ++i) {
        const auto [img, rec] = generate_particle(Stress::Heat, spec, rng);
        const ChannelMeans m = particle_means(img, spec.background);
        CHECK(std::abs(m.r - m.g) < 1e-9);
        CHECK(std::abs(m.g - m.b) < 1e-9);
    }
}

TEST_CASE("synth: heat tint shifts red over blue by delta") {
    SynthSpec spec;
    spec.chroma_delta = 30.0;
    spec.noise_sigma = 0.0; // isolate the deterministic tint
    Rng rng(17);
    double rb_gap = 0.0;
    double rg_gap = 0.0;
    const int n = 120;
    for (int i = 0; i < n; ++i) {
        const auto [img, rec] = generate_particle(Stress::Heat, spec, rng);
        const ChannelMeans m = particle_means(img, spec.background);
        rb_gap += m.r - m.b;
        rg_gap += m.r - m.g;
    }
    rb_gap /= n;
    rg_gap /= n;
    // tint is (+delta, +delta/2, 0) on the body; 8-bit rounding and the soft
    // edge leave a small bias, noise is off
    CHECK(rb_gap == doctest::Approx(30.0).epsilon(0.10));
    CHECK(rg_gap == doctest::Approx(15.0).epsilon(0.12));

    // mechanical particles stay neutral
    double mech_rb = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto [img, rec] = generate_particle(Stress::Mechanical, spec, rng);
        const ChannelMeans m = particle_means(img, spec.background);
        mech_rb += m.r - m.b;
    }
    CHECK(std::abs(mech_rb / n) < 1.0);
}

TEST_CASE("synth: base gray jitter overlaps the tinted luminance range") {
    // The design intent: with delta on, a heat particle's mean brightness
    // still falls inside the plain base_gray range, so brightness alone
    // cannot separate the classes.
    SynthSpec spec;
    spec.chroma_delta = 30.0;
    spec.noise_sigma = 0.0;
    Rng rng(23);
    double heat_min = 255.0, heat_max = 0.0, mech_min = 255.0, mech_max = 0.0;
    for (int i = 0; i < 150; ++i) {
        const auto [h, hr] = generate_particle(Stress::Heat, spec, rng);
        const ChannelMeans hm = particle_means(h, spec.background);
        const double hy = (hm.r + hm.g + hm.b) / 3.0;
        heat_min = std::min(heat_min, hy);
        heat_max = std::max(heat_max, hy);
        const auto [m, mr] = generate_particle(Stress::Mechanical, spec, rng);
        const ChannelMeans mm = particle_means(m, spec.background);
        const double my = (mm.r + mm.g + mm.b) / 3.0;
        mech_min = std::min(mech_min, my);
        mech_max = std::max(mech_max, my);
    }
    // substantial overlap: each class's range covers the other's midpoint
    const double heat_mid = 0.5 * (heat_min + heat_max);
    const double mech_mid = 0.5 * (mech_min + mech_max);
    CHECK(heat_min < mech_mid);
    CHECK(heat_max > mech_mid);
    CHECK(mech_min < heat_mid);
    CHECK(mech_max > heat_mid);
}

TEST_CASE("synth: mech strands are elongated, heat clusters compact") {
    SynthSpec spec;
    spec.noise_sigma = 0.0;
    Rng rng(31);
    double heat_fill = 0.0;
    double mech_fill = 0.0;
    const int n = 60;
    for (int i = 0; i < n; ++i) {
        const auto [h, hr] = generate_particle(Stress::Heat, spec, rng);
        heat_fill += bbox_fill(h, spec.background);
        const auto [m, mr] = generate_particle(Stress::Mechanical, spec, rng);
        mech_fill += bbox_fill(m, spec.background);
    }
    heat_fill /= n;
    mech_fill /= n;
    // the morphology gap the shape features ride on
    CHECK(heat_fill > mech_fill + 0.10);
}

TEST_CASE("synth: generate_particle fills the record fields") {
    SynthSpec spec;
    Rng rng(41);
    const auto labels = synth_antibody_labels(spec);
    std::set<std::string> seen;
    for (int i = 0; i < 80; ++i) {
        const auto [img, rec] = generate_particle(Stress::Mechanical, spec, rng);
        CHECK(img.width() == spec.image_side);
        CHECK(img.height() == spec.image_side);
        CHECK(rec.stress == Stress::Mechanical);
        CHECK(rec.width == spec.image_side);
        CHECK(rec.height == spec.image_side);
        CHECK(rec.split == Split::Unassigned);
        CHECK(std::find(labels.begin(), labels.end(), rec.antibody) != labels.end());
        seen.insert(rec.antibody);
    }
    CHECK(seen.size() > 2); // antibody draw actually varies
}

TEST_CASE("synth: generate_dataset writes a balanced, reloadable corpus") {
    TempDir tmp;
    SynthSpec spec;
    spec.n_per_class = 12;
    spec.image_side = 32;
    spec.n_antibodies = 3;
    spec.holdout_count = 1;
    spec.seed = 7;

    const Manifest manifest = generate_dataset(spec, tmp.path());
    CHECK(manifest.records.size() == 24);
    CHECK(manifest.seed == 7);
    CHECK(manifest.holdout_antibodies() == std::vector<std::string>{"mAb3"});

    int heat = 0;
    std::set<std::string> ids;
    for (const auto& r : manifest.records) {
        if (r.stress == Stress::Heat) ++heat;
        CHECK(r.split == Split::Unassigned);
        ids.insert(r.id);
        const RGBImage img = read_png_rgb(tmp / r.image_path);
        CHECK(img.width() == 32);
        CHECK(img.height() == 32);
    }
    CHECK(heat == 12);
    CHECK(ids.size() == 24);

    // manifest on disk reloads to the same content
    const Manifest reloaded = load_manifest(tmp / "manifest.csv");
    CHECK(reloaded.records == manifest.records);
    CHECK(reloaded.params == manifest.params);
}

TEST_CASE("synth: same seed reproduces the dataset byte for byte") {
    TempDir a;
    TempDir b;
    SynthSpec spec;
    spec.n_per_class = 6;
    spec.image_side = 24;
    spec.seed = 123;

    const Manifest ma = generate_dataset(spec, a.path());
    const Manifest mb = generate_dataset(spec, b.path());
    REQUIRE(ma.records == mb.records);
    for (const auto& r : ma.records) {
        CHECK(read_png_rgb(a / r.image_path) == read_png_rgb(b / r.image_path));
    }

    SynthSpec other = spec;
    other.seed = 124;
    TempDir c;
    const Manifest mc = generate_dataset(other, c.path());
    bool any_differ = mc.records.size() != ma.records.size();
    for (std::size_t i = 0; !any_differ && i < ma.records.size(); ++i) {
        any_differ = !(read_png_rgb(a / ma.records[i].image_path) ==
                       read_png_rgb(c / mc.records[i].image_path));
    }
    CHECK(any_differ);
}
