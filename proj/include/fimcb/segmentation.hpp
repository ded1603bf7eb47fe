#pragma once

#include <cstdint>
#include <vector>

#include <fimcb/image.hpp>

namespace fimcb {

/// One flow-cell frame plus the physical scale of its pixels.
struct RawFrame {
    RGBImage image;
    double calibration_um_per_px = 0.0; // must be > 0
};

/// Per-pixel reference luminance of a particle-free flow cell.
using BackgroundModel = GrayImage;

struct SegmentationConfig {
    double light_threshold = 13.0;
    double dark_threshold = 10.0;
    double merge_distance_um = 3.0;
    int margin = 2;
};

struct PixelCoord {
    int x = 0;
    int y = 0;

    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0; // inclusive
    int y1 = 0; // inclusive

    int width() const { return x1 - x0 + 1; }
    int height() const { return y1 - y0 + 1; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ParticleBlob {
    std::vector<PixelCoord> pixels; // sorted by (y, x)
    BoundingBox bbox;               // tight hull of the pixel set
};

/// Gap distance between two pixels treated as unit squares: adjacent or
/// diagonal pixels are at distance 0, pixels separated by g empty columns
/// are at distance g. This makes "distance 0" coincide with 8-connectivity.
double pixel_gap_distance(const PixelCoord& a, const PixelCoord& b);

/// Per-pixel median luminance over particle-free frames (lower median for
/// even counts). Throws on an empty list or mismatched dimensions.
BackgroundModel calibrate_background(const std::vector<RawFrame>& frames);

/// Flags pixels whose luminance deviates from the background beyond the
/// light/dark thresholds, groups them by 8-connectivity, then transitively
/// merges components closer than merge_distance_um (boundary inclusive).
/// Blobs are returned sorted by (y0, x0).
std::vector<ParticleBlob> detect_particles(const RawFrame& frame, const BackgroundModel& background,
                                           const SegmentationConfig& config);

/// Crop of the blob's bounding box expanded by margin on each side, clamped
/// to the frame. Throws if the blob lies outside the frame.
RGBImage crop_particle(const RawFrame& frame, const ParticleBlob& blob, int margin);

} // namespace fimcb
