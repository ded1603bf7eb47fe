#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <fimcb/image.hpp>
#include <fimcb/rng.hpp>

namespace fimcb {

enum class Channel { Red, Green, Blue };

/// Which representation feeds the classifier. Mixed carries a probability
/// vector over {RGB, Red, Green, Blue} sampled per image at training time.
struct ColorMode {
    enum class Kind { RGB, Red, Green, Blue, Grayscale, Mixed };

    Kind kind = Kind::RGB;
    std::array<double, 4> mixed_probs{0.25, 0.25, 0.25, 0.25};

    static ColorMode rgb() { return {Kind::RGB, {}}; }
    static ColorMode red() { return {Kind::Red, {}}; }
    static ColorMode green() { return {Kind::Green, {}}; }
    static ColorMode blue() { return {Kind::Blue, {}}; }
    static ColorMode grayscale() { return {Kind::Grayscale, {}}; }
    static ColorMode mixed(std::array<double, 4> probs = {0.25, 0.25, 0.25, 0.25});

    std::string name() const;
    static ColorMode parse(const std::string& name);

    friend bool operator==(const ColorMode&, const ColorMode&) = default;
};

/// Validates mixed_probs (nonnegative, sum 1 within 1e-9); throws ConfigError.
void validate(const ColorMode& mode);

/// ITU-R 601-2 luminance of one pixel: round-half-up of
/// (299 R + 587 G + 114 B) / 1000 in exact integer arithmetic.
inline std::uint8_t luma_pixel(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const std::uint32_t weighted =
        299u * r + 587u * g + 114u * b; // <= 255000, weights sum to 1000
    return static_cast<std::uint8_t>((weighted + 500u) / 1000u);
}

GrayImage luma_grayscale(const RGBImage& img);

GrayImage extract_channel(const RGBImage& img, Channel channel);

/// Gray plane replicated into all three channels, so single-channel modes
/// keep the classifier input shape.
RGBImage replicate_gray(const GrayImage& img);

/// RGB -> identity; Red/Green/Blue/Grayscale -> single plane replicated into
/// all three channels; Mixed -> one of {RGB, Red, Green, Blue} sampled per
/// call from mixed_probs, then converted as above.
RGBImage convert_color_mode(const RGBImage& img, const ColorMode& mode, Rng& rng);

/// Per-channel median over all pixels; even pixel counts take the lower of
/// the two middle values. Throws on an empty image.
PixelRGB median_color(const RGBImage& img);

/// Scales so the largest edge equals target; the other edge becomes
/// max(1, round(other * target / largest)). Bilinear per channel.
RGBImage resize_largest_edge(const RGBImage& img, int target = 256);

/// Centers the image on a side x side canvas filled with median_color(img);
/// odd leftover padding goes to the right/bottom. Throws if the input
/// exceeds side in either dimension.
RGBImage pad_to_square(const RGBImage& img, int side = 256);

struct CropRanges {
    double scale_lo = 0.5;
    double scale_hi = 1.0;
    double aspect_lo = 3.0 / 4.0;
    double aspect_hi = 4.0 / 3.0;
};

/// Samples an area fraction in [scale_lo, scale_hi] and a log-uniform aspect
/// ratio, takes that sub-rectangle (up to 10 attempts, then the maximal
/// centered crop at the geometric-mean aspect), and resizes to out x out.
RGBImage random_resized_crop(const RGBImage& img, Rng& rng, int out = 224,
                             const CropRanges& ranges = {});

RGBImage flip_horizontal(const RGBImage& img);
RGBImage flip_vertical(const RGBImage& img);

/// Horizontal then vertical flip, each applied independently with p = 0.5.
RGBImage random_flips(const RGBImage& img, Rng& rng);

/// Deterministic evaluation-time transform: resize_largest_edge(side) then
/// pad_to_square(side). Identity for a side x side input.
RGBImage fit_square(const RGBImage& img, int side);

/// Bilinear resample to exactly out_w x out_h (half-pixel-center sampling,
/// clamped borders, round-half-up to 8 bits). Identity when dims are equal.
RGBImage resize_bilinear(const RGBImage& img, int out_w, int out_h);

/// Axis-aligned sub-rectangle copy; throws if the rectangle leaves the image.
RGBImage crop(const RGBImage& img, int x0, int y0, int w, int h);

} // namespace fimcb
