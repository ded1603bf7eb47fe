#include <fimcb/imageops.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>

#include <fimcb/errors.hpp>

namespace fimcb {

namespace {

void require_nonempty(const RGBImage& img, const char* func) {
    if (img.empty()) {
        throw std::invalid_argument(std::string(func) + ": empty image");
    }
}

std::uint8_t round_u8(double v) {
    const double r = std::floor(v + 0.5); // round half up
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

// round(numerator / denominator) with ties up, for nonnegative integers.
int round_div(std::int64_t numerator, std::int64_t denominator) {
    return static_cast<int>((2 * numerator + denominator) / (2 * denominator));
}

} // namespace

ColorMode ColorMode::mixed(std::array<double, 4> probs) {
    ColorMode mode{Kind::Mixed, probs};
    validate(mode);
    return mode;
}

std::string ColorMode::name() const {
    switch (kind) {
        case Kind::RGB: return "RGB";
        case Kind::Red: return "Red";
        case Kind::Green: return "Green";
        case Kind::Blue: return "Blue";
        case Kind::Grayscale: return "Grayscale";
        case Kind::Mixed: return "Mixed";
    }
    return "RGB";
}

ColorMode ColorMode::parse(const std::string& name) {
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "rgb") return rgb();
    if (lower == "red") return red();
    if (lower == "green") return green();
    if (lower == "blue") return blue();
    if (lower == "grayscale") return grayscale();
    if (lower == "mixed") return mixed();
    throw ConfigError("unknown color mode: \"" + name + "\"");
}

void validate(const ColorMode& mode) {
    if (mode.kind != ColorMode::Kind::Mixed) {
        return;
    }
    double sum = 0.0;
    for (double p : mode.mixed_probs) {
        if (p < 0.0) {
            throw ConfigError("mixed color probabilities must be nonnegative");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("mixed color probabilities must sum to 1");
    }
}

RGBImage::RGBImage(int width, int height, PixelRGB fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("RGBImage: dimensions must be >= 1");
    }
}

RGBImage::RGBImage(int width, int height, std::vector<PixelRGB> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("RGBImage: dimensions must be >= 1");
    }
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw std::invalid_argument("RGBImage: data length != width * height");
    }
}

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("GrayImage: dimensions must be >= 1");
    }
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("GrayImage: dimensions must be >= 1");
    }
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw std::invalid_argument("GrayImage: data length != width * height");
    }
}

GrayImage luma_grayscale(const RGBImage& img) {
    GrayImage out;
    if (img.empty()) {
        return out;
    }
    out = GrayImage(img.width(), img.height());
    const auto& src = img.data();
    auto& dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = luma_pixel(src[i].r, src[i].g, src[i].b);
    }
    return out;
}

GrayImage extract_channel(const RGBImage& img, Channel channel) {
    GrayImage out;
    if (img.empty()) {
        return out;
    }
    out = GrayImage(img.width(), img.height());
    const auto& src = img.data();
    auto& dst = out.data();
    switch (channel) {
        case Channel::Red:
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i].r;
            break;
        case Channel::Green:
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i].g;
            break;
        case Channel::Blue:
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i].b;
            break;
    }
    return out;
}

RGBImage replicate_gray(const GrayImage& img) {
    RGBImage out;
    if (img.empty()) {
        return out;
    }
    out = RGBImage(img.width(), img.height());
    const auto& src = img.data();
    auto& dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = PixelRGB{src[i], src[i], src[i]};
    }
    return out;
}

RGBImage convert_color_mode(const RGBImage& img, const ColorMode& mode, Rng& rng) {
    validate(mode);
    switch (mode.kind) {
        case ColorMode::Kind::RGB:
            return img;
        case ColorMode::Kind::Red:
            return replicate_gray(extract_channel(img, Channel::Red));
        case ColorMode::Kind::Green:
            return replicate_gray(extract_channel(img, Channel::Green));
        case ColorMode::Kind::Blue:
            return replicate_gray(extract_channel(img, Channel::Blue));
        case ColorMode::Kind::Grayscale:
            return replicate_gray(luma_grayscale(img));
        case ColorMode::Kind::Mixed: {
            const double u = rng.uniform();
            double cumulative = 0.0;
            static constexpr ColorMode::Kind kChoices[4] = {
                ColorMode::Kind::RGB, ColorMode::Kind::Red,
                ColorMode::Kind::Green, ColorMode::Kind::Blue};
            ColorMode::Kind picked = ColorMode::Kind::Blue;
            for (int i = 0; i < 4; ++i) {
                cumulative += mode.mixed_probs[static_cast<std::size_t>(i)];
                if (u < cumulative) {
                    picked = kChoices[i];
                    break;
                }
            }
            return convert_color_mode(img, ColorMode{picked, {}}, rng);
        }
    }
    return img;
}

PixelRGB median_color(const RGBImage& img) {
    if (img.empty()) {
        throw std::invalid_argument("median_color: empty image");
    }
    const auto& src = img.data();
    const std::size_t mid = (src.size() - 1) / 2; // lower median for even counts
    std::vector<std::uint8_t> plane(src.size());
    PixelRGB out;
    for (std::size_t i = 0; i < src.size(); ++i) plane[i] = src[i].r;
    std::nth_element(plane.begin(), plane.begin() + static_cast<std::ptrdiff_t>(mid), plane.end());
    out.r = plane[mid];
    for (std::size_t i = 0; i < src.size(); ++i) plane[i] = src[i].g;
    std::nth_element(plane.begin(), plane.begin() + static_cast<std::ptrdiff_t>(mid), plane.end());
    out.g = plane[mid];
    for (std::size_t i = 0; i < src.size(); ++i) plane[i] = src[i].b;
    std::nth_element(plane.begin(), plane.begin() + static_cast<std::ptrdiff_t>(mid), plane.end());
    out.b = plane[mid];
    return out;
}

RGBImage resize_bilinear(const RGBImage& img, int out_w, int out_h) {
    require_nonempty(img, "resize_bilinear");
    if (out_w < 1 || out_h < 1) {
        throw std::invalid_argument("resize_bilinear: output dims must be >= 1");
    }
    if (out_w == img.width() && out_h == img.height()) {
        return img;
    }
    RGBImage out(out_w, out_h);
    const int src_w = img.width();
    const int src_h = img.height();
    const double x_scale = static_cast<double>(src_w) / out_w;
    const double y_scale = static_cast<double>(src_h) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        // Half-pixel-center sampling; the coordinate is clamped before the
        // fractional part is taken, so border samples weight the edge pixel
        // fully instead of bleeding into its neighbor.
        const double fy = std::clamp((oy + 0.5) * y_scale - 0.5, 0.0, src_h - 1.0);
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, src_h - 1);
        const double dy = fy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = std::clamp((ox + 0.5) * x_scale - 0.5, 0.0, src_w - 1.0);
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, src_w - 1);
            const double dx = fx - x0;
            const PixelRGB p00 = img.at(x0, y0);
            const PixelRGB p10 = img.at(x1, y0);
            const PixelRGB p01 = img.at(x0, y1);
            const PixelRGB p11 = img.at(x1, y1);
            const double w00 = (1.0 - dx) * (1.0 - dy);
            const double w10 = dx * (1.0 - dy);
            const double w01 = (1.0 - dx) * dy;
            const double w11 = dx * dy;
            out.at(ox, oy) = PixelRGB{
                round_u8(w00 * p00.r + w10 * p10.r + w01 * p01.r + w11 * p11.r),
                round_u8(w00 * p00.g + w10 * p10.g + w01 * p01.g + w11 * p11.g),
                round_u8(w00 * p00.b + w10 * p10.b + w01 * p01.b + w11 * p11.b)};
        }
    }
    return out;
}

RGBImage resize_largest_edge(const RGBImage& img, int target) {
    require_nonempty(img, "resize_largest_edge");
    if (target < 1) {
        throw std::invalid_argument("resize_largest_edge: target must be >= 1");
    }
    const int w = img.width();
    const int h = img.height();
    int out_w = 0;
    int out_h = 0;
    if (w >= h) {
        out_w = target;
        out_h = std::max(1, round_div(static_cast<std::int64_t>(h) * target, w));
    } else {
        out_h = target;
        out_w = std::max(1, round_div(static_cast<std::int64_t>(w) * target, h));
    }
    return resize_bilinear(img, out_w, out_h);
}

RGBImage pad_to_square(const RGBImage& img, int side) {
    require_nonempty(img, "pad_to_square");
    const int w = img.width();
    const int h = img.height();
    if (w > side || h > side) {
        throw std::invalid_argument("pad_to_square: input larger than target side");
    }
    if (w == side && h == side) {
        return img;
    }
    const PixelRGB fill = median_color(img);
    RGBImage out(side, side, fill);
    const int left = (side - w) / 2;  // odd leftover goes right/bottom
    const int top = (side - h) / 2;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            out.at(left + x, top + y) = img.at(x, y);
        }
    }
    return out;
}

RGBImage crop(const RGBImage& img, int x0, int y0, int w, int h) {
    require_nonempty(img, "crop");
    if (w < 1 || h < 1 || x0 < 0 || y0 < 0 || x0 + w > img.width() || y0 + h > img.height()) {
        throw std::invalid_argument("crop: rectangle out of bounds");
    }
    RGBImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            out.at(x, y) = img.at(x0 + x, y0 + y);
        }
    }
    return out;
}

RGBImage random_resized_crop(const RGBImage& img, Rng& rng, int out, const CropRanges& ranges) {
    require_nonempty(img, "random_resized_crop");
    if (out < 1) {
        throw std::invalid_argument("random_resized_crop: out must be >= 1");
    }
    if (!(ranges.scale_lo > 0.0 && ranges.scale_lo <= ranges.scale_hi) ||
        !(ranges.aspect_lo > 0.0 && ranges.aspect_lo <= ranges.aspect_hi)) {
        throw std::invalid_argument("random_resized_crop: invalid scale/aspect ranges");
    }
    const int src_w = img.width();
    const int src_h = img.height();
    const double area = static_cast<double>(src_w) * src_h;

    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target_area = area * rng.uniform(ranges.scale_lo, ranges.scale_hi);
        const double log_ratio =
            rng.uniform(std::log(ranges.aspect_lo), std::log(ranges.aspect_hi));
        const double aspect = std::exp(log_ratio);
        const int w = static_cast<int>(std::lround(std::sqrt(target_area * aspect)));
        const int h = static_cast<int>(std::lround(std::sqrt(target_area / aspect)));
        if (w >= 1 && h >= 1 && w <= src_w && h <= src_h) {
            const int x0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(src_w - w) + 1));
            const int y0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(src_h - h) + 1));
            return resize_bilinear(crop(img, x0, y0, w, h), out, out);
        }
    }

    // Fallback: maximal centered crop at the geometric-mean aspect ratio.
    const double mean_aspect = std::sqrt(ranges.aspect_lo * ranges.aspect_hi);
    int w = src_w;
    int h = src_h;
    if (static_cast<double>(src_w) / src_h > mean_aspect) {
        h = src_h;
        w = std::clamp(static_cast<int>(std::lround(src_h * mean_aspect)), 1, src_w);
    } else {
        w = src_w;
        h = std::clamp(static_cast<int>(std::lround(src_w / mean_aspect)), 1, src_h);
    }
    const int x0 = (src_w - w) / 2;
    const int y0 = (src_h - h) / 2;
    return resize_bilinear(crop(img, x0, y0, w, h), out, out);
}

RGBImage flip_horizontal(const RGBImage& img) {
    if (img.empty()) {
        return img;
    }
    RGBImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            out.at(x, y) = img.at(img.width() - 1 - x, y);
        }
    }
    return out;
}

RGBImage flip_vertical(const RGBImage& img) {
    if (img.empty()) {
        return img;
    }
    RGBImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            out.at(x, y) = img.at(x, img.height() - 1 - y);
        }
    }
    return out;
}

RGBImage random_flips(const RGBImage& img, Rng& rng) {
    // Horizontal draw first, then vertical; both independent.
    const bool horizontal = rng.bernoulli(0.5);
    const bool vertical = rng.bernoulli(0.5);
    RGBImage out = img;
    if (horizontal) {
        out = flip_horizontal(out);
    }
    if (vertical) {
        out = flip_vertical(out);
    }
    return out;
}

RGBImage fit_square(const RGBImage& img, int side) {
    return pad_to_square(resize_largest_edge(img, side), side);
}

} // namespace fimcb
