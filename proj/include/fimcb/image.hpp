#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fimcb {

struct PixelRGB {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const PixelRGB&, const PixelRGB&) = default;
};

/// 8-bit-per-channel RGB image, row-major. An empty image (0x0) is a valid
/// default-constructed state; all other constructors enforce data = w*h.
class RGBImage {
public:
    RGBImage() = default;

    RGBImage(int width, int height, PixelRGB fill = PixelRGB{});

    RGBImage(int width, int height, std::vector<PixelRGB> data);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return data_.empty(); }
    std::size_t pixel_count() const { return data_.size(); }

    PixelRGB& at(int x, int y) { return data_[index(x, y)]; }
    const PixelRGB& at(int x, int y) const { return data_[index(x, y)]; }

    std::vector<PixelRGB>& data() { return data_; }
    const std::vector<PixelRGB>& data() const { return data_; }

    friend bool operator==(const RGBImage&, const RGBImage&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<PixelRGB> data_;
};

/// 8-bit single-plane luminance image, row-major.
class GrayImage {
public:
    GrayImage() = default;

    GrayImage(int width, int height, std::uint8_t fill = 0);

    GrayImage(int width, int height, std::vector<std::uint8_t> data);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return data_.empty(); }
    std::size_t pixel_count() const { return data_.size(); }

    std::uint8_t& at(int x, int y) { return data_[index(x, y)]; }
    std::uint8_t at(int x, int y) const { return data_[index(x, y)]; }

    std::vector<std::uint8_t>& data() { return data_; }
    const std::vector<std::uint8_t>& data() const { return data_; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

} // namespace fimcb
