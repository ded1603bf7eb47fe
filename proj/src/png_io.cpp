#include <fimcb/png_io.hpp>

#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include <fimcb/errors.hpp>

namespace fimcb {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f != nullptr) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

RGBImage read_png_rgb(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) {
        throw IoError("cannot open for reading: " + path.string());
    }

    png_byte header[8] = {};
    if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        throw ConfigError("not a PNG file: " + path.string());
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) {
        throw IoError("png_create_read_struct failed");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }

    std::vector<png_bytep> row_pointers;
    std::vector<png_byte> pixels;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ConfigError("malformed PNG: " + path.string());
    }

    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    // Normalize everything to 8-bit RGB.
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const std::size_t row_bytes = png_get_rowbytes(png, info);
    if (row_bytes != static_cast<std::size_t>(width) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ConfigError("unexpected PNG row layout: " + path.string());
    }

    pixels.resize(static_cast<std::size_t>(height) * row_bytes);
    row_pointers.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) {
        row_pointers[y] = pixels.data() + static_cast<std::size_t>(y) * row_bytes;
    }
    png_read_image(png, row_pointers.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    RGBImage img(static_cast<int>(width), static_cast<int>(height));
    auto& out = img.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = PixelRGB{pixels[3 * i], pixels[3 * i + 1], pixels[3 * i + 2]};
    }
    return img;
}

void write_png_rgb(const std::filesystem::path& path, const RGBImage& img) {
    if (img.empty()) {
        throw std::invalid_argument("write_png_rgb: empty image");
    }
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) {
        throw IoError("cannot open for writing: " + path.string());
    }

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) {
        throw IoError("png_create_write_struct failed");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path.string());
    }

    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
                 static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const auto& data = img.data();
    std::vector<png_byte> row(static_cast<std::size_t>(img.width()) * 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const PixelRGB& p = data[static_cast<std::size_t>(y) * img.width() + x];
            row[3 * static_cast<std::size_t>(x)] = p.r;
            row[3 * static_cast<std::size_t>(x) + 1] = p.g;
            row[3 * static_cast<std::size_t>(x) + 2] = p.b;
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace fimcb
