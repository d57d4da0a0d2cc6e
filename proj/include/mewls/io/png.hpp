/**
 * @file png.hpp
 * @brief 8-bit grayscale / RGB PNG files via libpng. Link with PNG::PNG.
 */

#pragma once

#include "mewls/image.hpp"
#include "mewls/io/csv.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace mewls::io {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

/// Loads an image normalised to [0,1]. Palette, 16-bit and alpha images are
/// converted to 8-bit gray or RGB (alpha is dropped).
inline ImageGrid read_png(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open '" + path + "' for reading");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw IoError("'" + path + "' is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: cannot create read struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng: cannot create info struct");
    }
    ImageGrid img;
    std::vector<png_byte> buffer;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng: failed to decode '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = static_cast<int>(png_get_channels(png, info));
    const std::size_t stride = png_get_rowbytes(png, info);
    buffer.resize(stride * static_cast<std::size_t>(img.height));
    rows.resize(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) rows[y] = buffer.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (img.channels != 1 && img.channels != 3) {
        throw IoError("'" + path + "': unsupported channel count " + std::to_string(img.channels));
    }
    img.values.resize(img.pixel_count() * img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(img.width) * img.channels; ++i) {
            img.values[static_cast<std::size_t>(y) * img.width * img.channels + i] = rows[y][i] / 255.0;
        }
    }
    return img;
}

/// Writes values clamped to [0,1] and rounded to 8 bits.
inline void write_png(const std::string& path, const ImageGrid& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw InvalidInput("write_png: only 1 or 3 channels are supported");
    }
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open '" + path + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng: cannot create info struct");
    }
    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    std::vector<png_byte> buffer(stride * static_cast<std::size_t>(img.height));
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        const double x = std::clamp(img.values[i], 0.0, 1.0);
        buffer[i] = static_cast<png_byte>(std::lround(255.0 * x));
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) rows[y] = buffer.data() + stride * y;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng: failed to encode '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline ImageGrid mask_to_image(const OutlierMask& mask) {
    ImageGrid img(mask.width, mask.height, 1);
    for (std::size_t p = 0; p < mask.flags.size(); ++p) img.values[p] = mask.flags[p] ? 1.0 : 0.0;
    return img;
}

inline OutlierMask image_to_mask(const ImageGrid& img) {
    OutlierMask m{img.width, img.height, std::vector<std::uint8_t>(img.pixel_count(), 0)};
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        m.flags[p] = img.values[p * img.channels] >= 0.5 ? 1 : 0;
    }
    return m;
}

}  // namespace mewls::io
