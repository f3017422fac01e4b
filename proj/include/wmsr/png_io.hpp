#pragma once

#include <png.h>

#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "wmsr/image.hpp"

namespace wmsr {

/// Loads any PNG as 8-bit RGB. Grey and palette images are expanded; an
/// alpha channel is dropped with a warning on stderr.
inline Image load_png(const std::string& path) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw ImageError("cannot read PNG '" + path + "': " + img.message);
    const bool had_alpha = (img.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    img.format = PNG_FORMAT_RGBA;
    std::vector<png_byte> rgba(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, rgba.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw ImageError("corrupt PNG '" + path + "': " + msg);
    }
    if (had_alpha) std::cerr << "warning: " << path << ": alpha channel dropped\n";
    Image out(img.width, img.height);
    for (std::size_t i = 0; i < out.width * out.height; ++i)
        for (int c = 0; c < 3; ++c) out.pixels[3 * i + c] = rgba[4 * i + c];
    return out;
}

inline void save_png(const Image& img, const std::string& path) {
    if (img.pixels.size() != 3 * img.width * img.height) throw ImageError("save_png: pixel buffer size mismatch");
    png_image p;
    std::memset(&p, 0, sizeof p);
    p.version = PNG_IMAGE_VERSION;
    p.width = static_cast<png_uint_32>(img.width);
    p.height = static_cast<png_uint_32>(img.height);
    p.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&p, path.c_str(), 0, img.pixels.data(), 0, nullptr))
        throw ImageError("cannot write PNG '" + path + "': " + p.message);
}

}  // namespace wmsr
