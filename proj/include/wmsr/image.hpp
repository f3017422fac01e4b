#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wmsr {

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 8-bit interleaved RGB raster.
struct Image {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB triples

    Image() = default;
    Image(std::size_t w, std::size_t h) : width(w), height(h), pixels(3 * w * h, 0) {}

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t ch) { return pixels[3 * (y * width + x) + ch]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t ch) const { return pixels[3 * (y * width + x) + ch]; }
    friend bool operator==(const Image&, const Image&) = default;
};

enum class ColorSpace { rgb, ycbcr };

inline const char* to_string(ColorSpace c) { return c == ColorSpace::rgb ? "RGB" : "YCbCr"; }

/// Three real-valued planes in [0, 1].
struct PlanarImage {
    ColorSpace space = ColorSpace::rgb;
    std::size_t width = 0, height = 0;
    std::array<std::vector<double>, 3> planes;

    PlanarImage() = default;
    PlanarImage(ColorSpace cs, std::size_t w, std::size_t h, double fill = 0.0) : space(cs), width(w), height(h) {
        for (auto& p : planes) p.assign(w * h, fill);
    }

    double& at(std::size_t ch, std::size_t x, std::size_t y) { return planes[ch][y * width + x]; }
    double at(std::size_t ch, std::size_t x, std::size_t y) const { return planes[ch][y * width + x]; }
    std::size_t size() const { return width * height; }
};

// ---------------------------------------------------------------------------
// Colour conversion: full-range BT.601 (JPEG/JFIF matrix).

namespace color {

inline constexpr double kr = 0.299, kg = 0.587, kb = 0.114;

inline std::array<double, 3> rgb_to_ycbcr(double r, double g, double b) {
    return {kr * r + kg * g + kb * b,
            0.5 - 0.168736 * r - 0.331264 * g + 0.5 * b,
            0.5 + 0.5 * r - 0.418688 * g - 0.081312 * b};
}

/// Exact inverse of the forward matrix (computed, not rounded constants).
inline const std::array<std::array<double, 3>, 3>& inverse_matrix() {
    static const std::array<std::array<double, 3>, 3> inv = [] {
        const double m[3][3] = {{kr, kg, kb}, {-0.168736, -0.331264, 0.5}, {0.5, -0.418688, -0.081312}};
        const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        std::array<std::array<double, 3>, 3> r{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const int a = (j + 1) % 3, b = (j + 2) % 3, c = (i + 1) % 3, d = (i + 2) % 3;
                r[i][j] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) / det;
            }
        return r;
    }();
    return inv;
}

inline std::array<double, 3> ycbcr_to_rgb(double y, double cb, double cr) {
    const auto& m = inverse_matrix();
    const double u = cb - 0.5, v = cr - 0.5;
    return {m[0][0] * y + m[0][1] * u + m[0][2] * v, m[1][0] * y + m[1][1] * u + m[1][2] * v,
            m[2][0] * y + m[2][1] * u + m[2][2] * v};
}

}  // namespace color

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

inline void clamp_planes(PlanarImage& p) {
    for (auto& pl : p.planes)
        for (auto& v : pl) v = clamp01(v);
}

/// Converts RGB planes to YCbCr without clamping (the matrix maps the RGB
/// cube into the unit cube).
inline PlanarImage rgb_to_ycbcr(const PlanarImage& img) {
    if (img.space != ColorSpace::rgb) throw ImageError("rgb_to_ycbcr: input is tagged YCbCr");
    PlanarImage out(ColorSpace::ycbcr, img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const auto v = color::rgb_to_ycbcr(img.planes[0][i], img.planes[1][i], img.planes[2][i]);
        for (int c = 0; c < 3; ++c) out.planes[c][i] = v[c];
    }
    return out;
}

/// Inverse transform. Not clamped: callers at the module boundary clamp.
inline PlanarImage ycbcr_to_rgb(const PlanarImage& img) {
    if (img.space != ColorSpace::ycbcr) throw ImageError("ycbcr_to_rgb: input is tagged RGB");
    PlanarImage out(ColorSpace::rgb, img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const auto v = color::ycbcr_to_rgb(img.planes[0][i], img.planes[1][i], img.planes[2][i]);
        for (int c = 0; c < 3; ++c) out.planes[c][i] = v[c];
    }
    return out;
}

inline std::vector<double> luma(const PlanarImage& img) {
    if (img.space == ColorSpace::ycbcr) return img.planes[0];
    std::vector<double> y(img.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] = color::kr * img.planes[0][i] + color::kg * img.planes[1][i] + color::kb * img.planes[2][i];
    return y;
}

// ---------------------------------------------------------------------------
// 8-bit boundary

inline PlanarImage to_planar(const Image& img) {
    if (img.pixels.size() != 3 * img.width * img.height) throw ImageError("to_planar: pixel buffer size mismatch");
    PlanarImage p(ColorSpace::rgb, img.width, img.height);
    for (std::size_t i = 0; i < img.width * img.height; ++i)
        for (int c = 0; c < 3; ++c) p.planes[c][i] = img.pixels[3 * i + c] / 255.0;
    return p;
}

inline std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::round(clamp01(v) * 255.0));  // std::round is half-away-from-zero
}

inline Image from_planar(const PlanarImage& p) {
    if (p.space != ColorSpace::rgb) throw ImageError("from_planar: expected RGB planes");
    Image img(p.width, p.height);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (int c = 0; c < 3; ++c) img.pixels[3 * i + c] = quantize(p.planes[c][i]);
    return img;
}

// ---------------------------------------------------------------------------
// Resampling

enum class Interpolation { bilinear, bicubic };

inline const char* to_string(Interpolation k) { return k == Interpolation::bilinear ? "bilinear" : "bicubic"; }

inline Interpolation parse_interpolation(const std::string& s) {
    if (s == "bilinear") return Interpolation::bilinear;
    if (s == "bicubic") return Interpolation::bicubic;
    throw ImageError("unknown interpolation '" + s + "' (expected bilinear or bicubic)");
}

/// Exact rational scale factor num/den.
struct ScaleFactor {
    std::size_t num = 1, den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::size_t apply(std::size_t dim) const {
        return static_cast<std::size_t>(std::llround(static_cast<double>(dim) * num / den));
    }
};

inline constexpr double kCubicA = -0.75;

/// Cubic convolution kernel W(x).
inline double cubic_kernel(double x, double a = kCubicA) {
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2) * x - (a + 3)) * x * x + 1;
    if (x < 2.0) return ((a * x - 5 * a) * x + 8 * a) * x - 4 * a;
    return 0.0;
}

/// Taps for source offsets -1, 0, +1, +2 at fractional phase t in [0, 1).
inline std::array<double, 4> cubic_weights(double t, double a = kCubicA) {
    return {cubic_kernel(1 + t, a), cubic_kernel(t, a), cubic_kernel(1 - t, a), cubic_kernel(2 - t, a)};
}

namespace detail {

struct Taps {
    std::vector<std::array<std::ptrdiff_t, 4>> index;
    std::vector<std::array<double, 4>> weight;
    std::size_t count = 0;  // taps per sample (2 or 4)
};

inline Taps make_taps(std::size_t in, std::size_t out, ScaleFactor scale, Interpolation kind) {
    Taps t;
    t.count = kind == Interpolation::bicubic ? 4 : 2;
    t.index.resize(out);
    t.weight.resize(out);
    const auto clampi = [in](std::ptrdiff_t i) { return std::clamp<std::ptrdiff_t>(i, 0, std::ptrdiff_t(in) - 1); };
    for (std::size_t d = 0; d < out; ++d) {
        // half-pixel centres: src = (dst + 0.5) / scale - 0.5
        const double src = (static_cast<double>(d) + 0.5) * scale.den / scale.num - 0.5;
        const double fl = std::floor(src);
        const double frac = src - fl;
        const auto base = static_cast<std::ptrdiff_t>(fl);
        if (kind == Interpolation::bicubic) {
            t.weight[d] = cubic_weights(frac);
            for (int k = 0; k < 4; ++k) t.index[d][k] = clampi(base - 1 + k);
        } else {
            t.weight[d] = {1.0 - frac, frac, 0.0, 0.0};
            t.index[d] = {clampi(base), clampi(base + 1), 0, 0};
        }
    }
    return t;
}

inline std::vector<double> resample_plane(const std::vector<double>& src, std::size_t w, std::size_t h,
                                          std::size_t ow, std::size_t oh, const Taps& tx, const Taps& ty) {
    std::vector<double> tmp(ow * h);
    for (std::size_t y = 0; y < h; ++y) {
        const double* row = src.data() + y * w;
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0;
            for (std::size_t k = 0; k < tx.count; ++k) s += tx.weight[x][k] * row[tx.index[x][k]];
            tmp[y * ow + x] = s;
        }
    }
    std::vector<double> out(ow * oh);
    for (std::size_t y = 0; y < oh; ++y) {
        double* orow = out.data() + y * ow;
        for (std::size_t k = 0; k < ty.count; ++k) {
            const double wk = ty.weight[y][k];
            const double* trow = tmp.data() + ty.index[y][k] * ow;
            for (std::size_t x = 0; x < ow; ++x) orow[x] += wk * trow[x];
        }
        for (std::size_t x = 0; x < ow; ++x) orow[x] = clamp01(orow[x]);
    }
    return out;
}

}  // namespace detail

/// Separable resampling of a single plane to explicit output dims.
inline std::vector<double> resample_plane(const std::vector<double>& src, std::size_t w, std::size_t h,
                                          ScaleFactor scale, Interpolation kind) {
    const std::size_t ow = scale.apply(w), oh = scale.apply(h);
    if (scale.num == 0 || scale.den == 0) throw ImageError("resample: scale must be positive");
    if (ow < 1 || oh < 1)
        throw ImageError("resample: target size " + std::to_string(ow) + "x" + std::to_string(oh) + " is empty");
    const auto tx = detail::make_taps(w, ow, scale, kind);
    const auto ty = detail::make_taps(h, oh, scale, kind);
    return detail::resample_plane(src, w, h, ow, oh, tx, ty);
}

/// Half-pixel aligned bilinear / bicubic (a = -0.75) resampling with
/// clamp-to-edge taps, no antialiasing, output clamped to [0, 1].
inline PlanarImage resample(const PlanarImage& img, ScaleFactor scale, Interpolation kind) {
    if (scale.num == 0 || scale.den == 0) throw ImageError("resample: scale must be positive");
    const std::size_t ow = scale.apply(img.width), oh = scale.apply(img.height);
    if (ow < 1 || oh < 1)
        throw ImageError("resample: target size " + std::to_string(ow) + "x" + std::to_string(oh) + " is empty");
    PlanarImage out(img.space, ow, oh);
    const auto tx = detail::make_taps(img.width, ow, scale, kind);
    const auto ty = detail::make_taps(img.height, oh, scale, kind);
    for (int c = 0; c < 3; ++c)
        out.planes[c] = detail::resample_plane(img.planes[c], img.width, img.height, ow, oh, tx, ty);
    return out;
}

/// Top-left crop.
inline PlanarImage crop(const PlanarImage& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
    if (x0 + w > img.width || y0 + h > img.height) throw ImageError("crop: window exceeds image bounds");
    PlanarImage out(img.space, w, h);
    for (int c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < h; ++y)
            std::copy_n(img.planes[c].data() + (y0 + y) * img.width + x0, w, out.planes[c].data() + y * w);
    return out;
}

}  // namespace wmsr
