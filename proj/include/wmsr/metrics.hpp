#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmsr/image.hpp"

namespace wmsr {

class MetricError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct MetricProtocol {
    std::size_t shave_border = 0;
    bool y_only = true;
    double data_range = 1.0;

    static MetricProtocol for_scale(std::size_t scale) { return MetricProtocol{scale, true, 1.0}; }
};

/// Sentinel PSNR for identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

namespace ssim_detail {

inline constexpr std::size_t kWindow = 11;
inline constexpr double kSigma = 1.5;
inline constexpr double kK1 = 0.01, kK2 = 0.03;

/// Normalised 1D Gaussian; the 2D window is its outer product.
inline const std::vector<double>& gaussian_1d() {
    static const std::vector<double> g = [] {
        std::vector<double> v(kWindow);
        double s = 0;
        const double c = (kWindow - 1) / 2.0;
        for (std::size_t i = 0; i < kWindow; ++i) {
            v[i] = std::exp(-((i - c) * (i - c)) / (2 * kSigma * kSigma));
            s += v[i];
        }
        for (auto& x : v) x /= s;
        return v;
    }();
    return g;
}

/// Valid-region separable Gaussian filter: (w x h) -> (w-10 x h-10).
inline std::vector<double> filter_valid(const std::vector<double>& src, std::size_t w, std::size_t h) {
    const auto& g = gaussian_1d();
    const std::size_t ow = w - kWindow + 1, oh = h - kWindow + 1;
    std::vector<double> tmp(ow * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0;
            for (std::size_t k = 0; k < kWindow; ++k) s += g[k] * src[y * w + x + k];
            tmp[y * ow + x] = s;
        }
    std::vector<double> out(ow * oh);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0;
            for (std::size_t k = 0; k < kWindow; ++k) s += g[k] * tmp[(y + k) * ow + x];
            out[y * ow + x] = s;
        }
    return out;
}

/// Adjoint of filter_valid: scatters an (ow x oh) map back onto (w x h).
inline std::vector<double> filter_valid_adjoint(const std::vector<double>& src, std::size_t w, std::size_t h) {
    const auto& g = gaussian_1d();
    const std::size_t ow = w - kWindow + 1, oh = h - kWindow + 1;
    std::vector<double> tmp(ow * h, 0.0);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t k = 0; k < kWindow; ++k)
            for (std::size_t x = 0; x < ow; ++x) tmp[(y + k) * ow + x] += g[k] * src[y * ow + x];
    std::vector<double> out(w * h, 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < ow; ++x)
            for (std::size_t k = 0; k < kWindow; ++k) out[y * w + x + k] += g[k] * tmp[y * ow + x];
    return out;
}

}  // namespace ssim_detail

/// Mean SSIM of two planes (11x11 Gaussian, sigma 1.5, valid windows only).
/// When grad_x is non-null it receives d(mean SSIM)/dx.
inline double ssim_plane(const std::vector<double>& x, const std::vector<double>& y, std::size_t w, std::size_t h,
                         double data_range = 1.0, std::vector<double>* grad_x = nullptr) {
    using namespace ssim_detail;
    if (w < kWindow || h < kWindow)
        throw MetricError("ssim: image " + std::to_string(w) + "x" + std::to_string(h) + " is smaller than the " +
                          std::to_string(kWindow) + "x" + std::to_string(kWindow) + " window");
    if (x.size() != w * h || y.size() != w * h) throw MetricError("ssim: plane size mismatch");
    if (x == y) {
        // Identical planes score exactly 1 and sit at the maximum (zero gradient).
        if (grad_x) grad_x->assign(w * h, 0.0);
        return 1.0;
    }
    const double C1 = (kK1 * data_range) * (kK1 * data_range);
    const double C2 = (kK2 * data_range) * (kK2 * data_range);
    std::vector<double> xx(w * h), yy(w * h), xy(w * h);
    for (std::size_t i = 0; i < w * h; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, w, h), my = filter_valid(y, w, h);
    const auto exx = filter_valid(xx, w, h), eyy = filter_valid(yy, w, h), exy = filter_valid(xy, w, h);
    const std::size_t P = mx.size();
    double total = 0;
    std::vector<double> gm, gxx, gxy;
    if (grad_x) {
        gm.resize(P);
        gxx.resize(P);
        gxy.resize(P);
    }
    for (std::size_t p = 0; p < P; ++p) {
        const double sxx = exx[p] - mx[p] * mx[p];
        const double syy = eyy[p] - my[p] * my[p];
        const double sxy = exy[p] - mx[p] * my[p];
        const double a1 = 2 * mx[p] * my[p] + C1, a2 = 2 * sxy + C2;
        const double b1 = mx[p] * mx[p] + my[p] * my[p] + C1, b2 = sxx + syy + C2;
        const double s = (a1 * a2) / (b1 * b2);
        total += s;
        if (grad_x) {
            // Partials w.r.t. the window moments (mu_x, E[x^2], E[xy]), scaled by 1/P.
            gm[p] = s * (2 * my[p] / a1 - 2 * my[p] / a2 - 2 * mx[p] / b1 + 2 * mx[p] / b2) / P;
            gxx[p] = -s / b2 / P;
            gxy[p] = 2 * s / a2 / P;
        }
    }
    if (grad_x) {
        const auto tm = filter_valid_adjoint(gm, w, h);
        const auto txx = filter_valid_adjoint(gxx, w, h);
        const auto txy = filter_valid_adjoint(gxy, w, h);
        grad_x->resize(w * h);
        for (std::size_t i = 0; i < w * h; ++i) (*grad_x)[i] = tm[i] + 2 * x[i] * txx[i] + y[i] * txy[i];
    }
    return total / static_cast<double>(P);
}

namespace detail {

inline void check_metric_inputs(const PlanarImage& a, const PlanarImage& b, const MetricProtocol& p) {
    if (a.width != b.width || a.height != b.height)
        throw MetricError("metric: image sizes differ (" + std::to_string(a.width) + "x" + std::to_string(a.height) +
                          " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
    if (2 * p.shave_border >= std::min(a.width, a.height))
        throw MetricError("metric: shave of " + std::to_string(p.shave_border) + " px leaves nothing of a " +
                          std::to_string(a.width) + "x" + std::to_string(a.height) + " image");
}

/// Planes to score, shaved, with their extents.
inline std::vector<std::vector<double>> scored_planes(const PlanarImage& img, const MetricProtocol& p,
                                                      std::size_t& w, std::size_t& h) {
    std::vector<std::vector<double>> src;
    if (p.y_only) {
        src.push_back(luma(img));
    } else {
        for (const auto& pl : img.planes) src.push_back(pl);
    }
    const std::size_t s = p.shave_border;
    w = img.width - 2 * s;
    h = img.height - 2 * s;
    std::vector<std::vector<double>> out;
    for (const auto& pl : src) {
        std::vector<double> v(w * h);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) v[y * w + x] = pl[(y + s) * img.width + x + s];
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace detail

inline double psnr_from_mse(double mse, double data_range = 1.0) {
    if (mse == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(data_range * data_range / mse);
}

/// PSNR in dB over the shaved Y plane (or all planes when y_only is false).
inline double psnr(const PlanarImage& a, const PlanarImage& b, const MetricProtocol& p = {}) {
    detail::check_metric_inputs(a, b, p);
    std::size_t w, h;
    const auto pa = detail::scored_planes(a, p, w, h);
    const auto pb = detail::scored_planes(b, p, w, h);
    double se = 0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < pa.size(); ++c)
        for (std::size_t i = 0; i < pa[c].size(); ++i) {
            const double d = pa[c][i] - pb[c][i];
            se += d * d;
            ++count;
        }
    return psnr_from_mse(se / static_cast<double>(count), p.data_range);
}

/// Mean SSIM over the shaved Y plane (or averaged over planes).
inline double ssim(const PlanarImage& a, const PlanarImage& b, const MetricProtocol& p = {}) {
    detail::check_metric_inputs(a, b, p);
    std::size_t w, h;
    const auto pa = detail::scored_planes(a, p, w, h);
    const auto pb = detail::scored_planes(b, p, w, h);
    double s = 0;
    for (std::size_t c = 0; c < pa.size(); ++c) s += ssim_plane(pa[c], pb[c], w, h, p.data_range);
    return s / static_cast<double>(pa.size());
}

}  // namespace wmsr
